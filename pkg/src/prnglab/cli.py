"""prnglab command line: gen, tokenize, analyze, predict, eval, scaling.

stdout carries data only.  Errors go to stderr as one JSON object and map to
exit codes 2 (validation), 3 (I/O) and 4 (internal invariant breach).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path


from . import __version__
from .dataset import (DatasetManifest, generate, leakage, read_corpus, write_corpus)
from .errors import DomainError, PrngLabError
from .evaluate import (accuracy_report, context_to_threshold, dump_lines, dump_matrices,
                       fit_power_law, gamma_in_band, parse_dump, product_law_check,
                       staircase_jumps)
from .lcg_core import LcgParams, fold_params, hull_dobell, lcg_batch
from .pipeline import predict_records, resolve_threads, scaling_sweep
from .predictor import (crack_known_m, crack_unknown_m, predict_copy_only, predict_full,
                        predict_unseen)
from .rns import factorize, measure_digit_period, reduced_digit_period
from .tokenizer import TokenizerSpec, detokenize_stream, tokenize_sequence

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4
CONFIG_NAME = "run_config.json"
ANALYZE_MAX_M = 1 << 22


class UsageError(PrngLabError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def int_list(text: str) -> list[int]:
    """'1,2,3', '2^8..2^12' (every power in between) or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            if "^" in lo and "^" in hi:
                b, e0 = (int(v) for v in lo.split("^"))
                b2, e1 = (int(v) for v in hi.split("^"))
                if b != b2:
                    raise UsageError(f"range {part!r} mixes bases")
                out.extend(b ** e for e in range(e0, e1 + 1))
            else:
                out.extend(range(_int(lo), _int(hi) + 1))
        else:
            out.append(_int(part))
    return out


def _int(text: str) -> int:
    text = text.strip()
    if "^" in text:
        b, e = text.split("^")
        return int(b) ** int(e)
    return int(text)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _write_config(args, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    cfg["format_version"] = 1
    cfg["prnglab_version"] = __version__
    (directory / CONFIG_NAME).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


# --- gen ---------------------------------------------------------------------

def cmd_gen(args) -> int:
    L = args.len
    if args.task == "fm":
        if args.m is None:
            raise UsageError("--m is required for --task fm")
        if args.n is None:
            raise UsageError("--n is required for --task fm")
        manifest = DatasetManifest("FM", L, args.seed, m=args.m, N=args.n,
                                   n_a=args.n_a, n_c=args.n_c)
        max_m = args.m
    else:
        if not args.m_test:
            raise UsageError("--m-test is required for --task um")
        m_test = int_list(args.m_test)
        manifest = DatasetManifest("UM", L, args.seed, m_test=m_test, N=args.n,
                                   n_m=args.n_m, n_a=args.n_a, n_c=args.n_c)
        max_m = max(m_test) * 6 // 5
    if args.tokenizer == "unique":
        spec = TokenizerSpec.unique(max_m)
    else:
        spec = TokenizerSpec.base_b(args.base, max_m)
    out = Path(args.out)
    records = list(generate(manifest))
    leaked = leakage(records)
    if leaked:
        raise AssertionError(f"train/test leakage: {sorted(leaked)[:5]}")
    digest = write_corpus(records, spec, out, manifest)
    _write_config(args, out)
    classes = {}
    for r in records:
        classes[f"{r.split}/{r.period_class}"] = classes.get(f"{r.split}/{r.period_class}", 0) + 1
    _emit({"digest": f"{digest:016x}", "records": len(records), "out": str(out),
           "m_max": manifest.m_max, "n_m": manifest.n_m, "n_a": manifest.n_a,
           "n_c": manifest.n_c, "N": manifest.N, "period_classes": classes})
    return EXIT_OK


# --- tokenize ----------------------------------------------------------------

def cmd_tokenize(args) -> int:
    if args.ints is not None:
        values = [int_list(args.ints)]
    elif args.corpus:
        records, _, _ = read_corpus(args.corpus)
        values = [r.values for r in records[:args.limit]]
    else:
        raise UsageError("give --ints or --corpus")
    max_m = args.max_modulus or max(max(v) for v in values) + 1
    spec = (TokenizerSpec.unique(max_m) if args.mode == "unique"
            else TokenizerSpec.base_b(args.base, max_m))
    for seq in values:
        stream = tokenize_sequence(seq, spec, drop_last_token=args.drop_last_token)
        back = detokenize_stream(stream)
        _emit({"spec": spec.to_json(), "tokens": stream.tokens.tolist(),
               "int_positions": stream.int_positions.tolist(),
               "digit_positions": stream.digit_positions.tolist(),
               "partial_tail": list(back.partial_tail)})
    return EXIT_OK


# --- analyze -----------------------------------------------------------------

def analyze_params(m: int, a: int, c: int, x0: int, stride: int) -> dict:
    """Measured vs theoretical digit periods of the stride-r subsequence."""
    params = LcgParams(m, a, c)
    if m > ANALYZE_MAX_M:
        raise DomainError(f"analyze is limited to m <= {ANALYZE_MAX_M}")
    folded = fold_params(params, stride)
    seq = lcg_batch([x0], folded.a_r, folded.c_r, m, 2 * m)[0]
    hd = hull_dobell(m, a, c)
    factors = []
    mismatches = 0
    for p, w in factorize(m):
        digits = []
        for k in range(1, w + 1):
            theory = reduced_digit_period(p, k, stride)
            measured = measure_digit_period(seq, p, k)
            match = measured == theory
            mismatches += not match
            digits.append({"k": k, "measured": measured, "theory": theory, "match": match})
        factors.append({"p": p, "w": w, "digits": digits})
    return {"m": m, "a": a, "c": c, "x0": x0, "stride": stride, "hull_dobell": hd,
            "theory_applies": hd, "mismatches": mismatches, "factors": factors}


def cmd_analyze(args) -> int:
    if args.corpus:
        records, _, _ = read_corpus(args.corpus)
        chosen = [r for r in records if args.record is None or r.idx == args.record]
        if not chosen:
            raise UsageError(f"record {args.record} not in corpus")
        targets = [(r.m, r.a, r.c, r.x0) for r in chosen[:args.limit]]
    else:
        for name in ("m", "a", "c"):
            if getattr(args, name) is None:
                raise UsageError(f"--{name} is required without --corpus")
        targets = [(args.m, args.a, args.c, args.x0)]
    for stride in args.stride:
        for m, a, c, x0 in targets:
            _emit(analyze_params(m, a, c, x0 % m, stride))
    return EXIT_OK


# --- predict -----------------------------------------------------------------

def _outcome_json(o) -> dict:
    return {"predicted": o.predicted, "m_estimate": o.m_estimate,
            "factors": [list(f) for f in o.factors],
            "provenance": [list(tags) for tags in o.per_digit_confidence]}


def _crack_json(res) -> dict:
    def enc(v):
        if v is None or isinstance(v, int):
            return v
        return {"a_residue": v.a_residue, "a_modulus": v.a_modulus,
                "c": f"({v.x1} - {v.x0}*a) mod {v.m}"}
    return {"m": res.recovered_m, "a": enc(res.recovered_a), "c": enc(res.recovered_c),
            "elements_consumed": res.elements_consumed}


def cmd_predict(args) -> int:
    mode = args.mode
    if args.ctx is not None:
        ctx = int_list(args.ctx)
        if mode in ("copy", "full", "crack") and args.m is None:
            raise UsageError(f"--m is required for --mode {mode}")
        if mode == "copy":
            _emit(_outcome_json(predict_copy_only(ctx, args.m)))
        elif mode == "full":
            _emit(_outcome_json(predict_full(ctx, args.m)))
        elif mode == "unseen":
            _emit(_outcome_json(predict_unseen(ctx, refine=not args.no_refine)))
        elif mode == "crack":
            _emit(_crack_json(crack_known_m(ctx, args.m)))
        else:
            _emit(_crack_json(crack_unknown_m(ctx)))
        return EXIT_OK
    if not args.corpus:
        raise UsageError("give --ctx or --corpus")
    if mode not in ("copy", "full", "unseen"):
        raise UsageError("corpus prediction supports --mode copy, full or unseen")
    records, _, _ = read_corpus(args.corpus)
    if args.split != "all":
        records = [r for r in records if r.split == args.split]
    records = records[:args.limit]
    rows = predict_records(records, mode, resolve_threads(args.threads),
                           refine=not args.no_refine)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as f:
            for line in dump_lines(rows):
                f.write(line + "\n")
        _write_config(args, out.parent)
        _emit({"dump": str(out), "rows": len(rows), "sequences": len(records)})
    else:
        for line in dump_lines(rows):
            sys.stdout.write(line + "\n")
    return EXIT_OK


# --- eval --------------------------------------------------------------------

def report_json(rep, threshold: float) -> dict:
    doc = rep.to_json()
    dev, _ = product_law_check(rep)
    doc["product_law_max_deviation"] = dev
    doc["staircase_jumps"] = staircase_jumps(rep.digit_mean)
    doc["threshold"] = threshold
    doc["context_to_threshold"] = context_to_threshold(rep.per_position, threshold)
    return doc


def cmd_eval(args) -> int:
    with open(args.dump) as f:
        parsed = parse_dump(f)
    if args.corpus:
        records, _, _ = read_corpus(args.corpus)
        moduli = {r.idx: r.m for r in records}
        missing = set(parsed) - set(moduli)
        if missing:
            raise UsageError(f"dump sequences {sorted(missing)[:5]} are not in the corpus")
    elif args.m is not None:
        moduli = {s: args.m for s in parsed}
    else:
        raise UsageError("give --corpus or --m")
    groups: dict[int, dict] = {}
    for s, rows in parsed.items():
        groups.setdefault(moduli[s], {})[s] = rows
    reports = []
    for m in sorted(groups):
        preds, targets, _ = dump_matrices(groups[m])
        rep = accuracy_report(preds, targets, m, {
            "alternative_scoring": "per-token accuracy under base-b tokenization is not reported"})
        reports.append(report_json(rep, args.threshold))
    doc = {"reports": reports}
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(doc, sort_keys=True) + "\n")
        _write_config(args, out.parent)
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["m", "t", "accuracy", "digit_mean", "product", "n_samples"])
            for r in reports:
                for i, acc in enumerate(r["per_position"]):
                    w.writerow([r["m"], i + 1, acc, r["digit_mean"][i], r["product_curve"][i],
                                r["n_samples"][i]])
    _emit(doc)
    return EXIT_OK


# --- scaling -----------------------------------------------------------------

def read_scaling_csv(path) -> list[tuple[float, float]]:
    pts = []
    with open(path, newline="") as f:
        for n, row in enumerate(csv.DictReader(f), 2):
            try:
                m = float(row["m"])
                y = float(row.get("context_needed") or row["context"])
            except (KeyError, TypeError, ValueError):
                raise UsageError(f"{path}: line {n}: need numeric m and context_needed columns")
            pts.append((m, y))
    return pts


def cmd_scaling(args) -> int:
    if args.import_csv:
        fit = fit_power_law(read_scaling_csv(args.import_csv), args.threshold)
        doc = {"fit": fit.to_json(), "band": [0.24, 0.33],
               "band_consistent": gamma_in_band(fit)}
    else:
        if not args.m_list:
            raise UsageError("give --m-list or --import")
        crossings, fit = scaling_sweep(int_list(args.m_list), args.mode, args.threshold,
                                       args.len, args.n_a, args.n_c, args.seeds, args.seed,
                                       resolve_threads(args.threads))
        doc = {"crossings": {str(m): t for m, t in crossings.items()},
               "fit": fit.to_json() if fit else None, "mode": args.mode}
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(doc, sort_keys=True) + "\n")
        _write_config(args, out.parent)
    _emit(doc)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prnglab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file of option defaults (flags override it)")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen", help="generate an FM or UM corpus")
    common(p)
    p.add_argument("--task", choices=("fm", "um"), required=True)
    p.add_argument("--m", type=_int)
    p.add_argument("--m-test")
    p.add_argument("--n", type=int, help="number of training sequences N")
    p.add_argument("--len", type=int, default=256, help="context length L")
    p.add_argument("--n-a", type=int)
    p.add_argument("--n-c", type=int)
    p.add_argument("--n-m", type=int)
    p.add_argument("--tokenizer", choices=("unique", "base_b"), default="unique")
    p.add_argument("--base", type=int, default=256)
    p.add_argument("--out", default="corpus")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("tokenize", help="tokenize integers or a corpus")
    common(p)
    p.add_argument("--ints")
    p.add_argument("--corpus")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--mode", choices=("unique", "base_b"), default="base_b")
    p.add_argument("--base", type=int, default=256)
    p.add_argument("--max-modulus", type=_int)
    p.add_argument("--drop-last-token", action="store_true")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("analyze", help="measured vs theoretical digit periods")
    common(p)
    p.add_argument("--m", type=_int)
    p.add_argument("--a", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--x0", type=int, default=0)
    p.add_argument("--stride", type=int_list, default=[1])
    p.add_argument("--corpus")
    p.add_argument("--record", type=int)
    p.add_argument("--limit", type=int, default=1)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("predict", help="run an emulator or cracker")
    common(p)
    p.add_argument("--mode", choices=("copy", "full", "unseen", "crack", "crack-m"),
                   required=True)
    p.add_argument("--m", type=_int)
    p.add_argument("--ctx")
    p.add_argument("--corpus")
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score a prediction dump")
    common(p)
    p.add_argument("--dump", required=True)
    p.add_argument("--corpus")
    p.add_argument("--m", type=_int)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scaling", help="context-needed vs modulus power-law fit")
    common(p)
    p.add_argument("--m-list")
    p.add_argument("--mode", choices=("copy", "full", "unseen"), default="full")
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--len", type=int, default=64)
    p.add_argument("--n-a", type=int, default=8)
    p.add_argument("--n-c", type=int, default=8)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--import", dest="import_csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scaling)
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: {exc}") from None
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known - {"format_version", "prnglab_version", "command"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**{k: v for k, v in cfg.items() if k in known})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        return args.func(args)
    except PrngLabError as exc:
        line = getattr(exc, "line", None)
        err = {"error": str(exc), "type": type(exc).__name__, "exit": EXIT_VALIDATION}
        if line is not None:
            err["line"] = line
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "type": type(exc).__name__,
                                     "exit": EXIT_IO}) + "\n")
        return EXIT_IO
    except (AssertionError, ArithmeticError) as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "type": type(exc).__name__,
                                     "exit": EXIT_INTERNAL}) + "\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
