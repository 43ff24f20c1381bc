"""Seedable FM / UM corpus generation and the on-disk corpus format.

Layout of a corpus directory::

    records.jsonl   one metadata line per record
    tokens.bin      "LCGT" header followed by each record's tokens
    manifest.json   DatasetManifest fields, tokenizer spec, corpus digest

Generation uses integer arithmetic only, so corpora are byte-identical across
platforms for the same manifest.
"""
from __future__ import annotations

import json
import struct
import warnings
from dataclasses import asdict, dataclass, field
from math import isqrt
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ._random import SplitMix64
from .errors import CapacityError, CorpusFormatError, DomainError, SizingError
from .lcg_core import (
    LcgParams, full_period_multiplier_step, full_period_values, lcg_batch, tail_bound,
)
from .rns import euler_phi
from .tokenizer import TokenizerSpec, detokenize_stream, TokenStream, base_b_digits

__all__ = [
    "SplitMix64", "SequenceRecord", "DatasetManifest", "plan_um_sizes", "um_max_modulus",
    "generate_fm", "generate_um", "generate", "classify_period", "write_corpus",
    "read_corpus", "fnv1a64", "leakage",
]

FORMAT_VERSION = 1
MAGIC = b"LCGT"
HEADER = struct.Struct("<4sHHIHIQ")
FLAG_UNIQUE = 1
TEST_GRID = 64
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

TRAIN, TEST = "train", "test"
SHORT, LONG = "short", "long"


@dataclass
class SequenceRecord:
    idx: int
    m: int
    a: int
    c: int
    x0: int
    split: str
    values: list[int]
    period_class: str = ""

    def meta(self) -> dict:
        return {"idx": self.idx, "m": self.m, "a": self.a, "c": self.c, "x0": self.x0,
                "split": self.split, "period_class": self.period_class}


@dataclass
class DatasetManifest:
    task: str
    L: int
    seed: int = 0
    m: int | None = None
    m_test: list[int] = field(default_factory=list)
    m_max: int | None = None
    n_m: int | None = None
    n_a: int | None = None
    n_c: int | None = None
    N: int | None = None
    test_grid: int = TEST_GRID
    excluded_a: list[int] = field(default_factory=list)
    excluded_c: list[int] = field(default_factory=list)
    excluded_m: list[int] = field(default_factory=list)
    format_version: int = FORMAT_VERSION
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.task not in ("FM", "UM"):
            raise DomainError(f"task must be FM or UM, got {self.task!r}")
        if self.L < 1:
            raise DomainError("context length L must be positive")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "DatasetManifest":
        known = cls.__dataclass_fields__
        return cls(**{k: v for k, v in data.items() if k in known})


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def um_max_modulus(m_test: Iterable[int]) -> int:
    """floor(1.2 * max(M_test)) in integer arithmetic."""
    return max(m_test) * 6 // 5


def plan_um_sizes(N: int, m_test: int) -> tuple[int, int, int]:
    """(n_m, n_a, n_c) with n_a = n_c = round-half-up(sqrt(N / (m_test/4)))."""
    if m_test < 1 or 4 * N < m_test:
        raise SizingError(f"N={N} is infeasible for m_test={m_test}; need N >= m_test/4")
    # round(sqrt(16N/m)/2) == (floor(sqrt(16N/m)) + 1) // 2
    n_ac = max(1, (isqrt(16 * N // m_test) + 1) // 2)
    n_m = -(-N // (n_ac * n_ac))
    if 4 * n_m < m_test:
        warnings.warn(f"n_m={n_m} is below m_test/4={m_test / 4:g}; generalization may suffer",
                      stacklevel=2)
    return n_m, n_ac, n_ac


def _draw_excluding(rng: SplitMix64, lo: int, hi: int, count: int, excluded: set[int],
                    dimension: str) -> list[int]:
    """count distinct integers from [lo, hi] \\ excluded, uniformly without replacement."""
    available = hi - lo + 1 - sum(1 for v in excluded if lo <= v <= hi)
    if count > available:
        raise CapacityError(dimension, count, max(available, 0))
    if hi - lo + 1 <= 1 << 16 or 2 * count > available:
        pool = [v for v in range(lo, hi + 1) if v not in excluded]
        return rng.sample(pool, count)
    seen: dict[int, None] = {}
    while len(seen) < count:
        v = rng.randint(lo, hi)
        if v not in excluded:
            seen.setdefault(v)
    return list(seen)


def _records(metas: list[tuple[int, int, int, str]], L: int, seed: int,
             first_idx: int) -> Iterator[SequenceRecord]:
    """Materialise (m, a, c, split) tuples; each record's x0 comes from its own stream."""
    if not metas:
        return
    x0 = [SplitMix64.for_stream(seed, first_idx + i).below(m) for i, (m, _, _, _) in enumerate(metas)]
    ms = np.array([t[0] for t in metas], dtype=np.uint64)
    tail = max(tail_bound(int(m)) for m in set(t[0] for t in metas))
    values = lcg_batch(x0, [t[1] for t in metas], [t[2] for t in metas], ms, L + 1 + tail + L)
    # orbit is on its cycle after `tail` steps; short iff that state recurs within L steps
    anchor = values[:, tail:tail + 1]
    short = (values[:, tail + 1:tail + 1 + L] == anchor).any(axis=1)
    for i, (m, a, c, split) in enumerate(metas):
        yield SequenceRecord(first_idx + i, m, a, c, x0[i], split,
                             [int(v) for v in values[i, :L + 1]],
                             SHORT if short[i] else LONG)


def _test_grid(m: int, grid: int, rng: SplitMix64) -> tuple[list[int], list[int]]:
    try:
        return full_period_values(m, grid, grid, rng)
    except CapacityError as exc:
        raise CapacityError(f"test {exc.dimension} (m={m})", exc.requested, exc.available) from None


def generate_fm(manifest: DatasetManifest) -> Iterator[SequenceRecord]:
    """Train records first (idx 0..N-1), then the full-period test grid."""
    if manifest.task != "FM" or manifest.m is None or manifest.N is None:
        raise DomainError("generate_fm needs an FM manifest with m and N")
    m, L, N = manifest.m, manifest.L, manifest.N
    LcgParams(m, 1, 0)
    rng = SplitMix64(manifest.seed)
    test_a, test_c = _test_grid(m, manifest.test_grid, rng)
    manifest.excluded_a, manifest.excluded_c = sorted(test_a), sorted(test_c)
    excluded_a = set(test_a)
    if manifest.n_a is not None and manifest.n_c is not None:
        train_a = _draw_excluding(rng, 1, m - 1, manifest.n_a, excluded_a, "train multiplier")
        train_c = _draw_excluding(rng, 0, m - 1, manifest.n_c, set(), "train increment")
        pairs = [(a, c) for a in train_a for c in train_c]
        metas = [(m, *pairs[i % len(pairs)], TRAIN) for i in range(N)]
    else:
        if m - 1 - len(excluded_a) < 1:
            raise CapacityError("train multiplier", 1, 0)
        metas = []
        for i in range(N):
            r = SplitMix64.for_stream(manifest.seed ^ 0xA5A5A5A5, i)
            a = r.randint(1, m - 1)
            while a in excluded_a:
                a = r.randint(1, m - 1)
            metas.append((m, a, r.below(m), TRAIN))
    yield from _chunked(metas, L, manifest.seed, 0)
    tests = [(m, a, c, TEST) for a in test_a for c in test_c]
    yield from _chunked(tests, L, manifest.seed, N)


def _chunked(metas, L, seed, first_idx, chunk=8192):
    for start in range(0, len(metas), chunk):
        yield from _records(metas[start:start + chunk], L, seed, first_idx + start)


def generate_um(manifest: DatasetManifest) -> Iterator[SequenceRecord]:
    """Train records over n_m sampled moduli, then a test grid per test modulus."""
    if manifest.task != "UM" or not manifest.m_test:
        raise DomainError("generate_um needs a UM manifest with a non-empty m_test")
    L = manifest.L
    m_test = sorted(set(manifest.m_test))
    m_max = um_max_modulus(m_test)
    manifest.m_max = m_max
    manifest.excluded_m = m_test
    if manifest.n_m is None or manifest.n_a is None or manifest.n_c is None:
        if manifest.N is None:
            raise DomainError("UM manifest needs N or all of n_m, n_a, n_c")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            n_m, n_a, n_c = plan_um_sizes(manifest.N, max(m_test))
        manifest.notes.extend(str(w.message) for w in caught)
        manifest.n_m, manifest.n_a, manifest.n_c = n_m, n_a, n_c
    n_m, n_a, n_c = manifest.n_m, manifest.n_a, manifest.n_c
    manifest.N = n_m * n_a * n_c
    rng = SplitMix64(manifest.seed)
    grids = {}
    for mt in m_test:
        # some test moduli have fewer full-period multipliers than the grid asks for
        n_ta = min(manifest.test_grid, mt // full_period_multiplier_step(mt))
        n_tc = min(manifest.test_grid, euler_phi(mt))
        if (n_ta, n_tc) != (manifest.test_grid, manifest.test_grid):
            manifest.notes.append(f"test grid for m={mt} capped at {n_ta}x{n_tc}")
        grids[mt] = full_period_values(mt, n_ta, n_tc, rng)
    lo = max(L, 2)
    moduli = _draw_excluding(rng, lo, m_max, n_m, set(m_test), "train modulus")
    metas = []
    for m in moduli:
        a_vals = _draw_excluding(rng, 1, m - 1, n_a, set(), f"train multiplier (m={m})")
        c_vals = _draw_excluding(rng, 0, m - 1, n_c, set(), f"train increment (m={m})")
        metas.extend((m, a, c, TRAIN) for a in a_vals for c in c_vals)
    yield from _chunked(metas, L, manifest.seed, 0)
    tests = [(mt, a, c, TEST) for mt in m_test for a in grids[mt][0] for c in grids[mt][1]]
    yield from _chunked(tests, L, manifest.seed, len(metas))


def generate(manifest: DatasetManifest) -> Iterator[SequenceRecord]:
    return generate_fm(manifest) if manifest.task == "FM" else generate_um(manifest)


def classify_period(record: SequenceRecord, L: int) -> str:
    """``short`` iff the cycle entered from x0 has length <= L."""
    from .lcg_core import cycle_length_at_most
    params = LcgParams(record.m, record.a, record.c)
    return SHORT if cycle_length_at_most(params, record.x0, L) is not None else LONG


def leakage(records: Iterable[SequenceRecord]) -> set[tuple[int, int, int]]:
    """(m, a, c) triples that occur in both splits."""
    seen = {TRAIN: set(), TEST: set()}
    for r in records:
        seen[r.split].add((r.m, r.a, r.c))
    return seen[TRAIN] & seen[TEST]


def _token_width(spec: TokenizerSpec) -> int:
    if spec.vocab_size <= 256:
        return 1
    if spec.vocab_size <= 1 << 16:
        return 2
    raise DomainError(f"vocabulary of {spec.vocab_size} does not fit 2-byte tokens; use base_b")


def write_corpus(records: Iterable[SequenceRecord], spec: TokenizerSpec, path,
                 manifest: DatasetManifest | None = None) -> int:
    """Write records.jsonl, tokens.bin and manifest.json; return the token digest."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    width = _token_width(spec)
    dtype = np.dtype("<u1") if width == 1 else np.dtype("<u2")
    D = spec.digits_per_int
    seq_len = None
    count = 0
    digest = FNV_OFFSET
    tmp_tokens = path / "tokens.bin.tmp"
    with open(path / "records.jsonl", "w") as meta_f, open(tmp_tokens, "wb") as tok_f:
        tok_f.write(b"\0" * HEADER.size)
        for rec in records:
            if seq_len is None:
                seq_len = len(rec.values)
            elif len(rec.values) != seq_len:
                raise DomainError("all records in a corpus must share one length")
            if max(rec.values) >= spec.capacity:
                raise DomainError(f"record {rec.idx} exceeds tokenizer capacity {spec.capacity}")
            payload = base_b_digits(np.asarray(rec.values, dtype=np.uint64), spec.base, D)
            data = payload.astype(dtype).tobytes()
            digest = fnv1a64(data, digest)
            tok_f.write(data)
            meta_f.write(json.dumps(rec.meta()) + "\n")
            count += 1
        flags = FLAG_UNIQUE if spec.mode == "unique" else 0
        tok_f.seek(0)
        tok_f.write(HEADER.pack(MAGIC, FORMAT_VERSION, flags, spec.base, D, seq_len or 0, count))
    tmp_tokens.replace(path / "tokens.bin")
    doc = {"format_version": FORMAT_VERSION, "tokenizer": spec.to_json(),
           "records": count, "seq_len": seq_len or 0, "digest": f"{digest:016x}"}
    if manifest is not None:
        doc["manifest"] = manifest.to_json()
    (path / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return digest


def read_header(path) -> dict:
    raw = Path(path, "tokens.bin").read_bytes()[:HEADER.size]
    if len(raw) < HEADER.size:
        raise CorpusFormatError("token file is shorter than its header")
    magic, version, flags, base, D, seq_len, count = HEADER.unpack(raw)
    if magic != MAGIC:
        raise CorpusFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorpusFormatError(f"unsupported format version {version}")
    return {"flags": flags, "base": base, "digits_per_int": D, "seq_len": seq_len, "count": count}


def read_corpus(path, verify: bool = True) -> tuple[list[SequenceRecord], TokenizerSpec, dict]:
    """Exact inverse of write_corpus; returns (records, tokenizer spec, manifest document)."""
    path = Path(path)
    try:
        doc = json.loads((path / "manifest.json").read_text())
        hdr = read_header(path)
        blob = (path / "tokens.bin").read_bytes()[HEADER.size:]
        lines = (path / "records.jsonl").read_text().splitlines()
    except FileNotFoundError as exc:
        raise CorpusFormatError(f"missing corpus file: {exc.filename}") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise CorpusFormatError(f"manifest format version {doc.get('format_version')} unsupported")
    spec = TokenizerSpec.from_json(doc["tokenizer"])
    if spec.base != hdr["base"] or spec.digits_per_int != hdr["digits_per_int"]:
        raise CorpusFormatError("token header disagrees with manifest tokenizer")
    width = _token_width(spec)
    D, seq_len, count = hdr["digits_per_int"], hdr["seq_len"], hdr["count"]
    expected = count * seq_len * D * width
    if len(blob) != expected:
        raise CorpusFormatError(f"token payload has {len(blob)} bytes, expected {expected}")
    if len(lines) != count:
        raise CorpusFormatError(f"records.jsonl has {len(lines)} lines, header says {count}")
    if verify:
        digest = fnv1a64(blob)
        if f"{digest:016x}" != doc.get("digest"):
            raise CorpusFormatError("corpus digest mismatch")
    tokens = np.frombuffer(blob, dtype="<u1" if width == 1 else "<u2")
    per = seq_len * D
    records = []
    n_tok = per
    idx = np.arange(n_tok)
    int_pos, dig_pos = idx // D, idx % D
    for i, line in enumerate(lines):
        meta = json.loads(line)
        chunk = tokens[i * per:(i + 1) * per].astype(np.int64)
        values = detokenize_stream(TokenStream(chunk, int_pos, dig_pos, spec)).values
        records.append(SequenceRecord(meta["idx"], meta["m"], meta["a"], meta["c"], meta["x0"],
                                      meta["split"], values, meta["period_class"]))
    return records, spec, doc
