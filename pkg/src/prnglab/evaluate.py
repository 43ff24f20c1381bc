"""Accuracy analytics: per-position curves, per-digit matrices, product law, scaling fits.

Positions are 1-based: column ``t-1`` of a prediction matrix holds the
prediction of ``x_t`` made from the ``t`` preceding elements.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, PrngLabError
from .rns import factorize

GAMMA_BAND_UM = (0.24, 0.33)


@dataclass
class AccuracyReport:
    m: int
    per_position: np.ndarray
    per_digit: dict[int, np.ndarray]
    n_samples: np.ndarray
    product_curve: np.ndarray
    digit_mean: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "positions": list(range(1, len(self.per_position) + 1)),
            "per_position": self.per_position.tolist(),
            "per_digit": {str(p): mat.tolist() for p, mat in self.per_digit.items()},
            "n_samples": self.n_samples.tolist(),
            "product_curve": self.product_curve.tolist(),
            "digit_mean": self.digit_mean.tolist(),
            "metadata": self.metadata,
        }


@dataclass
class ScalingFit:
    points: list[tuple[float, float]]
    gamma: float
    intercept: float
    r_squared: float
    threshold: float

    def to_json(self) -> dict:
        return {"points": [list(p) for p in self.points], "gamma": self.gamma,
                "intercept": self.intercept, "r_squared": self.r_squared,
                "threshold": self.threshold}


def _aligned(predictions, targets) -> tuple[np.ma.MaskedArray, np.ma.MaskedArray]:
    """Masked (n_seq, L) arrays; ragged rows are padded and masked."""
    def to_masked(rows):
        if isinstance(rows, np.ma.MaskedArray):
            return rows
        arr = np.asarray(rows) if not _ragged(rows) else None
        if arr is not None and arr.ndim == 2:
            return np.ma.masked_array(arr.astype(np.int64), mask=np.zeros(arr.shape, bool))
        if arr is not None and arr.ndim == 1:
            return np.ma.masked_array(arr[None, :].astype(np.int64), mask=np.zeros((1, len(arr)), bool))
        width = max(len(r) for r in rows)
        data = np.zeros((len(rows), width), dtype=np.int64)
        mask = np.ones((len(rows), width), dtype=bool)
        for i, r in enumerate(rows):
            data[i, :len(r)] = r
            mask[i, :len(r)] = False
        return np.ma.masked_array(data, mask=mask)

    p, t = to_masked(predictions), to_masked(targets)
    if p.shape != t.shape or not np.array_equal(np.ma.getmaskarray(p), np.ma.getmaskarray(t)):
        raise DomainError(f"prediction/target shape mismatch: {p.shape} vs {t.shape}")
    return p, t


def _ragged(rows) -> bool:
    if isinstance(rows, np.ndarray):
        return False
    try:
        lengths = {len(r) for r in rows}
    except TypeError:
        return False
    return len(lengths) > 1


def per_position_accuracy(predictions, targets) -> np.ndarray:
    """Mean exact-match accuracy at each position, equal weight per sequence."""
    p, t = _aligned(predictions, targets)
    counts = (~np.ma.getmaskarray(p)).sum(axis=0)
    if (counts == 0).any():
        raise DomainError("every position needs at least one sample")
    return np.asarray((p == t).sum(axis=0), dtype=float) / counts


def _digit_planes(arr: np.ndarray, p: int, w: int) -> np.ndarray:
    """Shape (w, ...) of base-p digits of arr mod p**w, lowest first."""
    r = arr % (p ** w)
    out = np.empty((w,) + arr.shape, dtype=np.int64)
    for k in range(w):
        out[k] = r % p
        r = r // p
    return out


def per_digit_accuracy(predictions, targets, m: int) -> dict[int, np.ndarray]:
    """{prime: (w, L) matrix}; row k-1 is the accuracy of the k-th lowest base-p digit."""
    p_arr, t_arr = _aligned(predictions, targets)
    mask = np.ma.getmaskarray(p_arr)
    pd, td = np.ma.getdata(p_arr), np.ma.getdata(t_arr)
    if ((pd >= m) & ~mask).any() or ((td >= m) & ~mask).any() or (pd < 0).any() or (td < 0).any():
        raise DomainError(f"values must lie in [0, {m})")
    counts = (~mask).sum(axis=0)
    if (counts == 0).any():
        raise DomainError("every position needs at least one sample")
    out = {}
    for p, w in factorize(m):
        hits = (_digit_planes(pd, p, w) == _digit_planes(td, p, w)) & ~mask
        out[p] = hits.sum(axis=1) / counts
    return out


def accuracy_report(predictions, targets, m: int, metadata: dict | None = None) -> AccuracyReport:
    p, t = _aligned(predictions, targets)
    per_pos = per_position_accuracy(p, t)
    per_dig = per_digit_accuracy(p, t, m)
    product = np.ones_like(per_pos)
    stacked = []
    for mat in per_dig.values():
        product = product * mat.prod(axis=0)
        stacked.append(mat)
    digit_mean = np.concatenate(stacked, axis=0).mean(axis=0)
    n = (~np.ma.getmaskarray(p)).sum(axis=0)
    meta = {"scoring": "per-number exact match"}
    meta.update(metadata or {})
    return AccuracyReport(m, per_pos, per_dig, n, product, digit_mean, meta)


def product_law_check(report: AccuracyReport) -> tuple[float, np.ndarray]:
    """(max_t |acc(t) - prod_digits acc_digit(t)|, per-position deviation)."""
    dev = np.abs(report.per_position - report.product_curve)
    return float(dev.max()) if len(dev) else 0.0, dev


def context_to_threshold(curve: Sequence[float], threshold: float) -> int | None:
    """First 1-based position from which the curve stays >= threshold."""
    if not 0 < threshold <= 1:
        raise DomainError("threshold must lie in (0, 1]")
    curve = np.asarray(curve, dtype=float)
    below = np.flatnonzero(curve < threshold)
    if len(curve) == 0:
        return None
    if len(below) == 0:
        return 1
    last = int(below[-1])
    return last + 2 if last + 1 < len(curve) else None


def staircase_jumps(curve: Sequence[float], min_step: float = 0.02) -> list[int]:
    """1-based positions where the curve rises by more than min_step over the previous one."""
    c = np.asarray(curve, dtype=float)
    return [int(i) + 2 for i in np.flatnonzero(np.diff(c) > min_step)]


def fit_power_law(points: Iterable[tuple[float, float]], threshold: float = 1.0) -> ScalingFit:
    """OLS on (log m, log context_needed): context_needed ~ exp(intercept) * m**gamma."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise DomainError("need at least 3 points for a power-law fit")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise DomainError("power-law fit needs strictly positive points")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    A = np.column_stack([lx, np.ones_like(lx)])
    (gamma, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (gamma * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    if not math.isfinite(gamma):
        raise DomainError("power-law fit did not produce a finite exponent")
    return ScalingFit(pts, float(gamma), float(intercept), r2, threshold)


def gamma_in_band(fit: ScalingFit, band: tuple[float, float] = GAMMA_BAND_UM) -> bool:
    return band[0] <= fit.gamma <= band[1]


class DumpError(PrngLabError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


DUMP_KEYS = ("seq", "t", "target", "pred")


def dump_lines(rows: Iterable[dict]) -> Iterable[str]:
    for row in rows:
        yield json.dumps({k: int(row[k]) for k in DUMP_KEYS})


def parse_dump(lines: Iterable[str]) -> dict[int, dict[int, tuple[int, int]]]:
    """{seq: {t: (target, pred)}} from JSONL prediction-dump lines."""
    out: dict[int, dict[int, tuple[int, int]]] = {}
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            seq, t, target, pred = (row[k] for k in DUMP_KEYS)
            if not all(isinstance(v, int) and v >= 0 for v in (seq, t, target, pred)) or t < 1:
                raise ValueError("fields must be non-negative integers, t >= 1")
        except (ValueError, KeyError, TypeError) as exc:
            raise DumpError(f"malformed prediction dump entry ({exc})", line=n) from None
        out.setdefault(seq, {})[t] = (target, pred)
    return out


def dump_matrices(parsed: dict[int, dict[int, tuple[int, int]]]):
    """(predictions, targets) as masked (n_seq, L) arrays, rows ordered by sequence id."""
    if not parsed:
        raise DomainError("empty prediction dump")
    width = max(max(rows) for rows in parsed.values())
    seqs = sorted(parsed)
    data_p = np.zeros((len(seqs), width), dtype=np.int64)
    data_t = np.zeros_like(data_p)
    mask = np.ones_like(data_p, dtype=bool)
    for i, s in enumerate(seqs):
        for t, (target, pred) in parsed[s].items():
            data_t[i, t - 1] = target
            data_p[i, t - 1] = pred
            mask[i, t - 1] = False
    return (np.ma.masked_array(data_p, mask=mask), np.ma.masked_array(data_t, mask=mask.copy()),
            seqs)
