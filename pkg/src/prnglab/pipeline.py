"""Batch drivers shared by the CLI: corpus prediction and modulus sweeps."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from ._random import SplitMix64
from .dataset import SequenceRecord
from .errors import DomainError
from .evaluate import accuracy_report, context_to_threshold, fit_power_law
from .lcg_core import full_period_values, lcg_batch
from .predictor import predict_sequence

MODES = ("copy", "full", "unseen")


def resolve_threads(threads: int | None = None) -> int:
    env = os.environ.get("PRNGLAB_THREADS")
    if env:
        threads = int(env)
    if not threads or threads < 1:
        threads = os.cpu_count() or 1
    return threads


def _predict_one(job) -> list[int]:
    values, m, mode, refine = job
    return [o.predicted for o in predict_sequence(values, m, mode, refine=refine)]


def parallel_map(fn, jobs: Sequence, threads: int) -> list:
    """Order-preserving map; the result never depends on ``threads``."""
    if threads <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    chunk = max(1, len(jobs) // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))


def predict_records(records: Sequence[SequenceRecord], mode: str, threads: int = 1,
                    refine: bool = True) -> list[dict]:
    """Prediction-dump rows for positions 1..len-1 of every record."""
    if mode not in MODES:
        raise DomainError(f"corpus prediction mode must be one of {MODES}")
    jobs = [(r.values, r.m, mode, refine) for r in records]
    preds = parallel_map(_predict_one, jobs, threads)
    rows = []
    for rec, pred in zip(records, preds):
        for t, p in enumerate(pred, 1):
            rows.append({"seq": rec.idx, "t": t, "target": rec.values[t], "pred": p})
    return rows


def full_period_sequences(m: int, n_a: int, n_c: int, seeds: int, length: int,
                          seed: int) -> np.ndarray:
    """(n_a*n_c*seeds, length) full-period sequences with independent x0 per row."""
    rng = SplitMix64(seed)
    a_vals, c_vals = full_period_values(m, n_a, n_c, rng)
    a, c, x0 = [], [], []
    for ai in a_vals:
        for ci in c_vals:
            for _ in range(seeds):
                a.append(ai)
                c.append(ci)
                x0.append(rng.below(m))
    return lcg_batch(x0, a, c, m, length)


def accuracy_for_modulus(m: int, mode: str, length: int, n_a: int = 8, n_c: int = 8,
                         seeds: int = 1, seed: int = 0, threads: int = 1):
    seqs = full_period_sequences(m, n_a, n_c, seeds, length + 1, seed)
    jobs = [([int(v) for v in row], m, mode, True) for row in seqs]
    preds = np.array(parallel_map(_predict_one, jobs, threads), dtype=np.int64)
    targets = seqs[:, 1:].astype(np.int64)
    return accuracy_report(preds, targets, m, {"mode": mode, "n_a": n_a, "n_c": n_c,
                                               "seeds": seeds})


def scaling_sweep(m_list: Iterable[int], mode: str, threshold: float, length: int,
                  n_a: int = 8, n_c: int = 8, seeds: int = 1, seed: int = 0, threads: int = 1):
    """Threshold crossings per modulus and the power-law fit through them (None if < 3)."""
    crossings = {}
    for m in m_list:
        rep = accuracy_for_modulus(m, mode, length, n_a, n_c, seeds, seed, threads)
        crossings[m] = context_to_threshold(rep.per_position, threshold)
    points = [(m, t) for m, t in crossings.items() if t is not None]
    fit = fit_power_law(points, threshold) if len(points) >= 3 else None
    return crossings, fit
