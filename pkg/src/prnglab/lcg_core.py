"""The LCG map x -> (a*x + c) mod m, r-step folding, periods and Hull-Dobell."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import gcd

import numpy as np

from ._random import SplitMix64
from .errors import CapacityError, DomainError, EmptySequenceError
from .rns import Factorization, MAX_MODULUS, euler_phi, factorize


@dataclass(frozen=True)
class LcgParams:
    m: int
    a: int
    c: int

    def __post_init__(self):
        if not 2 <= self.m <= MAX_MODULUS:
            raise DomainError(f"modulus m={self.m} outside [2, 2**32]")
        if not 0 < self.a < self.m:
            raise DomainError(f"multiplier a={self.a} outside (0, {self.m})")
        if not 0 <= self.c < self.m:
            raise DomainError(f"increment c={self.c} outside [0, {self.m})")

    @cached_property
    def full_period(self) -> bool:
        return hull_dobell(self.m, self.a, self.c)

    @property
    def factorization(self) -> Factorization:
        return factorize(self.m)


@dataclass(frozen=True)
class LcgState:
    x: int
    t: int = 0


@dataclass(frozen=True)
class FoldedParams:
    r: int
    a_r: int
    c_r: int


def lcg_next(state: LcgState, params: LcgParams) -> LcgState:
    return LcgState((params.a * state.x + params.c) % params.m, state.t + 1)


def lcg_sequence(x0: int, params: LcgParams, length: int) -> list[int]:
    """[x0, x1, ..., x_{length-1}]."""
    if length <= 0:
        raise EmptySequenceError("length must be positive")
    if not 0 <= x0 < params.m:
        raise DomainError(f"x0={x0} outside [0, {params.m})")
    return iterate(x0, params.a, params.c, params.m, length)


def iterate(x0: int, a: int, c: int, m: int, length: int) -> list[int]:
    """Unchecked iteration; also accepts folded (a, c) pairs where a may be 0."""
    out = [x0]
    x = x0
    for _ in range(length - 1):
        x = (a * x + c) % m
        out.append(x)
    return out


def lcg_batch(x0, a, c, m, length: int) -> np.ndarray:
    """Vectorised sequences, one row per (x0, a, c, m) entry; exact for m <= 2**32.

    Columns are filled by doubling: once the first n are known, the next n
    follow from the n-fold map.  a*x < 2**64 fits in uint64, so each product
    is reduced before adding c.
    """
    x = np.asarray(x0, dtype=np.uint64)
    m = np.broadcast_to(np.asarray(m, dtype=np.uint64), x.shape)[..., None]
    A = np.broadcast_to(np.asarray(a, dtype=np.uint64), x.shape)[..., None] % m
    C = np.broadcast_to(np.asarray(c, dtype=np.uint64), x.shape)[..., None] % m
    out = np.empty(x.shape + (length,), dtype=np.uint64)
    if length == 0:
        return out
    out[..., 0] = x
    filled = 1
    while filled < length:
        take = min(filled, length - filled)
        out[..., filled:filled + take] = (A * out[..., :take] % m + C) % m
        C = (A * C % m + C) % m
        A = A * A % m
        filled += take
    return out


def fold_params(params: LcgParams, r: int) -> FoldedParams:
    """(a^r, c * (1 + a + ... + a^(r-1))) mod m, without dividing by a-1."""
    if r < 1:
        raise DomainError("r must be >= 1")
    a_r, c_r = _fold(params.a, params.c, params.m, r)
    return FoldedParams(r, a_r, c_r)


def _fold(a: int, c: int, m: int, r: int) -> tuple[int, int]:
    # square-and-multiply on the affine map (A, C): x -> A*x + C
    acc_a, acc_c = 1, 0
    base_a, base_c = a % m, c % m
    while r:
        if r & 1:
            acc_a, acc_c = acc_a * base_a % m, (base_a * acc_c + base_c) % m
        base_a, base_c = base_a * base_a % m, (base_a * base_c + base_c) % m
        r >>= 1
    return acc_a, acc_c


def geometric_sum(a: int, r: int, m: int) -> int:
    """sum_{i=1..r} a^(i-1) mod m by a running Horner sum."""
    s = 0
    for _ in range(r):
        s = (s * a + 1) % m
    return s


def tail_bound(m: int) -> int:
    """Upper bound on the pre-periodic tail of any orbit mod m (largest prime exponent)."""
    return max(w for _, w in factorize(m))


def period(params: LcgParams, x0: int) -> int:
    """Cycle length of the orbit entered from x0 (tail excluded)."""
    if not 0 <= x0 < params.m:
        raise DomainError(f"x0={x0} outside [0, {params.m})")
    if params.full_period:
        return params.m
    a, c, m = params.a, params.c, params.m
    x = x0
    for _ in range(tail_bound(m)):
        x = (a * x + c) % m
    # x is now on the cycle
    y = (a * x + c) % m
    n = 1
    while y != x:
        y = (a * y + c) % m
        n += 1
    return n


def cycle_length_at_most(params: LcgParams, x0: int, bound: int) -> int | None:
    """Cycle length if it is <= bound, else None; costs O(bound) steps."""
    a, c, m = params.a, params.c, params.m
    x = x0
    for _ in range(tail_bound(m)):
        x = (a * x + c) % m
    y = x
    for n in range(1, bound + 1):
        y = (a * y + c) % m
        if y == x:
            return n
    return None


def hull_dobell(m: int, a: int, c: int) -> bool:
    if gcd(m, c) != 1:
        return False
    for p in factorize(m).primes:
        if (a - 1) % p:
            return False
    if m % 4 == 0 and (a - 1) % 4:
        return False
    return True


def full_period_multiplier_step(m: int) -> int:
    """Valid full-period multipliers are exactly 1 + k*step for 0 <= k < m/step."""
    step = 1
    for p in factorize(m).primes:
        step *= p
    if m % 4 == 0 and step % 4:
        step *= 2
    return step


def _draw_distinct(rng: SplitMix64, count: int, available: int, enumerate_all, draw_one):
    if count > available:
        return None
    if available <= 1 << 16:
        return rng.sample(enumerate_all(), count)
    seen: dict[int, None] = {}
    while len(seen) < count:
        v = draw_one()
        if v is not None:
            seen.setdefault(v)
    return list(seen)


def full_period_values(m: int, count_a: int, count_c: int,
                       rng: SplitMix64) -> tuple[list[int], list[int]]:
    """Distinct Hull-Dobell multipliers and increments for modulus m."""
    step = full_period_multiplier_step(m)
    n_a = m // step
    a_vals = _draw_distinct(
        rng, count_a, n_a,
        lambda: [1 + step * i for i in range(n_a)],
        lambda: 1 + step * rng.below(n_a))
    if a_vals is None:
        raise CapacityError("multiplier", count_a, n_a)
    n_c = euler_phi(m)

    def one_c():
        v = rng.below(m)
        return v if gcd(v, m) == 1 else None

    c_vals = _draw_distinct(
        rng, count_c, n_c,
        lambda: [v for v in range(m) if gcd(v, m) == 1],
        one_c)
    if c_vals is None:
        raise CapacityError("increment", count_c, n_c)
    return a_vals, c_vals


def enumerate_full_period_params(m: int, count_a: int, count_c: int,
                                 rng_seed: int) -> list[tuple[int, int]]:
    """Grid of count_a x count_c full-period (a, c) pairs, sampled without replacement.

    Note that a=1 is a valid full-period multiplier (the sequence is then a counter).
    """
    a_vals, c_vals = full_period_values(m, count_a, count_c, SplitMix64(rng_seed))
    return [(a, c) for a in a_vals for c in c_vals]
