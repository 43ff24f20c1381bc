"""Prime factorization, residue-number-system digits and digit periods.

Digit storage in :class:`RnsDigits` is 0-indexed (``digits[j][0]`` is the
lowest base-``p_j`` digit).  Every *period* API takes a 1-indexed ``k``:
``k=1`` is the lowest digit.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gcd, isqrt
from typing import Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError

MAX_MODULUS = 1 << 32
NO_PERIOD = 0  # sentinel returned by measure_digit_period


def _small_primes(limit: int) -> list[int]:
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, isqrt(limit) + 1):
        if sieve[i]:
            sieve[i * i::i] = bytearray(len(range(i * i, limit + 1, i)))
    return [i for i, flag in enumerate(sieve) if flag]


PRIMES_16 = _small_primes(1 << 16)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y == g == gcd(a, b)."""
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def modinv(a: int, m: int) -> int:
    g, x, _ = egcd(a % m, m)
    if g != 1:
        raise DomainError(f"{a} is not invertible modulo {m}")
    return x % m


def crt(residues: Sequence[int], moduli: Sequence[int]) -> tuple[int, int]:
    """Combine pairwise-coprime congruences; returns (x, product of moduli)."""
    x, n = 0, 1
    for r, q in zip(residues, moduli):
        # x + n*s == r (mod q)
        s = (r - x) * modinv(n, q) % q if q > 1 else 0
        x += n * s
        n *= q
    return x % n, n


@dataclass(frozen=True)
class Factorization:
    """``factors`` is an ascending tuple of ``(prime, exponent)`` pairs."""

    factors: tuple[tuple[int, int], ...]

    @property
    def modulus(self) -> int:
        m = 1
        for p, w in self.factors:
            m *= p ** w
        return m

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    @property
    def prime_powers(self) -> tuple[int, ...]:
        return tuple(p ** w for p, w in self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __len__(self):
        return len(self.factors)


@lru_cache(maxsize=4096)
def factorize(m: int) -> Factorization:
    """Trial division by the primes below 2**16; exact for m <= 2**32."""
    if m < 2:
        raise DomainError(f"cannot factorize m={m}; need m >= 2")
    if m > MAX_MODULUS:
        raise DomainError(f"m={m} exceeds 2**32")
    out = []
    rest = m
    for p in PRIMES_16:
        if p * p > rest:
            break
        if rest % p == 0:
            w = 0
            while rest % p == 0:
                rest //= p
                w += 1
            out.append((p, w))
    if rest > 1:
        out.append((rest, 1))
    return Factorization(tuple(out))


def radical(m: int) -> int:
    r = 1
    for p in factorize(m).primes:
        r *= p
    return r


def euler_phi(m: int) -> int:
    phi = 1
    for p, w in factorize(m):
        phi *= (p - 1) * p ** (w - 1)
    return phi


@dataclass(frozen=True)
class RnsDigits:
    """Per-prime-power digit vectors, least significant digit first."""

    digits: tuple[tuple[int, ...], ...]

    def residues(self, factorization: Factorization) -> list[int]:
        out = []
        for vec, (p, _) in zip(self.digits, factorization):
            r = 0
            for d in reversed(vec):
                r = r * p + d
            out.append(r)
        return out


def to_digits(x: int, factorization: Factorization) -> RnsDigits:
    m = factorization.modulus
    if not 0 <= x < m:
        raise DomainError(f"x={x} outside [0, {m})")
    out = []
    for p, w in factorization:
        r = x % p ** w
        vec = []
        for _ in range(w):
            r, d = divmod(r, p)
            vec.append(d)
        out.append(tuple(vec))
    return RnsDigits(tuple(out))


def from_digits(digits: RnsDigits, factorization: Factorization) -> int:
    if len(digits.digits) != len(factorization):
        raise DomainError("digit vector count does not match factorization")
    for vec, (p, w) in zip(digits.digits, factorization):
        if len(vec) != w or any(not 0 <= d < p for d in vec):
            raise DomainError(f"invalid base-{p} digit vector {vec}")
    x, _ = crt(digits.residues(factorization), factorization.prime_powers)
    return x


def digit_period_theory(p: int, k: int) -> int:
    """Period of the k-th lowest base-p digit along a full-period sequence."""
    if k < 1:
        raise DomainError("k is 1-indexed and must be >= 1")
    return p ** k


def reduced_digit_period(p: int, k: int, r: int) -> int:
    """Digit period after keeping every r-th element of the sequence."""
    if k < 1 or r < 1:
        raise DomainError("k and r must be >= 1")
    q = p ** k
    return q // gcd(r, q)


def digit_stream(sequence, p: int, k: int) -> np.ndarray:
    """k-th lowest (1-indexed) base-p digit of every element."""
    arr = np.asarray(sequence, dtype=np.uint64)
    return (arr // np.uint64(p ** (k - 1))) % np.uint64(p)


def minimal_period(stream) -> int:
    """Smallest d <= len/2 with stream[t+d] == stream[t] for every t, else NO_PERIOD."""
    s = np.asarray(stream)
    n = len(s)
    if n < 2:
        raise InsufficientDataError("need at least two elements to measure a period")
    half = n // 2
    cands = np.arange(1, half + 1)
    # prune shifts block by block; every candidate can be probed at offsets < n - half
    pos, block = 0, 8
    while cands.size:
        d = int(cands[0])
        if np.array_equal(s[d:], s[:n - d]):
            return d
        cands = cands[1:]
        if pos >= n - half or not cands.size:
            break
        idx = np.arange(pos, min(pos + block, n - half))
        keep = (s[cands[:, None] + idx[None, :]] == s[idx][None, :]).all(axis=1)
        cands = cands[keep]
        pos, block = pos + len(idx), block * 2
    for d in cands:
        if np.array_equal(s[d:], s[:n - d]):
            return int(d)
    return NO_PERIOD


def measure_digit_period(sequence, p: int, k: int) -> int:
    """Measured period of the k-th lowest base-p digit; NO_PERIOD if none fits in len/2."""
    if k < 1:
        raise DomainError("k is 1-indexed and must be >= 1")
    if len(sequence) < 2:
        raise InsufficientDataError("sequence too short to measure a digit period")
    return minimal_period(digit_stream(sequence, p, k))
