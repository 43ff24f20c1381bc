"""Emulators of the in-context prediction algorithms, plus exact LCG crackers.

Every predictor reads only ``context[:t]`` and predicts ``x_t``.  Position
drivers can therefore pass a whole sequence with increasing ``t`` instead of
slicing a fresh prefix at every step.

Provenance tags, one per RNS digit:

* ``copied``  - low digit taken from the look-back element, guaranteed correct
  for full-period sequences;
* ``solved``  - derived from the parameters pinned down by the context;
* ``guessed`` - copied from the look-back element without any guarantee.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Iterator, Sequence

from .errors import DomainError, EmptySequenceError, InconsistentContextError, InsufficientDataError
from .rns import Factorization, MAX_MODULUS, crt, factorize, is_prime, minimal_period

COPIED, SOLVED, GUESSED = "copied", "solved", "guessed"


@dataclass(frozen=True)
class PredictionOutcome:
    predicted: int
    m_estimate: int
    per_digit_confidence: tuple[tuple[str, ...], ...]
    factors: tuple[tuple[int, int], ...] = ()

    @property
    def fully_solved(self) -> bool:
        return all(tag != GUESSED for tags in self.per_digit_confidence for tag in tags)


class ParameterClass:
    """Every (a, c) with a == a_residue (mod a_modulus) and c == x1 - a*x0 (mod m).

    Returned when a context does not pin the parameters down uniquely; the
    whole residue class is reported rather than a sampled representative.
    """

    def __init__(self, m: int, a_residue: int, a_modulus: int, x0: int, x1: int):
        self.m = m
        self.a_residue = a_residue % a_modulus
        self.a_modulus = a_modulus
        self.x0 = x0
        self.x1 = x1

    def c_for(self, a: int) -> int:
        return (self.x1 - a * self.x0) % self.m

    def multipliers(self) -> Iterator[int]:
        a = self.a_residue or self.a_modulus
        while a < self.m:
            yield a
            a += self.a_modulus

    def pairs(self) -> Iterator[tuple[int, int]]:
        for a in self.multipliers():
            yield a, self.c_for(a)

    def __contains__(self, pair) -> bool:
        a, c = pair
        return (0 < a < self.m and (a - self.a_residue) % self.a_modulus == 0
                and c == self.c_for(a))

    def __len__(self) -> int:
        return sum(1 for _ in self.multipliers())

    def __repr__(self):
        return (f"ParameterClass(a = {self.a_residue} mod {self.a_modulus}, "
                f"c = {self.x1} - {self.x0}*a mod {self.m})")

    def __eq__(self, other):
        if not isinstance(other, ParameterClass):
            return NotImplemented
        return set(self.pairs()) == set(other.pairs())


@dataclass
class CrackResult:
    recovered_m: int | None
    recovered_a: int | ParameterClass | None
    recovered_c: int | ParameterClass | None
    elements_consumed: int

    @property
    def determined(self) -> bool:
        return isinstance(self.recovered_a, int) and isinstance(self.recovered_c, int)

    def representative(self) -> tuple[int, int]:
        if self.determined:
            return self.recovered_a, self.recovered_c
        a, c = next(self.recovered_a.pairs())
        return a, c


class PrimePowerSolver:
    """Incremental solver for the multiplier of an LCG modulo q = p**w.

    Consecutive residues y_i must satisfy a*d_i == d_{i+1} (mod q) with
    d_i = y_{i+1} - y_i.  Each constraint pins ``a`` modulo a power of p;
    all constraints nest, so their intersection is a single class
    ``a == residue (mod modulus)``.
    """

    def __init__(self, q: int):
        self.q = q
        self.residue = 0
        self.modulus = 1
        self.consistent = True
        self.ys: list[int] = []

    def push(self, y: int) -> None:
        ys = self.ys
        ys.append(y % self.q)
        if len(ys) >= 3 and self.consistent:
            q = self.q
            self.add_constraint((ys[-2] - ys[-3]) % q, (ys[-1] - ys[-2]) % q)

    def add_constraint(self, d: int, e: int) -> None:
        q = self.q
        g = gcd(d, q)
        if e % g:
            self.consistent = False
            return
        q2 = q // g
        r2 = (e // g) * pow(d // g, -1, q2) % q2 if q2 > 1 else 0
        if q2 >= self.modulus:
            if (r2 - self.residue) % self.modulus:
                self.consistent = False
                return
            self.residue, self.modulus = r2, q2
        elif (self.residue - r2) % q2:
            self.consistent = False

    def next_residue(self) -> int | None:
        """Residue of the next element if every consistent multiplier agrees on it."""
        ys = self.ys
        if not self.consistent or len(ys) < 2:
            return None
        d = (ys[-1] - ys[-2]) % self.q
        if self.modulus * d % self.q:
            return None
        return (ys[-1] + self.residue * d) % self.q


def _require_context(context: Sequence[int], t: int | None) -> int:
    t = len(context) if t is None else t
    if t < 1:
        raise EmptySequenceError("prediction needs at least one context element")
    if t > len(context):
        raise DomainError(f"t={t} exceeds context length {len(context)}")
    return t


def look_back(p: int, w: int, t: int) -> int:
    """Largest k <= w with p**k <= t (the number of copyable low digits)."""
    k = 0
    r = p
    while k < w and r <= t:
        k += 1
        r *= p
    return k


def _copy_plan(fact: Factorization, t: int):
    for p, w in fact:
        k = look_back(p, w, t)
        yield p, w, k, p ** k


def predict_copy_only(context: Sequence[int], m: int, t: int | None = None) -> PredictionOutcome:
    """Copy each prime-power residue from ``context[t - p**k]``, k maximal."""
    t = _require_context(context, t)
    if m < 2:
        raise DomainError("m must be >= 2")
    fact = factorize(m)
    residues, tags = [], []
    for p, w, k, r in _copy_plan(fact, t):
        residues.append(context[t - r] % p ** w)
        tags.append((COPIED,) * k + (GUESSED,) * (w - k))
    x, _ = crt(residues, fact.prime_powers)
    return PredictionOutcome(x, m, tuple(tags), fact.factors)


def _full_from_solvers(context, t, fact, solvers) -> PredictionOutcome:
    residues, tags = [], []
    for (p, w, k, r), solver in zip(_copy_plan(fact, t), solvers):
        nxt = solver.next_residue()
        if nxt is None:
            residues.append(context[t - r] % p ** w)
            tags.append((COPIED,) * k + (GUESSED,) * (w - k))
        else:
            residues.append(nxt)
            tags.append((COPIED,) * k + (SOLVED,) * (w - k))
    x, m = crt(residues, fact.prime_powers)
    return PredictionOutcome(x, m, tuple(tags), fact.factors)


def predict_full(context: Sequence[int], m: int, t: int | None = None) -> PredictionOutcome:
    """Copy the low digits, then solve the higher digits per prime power.

    The multiplier modulo each prime power is pinned down by intersecting the
    difference constraints of every consecutive triple in the context.  When
    the constraints leave the next residue ambiguous, or contradict each
    other, the residue is copied from the look-back element and tagged
    ``guessed``.
    """
    t = _require_context(context, t)
    if m < 2:
        raise DomainError("m must be >= 2")
    fact = factorize(m)
    solvers = [PrimePowerSolver(q) for q in fact.prime_powers]
    for x in context[:t]:
        for s in solvers:
            s.push(x)
    return _full_from_solvers(context, t, fact, solvers)


def predict_sequence(values: Sequence[int], m: int, mode: str = "full",
                     refine: bool = True) -> list[PredictionOutcome]:
    """Predictions for positions t = 1 .. len(values)-1 of one sequence.

    ``full`` mode keeps one incremental solver per prime power, so the cost
    is linear in the sequence length; the result equals calling
    :func:`predict_full` on every prefix.
    """
    n = len(values)
    if mode == "copy":
        return [predict_copy_only(values, m, t) for t in range(1, n)]
    if mode == "unseen":
        return [predict_unseen(values[:t], refine=refine) if t >= 2
                else predict_copy_only(values, max(values[0] + 1, 2), 1)
                for t in range(1, n)]
    if mode != "full":
        raise DomainError(f"unknown prediction mode {mode!r}")
    fact = factorize(m)
    solvers = [PrimePowerSolver(q) for q in fact.prime_powers]
    out = []
    for t in range(1, n):
        for s in solvers:
            s.push(values[t - 1])
        out.append(_full_from_solvers(values, t, fact, solvers))
    return out


def estimate_modulus_greedy(context: Sequence[int]) -> int:
    if len(context) == 0:
        raise EmptySequenceError("cannot estimate a modulus from an empty context")
    return max(context) + 1


def copy_structure(context: Sequence[int], p: int) -> int:
    """Largest k >= 1 such that context mod p**k has minimal period exactly p**k.

    Only k with 2*p**k <= len(context) are examined; 0 means no structure.
    """
    n = len(context)
    best = 0
    k, q = 1, p
    while 2 * q <= n:
        if minimal_period([x % q for x in context]) == q:
            best = k
        else:
            break
        k += 1
        q *= p
    return best


def refine_modulus(context: Sequence[int], m_est: int) -> int:
    """Snap m_est to a multiple of the prime powers whose copy structure is visible."""
    step = 1
    for p in range(2, len(context) // 2 + 1):
        if is_prime(p):
            k = copy_structure(context, p)
            if k:
                step *= p ** k
    if step == 1:
        return m_est
    snapped = max(1, (2 * m_est + step) // (2 * step)) * step
    while snapped < m_est:
        snapped += step
    return snapped


def predict_unseen(context: Sequence[int], refine: bool = True) -> PredictionOutcome:
    """Estimate the modulus from the context, then run :func:`predict_full`."""
    if len(context) < 2:
        raise InsufficientDataError("unseen-modulus prediction needs at least 2 elements")
    m_est = estimate_modulus_greedy(context)
    if refine:
        m_est = refine_modulus(context, m_est)
    m_est = max(m_est, 2)
    if m_est > MAX_MODULUS:
        m_est = estimate_modulus_greedy(context)
    return predict_full(context, m_est)


def crack_known_m(context: Sequence[int], m: int) -> CrackResult:
    """Recover (a, c) mod m from a context, or the class of all consistent pairs."""
    if len(context) < 3:
        raise InsufficientDataError("cracking needs at least 3 elements")
    if any(not 0 <= x < m for x in context):
        raise InconsistentContextError(f"context values must lie in [0, {m})")
    fact = factorize(m)
    res, mods = [], []
    for q in fact.prime_powers:
        s = PrimePowerSolver(q)
        for x in context:
            s.push(x)
            if not s.consistent:
                raise InconsistentContextError(f"context is not an LCG modulo {m}")
        res.append(s.residue)
        mods.append(s.modulus)
    a_res, a_mod = crt(res, mods)
    x0, x1 = context[0], context[1]
    if a_mod == m:
        if a_res == 0:
            raise InconsistentContextError("only a == 0 fits the context")
        return CrackResult(m, a_res, (x1 - a_res * x0) % m, len(context))
    cls = ParameterClass(m, a_res, a_mod, x0, x1)
    c_unique = (a_mod * x0) % m == 0
    a_first = next(cls.multipliers())
    c_val = cls.c_for(a_first) if c_unique else cls
    return CrackResult(m, cls, c_val, len(context))


def _divisors_from_factors(factors: dict[int, int]) -> list[int]:
    divs = [1]
    for p, e in factors.items():
        divs = [d * p ** i for d in divs for i in range(e + 1)]
    return sorted(divs)


def difference_determinant_gcd(context: Sequence[int]) -> int:
    """gcd of |d_{t+1} d_{t-1} - d_t^2|, a multiple of the true modulus."""
    d = [context[i + 1] - context[i] for i in range(len(context) - 1)]
    g = 0
    for i in range(1, len(d) - 1):
        g = gcd(g, abs(d[i + 1] * d[i - 1] - d[i] * d[i]))
    return g


def crack_unknown_m(context: Sequence[int]) -> CrackResult:
    """Recover (m, a, c) from raw outputs; m is None when the context is degenerate."""
    from sympy import factorint

    if len(context) < 5:
        raise InsufficientDataError("modulus recovery needs at least 5 elements")
    n = len(context)
    g = difference_determinant_gcd(context)
    if g == 0:
        return CrackResult(None, None, None, n)
    floor = max(context) + 1
    for cand in _divisors_from_factors({int(p): e for p, e in factorint(g).items()}):
        if cand < max(floor, 2) or cand > MAX_MODULUS:
            continue
        try:
            res = crack_known_m(context, cand)
        except InconsistentContextError:
            continue
        return res
    return CrackResult(None, None, None, n)
