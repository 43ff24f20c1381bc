"""Unique-token and base-b (LSD-first) tokenization with abacus position indices."""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .errors import DomainError, StructureError, TokenOverflowError

UNIQUE = "unique"
BASE_B = "base_b"


def digits_needed(max_modulus: int, base: int) -> int:
    """ceil(log_b m) computed exactly: smallest D with b**D >= m."""
    d, cap = 1, base
    while cap < max_modulus:
        cap *= base
        d += 1
    return d


@dataclass(frozen=True)
class TokenizerSpec:
    mode: str
    base: int
    digits_per_int: int
    vocab_size: int

    def __post_init__(self):
        if self.mode == UNIQUE:
            if self.digits_per_int != 1 or self.base != self.vocab_size:
                raise DomainError("unique mode needs D=1 and base == vocab_size")
        elif self.mode == BASE_B:
            if self.base < 2 or self.vocab_size != self.base:
                raise DomainError("base_b mode needs b >= 2 and vocab_size == b")
        else:
            raise DomainError(f"unknown tokenizer mode {self.mode!r}")
        if self.digits_per_int < 1:
            raise DomainError("digits_per_int must be positive")

    @classmethod
    def unique(cls, vocab_size: int) -> "TokenizerSpec":
        return cls(UNIQUE, vocab_size, 1, vocab_size)

    @classmethod
    def base_b(cls, base: int, max_modulus: int) -> "TokenizerSpec":
        return cls(BASE_B, base, digits_needed(max_modulus, base), base)

    @property
    def capacity(self) -> int:
        """Integers in [0, capacity) are representable."""
        return self.base ** self.digits_per_int

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "TokenizerSpec":
        return cls(data["mode"], data["base"], data["digits_per_int"], data["vocab_size"])


@dataclass
class TokenStream:
    tokens: np.ndarray
    int_positions: np.ndarray
    digit_positions: np.ndarray
    spec: TokenizerSpec

    def __len__(self):
        return len(self.tokens)


@dataclass
class Detokenized:
    values: list[int]
    partial_tail: tuple[int, ...] = ()


def to_base_b(x: int, b: int, D: int) -> tuple[int, ...]:
    if b < 2:
        raise DomainError("base must be >= 2")
    if not 0 <= x < b ** D:
        raise TokenOverflowError(f"{x} does not fit in {D} base-{b} digits")
    out = []
    for _ in range(D):
        x, d = divmod(x, b)
        out.append(d)
    return tuple(out)


def from_base_b(digits: Sequence[int], b: int) -> int:
    x = 0
    for d in reversed(digits):
        if not 0 <= d < b:
            raise DomainError(f"digit {d} outside [0, {b})")
        x = x * b + d
    return x


def tokenize_sequence(seq: Sequence[int], spec: TokenizerSpec,
                      drop_last_token: bool = False) -> TokenStream:
    """Flatten integers into tokens; integer i, digit j lands at index i*D + j."""
    arr = np.asarray(seq, dtype=np.uint64).reshape(-1)
    if len(arr) and (bad := np.flatnonzero(arr >= np.uint64(spec.capacity))).size:
        i = int(bad[0])
        raise TokenOverflowError(
            f"element {i} ({int(arr[i])}) exceeds tokenizer capacity {spec.capacity}", index=i)
    D = spec.digits_per_int
    tokens = base_b_digits(arr, spec.base, D).reshape(-1)
    n = len(arr)
    int_pos = np.repeat(np.arange(n, dtype=np.int64), D)
    dig_pos = np.tile(np.arange(D, dtype=np.int64), n)
    if drop_last_token and len(tokens):
        tokens, int_pos, dig_pos = tokens[:-1], int_pos[:-1], dig_pos[:-1]
    return TokenStream(tokens.astype(np.int64), int_pos, dig_pos, spec)


def base_b_digits(arr: np.ndarray, base: int, D: int) -> np.ndarray:
    """LSD-first digit matrix of shape arr.shape + (D,)."""
    x = np.asarray(arr, dtype=np.uint64).copy()
    out = np.empty(x.shape + (D,), dtype=np.uint64)
    b = np.uint64(base)
    for j in range(D):
        out[..., j] = x % b
        x //= b
    return out


def detokenize_stream(stream: TokenStream) -> Detokenized:
    """Inverse of tokenize_sequence; a trailing incomplete integer is reported, not dropped."""
    D = stream.spec.digits_per_int
    n = len(stream.tokens)
    if not len(stream.int_positions) == len(stream.digit_positions) == n:
        raise StructureError("token and position arrays differ in length")
    idx = np.arange(n)
    if not (np.array_equal(stream.int_positions, idx // D)
            and np.array_equal(stream.digit_positions, idx % D)):
        raise StructureError("abacus positions do not follow the fixed stride layout")
    tokens = np.asarray(stream.tokens, dtype=np.uint64)
    if n and int(tokens.max()) >= stream.spec.vocab_size:
        raise StructureError("token id outside the vocabulary")
    full = n // D
    body = tokens[:full * D].reshape(full, D)
    weights = np.uint64(stream.spec.base) ** np.arange(D, dtype=np.uint64)
    values = [int(v) for v in (body * weights).sum(axis=1)] if full else []
    tail = tuple(int(t) for t in tokens[full * D:])
    return Detokenized(values, tail)
