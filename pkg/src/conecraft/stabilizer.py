"""Uniform sampling and enumeration of pure stabilizer states.

Every n-qubit stabilizer state can be written uniquely as

    |psi> = 2^{-k/2} sum_{y in F_2^k} i^{c.y} (-1)^{b.y + y^T Q y} |s + G y>

where ``s + span(G)`` is a k-dimensional affine subspace of F_2^n, ``c`` and
``b`` are bit vectors and ``Q`` is strictly upper triangular. For a fixed
subspace the phase data ranges over 2^{k(k+3)/2} distinct states, so a
uniform state is drawn by picking ``k`` with the right weight, then a
uniform affine subspace, then uniform phase bits. No Clifford tableau is
needed because only the states themselves are used.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations, product

import numpy as np

__all__ = [
    "stabilizer_count",
    "enumerate_stabilizer_states",
    "sample_stabilizer_state",
]


def _gauss_binom(n: int, k: int) -> int:
    """Number of k-dimensional subspaces of F_2^n."""
    num, den = 1, 1
    for i in range(k):
        num *= 2 ** (n - i) - 1
        den *= 2 ** (i + 1) - 1
    return num // den


def _phase_count(k: int) -> int:
    return 2 ** (k * (k + 3) // 2)


def _dimension_weights(n: int) -> list[int]:
    return [2 ** (n - k) * _gauss_binom(n, k) * _phase_count(k) for k in range(n + 1)]


def stabilizer_count(n: int) -> int:
    """``2^n prod_{k=1}^n (2^k + 1)``; 6 for one qubit, 60 for two."""
    out = 2**n
    for k in range(1, n + 1):
        out *= 2**k + 1
    return out


def _state(n: int, shift: int, basis: tuple[int, ...], c, b, q) -> np.ndarray:
    k = len(basis)
    ys = np.array(list(product((0, 1), repeat=k)), dtype=np.int64).reshape(2**k, k)
    xs = np.full(2**k, shift, dtype=np.int64)
    for j, g in enumerate(basis):
        xs ^= ys[:, j] * g
    quarter = ys @ np.asarray(c, dtype=np.int64).reshape(k) if k else np.zeros(1, np.int64)
    sign = ys @ np.asarray(b, dtype=np.int64).reshape(k) if k else np.zeros(1, np.int64)
    for (i, j), bit in zip(combinations(range(k), 2), q):
        if bit:
            sign = sign + ys[:, i] * ys[:, j]
    amp = (1j) ** (quarter % 4) * (-1.0) ** (sign % 2) / np.sqrt(2.0**k)
    psi = np.zeros(2**n, dtype=complex)
    psi[xs] = amp
    return psi


def _span(basis: tuple[int, ...]) -> frozenset[int]:
    pts = {0}
    for g in basis:
        pts |= {p ^ g for p in pts}
    return frozenset(pts)


@lru_cache(maxsize=None)
def _subspaces(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """One basis per k-dimensional subspace of F_2^n."""
    seen: dict[frozenset[int], tuple[int, ...]] = {}
    for basis in combinations(range(1, 2**n), k):
        sp = _span(basis)
        if len(sp) == 2**k and sp not in seen:
            seen[sp] = basis
    return tuple(seen.values())


def enumerate_stabilizer_states(n: int) -> np.ndarray:
    """All n-qubit stabilizer states as rows of a ``(count, 2^n)`` array.

    Intended for ``n <= 3``; the count grows super-exponentially.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > 3:
        raise ValueError("exhaustive enumeration is limited to n <= 3")
    states = []
    for k in range(n + 1):
        npairs = k * (k - 1) // 2
        for basis in _subspaces(n, k):
            sp = _span(basis)
            shifts, covered = [], set()
            for s in range(2**n):
                if s not in covered:
                    shifts.append(s)
                    covered |= {s ^ p for p in sp}
            for s in shifts:
                for c in product((0, 1), repeat=k):
                    for b in product((0, 1), repeat=k):
                        for q in product((0, 1), repeat=npairs):
                            states.append(_state(n, s, basis, c, b, q))
    out = np.array(states)
    assert len(out) == stabilizer_count(n)
    return out


def _random_basis(n: int, k: int, rng: np.random.Generator) -> tuple[int, ...]:
    while True:
        rows = tuple(int(v) for v in rng.integers(0, 2**n, size=k))
        if len(_span(rows)) == 2**k:
            return rows


def sample_stabilizer_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one n-qubit stabilizer state uniformly at random."""
    if n == 0:
        return np.ones(1, dtype=complex)
    weights = np.array(_dimension_weights(n), dtype=float)
    k = int(rng.choice(n + 1, p=weights / weights.sum()))
    basis = _random_basis(n, k, rng)
    shift = int(rng.integers(0, 2**n))
    c = rng.integers(0, 2, size=k)
    b = rng.integers(0, 2, size=k)
    q = rng.integers(0, 2, size=k * (k - 1) // 2)
    return _state(n, shift, basis, c, b, q)
