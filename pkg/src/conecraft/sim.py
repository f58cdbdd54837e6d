"""Dense Schrödinger and Heisenberg engines.

States and operators are stored as matrices over an ordered roster of
wires; the first wire is the most significant tensor factor. Internally
they are reshaped to one axis per (ket or bra) qubit so that gates and
partial traces are single ``tensordot`` calls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scheme import (
    SIM_CAP_DENSITY,
    SIM_CAP_PURE,
    InteractionScheme,
    SchemeError,
)

__all__ = [
    "CapExceeded",
    "DensityState",
    "HeisenbergOperator",
    "NoiseModel",
    "run_schrodinger",
    "state_at",
    "expectation",
    "heisenberg_evolve",
    "heisenberg_step",
    "spectral_spread",
    "partial_trace",
    "apply_gate_density",
    "apply_gate_vector",
    "depolarize_pair",
    "observable_from_json",
    "observable_to_json",
    "state_to_json",
    "TRIM_TOL",
    "heisenberg_trajectory",
    "local_observable",
    "PAULI",
    "pauli_string",
    "random_hermitian",
    "random_state",
    "max_mixed",
]

TRIM_TOL = 1e-12


class CapExceeded(RuntimeError):
    """A simulation would exceed the configured qubit cap."""

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        super().__init__(message)


# ----------------------------------------------------------------------
# tensor kernels


def _as_tensor(m: np.ndarray, n: int) -> np.ndarray:
    return m.reshape((2,) * (2 * n))


def _as_matrix(t: np.ndarray, n: int) -> np.ndarray:
    return t.reshape(2**n, 2**n)


def _left(t: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``u`` (k-qubit matrix) into the given tensor axes from the left."""
    k = len(axes)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _conjugate(t: np.ndarray, n: int, u: np.ndarray, pos: Sequence[int]) -> np.ndarray:
    """``U X U^dag`` for an operator tensor ``X`` with ``n`` qubits."""
    t = _left(t, u, pos)
    return _left(t, u.conj(), [p + n for p in pos])


def _embed_positions(roster: Sequence[int], wires: Sequence[int]) -> list[int]:
    index = {w: i for i, w in enumerate(roster)}
    return [index[w] for w in wires]


def _ptrace(t: np.ndarray, n: int, drop: Sequence[int]) -> np.ndarray:
    """Trace out tensor positions ``drop`` from an ``n``-qubit operator tensor."""
    keep = [i for i in range(n) if i not in set(drop)]
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    ket = list(letters[:n])
    bra = list(letters[n : 2 * n])
    for i in drop:
        bra[i] = ket[i]
    out = "".join(ket[i] for i in keep) + "".join(bra[i] for i in keep)
    return np.einsum("".join(ket) + "".join(bra) + "->" + out, t)


def _kron_tensor(t: np.ndarray, n: int, m: np.ndarray, k: int) -> np.ndarray:
    """Append a ``k``-qubit operator ``m`` after the ``n`` existing qubits."""
    full = np.multiply.outer(t, m.reshape((2,) * (2 * k)))
    order = list(range(n)) + list(range(2 * n, 2 * n + k)) + list(range(n, 2 * n)) + list(
        range(2 * n + k, 2 * n + 2 * k)
    )
    return full.transpose(order)


# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityState:
    """A state on an ordered roster of wires.

    Pure states may be carried as a ``vector``; ``matrix`` is then built on
    first access.
    """

    roster: tuple[int, ...]
    _matrix: np.ndarray | None = None
    vector: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.roster)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            v = self.vector.reshape(-1)
            object.__setattr__(self, "_matrix", np.outer(v, v.conj()))
        return self._matrix

    @classmethod
    def from_matrix(cls, roster: Sequence[int], matrix: np.ndarray) -> "DensityState":
        return cls(tuple(roster), np.asarray(matrix, dtype=complex))

    @classmethod
    def from_vector(cls, roster: Sequence[int], vector: np.ndarray) -> "DensityState":
        return cls(tuple(roster), None, np.asarray(vector, dtype=complex).reshape(-1))

    def check(self, tol_trace: float = 1e-10) -> None:
        m = self.matrix
        if abs(np.trace(m) - 1) > tol_trace:
            raise ValueError(f"trace {np.trace(m).real} != 1")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12:
            raise ValueError("state is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -1e-9:
            raise ValueError("state is not positive")


@dataclass(frozen=True, eq=False)
class HeisenbergOperator:
    """Hermitian operator on ``support`` (wires), stamped with iteration ``t``.

    ``t`` is the iteration after which the operator lives: ``t = T`` is the
    final observable, ``t = -1`` a fully contracted scalar.
    """

    support: tuple[int, ...]
    matrix: np.ndarray
    t: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = len(self.support)
        if m.shape != (2**n, 2**n):
            raise ValueError(f"matrix shape {m.shape} does not match support of {n} qubits")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "support", tuple(int(q) for q in self.support))

    @property
    def n(self) -> int:
        return len(self.support)

    def norm(self) -> float:
        if self.n == 0:
            return abs(float(self.matrix[0, 0].real))
        return float(np.max(np.abs(np.linalg.eigvalsh(_herm(self.matrix)))))

    def scaled(self, c: float) -> "HeisenbergOperator":
        return HeisenbergOperator(self.support, self.matrix * c, self.t)

    def dense(self, roster: Sequence[int]) -> np.ndarray:
        """Matrix of ``self ⊗ 1`` on the ordered ``roster``."""
        roster = tuple(roster)
        if not set(self.support) <= set(roster):
            raise ValueError(f"support {self.support} not contained in roster {roster}")
        extra = [w for w in roster if w not in self.support]
        k = len(extra)
        t = _kron_tensor(_as_tensor(self.matrix, self.n), self.n, np.eye(2**k), k)
        order = list(self.support) + extra
        perm = [order.index(w) for w in roster]
        n = len(roster)
        t = t.transpose(perm + [p + n for p in perm])
        return _as_matrix(t, n)

    @classmethod
    def identity(cls, t: int) -> "HeisenbergOperator":
        return cls((), np.ones((1, 1), dtype=complex), t)


def _herm(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


@dataclass(frozen=True)
class NoiseModel:
    """Two-qubit depolarizing after every gate and depolarized preparation.

    ``eps_U = 2p`` bounds the diamond distance of each noisy gate from the
    ideal one; ``eps_P = q/2`` is the trace distance of a noisy pure
    preparation from the ideal state.
    """

    p: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not (0 <= self.p <= 1 and 0 <= self.q <= 1):
            raise ValueError(f"noise probabilities must lie in [0, 1], got p={self.p}, q={self.q}")

    @property
    def eps_U(self) -> float:
        return 2 * self.p

    @property
    def eps_P(self) -> float:
        return self.q / 2

    @property
    def is_noiseless(self) -> bool:
        return self.p == 0 and self.q == 0

    def prepare(self, state: np.ndarray) -> np.ndarray:
        return (1 - self.q) * state + self.q * np.eye(2) / 2


# ----------------------------------------------------------------------
# Schrödinger picture


def apply_gate_vector(psi: np.ndarray, n: int, u: np.ndarray, pos: Sequence[int]) -> np.ndarray:
    t = psi.reshape((2,) * n)
    ut = u.reshape((2,) * (2 * len(pos)))
    k = len(pos)
    out = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(pos)))
    return np.moveaxis(out, list(range(k)), list(pos)).reshape(-1)


def apply_gate_density(rho: np.ndarray, n: int, u: np.ndarray, pos: Sequence[int]) -> np.ndarray:
    return _as_matrix(_conjugate(_as_tensor(rho, n), n, u, pos), n)


def depolarize_pair(rho: np.ndarray, n: int, pos: Sequence[int], p: float) -> np.ndarray:
    """``(1-p) rho + p tr_pair(rho) ⊗ 1/4`` on the given positions."""
    if p == 0:
        return rho
    t = _as_tensor(rho, n)
    reduced = _ptrace(t, n, pos)
    rest = [i for i in range(n) if i not in pos]
    mixed = _kron_tensor(reduced, n - len(pos), np.eye(2 ** len(pos)) / 2 ** len(pos), len(pos))
    order = rest + list(pos)
    perm = [order.index(i) for i in range(n)]
    mixed = mixed.transpose(perm + [x + n for x in perm])
    return (1 - p) * rho + p * _as_matrix(mixed, n)


def _pure_vector(state: np.ndarray, wire: int) -> np.ndarray:
    w, v = np.linalg.eigh(_herm(state))
    if abs(w[-1] - 1) > 1e-10:
        raise SchemeError(f"qubit {wire} has a mixed initial state; use mode='density'")
    return v[:, -1]


def run_schrodinger(
    scheme: InteractionScheme,
    noise: NoiseModel | None = None,
    mode: str = "pure",
    *,
    upto: int | None = None,
    trace_bath: bool = False,
    cap: int | None = None,
) -> DensityState:
    """Simulate the scheme forward and return the state after iteration ``upto``.

    Parameters
    ----------
    noise:
        Optional noise; requires ``mode='density'``.
    mode:
        ``'pure'`` (statevector, cap 20 qubits) or ``'density'`` (cap 12).
    trace_bath:
        Trace out the bath from the returned state.
    """
    if mode not in ("pure", "density"):
        raise ValueError(f"mode must be 'pure' or 'density', got {mode!r}")
    noise = noise or NoiseModel()
    if not noise.is_noiseless and mode == "pure":
        raise ValueError("noise requires mode='density'")
    upto = scheme.T if upto is None else upto
    cap = cap if cap is not None else (SIM_CAP_PURE if mode == "pure" else SIM_CAP_DENSITY)
    for t in range(upto + 1):
        if len(scheme.vertices(t)) > cap:
            raise CapExceeded(
                f"iteration {t} holds {len(scheme.vertices(t))} qubits, cap is {cap}", t
            )

    roster: list[int] = []
    if mode == "pure":
        psi = np.ones(1, dtype=complex)
        for it in scheme.iterations[: upto + 1]:
            for w, s in it.new_qubits + it.ancillas:
                psi = np.kron(psi, _pure_vector(s, w))
                roster.append(w)
            n = len(roster)
            for layer in it.layers:
                for edge, gate in layer:
                    if gate.is_identity:
                        continue
                    psi = apply_gate_vector(psi, n, gate.matrix, _embed_positions(roster, edge))
            if it.discards:
                rho = _discard_from_vector(psi, roster, it.discards)
                if rho is None:
                    raise SchemeError("discarding entangled ancillas requires mode='density'", it.index)
                psi, roster = rho
        state = DensityState.from_vector(roster, psi)
    else:
        rho = np.ones((1, 1), dtype=complex)
        for it in scheme.iterations[: upto + 1]:
            for w, s in it.new_qubits + it.ancillas:
                rho = np.kron(rho, noise.prepare(s))
                roster.append(w)
            n = len(roster)
            for layer in it.layers:
                for edge, gate in layer:
                    if gate.is_identity:
                        continue
                    pos = _embed_positions(roster, edge)
                    rho = apply_gate_density(rho, n, gate.matrix, pos)
                    rho = depolarize_pair(rho, n, pos, noise.p)
            if it.discards:
                st = partial_trace(DensityState.from_matrix(roster, rho), [w for w in roster if w not in it.discards])
                rho, roster = st.matrix, list(st.roster)
        state = DensityState.from_matrix(roster, rho)
    if trace_bath and scheme.bath_wires:
        state = partial_trace(state, [w for w in state.roster if w not in scheme.bath_wires])
    return state


def _discard_from_vector(psi, roster, discards):
    """Drop ancillas from a pure state if they factor out as a product."""
    n = len(roster)
    pos = _embed_positions(roster, discards)
    keep = [i for i in range(n) if i not in pos]
    t = psi.reshape((2,) * n).transpose(keep + pos).reshape(2 ** len(keep), 2 ** len(pos))
    u, s, vh = np.linalg.svd(t, full_matrices=False)
    if len(s) > 1 and s[1] > 1e-12:
        return None
    return u[:, 0] * s[0], [roster[i] for i in keep]


def state_at(scheme: InteractionScheme, t: int, mode: str = "density") -> DensityState:
    """Noiseless state of all live qubits after iteration ``t``."""
    return run_schrodinger(scheme, mode=mode, upto=t)


def partial_trace(state: DensityState, keep: Iterable[int]) -> DensityState:
    """Reduced state on the wires in ``keep`` (roster order is preserved)."""
    keep = set(keep)
    if not keep:
        raise ValueError("keep set must be non-empty")
    if not keep <= set(state.roster):
        raise ValueError(f"{sorted(keep - set(state.roster))} not in roster")
    drop = [i for i, w in enumerate(state.roster) if w not in keep]
    roster = tuple(w for w in state.roster if w in keep)
    if state._matrix is None and state.vector is not None:
        n = state.n
        kept = [i for i in range(n) if i not in drop]
        v = state.vector.reshape((2,) * n).transpose(kept + drop).reshape(2 ** len(kept), -1)
        return DensityState.from_matrix(roster, v @ v.conj().T)
    t = _ptrace(_as_tensor(state.matrix, state.n), state.n, drop)
    return DensityState.from_matrix(roster, _as_matrix(t, len(roster)))


def expectation(state: DensityState, observable: HeisenbergOperator) -> float:
    """``tr(rho O)``; the imaginary residual must be below 1e-10."""
    if not set(observable.support) <= set(state.roster):
        raise ValueError(f"observable support {observable.support} not in roster {state.roster}")
    if observable.n == 0:
        return float(observable.matrix[0, 0].real)
    if state._matrix is None and state.vector is not None:
        n = state.n
        pos = _embed_positions(state.roster, observable.support)
        phi = apply_gate_vector(state.vector, n, observable.matrix, pos)
        val = np.vdot(state.vector, phi)
    else:
        red = partial_trace(state, observable.support)
        perm = _embed_positions(red.roster, observable.support)
        k = red.n
        t = _as_tensor(red.matrix, k).transpose(perm + [p + k for p in perm])
        val = np.trace(_as_matrix(t, k) @ observable.matrix)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary part {val.imag:.3g}")
    return float(val.real)


# ----------------------------------------------------------------------
# Heisenberg picture


def _contract_fresh(t: np.ndarray, n: int, pos: int, state: np.ndarray) -> np.ndarray:
    """``tr_q[(sigma_q ⊗ 1) O]`` for the qubit at tensor position ``pos``."""
    # sum_{ab} sigma_{ba} O_{a.., b..}
    s = np.tensordot(t, state.T, axes=([pos, pos + n], [0, 1]))
    return s


def _trim(support: list[int], m: np.ndarray, tol: float = TRIM_TOL):
    """Drop qubits on which ``m`` acts as identity (max-entry tolerance)."""
    changed = True
    while changed and support:
        changed = False
        n = len(support)
        t = _as_tensor(m, n)
        for i in range(n):
            red = _ptrace(t, n, [i]) / 2
            back = _kron_tensor(red, n - 1, np.eye(2), 1)
            order = [j for j in range(n) if j != i] + [i]
            perm = [order.index(j) for j in range(n)]
            back = back.transpose(perm + [p + n for p in perm])
            if np.max(np.abs(back - t)) <= tol:
                support = support[:i] + support[i + 1 :]
                m = _as_matrix(red, n - 1)
                changed = True
                break
    return support, m


def heisenberg_step(
    scheme: InteractionScheme,
    op: HeisenbergOperator,
    cap: int = SIM_CAP_DENSITY,
    trim: bool = True,
) -> HeisenbergOperator:
    """Apply the adjoint of iteration ``op.t`` and return the operator at ``op.t - 1``."""
    k = op.t
    if k < 0:
        raise ValueError("operator is already fully contracted")
    it = scheme.iterations[k]
    support = list(op.support)
    t = _as_tensor(op.matrix, len(support))
    # adjoint of the discard channel tensors identity on ancillas: nothing to do
    for layer in reversed(it.layers):
        for edge, gate in reversed(layer):
            if gate.is_identity or not (set(edge) & set(support)):
                continue
            for q in edge:
                if q not in support:
                    n = len(support)
                    if n + 1 > cap:
                        raise CapExceeded(
                            f"Heisenberg support exceeds {cap} qubits at iteration {k}", k
                        )
                    t = _kron_tensor(t, n, np.eye(2), 1)
                    support.append(q)
            n = len(support)
            t = _conjugate(t, n, gate.matrix.conj().T, _embed_positions(support, edge))
    states = it.fresh_states
    for w in [q for q in support if q in states]:
        n = len(support)
        i = support.index(w)
        t = _contract_fresh(t, n, i, states[w])
        support.pop(i)
    n = len(support)
    m = _as_matrix(t, n)
    if trim:
        support, m = _trim(support, m)
    return HeisenbergOperator(tuple(support), m, k - 1)


def heisenberg_evolve(
    scheme: InteractionScheme,
    observable: HeisenbergOperator,
    down_to: int,
    cap: int = SIM_CAP_DENSITY,
    trim: bool = True,
) -> HeisenbergOperator:
    """Evolve back through iterations ``observable.t .. down_to + 1``.

    ``down_to = -1`` contracts everything into a scalar, which equals the
    expectation value in the final state.
    """
    if not -1 <= down_to <= observable.t:
        raise ValueError(f"down_to must lie in [-1, {observable.t}], got {down_to}")
    live = set(scheme.live_wires(observable.t)) if observable.t >= 0 else set()
    if not set(observable.support) <= live:
        raise SchemeError(f"observable support {observable.support} not in G_{observable.t}")
    op = observable
    while op.t > down_to:
        op = heisenberg_step(scheme, op, cap=cap, trim=trim)
    return op


def heisenberg_trajectory(
    scheme: InteractionScheme,
    observable: HeisenbergOperator,
    down_to: int = 0,
    cap: int = SIM_CAP_DENSITY,
) -> dict[int, HeisenbergOperator]:
    """All intermediate operators ``{t: O_t}`` from ``observable.t`` to ``down_to``."""
    out = {observable.t: observable}
    op = observable
    while op.t > down_to:
        op = heisenberg_step(scheme, op, cap=cap)
        out[op.t] = op
    return out


def spectral_spread(op: HeisenbergOperator | np.ndarray) -> tuple[float, float]:
    """``(delta, c)`` with ``delta = min_c ||O - c 1||`` attained at ``c``."""
    m = op.matrix if isinstance(op, HeisenbergOperator) else np.asarray(op)
    w = np.linalg.eigvalsh(_herm(m))
    lo, hi = float(w[0]), float(w[-1])
    return (hi - lo) / 2, (hi + lo) / 2


# ----------------------------------------------------------------------
# JSON interfaces


def _mat_json(m: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(m).reshape(-1)]


def observable_to_json(op: HeisenbergOperator) -> str:
    return json.dumps({"support": list(op.support), "matrix": _mat_json(op.matrix)})


def observable_from_json(text: str | Mapping, scheme: InteractionScheme | None = None) -> HeisenbergOperator:
    """Read ``{support, matrix}``; support labels refer to qubits of ``G_T``."""
    doc = json.loads(text) if isinstance(text, str) else text
    support = [int(q) for q in doc["support"]]
    n = len(support)
    flat = np.array([complex(a, b) for a, b in doc["matrix"]], dtype=complex)
    if flat.size != 4**n:
        raise ValueError(f"matrix has {flat.size} entries, expected {4**n}")
    m = flat.reshape(2**n, 2**n)
    if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12:
        raise ValueError("observable matrix is not Hermitian")
    if scheme is not None:
        support = [scheme.wire_of(q) for q in support]
        t = scheme.T
    else:
        t = 0
    return HeisenbergOperator(tuple(support), m, t)


def state_to_json(state: DensityState) -> str:
    return json.dumps({"roster": list(state.roster), "matrix": _mat_json(state.matrix)})


def local_observable(matrix: np.ndarray, support: Sequence[int], t: int) -> HeisenbergOperator:
    return HeisenbergOperator(tuple(support), np.asarray(matrix, dtype=complex), t)


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_string(s: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in s:
        out = np.kron(out, PAULI[ch])
    return out


def random_hermitian(n: int, rng: np.random.Generator, normalize: bool = True) -> np.ndarray:
    """GUE sample on ``n`` qubits, scaled to unit operator norm."""
    d = 2**n
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (a + a.conj().T) / 2
    if normalize:
        h = h / np.max(np.abs(np.linalg.eigvalsh(h)))
    return h


def random_state(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    d = 2**n
    rank = rank or d
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def max_mixed(n: int) -> np.ndarray:
    return np.eye(2**n, dtype=complex) / 2**n


def fsum_complex(values: Iterable[complex]) -> complex:
    vals = list(values)
    return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))
