"""Mixing rates of Heisenberg-evolved observables.

``delta_O(t)`` is the spectral spread of ``O_t``, the observable after the
adjoints of iterations ``t+1 .. T``. It bounds how much the expectation
value can depend on the state at iteration ``t``. This module computes
per-observable profiles, randomized lower bounds on the worst case over
observables, transfer-operator envelopes for translation-invariant
MPS-type schemes, covariance checks and the stabilizer-sampling
certification estimator.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._util import fmt, ordered_map
from .cone import _graph, ball, trace_cone
from .scheme import SIM_CAP_DENSITY, InteractionScheme, SchemeError
from .sim import (
    CapExceeded,
    DensityState,
    HeisenbergOperator,
    apply_gate_density,
    _embed_positions,
    expectation,
    heisenberg_evolve,
    heisenberg_step,
    pauli_string,
    partial_trace,
    random_hermitian,
    run_schrodinger,
    spectral_spread,
)
from .stabilizer import enumerate_stabilizer_states, sample_stabilizer_state

__all__ = [
    "MixingProfile",
    "mixing_profile",
    "profile_to_csv",
    "profile_header_json",
    "estimate_delta_sup",
    "TransferOperator",
    "build_transfer_operator",
    "MixingTimeResult",
    "mixing_time_bound",
    "CovarianceResult",
    "covariance",
    "CertificationResult",
    "certify_mixing",
    "certify_matrix",
]

FIT_FLOOR = 1e-12
FIT_MIN_POINTS = 4


# ----------------------------------------------------------------------
# Per-observable profiles


@dataclass(frozen=True)
class MixingProfile:
    """``delta_O(t)`` for ``t = t_min .. T`` and an optional exponential fit.

    The fit models ``delta_O(t) ~ c_fit * exp(-rate * (T - t))``. It is
    ``None`` when fewer than four values exceed ``1e-12``.
    """

    observable_id: str
    T: int
    values: dict[int, float]
    fit: tuple[float, float, float] | None = None  # (c_fit, rate, rms residual)
    fit_note: str = ""

    def fitted(self, t: int) -> float | None:
        if self.fit is None:
            return None
        c, rate, _ = self.fit
        return c * math.exp(-rate * (self.T - t))


def _fit(values: dict[int, float], T: int):
    pts = [(T - t, math.log(v)) for t, v in sorted(values.items()) if v > FIT_FLOOR]
    if len(pts) < FIT_MIN_POINTS:
        return None, f"fit refused: {len(pts)} points above {FIT_FLOOR:g}, need {FIT_MIN_POINTS}"
    x, y = np.array(pts).T
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (intercept + slope * x)) ** 2)))
    return (float(np.exp(intercept)), float(-slope), resid), ""


def mixing_profile(
    scheme: InteractionScheme,
    observable: HeisenbergOperator,
    t_min: int = 0,
    observable_id: str = "O",
    cap: int = SIM_CAP_DENSITY,
) -> MixingProfile:
    """Spectral spread of every ``O_t`` with ``t_min <= t <= observable.t``."""
    values = {observable.t: spectral_spread(observable)[0]}
    op = observable
    while op.t > t_min:
        try:
            op = heisenberg_step(scheme, op, cap=cap)
        except CapExceeded as exc:
            raise CapExceeded(
                f"{exc}; deepest reachable iteration is t={op.t}", exc.iteration
            ) from None
        values[op.t] = spectral_spread(op)[0]
    fit, note = _fit(values, observable.t)
    return MixingProfile(observable_id, observable.t, dict(sorted(values.items())), fit, note)


def profile_to_csv(profile: MixingProfile) -> str:
    lines = ["t,delta,fitted"]
    for t, v in sorted(profile.values.items()):
        f = profile.fitted(t)
        lines.append(f"{t},{fmt(v)},{'' if f is None else fmt(f)}")
    return "\n".join(lines) + "\n"


def profile_header_json(profile: MixingProfile) -> str:
    fit = None
    if profile.fit is not None:
        c, rate, res = profile.fit
        fit = {"c_fit": fmt(c), "lambda": fmt(rate), "residual": fmt(res)}
    return json.dumps({"observable": profile.observable_id, "T": profile.T, "fit": fit, "note": profile.fit_note})


# ----------------------------------------------------------------------
# Randomized lower bound on the worst case


def _sample_observable(scheme: InteractionScheme, r: int, rng: np.random.Generator, kind: int):
    vertices = sorted(scheme.vertices(scheme.T))
    center = int(rng.choice(vertices))
    support = sorted(ball(_graph(scheme, scheme.T), center, r))
    n = len(support)
    if kind == 0:
        while True:
            letters = rng.integers(0, 4, size=n)
            if letters.any():
                break
        m = pauli_string("".join("IXYZ"[i] for i in letters))
    else:
        m = random_hermitian(n, rng)
    return HeisenbergOperator(tuple(support), m, scheme.T)


def estimate_delta_sup(
    scheme: InteractionScheme,
    r: int,
    t: int,
    num_samples: int,
    seed: int = 0,
    threads: int | None = None,
    cap: int = SIM_CAP_DENSITY,
) -> float:
    """Lower bound on the worst-case mixing rate ``delta(t, r)``.

    Sample ``i`` draws from its own stream keyed by ``(seed, i)``, so the
    maximum only grows as ``num_samples`` increases and does not depend on
    the thread count. Even samples are random Pauli strings, odd samples are
    random Hermitian matrices; both have unit operator norm and live on a
    graph ball of radius ``r`` in ``G_T``.
    """
    if r < 0:
        raise ValueError("no ball of negative radius exists")
    if not scheme.vertices(scheme.T):
        raise ValueError("G_T has no vertices")
    if not 0 <= t <= scheme.T:
        raise ValueError(f"t={t} out of range [0, {scheme.T}]")

    def one(i: int) -> float:
        rng = np.random.default_rng([seed, i])
        op = _sample_observable(scheme, r, rng, i % 2)
        return spectral_spread(heisenberg_evolve(scheme, op, t, cap=cap))[0]

    vals = ordered_map(one, range(num_samples), threads)
    return max(vals, default=0.0)


# ----------------------------------------------------------------------
# Transfer operators


@dataclass(frozen=True)
class TransferOperator:
    """Bath-to-bath channel of one iteration, column-stacking convention.

    ``vec(Lambda(rho)) = matrix @ vec(rho)`` with ``vec`` stacking columns.
    """

    matrix: np.ndarray
    bath: tuple[int, ...]
    eigenvalues: np.ndarray
    mixing: bool
    fixed_point: np.ndarray | None

    @property
    def dim(self) -> int:
        return 2 ** len(self.bath)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.matrix @ rho.reshape(-1, order="F")).reshape(d, d, order="F")

    def limit(self) -> np.ndarray:
        """Superoperator of ``rho -> tr(rho) sigma``."""
        if self.fixed_point is None:
            raise ValueError("channel is not mixing; the limit is not a replacement channel")
        d = self.dim
        return np.outer(self.fixed_point.reshape(-1, order="F"), np.eye(d).reshape(-1, order="F"))


def _iteration_template(scheme: InteractionScheme, k: int):
    it = scheme.iterations[k]
    fresh = list(it.fresh_wires)
    rename = {w: i for i, w in enumerate(fresh)}
    rename.update({w: f"b{w}" for w in scheme.bath_wires})
    layers = []
    for layer in it.layers:
        entries = []
        for edge, gate in layer:
            if gate.is_identity:
                continue
            if any(q not in rename for q in edge):
                raise SchemeError(
                    f"gate on edge {edge} touches a qubit that is neither fresh nor bath; "
                    "the scheme is not MPS-type",
                    k,
                )
            entries.append(((rename[edge[0]], rename[edge[1]]), gate.matrix))
        layers.append(entries)
    states = [it.fresh_states[w] for w in fresh]
    return fresh, states, layers, set(it.discards)


def _same_template(a, b) -> bool:
    _, sa, la, _ = a
    _, sb, lb, _ = b
    if len(sa) != len(sb) or any(not np.array_equal(x, y) for x, y in zip(sa, sb)):
        return False
    if len(la) != len(lb):
        return False
    for x, y in zip(la, lb):
        if len(x) != len(y):
            return False
        for (ea, ma), (eb, mb) in zip(x, y):
            if ea != eb or not np.array_equal(ma, mb):
                return False
    return True


def build_transfer_operator(scheme: InteractionScheme, tol: float = 1e-9) -> TransferOperator:
    """Channel that one translation-invariant iteration induces on the bath."""
    if scheme.T < 1:
        raise SchemeError("need at least one iteration after preparation")
    bath = tuple(scheme.bath_wires)
    if not bath:
        raise SchemeError("scheme has no bath; not MPS-type")
    if len(bath) > 4:
        raise SchemeError("bath larger than 4 qubits is not supported")
    ref = _iteration_template(scheme, 1)
    for k in range(2, scheme.T + 1):
        if not _same_template(ref, _iteration_template(scheme, k)):
            raise SchemeError("iteration differs from iteration 1; the scheme is not translation invariant", k)

    fresh, states, layers, _ = ref
    it1 = scheme.iterations[1]
    roster = list(fresh) + list(bath)
    nf, nb = len(fresh), len(bath)
    n = nf + nb
    d = 2**nb
    env = np.ones((1, 1), dtype=complex)
    for s in states:
        env = np.kron(env, s)
    cols = []
    for j in range(d):
        for i in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            rho = np.kron(env, e)
            for layer in it1.layers:
                for edge, gate in layer:
                    if gate.is_identity:
                        continue
                    rho = apply_gate_density(rho, n, gate.matrix, _embed_positions(roster, edge))
            red = partial_trace(DensityState.from_matrix(roster, rho), bath).matrix
            cols.append(red.reshape(-1, order="F"))
    S = np.array(cols).T

    ev = np.linalg.eigvals(S)
    order = np.lexsort((np.round(np.angle(ev), 12), -np.round(np.abs(ev), 12)))
    ev = ev[order]
    unit = int(np.sum(np.abs(ev) > 1 - tol))
    sigma = None
    mixing = False
    if unit == 1:
        _, sv, vh = np.linalg.svd(S - np.eye(d * d))
        if sv[-1] < tol and (len(sv) < 2 or sv[-2] > tol):
            v = vh[-1].conj().reshape(d, d, order="F")
            v = v / np.trace(v)
            v = (v + v.conj().T) / 2
            if np.linalg.eigvalsh(v)[0] >= -tol:
                sigma = v
                mixing = True
    return TransferOperator(S, bath, ev, mixing, sigma)


@dataclass(frozen=True)
class MixingTimeResult:
    """``norms[n]`` lower-bounds ``||Lambda^n - Lambda_inf||_{1->1}`` by search;
    ``envelope[n]`` is a guaranteed upper bound."""

    norms: dict[int, float]
    envelope: dict[int, float]
    converged: dict[int, bool]

    def value(self, n: int) -> float:
        """Search value when converged, otherwise the upper envelope."""
        return self.norms[n] if self.converged[n] else self.envelope[n]

    def t1(self, eps: float) -> int | None:
        """First ``n`` with norm at most ``eps``; ``None`` beyond the horizon."""
        if eps >= 2:
            return 0
        for n in sorted(self.norms):
            if self.value(n) <= eps:
                return n
        return None


def _trace_norm_herm(m: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))


def _one_to_one(M: np.ndarray, d: int, rng: np.random.Generator, starts: int):
    def f(x):
        psi = x[:d] + 1j * x[d:]
        nrm = np.linalg.norm(psi)
        if nrm < 1e-300:
            return 0.0
        psi = psi / nrm
        rho = np.outer(psi, psi.conj())
        out = (M @ rho.reshape(-1, order="F")).reshape(d, d, order="F")
        return -_trace_norm_herm(out)

    inits = [np.concatenate([np.eye(d)[i], np.zeros(d)]) for i in range(d)]
    inits += [rng.normal(size=2 * d) for _ in range(starts)]
    # coarse search from every start, then polish the three best to 1e-9
    coarse = [
        minimize(f, x0, method="Nelder-Mead", options={"xatol": 1e-3, "fatol": 1e-4, "maxfev": 120 * d})
        for x0 in inits
    ]
    coarse.sort(key=lambda r: float(r.fun))
    best, ok = 0.0, True
    for r0 in coarse[:3]:
        res = minimize(
            f, r0.x, method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-9, "maxiter": 4000 * d, "maxfev": 8000 * d},
        )
        val = -float(res.fun)
        if val > best:
            best, ok = val, bool(res.success)
    return best, ok


def mixing_time_bound(
    transfer_op: TransferOperator, n_max: int, starts: int = 20, seed: int = 0
) -> MixingTimeResult:
    """``||Lambda^n - Lambda_inf||_{1->1}`` for ``n = 0 .. n_max``.

    The norm is maximized over pure input states, which are the extreme
    points of the Hermitian trace-norm ball. Each ``n`` uses the basis
    states plus ``starts`` random starting points.
    """
    if not transfer_op.mixing:
        raise ValueError("transfer operator is not mixing")
    d = transfer_op.dim
    S = transfer_op.matrix
    Sinf = transfer_op.limit()
    norms, env, conv = {}, {}, {}
    P = np.eye(d * d, dtype=complex)
    for n in range(n_max + 1):
        M = P - Sinf
        rng = np.random.default_rng([seed, n])
        norms[n], conv[n] = _one_to_one(M, d, rng, starts)
        env[n] = min(2.0, math.sqrt(d) * float(np.linalg.norm(M, 2)))
        P = S @ P
    return MixingTimeResult(norms, env, conv)


# ----------------------------------------------------------------------
# Covariance


@dataclass(frozen=True)
class CovarianceResult:
    cov: float
    bound: float
    t_0: int
    delta_E: float
    delta_F: float
    product_bound: float = field(default=0.0)

    def __iter__(self):
        return iter((self.cov, self.bound, self.t_0))


def _final_state(scheme: InteractionScheme) -> DensityState:
    try:
        return run_schrodinger(scheme, mode="pure")
    except SchemeError:
        return run_schrodinger(scheme, mode="density")


def _intersection_time(scheme: InteractionScheme, a, b) -> int:
    ca = trace_cone(scheme, a, 0)
    cb = trace_cone(scheme, b, 0)
    for k in range(scheme.T, 0, -1):
        if ca.touched[k] & cb.touched[k]:
            return k
    if ca.support_trace[0] & cb.support_trace[0]:
        return 0
    return -1


def covariance(
    scheme: InteractionScheme,
    E: HeisenbergOperator,
    F: HeisenbergOperator,
    state: DensityState | None = None,
) -> CovarianceResult:
    """Connected correlator of ``E`` and ``F`` and its mixing-rate bound.

    ``t_0`` is the last iteration at which the two combinatorial cones share
    a qubit; above it the Heisenberg evolution factorizes. The reported
    ``bound`` is ``6 max(dE, dF) ||E|| ||F||`` with ``dE``, ``dF`` the mixing
    rates of ``E/||E||`` and ``F/||F||`` at ``t_0``. ``product_bound`` is the
    sharper ``2 ||E_t0 - c|| ||F_t0 - c'||`` that follows from the
    factorization.
    """
    if set(E.support) & set(F.support):
        raise ValueError("E and F must have disjoint supports")
    if state is None:
        state = _final_state(scheme)
    joint = HeisenbergOperator(E.support + F.support, np.kron(E.matrix, F.matrix), E.t)
    cov = expectation(state, joint) - expectation(state, E) * expectation(state, F)
    t0 = _intersection_time(scheme, E.support, F.support)
    nE, nF = E.norm(), F.norm()
    if t0 < 0 or nE == 0 or nF == 0:
        dE = dF = 0.0
    else:
        dE = spectral_spread(heisenberg_evolve(scheme, E, t0))[0] / nE
        dF = spectral_spread(heisenberg_evolve(scheme, F, t0))[0] / nF
    bound = 6 * max(dE, dF) * nE * nF
    return CovarianceResult(float(cov), bound, t0, dE, dF, 2 * dE * dF * nE * nF)


# ----------------------------------------------------------------------
# Certification by stabilizer sampling


@dataclass(frozen=True)
class CertificationResult:
    """Moments of ``X = <psi|O_t|psi>`` over stabilizer states and the estimator ``L``.

    With exact moments ``L**2 = ||O'||_F**2 + tr(O)**2 (1 - 1/d)`` where
    ``O' = O - tr(O)/d``, hence ``L >= ||O'||_inf``.
    """

    num_samples: int
    n_qubits: int
    mode: str
    mean_X: float
    mean_X2: float
    se_X: float
    se_X2: float
    L: float
    R_exact: float | None
    warnings: tuple[str, ...] = ()

    def to_json(self) -> str:
        doc = {
            "num_samples": self.num_samples,
            "n_qubits": self.n_qubits,
            "mode": self.mode,
            "mean_X": fmt(self.mean_X),
            "mean_X2": fmt(self.mean_X2),
            "se_X": fmt(self.se_X),
            "se_X2": fmt(self.se_X2),
            "L": fmt(self.L),
            "R_exact": None if self.R_exact is None else fmt(self.R_exact),
            "warnings": list(self.warnings),
        }
        return json.dumps(doc)


SAMPLED_CAP = 5
EXACT_CAP = 2
_CHUNK = 256


def _moments(xs: list[float]) -> tuple[float, float, float, float]:
    N = len(xs)
    m1 = math.fsum(xs) / N
    m2 = math.fsum(x * x for x in xs) / N
    if N < 2:
        return m1, m2, 0.0, 0.0
    v1 = math.fsum((x - m1) ** 2 for x in xs) / (N - 1)
    v2 = math.fsum((x * x - m2) ** 2 for x in xs) / (N - 1)
    return m1, m2, math.sqrt(v1 / N), math.sqrt(v2 / N)


def certify_matrix(
    m: np.ndarray,
    num_samples: int = 1000,
    seed: int = 0,
    mode: str = "sampled",
    threads: int | None = None,
) -> CertificationResult:
    """Run the certification protocol on an explicit ``2^n x 2^n`` operator."""
    m = np.asarray(m, dtype=complex)
    d = m.shape[0]
    n = d.bit_length() - 1
    if 2**n != d or m.shape != (d, d):
        raise ValueError("operator must be 2^n x 2^n")
    if mode == "exact":
        if n > EXACT_CAP:
            raise ValueError(f"exact enumeration supports at most {EXACT_CAP} qubits, got {n}")
        states = enumerate_stabilizer_states(n)
        xs = np.einsum("si,ij,sj->s", states.conj(), m, states).real.tolist()
    elif mode == "sampled":
        if n > SAMPLED_CAP:
            raise ValueError(f"sampling supports at most {SAMPLED_CAP} qubits, got {n}")
        if num_samples < 1:
            raise ValueError("num_samples must be positive")

        def chunk(j: int) -> list[float]:
            rng = np.random.default_rng([seed, j])
            size = min(_CHUNK, num_samples - j * _CHUNK)
            out = []
            for _ in range(size):
                psi = sample_stabilizer_state(n, rng)
                out.append(float(np.vdot(psi, m @ psi).real))
            return out

        parts = ordered_map(chunk, range(-(-num_samples // _CHUNK)), threads)
        xs = [x for p in parts for x in p]
    else:
        raise ValueError(f"mode must be 'sampled' or 'exact', got {mode!r}")

    m1, m2, se1, se2 = _moments(xs)
    arg = d * (m2 * (d + 1) - 2 * m1 * m1)
    notes = []
    if arg < 0:
        notes.append(f"estimator argument {arg:.3g} clamped to 0")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
        arg = 0.0
    shifted = m - np.trace(m) / d * np.eye(d)
    R = float(np.linalg.norm((shifted + shifted.conj().T) / 2, 2))
    return CertificationResult(len(xs), n, mode, m1, m2, se1, se2, math.sqrt(arg), R, tuple(notes))


def certify_mixing(
    scheme: InteractionScheme,
    observable: HeisenbergOperator,
    t: int,
    num_samples: int = 1000,
    seed: int = 0,
    mode: str = "sampled",
    threads: int | None = None,
) -> CertificationResult:
    """Evolve ``observable`` back to ``t`` and certify its mixing by sampling."""
    op = heisenberg_evolve(scheme, observable, t)
    return certify_matrix(op.matrix, num_samples, seed, mode, threads)
