"""Closed-form resource and error bounds.

Every function here is plain arithmetic. Where a result is only meaningful
to leading order it carries ``leading_order=True`` together with the
formula it evaluated, so callers never compare it at a tight tolerance.

Iteration conventions follow the rest of the package: ``N_U(t)`` and
``N_Q(t)`` count the cone of iterations ``t+1 .. T`` and ``delta(t)`` is the
mixing rate of ``O_t``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from ._util import fmt

__all__ = [
    "GeometryConstants",
    "PATH",
    "SQUARE_GRID",
    "DecayModel",
    "simple_energy_error",
    "improved_stability_bound",
    "DmeraBounds",
    "dmera_bounds",
    "dmera_radius_bound",
    "dmera_error_bound",
    "ri_bounds",
    "ri_integral",
    "ri_error_bound",
    "Table1Row",
    "table1_row",
    "table1_csv",
    "CutoffResult",
    "kim_optimal_cutoff",
]


@dataclass(frozen=True)
class GeometryConstants:
    """A ball of radius ``r`` holds at most ``C_V r^d`` vertices and ``C_E r^d`` edges."""

    d: int
    C_V: float
    C_E: float

    def __post_init__(self):
        if self.C_V <= 0 or self.C_E <= 0:
            raise ValueError("C_V and C_E must be positive")


PATH = GeometryConstants(1, 2.0, 2.0)
SQUARE_GRID = GeometryConstants(2, 4.0, 8.0)


@dataclass(frozen=True)
class DecayModel:
    """``delta(t, r) = c r^alpha exp(-gamma (T - t)) + floor``."""

    c: float
    alpha: float
    gamma: float
    floor: float = 0.0
    r0: float = 0.0

    def __post_init__(self):
        if self.c < 0 or self.alpha < 0 or self.floor < 0:
            raise ValueError("c, alpha and floor must be non-negative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def __call__(self, t: float, r: float, T: float) -> float:
        return self.c * r**self.alpha * math.exp(-self.gamma * (T - t)) + self.floor


def _check_rate(lam: float) -> None:
    if not lam > 0:
        raise ValueError(f"decay rate must be positive, got {lam}")


# ----------------------------------------------------------------------
# Stability bounds


def simple_energy_error(delta_t2: float, eps_U: float, eps_P: float, N_U: int, N_Q: int) -> float:
    """``2 delta + eps_U N_U + eps_P N_Q``."""
    if min(delta_t2, eps_U, eps_P, N_U, N_Q) < 0:
        raise ValueError("all inputs must be non-negative")
    return 2 * delta_t2 + eps_U * N_U + eps_P * N_Q


def improved_stability_bound(
    delta_profile: dict[int, float],
    eps_U: float,
    eps_P: float,
    cone_counts: dict[int, tuple[int, int]],
    t: int,
    convention: str = "main",
) -> float:
    """Error of running the noisy cone from iteration ``t`` with any start state.

    With ``dN(k) = N(k-1) - N(k)`` the cone elements first met at iteration
    ``k``::

        main:       2 delta(t) + sum_{k=t+1}^{T} delta(k-1) [eps_U dN_U(k) + eps_P dN_Q(k)]
        corollary:    delta(t) + sum_{k=t+1}^{T} delta(k)   [eps_U dN_U(k) + eps_P dN_Q(k)]
    """
    if convention not in ("main", "corollary"):
        raise ValueError(f"unknown convention {convention!r}")
    T = max(cone_counts)
    missing = [k for k in range(t, T + 1) if k not in delta_profile or k not in cone_counts]
    if missing:
        raise ValueError(f"profile or counts missing iterations {missing}")
    total = (2 if convention == "main" else 1) * delta_profile[t]
    for k in range(t + 1, T + 1):
        du = cone_counts[k - 1][0] - cone_counts[k][0]
        dq = cone_counts[k - 1][1] - cone_counts[k][1]
        if du < 0 or dq < 0:
            raise ValueError(f"cone counts grow from t={k - 1} to t={k}; they must not increase with t")
        weight = delta_profile[k - 1] if convention == "main" else delta_profile[k]
        total += weight * (eps_U * du + eps_P * dq)
    return total


# ----------------------------------------------------------------------
# DMERA


@dataclass(frozen=True)
class DmeraBounds:
    radius: float
    N_U: float
    N_Q: float
    per_iteration: dict[int, float]

    def __iter__(self):
        return iter((self.radius, self.N_U, self.N_Q, self.per_iteration))


def dmera_radius_bound(T: int, t: int, D: int, R: float) -> float:
    """Radius of ``O_t`` from the halving recursion, ``R 2^-n + (D+2)(2 - 2^-n)``."""
    n = T - t
    return R * 2.0**-n + (D + 2) * (2 - 2.0**-n)


def dmera_bounds(T: int, t: int, D: int, R: float) -> DmeraBounds:
    if not 0 <= t <= T or D < 1 or R < 0:
        raise ValueError("need 0 <= t <= T, D >= 1 and R >= 0")
    per = {k: D * (2 * dmera_radius_bound(T, k, D, R) + D) for k in range(t, T + 1)}
    return DmeraBounds(
        radius=dmera_radius_bound(T, t, D, R),
        N_U=(T - t) * D * (2 * R + 5 * D + 8),
        N_Q=2 * R + 2 * D * (T - t),
        per_iteration=per,
    )


def _geometric(lam: float, n: int) -> float:
    """``(e^lam - e^{-n lam}) / (e^lam - 1)``, the sum of ``e^{-lam j}`` for ``j = 0..n``."""
    return (math.exp(lam) - math.exp(-n * lam)) / math.expm1(lam)


def dmera_error_bound(
    T: int, t: int, D: int, R: float, eps_U: float, eps_P: float, lam: float
) -> float:
    """Noisy-cone error for DMERA when ``delta(k) = exp(-lam (T - k))``."""
    _check_rate(lam)
    g = _geometric(lam, T - t)
    return eps_U * D * g * (2 * R + 5 * D + 8) + eps_P * (2 * R + 2 * D * g) + 2 * math.exp(-lam * (T - t))


# ----------------------------------------------------------------------
# MPS and repeated interactions


def ri_bounds(geom: GeometryConstants, T: int, t: int, D: int, R: float) -> tuple[float, float]:
    """``(N_Q_bound, N_U_bound)`` for a ``d``-dimensional repeated-interaction scheme."""
    d = geom.d
    nq = geom.C_V * (R + (T - t) * D) ** d
    nu = geom.C_E * ((R + (T - t + 2) * D + 1) ** (d + 1) - (R + D + 1) ** (d + 1))
    return nq, nu


def ri_integral(order: int, T: int, t: int, D: int, R: float, lam: float) -> float:
    """Closed forms for ``int_0^L (R + D + x D)^order e^{-lam x} dx`` with ``L = T - t + 1``.

    Orders 1 and 2 are the published expressions; order 0 is
    ``(1 - e^{-lam L}) / lam``.
    """
    _check_rate(lam)
    L = T - t + 1
    e = math.exp(-lam * L)
    a = R + D
    if order == 0:
        return -math.expm1(-lam * L) / lam
    if order == 1:
        return (1 - e) / lam**2 * (lam * R + D * lam + D) - e / lam**2 * (D * lam * L)
    if order == 2:
        return (1 - e) / lam**3 * (lam**2 * a**2 + 2 * lam * D * a + 2 * D**2) - e / lam**3 * (
            2 * lam**2 * D * a * L + D**2 * lam**2 * L**2
        )
    raise ValueError("closed forms exist for orders 0, 1 and 2")


def ri_error_bound(
    geom: GeometryConstants,
    T: int,
    t: int,
    D: int,
    R: float,
    eps_U: float,
    eps_P: float,
    lam: float,
    form: str = "closed",
) -> float:
    """Noisy-cone error for MPS / RI-d when ``delta(k) = exp(-lam (T - k))``.

    ``form`` is ``closed_d1``, ``closed_d2`` (``closed`` picks by ``geom.d``)
    or ``asymptotic``.
    """
    _check_rate(lam)
    d = geom.d
    tail = 2 * math.exp(-lam * (T - t))
    if form == "closed":
        form = f"closed_d{d}"
    if form in ("closed_d1", "closed_d2"):
        if int(form[-1]) != d:
            raise ValueError(f"form {form} does not match d={d}")
        unit = 2 * eps_U * geom.C_E * D * (d + 1) * ri_integral(d, T, t, D, R, lam)
        prep = 2 * eps_P * geom.C_V * d * D * ri_integral(d - 1, T, t, D, R, lam)
        return unit + prep + tail
    if form == "asymptotic":
        grow = math.exp(lam / D * (R + 1))
        prep = 2 * geom.C_V * eps_P * math.factorial(d) * D**d * grow / lam**d
        unit = 2 * geom.C_E * eps_U * math.factorial(d + 1) * D ** (d + 1) * grow / lam ** (d + 1)
        return prep + unit + tail
    raise ValueError(f"unknown form {form!r}")


# ----------------------------------------------------------------------
# Resource table


_TABLE = {
    "dmera": {
        "error": r"\epsilon_U \lambda^{-1}D^2+\epsilon_P \lambda^{-1}D",
        "gates_full": r"2^TD",
        "qubits_full": r"2^T",
        "gates_cone": r"t_\epsilon D^2",
        "qubits_cone": r"t_\epsilon D",
    },
    "mps": {
        "error": r"\epsilon_U \lambda^{-2}D^2+\epsilon_P \lambda^{-1}D",
        "gates_full": r"T^2D^2",
        "qubits_full": r"TD",
        "gates_cone": r"t_{\epsilon}^2D^2",
        "qubits_cone": r"t_{\epsilon}D",
    },
    "ri": {
        "error": r"\epsilon_U \lambda^{-d-1}D^{d+1}+\epsilon_P \lambda^{-d}D^d",
        "gates_full": r"T^{d+1}D^{d+1}",
        "qubits_full": r"TD^d",
        "gates_cone": r"t_{\epsilon}^{d+1}D^{d+1}",
        "qubits_cone": r"t_{\epsilon}D^{d}",
    },
}
_TEPS = r"t_\epsilon=\lambda^{-1}\log(\epsilon_U^{-1})"


@dataclass(frozen=True)
class Table1Row:
    scheme: str
    error_leading: float
    gates_full: float
    qubits_full: float
    gates_cone: float
    qubits_cone: float
    t_eps: float
    formulas: dict[str, str] = field(default_factory=dict)
    leading_order: bool = True

    def __iter__(self):
        return iter(
            (self.error_leading, self.gates_full, self.qubits_full, self.gates_cone, self.qubits_cone, self.t_eps)
        )

    def to_json(self) -> str:
        doc = {
            "scheme": self.scheme,
            "leading_order": self.leading_order,
            "values": {
                k: fmt(getattr(self, k))
                for k in ("error_leading", "gates_full", "qubits_full", "gates_cone", "qubits_cone", "t_eps")
            },
            "formulas": self.formulas,
        }
        return json.dumps(doc, sort_keys=True)


def table1_row(
    preset: str, lam: float, eps_U: float, eps_P: float, D: int, T: int, d: int | None = None
) -> Table1Row:
    """Leading-order error and resource counts for full preparation and for the cone."""
    _check_rate(lam)
    if not 0 < eps_U <= 1:
        raise ValueError("eps_U must lie in (0, 1]")
    t_eps = math.log(1 / eps_U) / lam
    if preset == "dmera":
        vals = (eps_U / lam * D**2 + eps_P / lam * D, 2**T * D, 2**T, t_eps * D**2, t_eps * D)
        name = "dmera"
    elif preset == "mps" or (preset == "ri" and d is None):
        vals = (eps_U / lam**2 * D**2 + eps_P / lam * D, T**2 * D**2, T * D, t_eps**2 * D**2, t_eps * D)
        name = "mps"
    elif preset == "ri":
        vals = (
            eps_U * lam ** (-d - 1) * D ** (d + 1) + eps_P * lam**-d * D**d,
            T ** (d + 1) * D ** (d + 1),
            T * D**d,
            t_eps ** (d + 1) * D ** (d + 1),
            t_eps * D**d,
        )
        name = "ri"
    else:
        raise ValueError(f"unknown preset {preset!r}")
    formulas = dict(_TABLE[name], t_eps=_TEPS)
    label = name if name != "ri" else f"ri-{d}"
    return Table1Row(label, *vals, t_eps=t_eps, formulas=formulas)


def table1_csv(rows: list[Table1Row]) -> str:
    lines = ["scheme,mode,error,gates,qubits"]
    for r in rows:
        lines.append(f"{r.scheme},full,{fmt(r.error_leading)},{fmt(r.gates_full)},{fmt(r.qubits_full)}")
        lines.append(f"{r.scheme},cone,{fmt(r.error_leading)},{fmt(r.gates_cone)},{fmt(r.qubits_cone)}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Cutoff under the stretched decay model


@dataclass(frozen=True)
class CutoffResult:
    t_0: float
    t_0_unclamped: float
    error: float

    def __iter__(self):
        return iter((self.t_0, self.error))


def kim_optimal_cutoff(model: DecayModel, D: int, eps: float, T: int, r: float = 1.0) -> CutoffResult:
    """``t_0 = T - gamma^-1 log(eps / (D r^alpha c))^2`` clamped to ``[0, T]``.

    The reported error is ``D^2 eps log(1/eps)^2 + floor``.
    """
    if model.c <= 0 or eps <= 0:
        raise ValueError("need c > 0 and eps > 0")
    raw = T - math.log(eps / (D * r**model.alpha * model.c)) ** 2 / model.gamma
    t0 = min(max(raw, 0.0), float(T))
    err = D**2 * eps * math.log(1 / eps) ** 2 + model.floor
    return CutoffResult(t0, raw, err)
