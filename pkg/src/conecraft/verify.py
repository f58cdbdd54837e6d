"""Seeded verification suites.

Each suite draws its trials from streams keyed by ``(seed, trial)``, runs
them on a thread pool and aggregates in trial order, so the JSON report is
byte-identical for any thread count. A trial records a ``margin``: the
bound minus the measured quantity, or the tolerance minus the observed
discrepancy. A trial passes when its margin is non-negative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._util import fmt, ordered_map
from .bounds import (
    PATH,
    dmera_bounds,
    improved_stability_bound,
    ri_bounds,
    table1_row,
)
from .cone import (
    _graph,
    ball,
    default_boundary_state,
    extract_effective_circuit,
    run_effective_circuit,
    support_radius,
    trace_cone,
)
from .mixing import (
    build_transfer_operator,
    certify_matrix,
    covariance,
    estimate_delta_sup,
    mixing_profile,
    mixing_time_bound,
)
from .scheme import InteractionScheme, build_dmera, build_mps, build_ri
from .sim import (
    HeisenbergOperator,
    NoiseModel,
    expectation,
    heisenberg_evolve,
    partial_trace,
    random_hermitian,
    random_state,
    run_schrodinger,
    state_at,
)

__all__ = ["SuiteReport", "SUITES", "run_suite", "DEFAULT_TRIALS"]


@dataclass
class SuiteReport:
    suite: str
    seed: int
    records: list[dict] = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.records)

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.records if not r["ok"]]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def min_margin(self) -> float | None:
        return min((r["margin"] for r in self.records), default=None)

    def to_json(self) -> str:
        def enc(v):
            if isinstance(v, float):
                return fmt(v)
            if isinstance(v, dict):
                return {k: enc(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [enc(x) for x in v]
            return v

        doc = {
            "suite": self.suite,
            "seed": self.seed,
            "trials": self.trials,
            "passed": self.passed,
            "failures": len(self.failures),
            "min_margin": None if self.min_margin is None else fmt(self.min_margin),
            "records": [enc(r) for r in self.records],
        }
        return json.dumps(doc, sort_keys=True)


# ----------------------------------------------------------------------
# Trial ingredients


def _scheme_for(rng: np.random.Generator, family: str) -> tuple[InteractionScheme, dict]:
    """Seeded DMERA (T <= 4) or MPS (T <= 6, bath <= 2) with D <= 2.

    DMERA with T = 4 uses D = 1 so that density simulations of its cones
    stay within the qubit cap.
    """
    gseed = int(rng.integers(0, 2**31))
    if family == "dmera":
        T = int(rng.integers(1, 5))
        D = int(rng.integers(1, 3)) if T < 4 else 1
        return build_dmera(T, D, seed=gseed), {"family": "dmera", "T": T, "D": D, "gate_seed": gseed}
    T = int(rng.integers(1, 7))
    bath = int(rng.integers(1, 3))
    D = int(rng.integers(1, 3))
    return build_mps(T, bath, D, seed=gseed), {"family": "mps", "T": T, "bath": bath, "D": D, "gate_seed": gseed}


def _observable_for(scheme: InteractionScheme, rng: np.random.Generator, max_sites: int = 2) -> HeisenbergOperator:
    live = list(scheme.live_wires(scheme.T))
    edges = list(scheme.graph_edges(scheme.T))
    two = max_sites >= 2 and len(live) >= 2 and rng.random() < 0.5
    if two and edges:
        support = tuple(int(q) for q in edges[int(rng.integers(len(edges)))])
    elif two:
        support = tuple(int(q) for q in rng.choice(live, 2, replace=False))
    else:
        support = (int(rng.choice(live)),)
    return HeisenbergOperator(support, random_hermitian(len(support), rng), scheme.T)


def _trial_rng(seed: int, suite: str, i: int) -> np.random.Generator:
    tag = sum(ord(c) * 31**k for k, c in enumerate(suite)) % 2**31
    return np.random.default_rng([seed, tag, i])


def _run(suite: str, trial: Callable[[int, np.random.Generator], dict], trials: int, seed: int, threads):
    recs = ordered_map(lambda i: dict(trial(i, _trial_rng(seed, suite, i)), trial=i), range(trials), threads)
    return SuiteReport(suite, seed, recs)


# ----------------------------------------------------------------------
# Suites


def suite_completeness(trials: int = 25, seed: int = 0, threads: int | None = None) -> SuiteReport:
    """Cone circuit from t=0 with the true initial state reproduces the full expectation."""

    dmera = [(T, D) for T in range(1, 5) for D in (1, 2)]
    mps = [(T, b, D) for T in (6, 5, 4, 3, 2, 1) for b in (2, 1) for D in (2, 1)]

    def trial(i, rng):
        gseed = int(rng.integers(0, 2**31))
        if i % 2 == 0:
            T, D = dmera[(i // 2) % len(dmera)]
            s, meta = build_dmera(T, D, seed=gseed), {"family": "dmera", "T": T, "D": D, "gate_seed": gseed}
        else:
            T, b, D = mps[(i // 2) % len(mps)]
            s = build_mps(T, b, D, seed=gseed)
            meta = {"family": "mps", "T": T, "bath": b, "D": D, "gate_seed": gseed}
        op = _observable_for(s, rng)
        full = expectation(run_schrodinger(s), op)
        cone = trace_cone(s, op.support, 0)
        got = run_effective_circuit(extract_effective_circuit(cone, default_boundary_state(cone, "true")), op)
        diff = abs(got - full)
        return dict(
            meta, support=list(op.support), full=full, cone=got, error=diff, margin=1e-10 - diff, ok=diff <= 1e-10
        )

    return _run("completeness", trial, trials, seed, threads)


def suite_duality(trials: int = 50, seed: int = 0, threads: int | None = None) -> SuiteReport:
    """``tr(rho_t O_t)`` equals the final expectation at a random iteration ``t``."""

    def trial(i, rng):
        s, meta = _scheme_for(rng, "dmera" if i % 2 == 0 else "mps")
        if meta["family"] == "dmera" and meta["T"] > 3:
            s, meta = build_dmera(3, meta["D"], seed=meta["gate_seed"]), dict(meta, T=3)
        op = _observable_for(s, rng)
        full = expectation(run_schrodinger(s), op)
        t = int(rng.integers(-1, s.T + 1))
        ot = heisenberg_evolve(s, op, t)
        if t < 0:
            val = float(ot.matrix[0, 0].real)
        elif not ot.support:
            val = float(ot.matrix[0, 0].real)
        else:
            val = expectation(partial_trace(state_at(s, t, mode="pure"), ot.support), ot)
        diff = abs(val - full)
        return dict(
            meta, t=t, qubits=len(s.live_wires(s.T)), schrodinger=full, heisenberg=val, error=diff,
            margin=1e-9 - diff, ok=diff <= 1e-9,
        )

    return _run("duality", trial, trials, seed, threads)


def suite_lemma(trials: int = 100, seed: int = 0, threads: int | None = None) -> SuiteReport:
    """Replacing the state at iteration ``t`` moves the expectation by at most ``2 delta_O(t) ||O||``.

    Each record also carries the contraction check on the full profile.
    """

    def trial(i, rng):
        s, meta = _scheme_for(rng, "dmera" if i % 2 == 0 else "mps")
        op = _observable_for(s, rng)
        t = int(rng.integers(0, s.T + 1))
        full = expectation(run_schrodinger(s), op)
        cone = trace_cone(s, op.support, t)
        nb = len(cone.boundary)
        rho = random_state(nb, rng, rank=int(rng.integers(1, 2**nb + 1))) if nb else np.ones((1, 1), complex)
        got = run_effective_circuit(extract_effective_circuit(cone, rho), op)
        prof = mixing_profile(s, op).values
        bound = 2 * prof[t] * op.norm()
        gap = abs(got - full)
        steps = [prof[k] - prof[k - 1] for k in range(1, s.T + 1)]
        contraction = min(steps, default=0.0)
        return dict(
            meta, t=t, boundary=nb, gap=gap, bound=bound, margin=bound + 1e-9 - gap,
            ok=gap <= bound + 1e-9, profile=[prof[k] for k in sorted(prof)],
            contraction_margin=contraction + 1e-12, contraction_ok=contraction >= -1e-12,
        )

    return _run("lemma", trial, trials, seed, threads)


def suite_stability(trials: int = 30, seed: int = 0, threads: int | None = None) -> SuiteReport:
    """Noisy cone circuit against the ideal expectation on MPS(T=5, bath=1, D=1)."""

    def trial(i, rng):
        p = (1e-3, 1e-2)[i % 2]
        q = (0.0, 1e-3)[(i // 2) % 2]
        gseed = int(rng.integers(0, 2**31))
        s = build_mps(5, 1, 1, seed=gseed)
        op = _observable_for(s, rng, max_sites=1)
        t = int(rng.integers(0, s.T + 1))
        noise = NoiseModel(p, q)
        ideal = expectation(run_schrodinger(s), op)
        noisy = run_effective_circuit(extract_effective_circuit(trace_cone(s, op.support, t)), op, noise)
        prof = mixing_profile(s, op).values
        counts = {}
        for k in range(t, s.T + 1):
            c = trace_cone(s, op.support, k)
            counts[k] = (c.N_U, c.N_Q)
        scale = op.norm()
        scaled = {k: v / scale for k, v in prof.items()}
        bound = scale * improved_stability_bound(scaled, noise.eps_U, noise.eps_P, counts, t)
        corollary = scale * improved_stability_bound(scaled, noise.eps_U, noise.eps_P, counts, t, "corollary")
        err = abs(ideal - noisy)
        rec = dict(
            gate_seed=gseed, p=p, q=q, t=t, support=list(op.support), error=err,
            bound=bound, corollary_bound=corollary, rechecked=False,
        )
        if err > bound + 1e-9:
            r = int(support_radius(op.support, _graph(s, s.T)))
            sup = {k: max(scaled[k], estimate_delta_sup(s, r, k, 64, seed=gseed, threads=1)) for k in scaled}
            bound = scale * improved_stability_bound(sup, noise.eps_U, noise.eps_P, counts, t)
            rec.update(rechecked=True, bound=bound)
        rec.update(margin=bound + 1e-9 - err, ok=err <= bound + 1e-9)
        return rec

    return _run("stability", trial, trials, seed, threads)


def suite_covariance(trials: int = 30, seed: int = 0, threads: int | None = None) -> SuiteReport:
    def trial(i, rng):
        s, meta = _scheme_for(rng, "mps" if i % 3 else "dmera")
        live = list(s.live_wires(s.T))
        if len(live) < 2:
            s, meta = build_mps(3, 1, 1, seed=meta["gate_seed"]), dict(meta, family="mps", T=3, bath=1, D=1)
            live = list(s.live_wires(s.T))
        a, b = (int(x) for x in rng.choice(live, 2, replace=False))
        E = HeisenbergOperator((a,), random_hermitian(1, rng), s.T)
        F = HeisenbergOperator((b,), random_hermitian(1, rng), s.T)
        res = covariance(s, E, F)
        return dict(
            meta, E=a, F=b, cov=res.cov, bound=res.bound, t_0=res.t_0, product_bound=res.product_bound,
            margin=res.bound + 1e-9 - abs(res.cov), ok=abs(res.cov) <= res.bound + 1e-9,
        )

    return _run("covariance", trial, trials, seed, threads)


def suite_certify(trials: int = 40, seed: int = 0, threads: int | None = None) -> SuiteReport:
    """Exact stabilizer moments and soundness of the estimator, alternating 1 and 2 qubits."""

    def trial(i, rng):
        n = 1 + i % 2
        d = 2**n
        m = random_hermitian(n, rng, normalize=False)
        res = certify_matrix(m, mode="exact")
        tr, tr2 = float(np.trace(m).real), float(np.trace(m @ m).real)
        e1, e2 = tr / d, (tr2 + tr * tr) / (d * (d + 1))
        dev = max(abs(res.mean_X - e1), abs(res.mean_X2 - e2))
        slack = res.L - res.R_exact
        margin = min(1e-12 - dev, slack + 1e-10)
        return dict(
            n=n, count=res.num_samples, mean_X=res.mean_X, mean_X2=res.mean_X2, L=res.L,
            R_exact=res.R_exact, moment_deviation=dev, margin=margin, ok=margin >= 0,
        )

    return _run("certify", trial, trials, seed, threads)


def _count_grid():
    grid = []
    for T in range(0, 7):
        for D in range(1, 4):
            for R in range(0, 3):
                grid.append(("dmera", T, D, R))
    for T in range(1, 9):
        for D in (1, 2):
            for R in range(0, 3):
                grid.append(("mps", T, D, R))
                grid.append(("ri1", T, D, R))
    return grid


def _count_case(case) -> list[dict]:
    family, T, D, R = case
    if family == "dmera":
        s = build_dmera(T, D, gate_source="cnot")
    elif family == "mps":
        s = build_mps(T, 1, D, gate_source="cnot")
    else:
        s = build_ri(1, 3, T, D, gate_source="cnot")
    G = _graph(s, T)
    supports = sorted({frozenset(ball(G, v, R)) for v in G[0]}, key=sorted)
    out = []
    for sup in supports:
        r = support_radius(sup, G)
        for t in range(T + 1):
            cone = trace_cone(s, sup, t)
            if family == "dmera":
                b = dmera_bounds(T, t, D, r)
                rad = cone.radius_trace()[t]
                checks = {"N_U": (cone.N_U, b.N_U), "N_Q": (cone.N_Q, b.N_Q), "radius": (rad, b.radius)}
            else:
                nq, nu = ri_bounds(PATH, T, t, D, r)
                checks = {"N_U": (cone.N_U, nu), "N_Q": (cone.N_Q, nq)}
            for name, (got, bound) in checks.items():
                if got > bound:
                    out.append(
                        dict(family=family, T=T, D=D, R=r, t=t, support=sorted(sup), quantity=name,
                             exact=float(got), bound=float(bound))
                    )
    return out


def suite_counts(trials: int | None = None, seed: int = 0, threads: int | None = None) -> SuiteReport:
    """Exact cone counts against the closed-form count bounds over the full grid.

    One record per grid cell; ``trials`` truncates the grid (``0`` is a
    vacuous pass). The margin of a cell is minus its number of violations.
    """
    grid = _count_grid()
    if trials is not None:
        grid = grid[:trials]
    results = ordered_map(_count_case, grid, threads)
    recs = []
    for i, (case, viol) in enumerate(zip(grid, results)):
        family, T, D, R = case
        recs.append(
            dict(trial=i, family=family, T=T, D=D, R=R, violations=viol, margin=-float(len(viol)), ok=not viol)
        )
    return SuiteReport("counts", seed, recs)


def suite_transfer(trials: int = 10, seed: int = 0, threads: int | None = None) -> SuiteReport:
    """Transfer-operator envelope on translation-invariant MPS schemes."""
    T = 5

    def trial(i, rng):
        bath = 1 + i % 2
        D = 2 if bath == 2 else int(rng.integers(1, 3))
        gseed = int(rng.integers(0, 2**31))
        s = build_mps(T, bath, D, seed=gseed, translation_invariant=True)
        op = build_transfer_operator(s)
        if not op.mixing:
            return dict(bath=bath, D=D, gate_seed=gseed, mixing=False, margin=0.0, ok=True)
        mt = mixing_time_bound(op, T - 1, seed=gseed)
        last = s.live_wires(T)[-1]
        margins = []
        for m in (np.diag([1.0, -1.0]).astype(complex), random_hermitian(1, rng)):
            prof = mixing_profile(s, HeisenbergOperator((last,), m, T)).values
            margins += [mt.norms[T - t - 1] + 1e-9 - prof[t] for t in range(T)]
        margin = min(margins)
        return dict(
            bath=bath, D=D, gate_seed=gseed, mixing=True, norms=[mt.norms[n] for n in range(T)],
            converged=all(mt.converged.values()), margin=margin, ok=margin >= 0,
        )

    rep = _run("transfer", trial, trials, seed, threads)
    reset = build_transfer_operator(build_mps(3, 1, 1, gate_source="swap", translation_invariant=True))
    mt = mixing_time_bound(reset, 2, seed=seed)
    t1 = {eps: mt.t1(eps) for eps in (0.1, 0.01)}
    ok = all(v == 1 for v in t1.values())
    rep.records.append(dict(trial=trials, case="reset", t1=[t1[0.1], t1[0.01]], margin=0.0 if ok else -1.0, ok=ok))
    return rep


_TABLE_EXPECTED = {
    "dmera": (r"\epsilon_U \lambda^{-1}D^2+\epsilon_P \lambda^{-1}D", r"2^TD", r"2^T", r"t_\epsilon D^2", r"t_\epsilon D"),
    "mps": (r"\epsilon_U \lambda^{-2}D^2+\epsilon_P \lambda^{-1}D", r"T^2D^2", r"TD", r"t_{\epsilon}^2D^2", r"t_{\epsilon}D"),
    "ri": (
        r"\epsilon_U \lambda^{-d-1}D^{d+1}+\epsilon_P \lambda^{-d}D^d",
        r"T^{d+1}D^{d+1}",
        r"TD^d",
        r"t_{\epsilon}^{d+1}D^{d+1}",
        r"t_{\epsilon}D^{d}",
    ),
}


def suite_table1(trials: int = 1, seed: int = 0, threads: int | None = None) -> SuiteReport:
    """Formula records and the worked DMERA example."""
    keys = ("error", "gates_full", "qubits_full", "gates_cone", "qubits_cone")
    recs = []
    for name, args in (("dmera", ("dmera",)), ("mps", ("mps",)), ("ri", ("ri",))):
        row = table1_row(*args, 1.0, 0.01, 0.001, 2, 10, d=2 if name == "ri" else None)
        ok = all(row.formulas[k] == v for k, v in zip(keys, _TABLE_EXPECTED[name])) and row.leading_order
        recs.append(dict(trial=len(recs), case=f"formulas-{name}", margin=0.0 if ok else -1.0, ok=ok))
    row = table1_row("dmera", 1.0, math.exp(-3), 0.0, 2, 10)
    want = (3.0, 12.0, 6.0, 2048.0, 1024.0)
    got = (row.t_eps, row.gates_cone, row.qubits_cone, row.gates_full, row.qubits_full)
    ok = got == want
    recs.append(dict(trial=len(recs), case="dmera-example", values=list(map(float, got)), margin=0.0 if ok else -1.0, ok=ok))
    a = table1_row("ri", 0.7, 0.01, 0.002, 2, 9, d=1)
    b = table1_row("mps", 0.7, 0.01, 0.002, 2, 9)
    ok = tuple(a) == tuple(b)
    recs.append(dict(trial=len(recs), case="ri1-equals-mps", margin=0.0 if ok else -1.0, ok=ok))
    return SuiteReport("table1", seed, recs if trials else [])


SUITES: dict[str, Callable[..., SuiteReport]] = {
    "completeness": suite_completeness,
    "duality": suite_duality,
    "lemma": suite_lemma,
    "stability": suite_stability,
    "covariance": suite_covariance,
    "certify": suite_certify,
    "counts": suite_counts,
    "transfer": suite_transfer,
    "table1": suite_table1,
}

DEFAULT_TRIALS = {
    "completeness": 25,
    "duality": 50,
    "lemma": 100,
    "stability": 30,
    "covariance": 30,
    "certify": 40,
    "counts": None,
    "transfer": 10,
    "table1": 1,
}


def run_suite(name: str, trials: int | None = None, seed: int = 0, threads: int | None = None) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    if trials is None:
        trials = DEFAULT_TRIALS[name]
    if trials is None:
        return SUITES[name](seed=seed, threads=threads)
    return SUITES[name](trials=trials, seed=seed, threads=threads)
