"""Past causal cones of local observables.

The cone is traced combinatorially in the Heisenberg direction: a gate
joins the cone when its edge meets the current support, after which both
of its qubits are in the support. Fresh qubits of an iteration leave the
support once that iteration has been processed. ``trace_cone(..., t)``
covers iterations ``t+1 .. T``; the qubits left in the support are the
boundary on which a replacement state is placed.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .scheme import SIM_CAP_DENSITY, SIM_CAP_PURE, GateSlot, InteractionScheme, SchemeError
from .sim import (
    CapExceeded,
    DensityState,
    HeisenbergOperator,
    NoiseModel,
    _embed_positions,
    _pure_vector,
    apply_gate_density,
    apply_gate_vector,
    depolarize_pair,
    expectation,
    max_mixed,
    partial_trace,
)

__all__ = [
    "UNBOUNDED",
    "SupportSet",
    "CausalCone",
    "EffectiveCircuit",
    "support_radius",
    "support_set",
    "ball",
    "trace_cone",
    "extract_effective_circuit",
    "run_effective_circuit",
    "cone_to_json",
    "default_boundary_state",
]

UNBOUNDED = float("inf")


def _adjacency(vertices: Iterable[int], edges: Iterable[tuple[int, int]]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {v: set() for v in vertices}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj


def _bfs(adj: dict[int, set[int]], src: int) -> dict[int, int]:
    dist = {src: 0}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for u in adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def support_radius(qubits: Iterable[int], graph) -> float:
    """Radius of the smallest graph ball containing ``qubits``.

    ``graph`` is ``(vertices, edges)``. Returns ``UNBOUNDED`` when the
    qubits do not lie in one connected component.
    """
    vertices, edges = graph
    qubits = set(qubits)
    if not qubits:
        raise ValueError("support must be non-empty")
    adj = _adjacency(vertices, edges)
    missing = qubits - set(adj)
    if missing:
        raise ValueError(f"qubits {sorted(missing)} are not vertices of the graph")
    dists = {q: _bfs(adj, q) for q in qubits}
    anchor = next(iter(qubits))
    if not all(q in dists[anchor] for q in qubits):
        return UNBOUNDED
    # a center farther than diam(support) from the set can never be optimal
    diam = max(dists[a][b] for a in qubits for b in qubits)
    candidates = {v for q in qubits for v, d in dists[q].items() if d <= diam}
    best = UNBOUNDED
    for v in candidates:
        ecc = max(dists[q].get(v, UNBOUNDED) for q in qubits)
        best = min(best, ecc)
    return int(best) if best != UNBOUNDED else best


def ball(graph, center: int, radius: int) -> frozenset[int]:
    vertices, edges = graph
    dist = _bfs(_adjacency(vertices, edges), center)
    return frozenset(v for v, d in dist.items() if d <= radius)


def _graph(scheme: InteractionScheme, t: int):
    return scheme.vertices(t), scheme.graph_edges(t)


@dataclass(frozen=True)
class SupportSet:
    qubits: frozenset[int]
    radius: float


def support_set(scheme: InteractionScheme, qubits: Iterable[int]) -> SupportSet:
    """Validated support on ``G_T`` with its exact radius."""
    qs = frozenset(int(q) for q in qubits)
    if not qs:
        raise SchemeError("support must be non-empty")
    live = set(scheme.live_wires(scheme.T))
    bad = qs - live
    if bad:
        raise SchemeError(f"support qubits {sorted(bad)} are not vertices of G_T", scheme.T)
    return SupportSet(qs, support_radius(qs, _graph(scheme, scheme.T)))


@dataclass(frozen=True)
class CausalCone:
    """Cone of a support traced back to iteration ``from_iteration``.

    ``per_iteration[k]`` holds the flat gate indices and the qubits that
    enter the cone at iteration ``k``; ``support_trace[k]`` is the support
    after the adjoint of iterations ``T..k+1`` (``support_trace[T]`` is the
    observable's own support).
    """

    scheme: InteractionScheme
    support: frozenset[int]
    from_iteration: int
    gates: tuple[GateSlot, ...]
    qubits: frozenset[int]
    per_iteration: dict[int, dict]
    support_trace: dict[int, frozenset[int]]
    touched: dict[int, frozenset[int]]

    @property
    def N_U(self) -> int:
        return len(self.gates)

    @property
    def N_Q(self) -> int:
        return len(self.qubits)

    @property
    def boundary(self) -> tuple[int, ...]:
        """Cone qubits that already exist at ``from_iteration`` (sorted)."""
        return tuple(sorted(self.support_trace[self.from_iteration]))

    def radius_trace(self) -> dict[int, float]:
        """Exact radius of ``support_trace[k]`` measured in ``G_k``."""
        out = {}
        for k, s in self.support_trace.items():
            out[k] = support_radius(s, _graph(self.scheme, k)) if s else 0
        return out


def trace_cone(scheme: InteractionScheme, support: SupportSet | Iterable[int], t: int) -> CausalCone:
    """Trace the past causal cone of ``support`` back to iteration ``t``."""
    qubits = support.qubits if isinstance(support, SupportSet) else support_set(scheme, support).qubits
    if not 0 <= t <= scheme.T:
        raise SchemeError(f"t={t} out of range [0, {scheme.T}]")
    live = set(scheme.live_wires(scheme.T))
    if not qubits <= live:
        raise SchemeError(f"support {sorted(qubits - live)} not in G_T", scheme.T)
    by_iter: dict[int, list[GateSlot]] = {}
    for slot in scheme.slots():
        by_iter.setdefault(slot.iteration, []).append(slot)

    current = set(qubits)
    cone_q = set(qubits)
    gates: list[GateSlot] = []
    per: dict[int, dict] = {}
    trace = {scheme.T: frozenset(current)}
    touched: dict[int, frozenset[int]] = {}
    for k in range(scheme.T, t, -1):
        it = scheme.iterations[k]
        hit: list[GateSlot] = []
        entering: set[int] = set()
        seen = set(current)
        for slot in reversed(by_iter.get(k, [])):
            if slot.gate.is_identity or not (set(slot.edge) & current):
                continue
            hit.append(slot)
            for q in slot.edge:
                if q not in cone_q:
                    entering.add(q)
                current.add(q)
                seen.add(q)
        cone_q |= entering
        touched[k] = frozenset(seen)
        current -= set(it.fresh_wires)
        trace[k - 1] = frozenset(current)
        hit.reverse()
        gates = hit + gates
        per[k] = {"gates": tuple(s.index for s in hit), "qubits": frozenset(entering)}
    return CausalCone(scheme, frozenset(qubits), t, tuple(gates), frozenset(cone_q), per, trace, touched)


def cone_to_json(cone: CausalCone) -> str:
    doc = {
        "from_iteration": cone.from_iteration,
        "N_U": cone.N_U,
        "N_Q": cone.N_Q,
        "per_iteration": [
            {"iteration": k, "gates": list(v["gates"]), "qubits": sorted(v["qubits"])}
            for k, v in sorted(cone.per_iteration.items())
        ],
        "support_trace": [
            {"iteration": k, "qubits": sorted(v)} for k, v in sorted(cone.support_trace.items())
        ],
    }
    return json.dumps(doc)


# ----------------------------------------------------------------------


@dataclass(frozen=True)
class EffectiveCircuit:
    """Runnable restriction of the scheme to a causal cone.

    ``steps`` is the ordered program: ``("prep", wire, state)`` introduces a
    fresh qubit, ``("gate", slot)`` applies a cone gate and ``("trace",
    wires)`` discards qubits that no longer matter (ancillas and qubits
    past their last gate that do not carry the observable).
    """

    boundary: tuple[int, ...]
    boundary_state: np.ndarray
    fresh: dict[int, np.ndarray]
    gates: tuple[GateSlot, ...]
    steps: tuple[tuple, ...]
    observable_support: frozenset[int]

    @property
    def roster(self) -> tuple[int, ...]:
        return self.boundary + tuple(self.fresh)

    @property
    def discard_schedule(self) -> tuple[tuple[int, ...], ...]:
        return tuple(s[1] for s in self.steps if s[0] == "trace")


def extract_effective_circuit(cone: CausalCone, boundary_state: np.ndarray | None = None) -> EffectiveCircuit:
    """Build the effective circuit; ``boundary_state`` defaults to maximally mixed."""
    scheme = cone.scheme
    boundary = cone.boundary
    nb = len(boundary)
    if boundary_state is None:
        boundary_state = max_mixed(nb)
    boundary_state = np.asarray(boundary_state, dtype=complex)
    if boundary_state.shape != (2**nb, 2**nb):
        raise ValueError(
            f"boundary state has shape {boundary_state.shape}; the cone boundary "
            f"{boundary} needs ({2**nb}, {2**nb})"
        )
    in_cone = set(cone.qubits)
    fresh: dict[int, np.ndarray] = {}
    for k in range(cone.from_iteration + 1, scheme.T + 1):
        for w, s in scheme.iterations[k].fresh_states.items():
            if w in in_cone:
                fresh[w] = s

    last_use: dict[int, int] = {}
    first_use: dict[int, int] = {}
    for i, slot in enumerate(cone.gates):
        for q in slot.edge:
            last_use[q] = i
            first_use.setdefault(q, i)
    keep = set(cone.support)
    discarded_anc = set()
    for k in range(cone.from_iteration + 1, scheme.T + 1):
        discarded_anc |= set(scheme.iterations[k].discards)

    steps: list[tuple] = []
    # fresh qubits never touched by a gate but carrying the observable
    for w in fresh:
        if w not in first_use:
            steps.append(("prep", w, fresh[w]))
    for i, slot in enumerate(cone.gates):
        for q in slot.edge:
            if q in fresh and first_use[q] == i:
                steps.append(("prep", q, fresh[q]))
        steps.append(("gate", slot))
        done = tuple(q for q in slot.edge if last_use[q] == i and (q not in keep or q in discarded_anc))
        if done:
            steps.append(("trace", done))
    return EffectiveCircuit(
        boundary, boundary_state, fresh, cone.gates, tuple(steps), frozenset(cone.support)
    )


def run_effective_circuit(
    circuit: EffectiveCircuit,
    observable: HeisenbergOperator,
    noise: NoiseModel | None = None,
    cap: int | None = None,
) -> float:
    """Expectation of ``observable`` at the output of the effective circuit."""
    noise = noise or NoiseModel()
    if not set(observable.support) <= set(circuit.roster):
        raise ValueError("observable support is not covered by the circuit")
    pure = noise.is_noiseless and _is_pure(circuit.boundary_state) and all(
        _is_pure(s) for s in circuit.fresh.values()
    )
    cap = cap or (SIM_CAP_PURE if pure else SIM_CAP_DENSITY)
    roster = list(circuit.boundary)
    if pure:
        w, v = np.linalg.eigh(circuit.boundary_state)
        state = v[:, -1]
    else:
        state = circuit.boundary_state.copy()
    for step in circuit.steps:
        kind = step[0]
        if kind == "prep":
            _, wire, s = step
            if pure:
                state = np.kron(state, _pure_vector(s, wire))
            else:
                state = np.kron(state, noise.prepare(s))
            roster.append(wire)
            if len(roster) > cap:
                raise CapExceeded(f"effective circuit needs more than {cap} qubits")
        elif kind == "gate":
            slot = step[1]
            pos = _embed_positions(roster, slot.edge)
            n = len(roster)
            if pure:
                state = apply_gate_vector(state, n, slot.gate.matrix, pos)
            else:
                state = apply_gate_density(state, n, slot.gate.matrix, pos)
                state = depolarize_pair(state, n, pos, noise.p)
        elif not pure:
            wires = step[1]
            keep = [w for w in roster if w not in wires]
            red_state = partial_trace(DensityState.from_matrix(roster, state), keep) if keep else None
            if red_state is None:
                roster, state = [], np.ones((1, 1), complex)
            else:
                state, roster = red_state.matrix, list(red_state.roster)
    final = DensityState.from_vector(roster, state) if pure else DensityState.from_matrix(roster, state)
    return expectation(final, observable)


def _is_pure(m: np.ndarray) -> bool:
    return abs(np.trace(m @ m).real - 1) < 1e-12


def default_boundary_state(cone: CausalCone, mode: str = "true") -> np.ndarray:
    """``'true'``: reduced noiseless state at ``from_iteration``; ``'mixed'``: 1/d."""
    nb = len(cone.boundary)
    if mode == "mixed" or nb == 0:
        return max_mixed(nb)
    from .sim import state_at

    full = state_at(cone.scheme, cone.from_iteration, mode="pure")
    red = partial_trace(full, cone.boundary)
    perm = _embed_positions(red.roster, cone.boundary)
    t = red.matrix.reshape((2,) * (2 * nb)).transpose(perm + [p + nb for p in perm])
    return t.reshape(2**nb, 2**nb)
