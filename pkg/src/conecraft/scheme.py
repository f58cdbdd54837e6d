"""Interaction schemes for sequentially generated states.

An interaction scheme is the recipe for a state built in iterations
``0..T``: every iteration appends fresh system qubits and ancillas, applies
``D`` layers of two-qubit gates on the edges of that iteration's graph, and
finally traces out the ancillas.

Qubits are identified internally by *wires*: dense integers assigned in
creation order that stay fixed for the lifetime of a qubit. Scheme files
may use their own per-iteration labels; the embedding maps of a file are
resolved onto wires while parsing and restored when serializing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "SchemeError",
    "Gate",
    "IterationSpec",
    "InteractionScheme",
    "GateSlot",
    "haar_unitary",
    "named_gate",
    "build_dmera",
    "build_mps",
    "build_ri",
    "parse_scheme",
    "serialize_scheme",
    "scheme_totals",
    "SchemeTotals",
    "ZERO_STATE",
    "SIM_CAP_PURE",
    "SIM_CAP_DENSITY",
]

SIM_CAP_PURE = 20
SIM_CAP_DENSITY = 12
UNITARY_TOL = 1e-10

ZERO_STATE = np.array([[1, 0], [0, 0]], dtype=complex)

_NAMED = {
    "ID": np.eye(4, dtype=complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}


class SchemeError(ValueError):
    """Raised when a scheme document or scheme object violates an invariant."""

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)


def haar_unitary(seed: int, dim: int = 4) -> np.ndarray:
    """Haar-random unitary from a PCG64 stream seeded with ``seed``.

    QR of a complex Ginibre matrix with the phases of ``diag(R)`` folded
    back into ``Q``; the same seed always yields the same matrix bits.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True, eq=False)
class Gate:
    """A two-qubit gate acting on the ordered (first, second) qubits of an edge."""

    matrix: np.ndarray
    name: str = "CUSTOM"
    seed: int | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise SchemeError(f"gate {self.name} has shape {m.shape}, expected (4, 4)")
        dev = np.max(np.abs(m.conj().T @ m - np.eye(4)))
        if dev > UNITARY_TOL:
            raise SchemeError(f"gate {self.name} is not unitary (max |U^dag U - I| = {dev:.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, _NAMED["ID"]))

    @property
    def label(self) -> str:
        return f"HAAR({self.seed})" if self.name == "HAAR" else self.name

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        return (
            self.name == other.name
            and self.seed == other.seed
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self):
        return hash((self.name, self.seed, self.matrix.tobytes()))

    @classmethod
    def haar(cls, seed: int) -> "Gate":
        return cls(haar_unitary(seed), "HAAR", int(seed))


def named_gate(name: str) -> Gate:
    key = name.upper()
    if key == "IDENTITY":
        key = "ID"
    if key not in _NAMED:
        raise SchemeError(f"unknown gate name {name!r}")
    return Gate(_NAMED[key], key)


Edge = tuple[int, int]
Layer = tuple[tuple[Edge, Gate], ...]


@dataclass(frozen=True)
class IterationSpec:
    """One iteration of the generation procedure, in wire coordinates.

    ``labels`` maps every vertex (wire) of this iteration's graph to the
    label used for it in scheme files; presets use the identity.
    """

    index: int
    new_qubits: tuple[tuple[int, np.ndarray], ...]
    ancillas: tuple[tuple[int, np.ndarray], ...]
    edges: tuple[Edge, ...]
    layers: tuple[Layer, ...]
    discards: tuple[int, ...]
    labels: Mapping[int, int] = field(default_factory=dict)

    @property
    def fresh_wires(self) -> tuple[int, ...]:
        return tuple(w for w, _ in self.new_qubits) + tuple(w for w, _ in self.ancillas)

    @property
    def fresh_states(self) -> dict[int, np.ndarray]:
        return {w: s for w, s in self.new_qubits + self.ancillas}

    def edge_set(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(e) for e in self.edges)


@dataclass(frozen=True)
class GateSlot:
    index: int
    iteration: int
    layer: int
    position: int
    edge: Edge
    gate: Gate


class InteractionScheme:
    """Immutable, validated interaction scheme.

    Parameters
    ----------
    T, D:
        Last iteration index and number of gate layers per iteration.
    bath_wires:
        Wires of the bath; they must be among iteration 0's new qubits.
    iterations:
        ``T + 1`` iteration specs.
    """

    def __init__(
        self,
        T: int,
        D: int,
        bath_wires: Sequence[int],
        iterations: Sequence[IterationSpec],
        name: str = "custom",
    ):
        self.T = int(T)
        self.D = int(D)
        self.bath_wires = tuple(bath_wires)
        self.iterations = tuple(iterations)
        self.name = name
        self._validate()
        self._slots = tuple(self._enumerate_slots())
        self._live = self._compute_live()

    @property
    def bath_size(self) -> int:
        return len(self.bath_wires)

    def _validate(self) -> None:
        if self.T < 0:
            raise SchemeError(f"T must be >= 0, got {self.T}")
        if self.D < 1:
            raise SchemeError(f"D must be >= 1, got {self.D}")
        if len(self.iterations) != self.T + 1:
            raise SchemeError(f"expected {self.T + 1} iterations, got {len(self.iterations)}")
        live: set[int] = set()
        seen: set[int] = set()
        first = {w for w, _ in self.iterations[0].new_qubits} if self.iterations else set()
        if not set(self.bath_wires) <= first:
            raise SchemeError("bath qubits must be introduced at iteration 0", 0)
        for t, it in enumerate(self.iterations):
            if it.index != t:
                raise SchemeError(f"iteration index {it.index} out of order", t)
            fresh = it.fresh_wires
            if len(set(fresh)) != len(fresh) or set(fresh) & seen:
                raise SchemeError("qubit id introduced twice", t)
            for w, s in it.new_qubits + it.ancillas:
                _check_qubit_state(s, t, w)
            seen.update(fresh)
            vertices = live | set(fresh)
            for e in it.edges:
                if len(e) != 2 or e[0] == e[1]:
                    raise SchemeError(f"malformed edge {e}", t)
                for q in e:
                    if q not in vertices:
                        raise SchemeError(f"edge {e} references unknown qubit {q}", t)
            if len(it.layers) != self.D:
                raise SchemeError(f"{len(it.layers)} layers declared but D={self.D}", t)
            eset = it.edge_set()
            for li, layer in enumerate(it.layers):
                used: set[int] = set()
                for edge, gate in layer:
                    if frozenset(edge) not in eset:
                        raise SchemeError(f"layer {li}: gate on {edge} which is not an edge", t)
                    if used & set(edge):
                        raise SchemeError(f"layer {li}: gates overlap on {edge}; a layer must be a matching", t)
                    used.update(edge)
                    if not isinstance(gate, Gate):
                        raise SchemeError(f"layer {li}: gate on {edge} is not a Gate", t)
            anc = {w for w, _ in it.ancillas}
            if set(it.discards) != anc or len(it.discards) != len(anc):
                raise SchemeError(
                    f"discards {sorted(it.discards)} must equal the ancillas {sorted(anc)}", t
                )
            live = vertices - anc

    def _enumerate_slots(self) -> Iterator[GateSlot]:
        n = 0
        for it in self.iterations:
            for li, layer in enumerate(it.layers):
                for pos, (edge, gate) in enumerate(layer):
                    yield GateSlot(n, it.index, li, pos, tuple(edge), gate)
                    n += 1

    def _compute_live(self) -> tuple[tuple[int, ...], ...]:
        out = []
        live: list[int] = []
        for it in self.iterations:
            live = live + [w for w, _ in it.new_qubits]
            out.append(tuple(live))
        return tuple(out)

    # ------------------------------------------------------------------
    def slots(self) -> tuple[GateSlot, ...]:
        """All declared gate slots in execution order."""
        return self._slots

    def live_wires(self, t: int) -> tuple[int, ...]:
        """Qubits alive at the end of iteration ``t`` (ancillas excluded)."""
        return self._live[t]

    def vertices(self, t: int) -> tuple[int, ...]:
        prev = self._live[t - 1] if t > 0 else ()
        return prev + self.iterations[t].fresh_wires

    def graph_edges(self, t: int) -> tuple[Edge, ...]:
        return self.iterations[t].edges

    def creation_iteration(self, wire: int) -> int:
        for it in self.iterations:
            if wire in it.fresh_wires:
                return it.index
        raise KeyError(wire)

    def initial_state(self, wire: int) -> np.ndarray:
        for it in self.iterations:
            states = it.fresh_states
            if wire in states:
                return states[wire]
        raise KeyError(wire)

    def label_of(self, wire: int, t: int | None = None) -> int:
        t = self.T if t is None else t
        return self.iterations[t].labels.get(wire, wire)

    def wire_of(self, label: int, t: int | None = None) -> int:
        t = self.T if t is None else t
        for w, lab in self.iterations[t].labels.items():
            if lab == label:
                return w
        if label in self.vertices(t) and label not in self.iterations[t].labels:
            return label
        raise SchemeError(f"qubit {label} is not a vertex of G_{t}", t)

    def max_live(self) -> int:
        return max(len(self.vertices(t)) for t in range(self.T + 1))

    def __eq__(self, other):
        if not isinstance(other, InteractionScheme):
            return NotImplemented
        return serialize_scheme(self) == serialize_scheme(other)

    def __repr__(self):
        return (
            f"InteractionScheme(name={self.name!r}, T={self.T}, D={self.D}, "
            f"bath={self.bath_size}, qubits={len(self.live_wires(self.T))})"
        )


def _check_qubit_state(s: np.ndarray, t: int, w: int) -> None:
    s = np.asarray(s)
    if s.shape != (2, 2):
        raise SchemeError(f"state of qubit {w} must be 2x2", t)
    if np.max(np.abs(s - s.conj().T)) > 1e-12 or abs(np.trace(s) - 1) > 1e-10:
        raise SchemeError(f"state of qubit {w} is not a unit-trace Hermitian matrix", t)
    if np.linalg.eigvalsh(s).min() < -1e-9:
        raise SchemeError(f"state of qubit {w} is not positive", t)


# ----------------------------------------------------------------------
# Gate sources

GateSource = Union[str, Gate, Callable[[int, int, Edge], Gate]]


def _slot_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in key]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _resolve_source(
    gate_source: GateSource, seed: int, translation_invariant: bool
) -> Callable[[int, int, int, Edge], Gate]:
    if isinstance(gate_source, Gate):
        return lambda t, layer, pos, edge: gate_source
    if callable(gate_source):
        return lambda t, layer, pos, edge: gate_source(t, layer, edge)
    name = str(gate_source).lower()
    if name in ("random", "haar"):
        if translation_invariant:
            return lambda t, layer, pos, edge: Gate.haar(_slot_seed(seed, layer, pos))
        return lambda t, layer, pos, edge: Gate.haar(_slot_seed(seed, t, layer, pos))
    g = named_gate(name)
    return lambda t, layer, pos, edge: g


def _color_layers(
    t: int, D: int, colors: Sequence[Sequence[Edge]], make: Callable[[int, int, int, Edge], Gate]
) -> tuple[Layer, ...]:
    layers = []
    for li in range(D):
        matching = colors[li % len(colors)] if colors else ()
        layers.append(tuple((e, make(t, li, pos, e)) for pos, e in enumerate(matching)))
    return tuple(layers)


def _path_colors(path: Sequence[int]) -> list[list[Edge]]:
    edges = [(path[i], path[i + 1]) for i in range(len(path) - 1)]
    return [edges[0::2], edges[1::2]]


def _fresh(wires: Sequence[int], state: np.ndarray = ZERO_STATE):
    return tuple((w, state) for w in wires)


def build_dmera(
    T: int,
    D: int,
    gate_source: GateSource = "random",
    seed: int = 0,
    translation_invariant: bool = False,
) -> InteractionScheme:
    """DMERA scheme: one qubit at iteration 0, then one new qubit to the
    right of every existing qubit per iteration, with ``D`` brickwork layers
    of nearest-neighbour gates on the resulting line."""
    if T < 0 or D < 1:
        raise SchemeError(f"need T >= 0 and D >= 1, got T={T}, D={D}")
    if T > 30:
        raise SchemeError("DMERA with T > 30 is not supported")
    make = _resolve_source(gate_source, seed, translation_invariant)
    line = [0]
    nxt = 1
    iterations = []
    for t in range(T + 1):
        new = []
        if t > 0:
            grown = []
            for q in line:
                grown += [q, nxt]
                new.append(nxt)
                nxt += 1
            line = grown
        else:
            new = [0]
        colors = _path_colors(line)
        edges = tuple(e for c in colors for e in c)
        edges = tuple(sorted(edges, key=lambda e: line.index(e[0])))
        iterations.append(
            IterationSpec(
                t, _fresh(new), (), edges, _color_layers(t, D, colors, make), (),
                {w: w for w in line},
            )
        )
    return InteractionScheme(T, D, (), iterations, name="dmera")


def build_mps(
    T: int,
    bath_qubits: int,
    D: int,
    gate_source: GateSource = "random",
    seed: int = 0,
    translation_invariant: bool = False,
    system_state: np.ndarray = ZERO_STATE,
    bath_state: np.ndarray = ZERO_STATE,
) -> InteractionScheme:
    """MPS scheme: a bath line ``b1 - b2 - ...`` and one new system qubit per
    iteration attached to ``b1``. Gates fill the path ``new - b1 - b2 ...``
    in brickwork order; iteration 0 only prepares qubits."""
    if T < 1 or bath_qubits < 1 or D < 1:
        raise SchemeError(f"need T >= 1, bath >= 1, D >= 1; got T={T}, bath={bath_qubits}, D={D}")
    make = _resolve_source(gate_source, seed, translation_invariant)
    bath = list(range(bath_qubits))
    iterations = []
    live: list[int] = []
    nxt = bath_qubits
    for t in range(T + 1):
        q = nxt
        nxt += 1
        if t == 0:
            new = _fresh(bath, bath_state) + _fresh([q], system_state)
            edges: tuple[Edge, ...] = ()
            layers = tuple(() for _ in range(D))
        else:
            new = _fresh([q], system_state)
            path = [q] + bath
            colors = _path_colors(path)
            edges = tuple((path[i], path[i + 1]) for i in range(len(path) - 1))
            layers = _color_layers(t, D, colors, make)
        live = live + [w for w, _ in new]
        iterations.append(IterationSpec(t, new, (), edges, layers, (), {w: w for w in live}))
    return InteractionScheme(T, D, bath, iterations, name="mps")


def build_ri(
    d: int,
    side_length: int,
    T: int,
    D: int,
    gate_source: GateSource = "random",
    seed: int = 0,
    translation_invariant: bool = False,
) -> InteractionScheme:
    """Repeated-interaction scheme RI-d for ``d`` in {1, 2}.

    A ``side_length**d`` bath grid with nearest-neighbour edges; each
    iteration ``t >= 1`` adds a co-located grid of system qubits joined to
    the bath by rungs. Layers cycle through the matchings
    ``[rungs, bath axis-0 even, bath axis-0 odd, (axis-1 even, axis-1 odd)]``.
    Iteration 0 prepares the bath only.
    """
    if d not in (1, 2):
        raise SchemeError(f"RI-d presets exist for d in {{1, 2}}, got d={d}")
    if side_length < 1 or T < 1 or D < 1:
        raise SchemeError("need side_length >= 1, T >= 1, D >= 1")
    make = _resolve_source(gate_source, seed, translation_invariant)
    shape = (side_length,) * d
    n_site = side_length**d
    sites = list(np.ndindex(*shape))
    bath = list(range(n_site))
    idx = {s: i for i, s in enumerate(sites)}

    bath_colors: list[list[Edge]] = []
    for axis in range(d):
        even, odd = [], []
        for s in sites:
            if s[axis] + 1 < side_length:
                nb = list(s)
                nb[axis] += 1
                e = (bath[idx[s]], bath[idx[tuple(nb)]])
                (even if s[axis] % 2 == 0 else odd).append(e)
        bath_colors += [even, odd]
    bath_edges = [e for c in bath_colors for e in c]

    iterations = []
    live: list[int] = []
    nxt = n_site
    for t in range(T + 1):
        if t == 0:
            new = _fresh(bath)
            edges: tuple[Edge, ...] = tuple(bath_edges)
            layers = tuple(() for _ in range(D))
        else:
            sys_q = list(range(nxt, nxt + n_site))
            nxt += n_site
            new = _fresh(sys_q)
            rungs = [(sys_q[i], bath[i]) for i in range(n_site)]
            edges = tuple(rungs + bath_edges)
            layers = _color_layers(t, D, [rungs] + bath_colors, make)
        live = live + [w for w, _ in new]
        iterations.append(IterationSpec(t, new, (), edges, layers, (), {w: w for w in live}))
    return InteractionScheme(T, D, bath, iterations, name=f"ri{d}")


# ----------------------------------------------------------------------
# Serialization


def _cx(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _matrix_to_json(m: np.ndarray) -> list[list[float]]:
    return [_cx(z) for z in np.asarray(m).reshape(-1)]


def _matrix_from_json(data: Any, n: int, where: str, t: int | None) -> np.ndarray:
    try:
        flat = [complex(float(re), float(im)) for re, im in data]
    except (TypeError, ValueError) as exc:
        raise SchemeError(f"{where}: matrix entries must be [re, im] pairs", t) from exc
    if len(flat) != n * n:
        raise SchemeError(f"{where}: expected {n * n} entries, got {len(flat)}", t)
    return np.array(flat, dtype=complex).reshape(n, n)


def _gate_to_json(g: Gate) -> dict:
    if g.name == "HAAR":
        return {"name": "HAAR", "seed": g.seed}
    if g.name in _NAMED and np.array_equal(g.matrix, _NAMED[g.name]):
        return {"name": g.name}
    return {"name": g.name, "matrix": _matrix_to_json(g.matrix)}


def _gate_from_json(data: Mapping, where: str, t: int) -> Gate:
    name = str(data.get("name", "CUSTOM"))
    try:
        if "matrix" in data:
            return Gate(_matrix_from_json(data["matrix"], 4, where, t), name)
        if name.upper() == "HAAR":
            if "seed" not in data:
                raise SchemeError(f"{where}: HAAR gate needs a seed", t)
            return Gate.haar(int(data["seed"]))
        return named_gate(name)
    except SchemeError as exc:
        if exc.iteration is None:
            raise SchemeError(f"{where}: {exc}", t) from exc
        raise


def serialize_scheme(scheme: InteractionScheme) -> str:
    """Serialize to the JSON scheme-file format (labels, not wires)."""
    iters = []
    prev_labels: Mapping[int, int] = {}
    bath = set(scheme.bath_wires)
    for it in scheme.iterations:
        lab = lambda w, _l=it.labels: _l.get(w, w)  # noqa: E731
        entry = {
            "new_qubits": [
                _qubit_json(lab(w), s, "bath" if w in bath else None) for w, s in it.new_qubits
            ],
            "ancillas": [_qubit_json(lab(w), s) for w, s in it.ancillas],
            "edges": [[lab(a), lab(b)] for a, b in it.edges],
            "embedding": {
                str(prev_labels.get(w, w)): lab(w)
                for w in (scheme.live_wires(it.index - 1) if it.index > 0 else ())
            },
            "layers": [
                [{"edge": [lab(a), lab(b)], "gate": _gate_to_json(g)} for (a, b), g in layer]
                for layer in it.layers
            ],
            "discards": [lab(w) for w in it.discards],
        }
        iters.append(entry)
        prev_labels = it.labels
    doc = {
        "version": 1,
        "name": scheme.name,
        "T": scheme.T,
        "D": scheme.D,
        "bath_size": scheme.bath_size,
        "iterations": iters,
    }
    return json.dumps(doc, indent=1, sort_keys=False)


def _qubit_json(label: int, state: np.ndarray, role: str | None = None) -> dict:
    out: dict[str, Any] = {"id": int(label)}
    if not np.array_equal(state, ZERO_STATE):
        out["state"] = _matrix_to_json(state)
    if role:
        out["role"] = role
    return out


def parse_scheme(file_contents: str | Mapping) -> InteractionScheme:
    """Parse and fully validate a scheme document.

    Raises
    ------
    SchemeError
        Naming the offending iteration and element.
    """
    if isinstance(file_contents, str):
        try:
            doc = json.loads(file_contents)
        except json.JSONDecodeError as exc:
            raise SchemeError(f"malformed document: {exc}") from exc
    else:
        doc = file_contents
    if not isinstance(doc, Mapping):
        raise SchemeError("malformed document: top level must be an object")
    for key in ("version", "T", "D", "bath_size", "iterations"):
        if key not in doc:
            raise SchemeError(f"malformed document: missing key {key!r}")
    if doc["version"] != 1:
        raise SchemeError(f"unsupported version {doc['version']!r}")
    T, D = int(doc["T"]), int(doc["D"])
    raw_iters = doc["iterations"]
    if not isinstance(raw_iters, list) or len(raw_iters) != T + 1:
        raise SchemeError(f"malformed document: expected {T + 1} iterations")

    next_wire = 0
    label_to_wire: dict[int, int] = {}
    live_labels: list[int] = []
    bath: list[int] = []
    iterations = []
    for t, raw in enumerate(raw_iters):
        if not isinstance(raw, Mapping):
            raise SchemeError("malformed iteration entry", t)
        emb = raw.get("embedding", {}) or {}
        new_map: dict[int, int] = {}
        if t > 0:
            try:
                emb = {int(k): int(v) for k, v in emb.items()}
            except (TypeError, ValueError, AttributeError) as exc:
                raise SchemeError("embedding must map ids to ids", t) from exc
            if not emb and live_labels:
                emb = {lab: lab for lab in live_labels}
            if set(emb) != set(live_labels):
                missing = sorted(set(live_labels) - set(emb))
                extra = sorted(set(emb) - set(live_labels))
                raise SchemeError(f"embedding domain mismatch (missing {missing}, unknown {extra})", t)
            if len(set(emb.values())) != len(emb):
                raise SchemeError("embedding is not injective", t)
            for old, new in emb.items():
                new_map[new] = label_to_wire[old]
        elif emb:
            raise SchemeError("iteration 0 cannot have an embedding", t)

        def intro(entries, kind):
            nonlocal next_wire
            out = []
            for q in entries or []:
                if not isinstance(q, Mapping) or "id" not in q:
                    raise SchemeError(f"malformed {kind} entry {q!r}", t)
                lab = int(q["id"])
                if lab in new_map:
                    raise SchemeError(f"{kind} id {lab} collides with an existing qubit", t)
                state = (
                    _matrix_from_json(q["state"], 2, f"{kind} {lab}", t)
                    if "state" in q
                    else ZERO_STATE
                )
                new_map[lab] = next_wire
                if q.get("role") == "bath":
                    if t != 0 or kind != "new_qubits":
                        raise SchemeError(f"bath qubit {lab} must be a new qubit of iteration 0", t)
                    bath.append(next_wire)
                out.append((next_wire, state))
                next_wire += 1
            return tuple(out)

        new_q = intro(raw.get("new_qubits"), "new_qubits")
        anc = intro(raw.get("ancillas"), "ancillas")

        def w(lab, what):
            try:
                return new_map[int(lab)]
            except (KeyError, TypeError, ValueError):
                raise SchemeError(f"{what} references unknown qubit {lab}", t) from None

        edges = []
        for e in raw.get("edges", []) or []:
            if not isinstance(e, (list, tuple)) or len(e) != 2:
                raise SchemeError(f"malformed edge {e!r}", t)
            edges.append((w(e[0], f"edge {e}"), w(e[1], f"edge {e}")))
        layers = []
        for li, layer in enumerate(raw.get("layers", []) or []):
            gates = []
            for gi, entry in enumerate(layer):
                where = f"layer {li} gate {gi}"
                try:
                    a, b = entry["edge"]
                except (KeyError, TypeError, ValueError):
                    raise SchemeError(f"{where}: malformed edge", t) from None
                edge = (w(a, where), w(b, where))
                gates.append((edge, _gate_from_json(entry.get("gate", {}), where, t)))
            layers.append(tuple(gates))
        if len(layers) != D:
            raise SchemeError(f"{len(layers)} layers declared but D={D}", t)
        discards = tuple(w(x, "discard") for x in raw.get("discards", []) or [])
        labels = {wire: lab for lab, wire in new_map.items()}
        anc_w = {x for x, _ in anc}
        iterations.append(
            IterationSpec(t, new_q, anc, tuple(edges), tuple(layers), discards, labels)
        )
        label_to_wire = {lab: wire for lab, wire in new_map.items() if wire not in anc_w}
        live_labels = list(label_to_wire)
    if len(bath) != int(doc["bath_size"]):
        raise SchemeError(f"bath_size={doc['bath_size']} but {len(bath)} qubits carry role 'bath'", 0)
    return InteractionScheme(T, D, bath, iterations, name=str(doc.get("name", "custom")))


# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SchemeTotals:
    total_gates: int
    total_qubits: int
    per_iteration: tuple[dict, ...]
    dmera_supplement_count: int | None = None
    dmera_table_count: int | None = None


def scheme_totals(scheme: InteractionScheme) -> SchemeTotals:
    """Count non-identity gate slots and every qubit ever introduced.

    For DMERA schemes the two closed-form gate counts quoted for the
    construction are reported next to the exact count; they are not
    expected to agree with it.
    """
    per = []
    total_g = 0
    total_q = 0
    for it in scheme.iterations:
        g = sum(1 for layer in it.layers for _, gate in layer if not gate.is_identity)
        q = len(it.fresh_wires)
        per.append({"iteration": it.index, "gates": g, "new_qubits": q, "live": len(scheme.live_wires(it.index))})
        total_g += g
        total_q += q
    sup = tab = None
    if scheme.name == "dmera":
        sup = (scheme.D - 1) * (2 ** (scheme.T + 1) - 1)
        tab = 2**scheme.T * scheme.D
    return SchemeTotals(total_g, total_q, tuple(per), sup, tab)
