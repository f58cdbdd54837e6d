import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conecraft._util import fmt, ordered_map
from conecraft.cone import support_radius, trace_cone
from conecraft.mixing import certify_matrix
from conecraft.scheme import build_dmera, build_mps
from conecraft.sim import (
    DensityState,
    expectation,
    heisenberg_evolve,
    local_observable,
    partial_trace,
    random_hermitian,
    random_state,
    run_schrodinger,
    spectral_spread,
)

seeds = st.integers(0, 2**31 - 1)
SETTINGS = settings(max_examples=25, deadline=None)


@st.composite
def schemes(draw):
    seed = draw(seeds)
    if draw(st.booleans()):
        return build_dmera(draw(st.integers(1, 3)), draw(st.integers(1, 2)), seed=seed)
    return build_mps(draw(st.integers(1, 5)), draw(st.integers(1, 2)), draw(st.integers(1, 2)), seed=seed)


@SETTINGS
@given(schemes(), seeds)
def test_duality_and_contraction(scheme, seed):
    rng = np.random.default_rng(seed)
    live = scheme.live_wires(scheme.T)
    sup = [int(q) for q in rng.choice(live, min(2, len(live)), replace=False)]
    op = local_observable(random_hermitian(len(sup), rng), sup, scheme.T)
    direct = expectation(run_schrodinger(scheme), op)
    prev = spectral_spread(op)[0]
    o = op
    while o.t > 0:
        o = heisenberg_evolve(scheme, o, o.t - 1)
        cur = spectral_spread(o)[0]
        assert cur <= prev + 1e-12
        prev = cur
    scalar = heisenberg_evolve(scheme, op, -1).matrix[0, 0].real
    assert math.isclose(scalar, direct, abs_tol=1e-10)


@SETTINGS
@given(schemes(), seeds)
def test_cone_monotone(scheme, seed):
    rng = np.random.default_rng(seed)
    live = scheme.live_wires(scheme.T)
    a = [int(rng.choice(live))]
    b = sorted(set(a) | {int(rng.choice(live))})
    for t in range(scheme.T + 1):
        ca, cb = trace_cone(scheme, a, t), trace_cone(scheme, b, t)
        assert set(g.index for g in ca.gates) <= set(g.index for g in cb.gates)
        if t > 0:
            earlier = trace_cone(scheme, a, t - 1)
            assert earlier.N_U >= ca.N_U and earlier.N_Q >= ca.N_Q


@SETTINGS
@given(st.integers(1, 4), seeds, st.data())
def test_partial_trace_is_a_state(n, seed, data):
    rho = random_state(n, np.random.default_rng(seed))
    keep = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    red = partial_trace(DensityState.from_matrix(range(n), rho), keep)
    red.check()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=6, unique=True))
def test_radius_on_a_path(qubits):
    graph = (tuple(range(31)), tuple((i, i + 1) for i in range(30)))
    assert support_radius(qubits, graph) == math.ceil((max(qubits) - min(qubits)) / 2)


@SETTINGS
@given(st.integers(1, 2), seeds, st.floats(-3, 3))
def test_estimator_is_sound(n, seed, shift):
    m = random_hermitian(n, np.random.default_rng(seed), normalize=False) + shift * np.eye(2**n)
    res = certify_matrix(m, mode="exact")
    assert res.L >= res.R_exact - 1e-10


@given(st.floats(allow_nan=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


@given(st.lists(st.integers()), st.integers(1, 8))
def test_ordered_map(items, threads):
    assert ordered_map(lambda v: v * 3 - 1, items, threads) == [v * 3 - 1 for v in items]
