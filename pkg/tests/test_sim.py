import numpy as np
import pytest

from conecraft.scheme import build_dmera, build_mps, named_gate
from conecraft.sim import (
    PAULI,
    CapExceeded,
    DensityState,
    HeisenbergOperator,
    NoiseModel,
    expectation,
    heisenberg_evolve,
    heisenberg_trajectory,
    local_observable,
    observable_from_json,
    observable_to_json,
    partial_trace,
    pauli_string,
    random_hermitian,
    random_state,
    run_schrodinger,
    spectral_spread,
)

from oracles import full_statevector, local_expectation, ptrace_loop

Z, X = PAULI["Z"], PAULI["X"]
ONE = np.array([[0, 0], [0, 1]], dtype=complex)


class TestSchrodinger:
    def test_empty_scheme(self):
        st = run_schrodinger(build_dmera(0, 1), mode="density")
        assert np.allclose(st.matrix, [[1, 0], [0, 0]])

    def test_swap_chain(self):
        s = build_mps(2, 1, 1, gate_source="swap", system_state=ONE)
        st = run_schrodinger(s, mode="density")
        b = s.bath_wires[0]
        red = partial_trace(st, [b])
        assert np.allclose(red.matrix, ONE)

    def test_full_depolarizing(self):
        s = build_dmera(2, 1, seed=4)
        st = run_schrodinger(s, NoiseModel(p=1.0), mode="density")
        for q in s.live_wires(2):
            for P in (X, Z, PAULI["Y"]):
                assert abs(expectation(st, local_observable(P, [q], 2))) < 1e-10

    def test_noise_needs_density(self):
        with pytest.raises(ValueError):
            run_schrodinger(build_dmera(1, 1), NoiseModel(p=0.1), mode="pure")

    @pytest.mark.parametrize(
        "scheme",
        [build_mps(1, 1, 1, seed=9), build_dmera(2, 1, seed=2), build_mps(3, 2, 2, seed=5), build_dmera(3, 1, seed=8)],
        ids=["mps3q", "dmera4q", "mps6q", "dmera8q"],
    )
    def test_against_naive_oracle(self, scheme):
        wires, vec = full_statevector(scheme)
        rng = np.random.default_rng(0)
        st = run_schrodinger(scheme)
        for _ in range(3):
            sup = [int(q) for q in rng.choice(wires, 2, replace=False)]
            m = random_hermitian(2, rng)
            got = expectation(st, local_observable(m, sup, scheme.T))
            assert got == pytest.approx(local_expectation(wires, vec, sup, m), abs=1e-12)

    def test_pure_and_density_agree(self):
        s = build_mps(3, 2, 1, seed=1)
        a, b = run_schrodinger(s, mode="pure"), run_schrodinger(s, mode="density")
        op = local_observable(pauli_string("ZX"), list(s.bath_wires), s.T)
        assert expectation(a, op) == pytest.approx(expectation(b, op), abs=1e-12)

    def test_noisy_state_is_valid(self):
        st = run_schrodinger(build_mps(3, 1, 1, seed=3), NoiseModel(0.05, 0.1), mode="density")
        st.check()


class TestExpectation:
    def test_identity(self):
        st = run_schrodinger(build_dmera(1, 1))
        assert expectation(st, HeisenbergOperator.identity(1)) == 1.0

    def test_z_on_zero(self):
        st = run_schrodinger(build_dmera(0, 1))
        assert expectation(st, local_observable(Z, [0], 0)) == 1.0

    def test_support_outside_roster(self):
        st = run_schrodinger(build_dmera(1, 1))
        with pytest.raises(ValueError):
            expectation(st, local_observable(Z, [7], 1))


class TestHeisenberg:
    def test_identity_is_preserved(self):
        s = build_dmera(3, 2, seed=1)
        out = heisenberg_evolve(s, HeisenbergOperator.identity(3), -1)
        assert out.n == 0 and out.matrix[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_identity_gates(self):
        s = build_dmera(3, 1, gate_source=named_gate("id"))
        op = heisenberg_evolve(s, local_observable(Z, [0], 3), 1)
        assert op.support == (0,)
        assert np.array_equal(op.matrix, Z)

    @pytest.mark.parametrize("seed", range(5))
    def test_duality_dmera(self, seed):
        s = build_dmera(2, 1, seed=seed)
        op = local_observable(Z, [0], 2)
        direct = expectation(run_schrodinger(s), op)
        scalar = heisenberg_evolve(s, op, -1).matrix[0, 0].real
        assert scalar == pytest.approx(direct, abs=1e-10)

    def test_duality_at_intermediate_time(self):
        s = build_mps(4, 2, 2, seed=6)
        rng = np.random.default_rng(1)
        op = local_observable(random_hermitian(2, rng), list(s.bath_wires), 4)
        direct = expectation(run_schrodinger(s), op)
        for t in range(4):
            o_t = heisenberg_evolve(s, op, t)
            state = run_schrodinger(s, mode="density", upto=t)
            assert expectation(state, o_t) == pytest.approx(direct, abs=1e-10)

    def test_cap(self):
        s = build_dmera(5, 3, seed=0)
        op = local_observable(pauli_string("ZZ"), [0, 1], 5)
        with pytest.raises(CapExceeded) as exc:
            heisenberg_evolve(s, op, 0, cap=3)
        assert exc.value.iteration is not None
        assert f"iteration {exc.value.iteration}" in str(exc.value)

    def test_trajectory_contraction(self):
        s = build_mps(6, 2, 1, seed=2)
        rng = np.random.default_rng(3)
        op = local_observable(random_hermitian(1, rng), [s.live_wires(6)[-1]], 6)
        traj = heisenberg_trajectory(s, op, 0)
        spreads = [spectral_spread(traj[t])[0] for t in range(7)]
        for a, b in zip(spreads, spreads[1:]):
            assert a <= b + 1e-12

    def test_bad_range(self):
        s = build_dmera(1, 1)
        with pytest.raises(ValueError):
            heisenberg_evolve(s, local_observable(Z, [0], 1), 2)


class TestSpectralSpread:
    def test_identity(self):
        assert spectral_spread(np.eye(2)) == (0.0, 1.0)

    def test_z(self):
        assert spectral_spread(Z) == (1.0, 0.0)

    def test_synthetic_spectrum(self):
        rng = np.random.default_rng(7)
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        m = q @ np.diag([-2.0, -1.0, 0.0, 3.0]) @ q.conj().T
        d, c = spectral_spread(m)
        assert d == pytest.approx(2.5, abs=1e-12)
        assert c == pytest.approx(0.5, abs=1e-12)


class TestPartialTrace:
    def test_product(self):
        rng = np.random.default_rng(0)
        a, b = random_state(1, rng), random_state(2, rng)
        st = DensityState.from_matrix([0, 1, 2], np.kron(a, b))
        assert np.allclose(partial_trace(st, [0]).matrix, a)
        assert np.allclose(partial_trace(st, [1, 2]).matrix, b)

    def test_bell(self):
        v = np.array([1, 0, 0, 1]) / np.sqrt(2)
        st = DensityState.from_vector([0, 1], v)
        assert np.allclose(partial_trace(st, [1]).matrix, np.eye(2) / 2)

    @pytest.mark.parametrize("keep", [[0, 2], [1], [0, 1]])
    def test_against_loop(self, keep):
        rho = random_state(3, np.random.default_rng(5))
        got = partial_trace(DensityState.from_matrix([10, 11, 12], rho), [10 + k for k in keep])
        assert np.allclose(got.matrix, ptrace_loop(rho, 3, keep), atol=1e-13)

    def test_empty_keep(self):
        with pytest.raises(ValueError):
            partial_trace(DensityState.from_matrix([0], np.eye(2) / 2), [])


class TestNoiseModel:
    def test_proxies(self):
        n = NoiseModel(p=0.01, q=0.002)
        assert n.eps_U == 0.02 and n.eps_P == 0.001

    @pytest.mark.parametrize("p,q", [(-0.1, 0), (0, 1.5)])
    def test_range(self, p, q):
        with pytest.raises(ValueError):
            NoiseModel(p, q)


def test_observable_json_roundtrip():
    s = build_dmera(2, 1)
    op = local_observable(pauli_string("XZ"), [1, 2], 2)
    back = observable_from_json(observable_to_json(op), s)
    assert back.support == op.support and np.array_equal(back.matrix, op.matrix)


def test_observable_json_rejects_non_hermitian():
    with pytest.raises(ValueError, match="Hermitian"):
        observable_from_json('{"support": [0], "matrix": [[0,0],[1,0],[0,0],[0,0]]}')
