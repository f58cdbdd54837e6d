"""Certify that an evolved observable is close to a multiple of the identity.

Averages squared expectation values over random stabilizer states and turns
the sample moments into an upper estimate of the mixing rate. The exact
average over all stabilizer states is shown for comparison.

Run with ``python3 demos/certify.py``.
"""

from conecraft.mixing import certify_mixing
from conecraft.scheme import build_mps
from conecraft.sim import local_observable, pauli_string

T = 6
scheme = build_mps(T, 1, 2, seed=5)
last = max(scheme.live_wires(T))
obs = local_observable(pauli_string("Z"), [last], T)

for t in (T - 1, T - 3, 1):
    # L is a sound upper estimate, so it sits above the true rate.
    sampled = certify_mixing(scheme, obs, t, num_samples=2000, seed=1)
    exact = certify_mixing(scheme, obs, t, mode="exact")
    print(
        f"t={t}: {sampled.n_qubits} qubit(s), sampled L = {sampled.L:.4f}, "
        f"exact average L = {exact.L:.4f}, true rate = {exact.R_exact:.4f}"
    )
