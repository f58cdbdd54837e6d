"""How far back must the cone reach to keep the error below a target?

Under noise, running only the last iterations of the cone trades a truncation
error (set by how well the observable mixes) against the noise that
accumulates on the gates and qubits kept. This script evaluates the stability
bound at every starting iteration of a DMERA circuit and compares it to the
error actually observed under depolarizing noise.

Run with ``python3 demos/noise_stability.py``.
"""

from conecraft.bounds import improved_stability_bound
from conecraft.cone import default_boundary_state, extract_effective_circuit, run_effective_circuit, trace_cone
from conecraft.mixing import mixing_profile
from conecraft.scheme import build_dmera
from conecraft.sim import NoiseModel, expectation, local_observable, pauli_string, run_schrodinger

T, D = 3, 1
scheme = build_dmera(T, D, seed=11)
support = [2, 3]
obs = local_observable(pauli_string("XX"), support, T)
noise = NoiseModel(p=0.002, q=0.002)

prof = mixing_profile(scheme, obs)
counts = {t: (c.N_U, c.N_Q) for t in range(T + 1) for c in [trace_cone(scheme, support, t)]}
ideal = expectation(run_schrodinger(scheme, mode="density"), obs)

print(f"eps_U={noise.eps_U}, eps_P={noise.eps_P}, ideal <XX> = {ideal:+.6f}\n")
print(" t  delta   N_U  N_Q  bound     observed")
for t in range(T + 1):
    bound = improved_stability_bound(prof.values, noise.eps_U, noise.eps_P, counts, t)
    cone = trace_cone(scheme, support, t)
    circuit = extract_effective_circuit(cone, default_boundary_state(cone, mode="mixed"))
    observed = abs(run_effective_circuit(circuit, obs, noise) - ideal)
    n_u, n_q = counts[t]
    print(f"{t:2d}  {prof.values[t]:.4f}  {n_u:3d}  {n_q:3d}  {bound:.5f}  {observed:.5f}")
    assert observed <= bound + 1e-12
