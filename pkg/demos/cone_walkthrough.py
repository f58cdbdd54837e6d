"""Trace the causal cone of a two-site observable in a small DMERA circuit.

The script prints how many gates and qubits the cone needs at each starting
iteration, then checks that the effective circuit reproduces the expectation
value of the full simulation.

Run with ``python3 demos/cone_walkthrough.py``.
"""

import numpy as np

from conecraft.cone import default_boundary_state, extract_effective_circuit, run_effective_circuit, trace_cone
from conecraft.scheme import build_dmera, scheme_totals
from conecraft.sim import expectation, local_observable, pauli_string, run_schrodinger

T, D = 3, 2
scheme = build_dmera(T, D, gate_source="random", seed=7)
totals = scheme_totals(scheme)
print(f"DMERA T={T} D={D}: {totals.total_qubits} qubits, {totals.total_gates} gates in total")

support = [3, 4]
obs = local_observable(pauli_string("ZZ"), support, T)
print(f"observable ZZ on qubits {support}\n")
print(" t  gates  qubits  boundary")
for t in range(T, -1, -1):
    cone = trace_cone(scheme, support, t)
    print(f"{t:2d}  {cone.N_U:5d}  {cone.N_Q:6d}  {list(cone.boundary)}")

full = expectation(run_schrodinger(scheme, mode="density"), obs)
cone = trace_cone(scheme, support, 1)
circuit = extract_effective_circuit(cone, default_boundary_state(cone))
local = run_effective_circuit(circuit, obs)
print(f"\nfull simulation  <ZZ> = {full:+.12f}")
print(f"cone from t=1    <ZZ> = {local:+.12f}")
print(f"difference            = {abs(full - local):.2e}")
assert np.isclose(full, local, atol=1e-10)
