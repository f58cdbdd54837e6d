"""Mixing in a translation-invariant MPS with a two-qubit bath.

Builds the transfer operator of the bath channel, shows its spectrum and the
distance of its powers from the fixed-point channel, and compares this with
the mixing rate of a local observable measured along the chain.

Run with ``python3 demos/mps_mixing.py``.
"""

from conecraft.mixing import build_transfer_operator, mixing_profile, mixing_time_bound
from conecraft.scheme import build_mps
from conecraft.sim import local_observable, pauli_string

T = 8
scheme = build_mps(T, 2, 2, gate_source="random", seed=3, translation_invariant=True)
op = build_transfer_operator(scheme)
mags = sorted(abs(op.eigenvalues), reverse=True)
print("transfer operator eigenvalue magnitudes:", " ".join(f"{m:.4f}" for m in mags))
print("mixing:", op.mixing)

res = mixing_time_bound(op, n_max=16, starts=10, seed=0)
print("\n n  search  envelope")
for n in sorted(res.norms):
    print(f"{n:2d}  {res.norms[n]:.4f}  {res.envelope[n]:.4f}")
print("first n with distance <= 0.2:", res.t1(0.2))

last = max(scheme.live_wires(T))
obs = local_observable(pauli_string("Z"), [last], T)
prof = mixing_profile(scheme, obs, t_min=0, observable_id="Z_last")
print("\nmixing rate of Z on the last system qubit")
for t in sorted(prof.values):
    print(f"t={t}: {prof.values[t]:.4f}")
if prof.fit:
    c, rate, rms = prof.fit
    print(f"exponential fit: c={c:.3f}, rate={rate:.3f}, rms residual {rms:.2e}")
