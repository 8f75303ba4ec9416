"""The potential Phi = a1*N + a2*H + a3*L along a run.

The run is cut into consecutive intervals whose length follows the largest
window. Phi should fall across most intervals, and it is 0 once the system
is empty. Intervals in the tail, where one packet waits at the minimum
window, often end with Phi unchanged.
"""
import numpy as np

from backofflab import AdversarySpec, EngineConfig, run

res = run(EngineConfig(master_seed=4, adversary=AdversarySpec(arrivals={"kind": "batch", "n": 1024})))
ivs = res.trace.intervals
d = np.array([iv.delta_phi for iv in ivs[1:]])
print(f"{len(ivs)} intervals over {res.summary.makespan} slots")
print(f"  phi fell in {np.mean(d < 0):.2f}, stayed flat in {np.mean(d == 0):.2f}, "
      f"rose in {np.mean(d > 0):.2f} of intervals after the first")
print("\n  idx   start   tau   phi_start    phi_end   low/good/high")
for iv in ivs[:6] + ivs[len(ivs) // 2:len(ivs) // 2 + 3] + ivs[-4:]:
    print(f"  {iv.index:4d} {iv.start:7d} {iv.tau:5d} {iv.phi_start:11.2f} {iv.phi_end:10.2f}"
          f"   {iv.low}/{iv.good}/{iv.high}")

# where do the flat intervals come from?
flat = [iv for iv in ivs[1:] if iv.delta_phi == 0]
tail = sum(iv.phi_start < 30 for iv in flat)
print(f"\n{tail} of {len(flat)} flat intervals start with phi < 30 (a handful of packets left)")
