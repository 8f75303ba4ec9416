"""Following single packets through a run.

The engine records, per packet, when it arrived and left, how often it
touched the channel, and the largest window it reached.
"""
import numpy as np

from backofflab import AdversarySpec, EngineConfig, SlotState, run

res = run(EngineConfig(master_seed=3, adversary=AdversarySpec(arrivals={"kind": "batch", "n": 200})))
packets = res.trace.packets
acc = np.array([p.accesses for p in packets])
lat = np.array([p.departure - p.arrival + 1 for p in packets])
print(f"drained 200 packets in {res.summary.makespan} slots "
      f"(throughput {res.summary.throughput:.3f})")
print(f"accesses per packet: median {np.median(acc):.0f}, max {acc.max()}, "
      f"latency median {np.median(lat):.0f} slots")

first, last = min(packets, key=lambda p: p.departure), max(packets, key=lambda p: p.departure)
for tag, p in (("first out", first), ("last out", last)):
    print(f"{tag:9s} packet {p.id:3d}: left at slot {p.departure}, {p.accesses} accesses, "
          f"peak window {p.peak_window:.0f}")

states = np.asarray(res.trace.state)
share = {s.name.lower(): float(np.mean(states == s)) for s in SlotState}
print("slot mix:", ", ".join(f"{k} {v:.2f}" for k, v in share.items()))

# Contention C(t) over time: high right after the burst, then it settles.
C = np.asarray(res.trace.contention)
for t in (1, 10, 100, 500, len(C)):
    print(f"  C({t}) = {C[t - 1]:.3f} with {res.trace.active[t - 1]} packets")
