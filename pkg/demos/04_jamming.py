"""Jamming: the adversary can burn slots, but it pays one jam per slot.

Adaptive jammers decide from the history before the packets flip coins.
Reactive jammers also see who is sending right now (never who is only
listening) and can chase one packet.
"""
import numpy as np

from backofflab import AdversarySpec, EngineConfig, run


def batch(n, seed, **adv):
    return run(EngineConfig(master_seed=seed,
                            adversary=AdversarySpec(arrivals={"kind": "batch", "n": n}, **adv)))


print("adaptive jamming, batch of 256")
for label, jam in (("none", {"kind": "never"}), ("first 500 slots", {"kind": "first", "j": 500}),
                   ("random p=0.2", {"kind": "random", "p": 0.2}),
                   ("low contention", {"kind": "contention", "threshold": 0.5, "budget": 2000})):
    r = batch(256, 1, adaptive_jam=jam).summary
    print(f"  {label:16s} J={r.J:5d}  makespan={r.makespan:6d}  throughput={r.throughput:.3f}  "
          f"max accesses={r.max_accesses}")

print("\nreactive jammer chasing packet 0, batch of 1024")
for budget in (0, 32, 256):
    res = batch(1024, 2, reactive_jam={"kind": "target", "target": 0, "budget": budget})
    target = res.trace.packets[0]
    print(f"  budget {budget:3d}: packet 0 needed {target.accesses:6d} accesses "
          f"(population mean {res.summary.mean_accesses:.0f})")

# Everyone else barely notices: jams on packet 0's sends look like collisions
# to the others, and each jam costs the adversary budget.
