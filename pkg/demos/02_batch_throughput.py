"""Batch of N packets: LowSense keeps throughput flat, BEB does not.

Throughput is (successes + jammed slots) / active slots. With no jamming it
is N divided by the time needed to drain the batch.
"""
import numpy as np

from backofflab import AdversarySpec, EngineConfig, run

SEEDS = range(1, 6)

print("    N   LowSense thr   BEB thr   LowSense max accesses   BEB max accesses")
for n in (64, 256, 1024):
    row = {}
    for policy in ("lowsense", "beb"):
        res = [run(EngineConfig(policy=policy, master_seed=s,
                                adversary=AdversarySpec(arrivals={"kind": "batch", "n": n})))
               for s in SEEDS]
        row[policy] = (np.median([r.summary.throughput for r in res]),
                       np.median([r.summary.max_accesses for r in res]))
    print(f"{n:5d}   {row['lowsense'][0]:12.3f}   {row['beb'][0]:7.3f}   "
          f"{row['lowsense'][1]:21.0f}   {row['beb'][1]:16.0f}")

# BEB packets only touch the channel when they send, so they are frugal but
# slow; LowSense listens a polylogarithmic number of times and stays fast.
