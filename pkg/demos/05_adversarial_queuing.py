"""Adversarial queuing: at most lambda*S arrivals plus jams in every S slots.

The backlog stays O(S) however the adversary spreads its budget. Every
schedule the generators emit is checked with the sliding-window validator.
"""
import numpy as np

from backofflab import AdversarySpec, EngineConfig, run
from backofflab.adversary import QueuingConstraint, validate_schedule

lam, S, horizon = 0.05, 1000, 100_000
constraint = QueuingConstraint(lam, S)
print(f"lambda={lam}, S={S}: budget {constraint.budget} events per window, horizon {horizon}")
for pattern, share in (("front_loaded", 0.0), ("spread", 0.0), ("adaptive_greedy", 0.0),
                       ("adaptive_greedy", 0.4)):
    res = run(EngineConfig(master_seed=1, horizon=horizon, adversary=AdversarySpec(
        arrivals={"kind": "queuing", "lam": lam, "S": S, "pattern": pattern, "jam_share": share})))
    rep = validate_schedule(res.trace, constraint)
    active = np.asarray(res.trace.active)
    print(f"  {pattern:15s} jams {share:.0%}: max backlog {res.summary.max_backlog:3d}, "
          f"mean backlog {active.mean():5.1f}, delivered {res.summary.T}/{res.summary.N}, "
          f"schedule valid: {rep.ok}")

# A hand-made schedule that cheats: five arrivals and one jam in 100 slots
# with lambda = 0.05 (budget 5).
inj = np.zeros(200, dtype=int)
jam = np.zeros(200, dtype=int)
inj[:5] = 1
jam[5] = 1
print("\ncheating schedule:", validate_schedule((inj, jam), QueuingConstraint(0.05, 100)))
