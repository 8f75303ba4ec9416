"""What happens in one slot.

Each active packet sends independently with probability 1/w. The exact
chances of an empty, successful or noisy slot depend only on the windows,
and the contention C = sum(1/w) pins them between simple exponentials.
"""
import numpy as np

from backofflab import check_probability_bounds, contention, exact_slot_probabilities
from backofflab.metrics import monte_carlo_slot_frequencies

print("windows              C       p_empty  p_success  p_noisy")
for ws in ([2, 2], [4, 4, 4, 4], [128] * 12, [10, 1000, 1e5], [3] * 10):
    pe, ps, pn = exact_slot_probabilities(ws)
    label = str(ws) if len(ws) < 5 else f"[{ws[0]}] x {len(ws)}"
    print(f"{label:20s} {contention(ws):6.3f}  {pe:.5f}  {ps:.5f}    {pn:.5f}")

# The bounds C e^-2C <= p_suc <= 2C e^-C etc. hold for every vector; the
# margins show how much room is left.
rep = check_probability_bounds([3] * 10)
print("\nbounds for ten windows of 3 (C = 3.33):")
for name, margin in rep.margins.items():
    print(f"  {name:10s} margin {margin:+.4f}")

# Simulating a million slots lands inside the binomial error bars.
rng = np.random.default_rng(0)
exact = exact_slot_probabilities([3] * 10)
emp = monte_carlo_slot_frequencies([3] * 10, 10 ** 6, rng)
print("\nMonte Carlo vs exact (10^6 slots):")
for name, p, f in zip(("empty", "success", "noisy"), exact, emp):
    sigma = (p * (1 - p) / 1e6) ** 0.5
    print(f"  {name:8s} {f:.5f} vs {p:.5f}  ({(f - p) / sigma:+.2f} sigma)")
