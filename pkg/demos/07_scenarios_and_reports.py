"""Scenario files, ensembles and report tables without the command line.

The same steps as ``backofflab simulate`` / ``sweep`` / ``report``.
"""
import tempfile
from pathlib import Path

from backofflab import build_report, load_scenario, run_ensemble, run_sweep
from backofflab.scenario import load_document
from backofflab.serialize import read_csv

here = Path(__file__).parent / "scenarios"
out = Path(tempfile.mkdtemp(prefix="backofflab-demo-"))

sc = load_scenario(here / "batch.yaml", overrides=["seeds.count=4", "arrivals.n=128"])
ens = run_ensemble(sc, out)
agg = ens.aggregates["throughput"]
print(f"{sc.name}: {len(ens.seeds)} seeds, throughput median {agg['median']:.3f} "
      f"(p05 {agg['p05']:.3f}, p95 {agg['p95']:.3f})")

doc = load_document(here / "batch.yaml")
doc["seeds"] = {"base": 1, "count": 3}
sweep = run_sweep(doc, "n", [32, 128, 512], out)
for v, e in zip(sweep.values, sweep.ensembles):
    print(f"  n={v:4d}: throughput {e.aggregates['throughput']['median']:.3f}, "
          f"max accesses {e.aggregates['max_accesses']['median']:.0f}")

files = build_report([out / sc.name, out / f"{doc['name']}-sweep-n"], out / "report")
print("\nreport tables:", ", ".join(f.name for f in files))
for row in read_csv(out / "report" / "max_accesses_vs_n.csv"):
    print(f"  {row['scenario']:10s} N={row['N']:>4s}  max accesses median "
          f"{float(row['max_accesses_median']):6.0f}   ln^4 N = {float(row['log4_N']):8.0f}")
print(f"\nartifacts under {out}")
