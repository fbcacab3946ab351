"""Using a fitted model as a stochastic precipitation generator.

Fits the simulated study data, draws 1000 synthetic 1800-day series from the
posterior means and checks that dry-day fractions and wet-day means bracket
the training values.

Run: python demos/03_synthetic_generator.py
"""

import numpy as np

from spghmm.generator import paper_simulation_preset, simulate, simulate_replicates
from spghmm.model import ModelDims, default_priors, posterior_means
from spghmm.stats import location_stats, replicate_rmse, replicate_summary
from spghmm.vbem import FitConfig, fit_cavi

np.set_printoptions(precision=3, suppress=True)
run = simulate(paper_simulation_preset(), 1800, np.random.default_rng(2))
post, _ = fit_cavi(run.data, default_priors(ModelDims(K=3, L=3, M=2)), FitConfig(max_iterations=5000))

summary = replicate_summary(simulate_replicates(posterior_means(post), 1800, 1000, seed=42))
train = location_stats(run.data)

for name, key, ref in (
    ("dry-day fraction", "dry", train.dry_proportion),
    ("wet-day mean (mm)", "intensity", train.mean_intensity),
):
    q = summary[f"{key}_quantiles"]
    values = summary["dry_proportion" if key == "dry" else "mean_intensity"]
    print(f"\n{name}")
    print("  training       ", ref)
    print("  synthetic 2.5% ", q[0])
    print("  synthetic 50%  ", q[2])
    print("  synthetic 97.5%", q[-1])
    print("  RMSE           ", replicate_rmse(values, ref))
