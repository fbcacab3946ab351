"""Stochastic VB on year blocks, then a short CAVI polish, against full CAVI.

The same 1800 days are cut into 20 seasons of 90 days. Each SVB step looks at
one season, scales its statistics by 20 and takes a Robbins-Monro step.

Run: python demos/02_svb_year_blocks.py
"""

import time

import numpy as np

from spghmm.generator import paper_simulation_preset, simulate
from spghmm.model import ModelDims, default_priors, posterior_means
from spghmm.svb import SvbConfig, fit_svb, step_size
from spghmm.vbem import FitConfig, fit_cavi

np.set_printoptions(precision=3, suppress=True)
run = simulate(paper_simulation_preset(), 1800, np.random.default_rng(1))
blocks = run.data.reshape(20, 90, 3)
prior = default_priors(ModelDims(K=3, L=3, M=2))

print("first step sizes (kappa=0.9):", [round(step_size(i, 0.9), 4) for i in range(1, 6)])

t0 = time.time()
svb_post, svb_trace = fit_svb(blocks, prior, SvbConfig(svb_iterations=500, kappa=0.9, polish_cavi_iterations=50))
t_svb = time.time() - t0

t0 = time.time()
cavi_post, cavi_trace = fit_cavi(run.data, prior, FitConfig(max_iterations=5000), lengths=[90] * 20)
t_cavi = time.time() - t0

# The SVB trace mixes noisy minibatch estimates with exact polish values.
noisy = [e for e, p in zip(svb_trace.elbo, svb_trace.phase) if p == "svb"]
print(f"\nSVB minibatch ELBO estimates: first {noisy[0]:.1f}, last {noisy[-1]:.1f}")
print(f"SVB + polish final ELBO {svb_trace.final_elbo:.2f} ({t_svb:.1f}s)")
print(f"full CAVI final ELBO    {cavi_trace.final_elbo:.2f} ({t_cavi:.1f}s, {cavi_trace.iterations_run} iterations)")
gap = abs(svb_trace.final_elbo - cavi_trace.final_elbo) / abs(cavi_trace.final_elbo)
print(f"relative gap {gap:.1e}")

print("\nposterior mean A, SVB:\n", posterior_means(svb_post).A)
print("posterior mean A, CAVI:\n", posterior_means(cavi_post).A)
