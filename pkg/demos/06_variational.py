"""Fit a guide's parameter by stochastic gradient ascent on the ELBO."""
# %%
import math

from scipy import stats

import gpp
from gpp.inference import ViParams, elbo_estimate, vi_optimize
from gpp.syntax import PSample, Trace

p = gpp.load_corpus("conjugate")
y = 1.2
so = Trace((PSample(y),))
log_z = stats.norm(0, math.sqrt(2)).logpdf(y)

# %%
history = []
theta = vi_optimize(p, "ConjGuide", ViParams.from_constrained([("m", "identity", -1.0)]),
                    "Conj", so, iters=300, n_per_iter=50, step_size=0.02, seed=7,
                    callback=history.append)
for rec in history[::50] + history[-1:]:
    print(f"iter {rec.iteration:3d}  m={rec.params['m']:+.4f}  elbo={rec.elbo:.5f}")

# %% [markdown]
# At the optimum the guide equals the posterior, so the ELBO meets the
# log evidence.

# %%
elbo, se = elbo_estimate(p, "ConjGuide", theta, "Conj", so, 2000, seed=8, return_stderr=True)
print(f"m = {theta.values()['m']:.4f} (exact {y / 2})")
print(f"ELBO {elbo:.6f} +- {se:.1e}, log evidence {log_z:.6f}")

# %% [markdown]
# Two parameters, one positive through an exp transform.

# %%
theta = vi_optimize(p, "ConjGuide2",
                    ViParams.from_constrained([("m", "identity", 0.0), ("s", "exp", 1.5)]),
                    "Conj", so, iters=300, n_per_iter=50, step_size=0.02, seed=9)
print({k: round(v, 3) for k, v in theta.values().items()}, "exact s =", round(math.sqrt(0.5), 3))
