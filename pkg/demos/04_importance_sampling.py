"""Posterior of the branching model by importance sampling."""
# %%
import numpy as np

import gpp
from gpp.inference import importance_sample, posterior_expectation
from gpp.syntax import PSample, Trace

toy = gpp.load_corpus("toy")
obs = Trace((PSample(0.8),))

ps = importance_sample(toy, "Guide1", "Model", obs, 20_000, seed=1)
print(f"ESS {ps.ess():.0f} of {len(ps)}")
print(f"log evidence {ps.log_evidence():.4f}")

# %% [markdown]
# Any function of the latent trace can be averaged under the weights.

# %%
print("P(x < 2 | obs) =", round(posterior_expectation(ps, lambda s: float(s[0].value < 2)), 4))
print("E[x | obs]     =", round(posterior_expectation(ps, lambda s: s[0].value), 4))

# %% [markdown]
# A histogram of the first latent, weighted.

# %%
xs = np.array([q.latent[0].value for q in ps.particles])
hist, edges = np.histogram(xs, bins=np.arange(0, 8.5, 0.5), weights=ps.normalized_weights())
for lo, h in zip(edges, hist):
    print(f"{lo:4.1f} {'#' * int(200 * h)}")
