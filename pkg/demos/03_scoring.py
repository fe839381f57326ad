"""Score fixed traces, and compare scoring with plain reduction."""
# %%
import math

import gpp
from gpp.errors import Stuck
from gpp.interpreter import eval_proc, model_log_density, reduce_proc
from gpp.syntax import CBranch, PSample, Trace

toy = gpp.load_corpus("toy")
obs = Trace((PSample(-0.5),))

# %% [markdown]
# The latent trace records the gamma draw and the branch the model took.

# %%
latent = Trace((PSample(1.0), CBranch(True)))
w, v = eval_proc(toy, "Model", (), latent, obs)
print(f"log weight {w:.6f}, result {v}")
print("check:", (math.log(1.0) - 1.0) + (-0.5 * 0.5 ** 2 - 0.5 * math.log(2 * math.pi)))

# %% [markdown]
# Recording the other branch for the same draw has zero density.  Scoring
# returns -inf; reduction has no rule that applies and gets stuck.

# %%
flipped = Trace((PSample(1.0), CBranch(False), PSample(0.5)))
print("density:", model_log_density(toy, "Model", obs, flipped))
try:
    reduce_proc(toy, "Model", (), flipped, obs)
except Stuck as exc:
    print("stuck:", exc)
