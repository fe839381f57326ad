"""MH with a proposal that reads the previous trace."""
# %%
import gpp
from gpp.inference import mh_chain
from gpp.syntax import PSample, Trace

coin = gpp.load_corpus("coin")
print(gpp.corpus_source("coin"))

# %% [markdown]
# The observation is a `true` reading.  Exact posterior on the coin being
# `true` is 0.45 / (0.45 + 0.10) = 9/11.

# %%
so = Trace((PSample(True),))
chain = mh_chain(coin, "CoinFlip", "Coin", so, Trace((PSample(False),)), 20_000, burnin=500, seed=3)
frac = sum(s.trace[0].value for s in chain[1:]) / (len(chain) - 1)
print(f"chain estimate {frac:.4f}, exact {9 / 11:.4f}, acceptance {chain[-1].acceptance_rate:.3f}")

# %% [markdown]
# The same machinery handles a mixed discrete/continuous state.

# %%
outlier = gpp.load_corpus("outlier")
so = Trace((PSample(2.2),))
init = Trace((PSample(0.5), PSample(True)))
chain = mh_chain(outlier, "OutlierFlip", "Outlier", so, init, 20_000, burnin=500, seed=4)
print("P(outlier | y=2.2) ~", round(sum(s.trace[1].value for s in chain[1:]) / 20_000, 3))
