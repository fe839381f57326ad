"""Decide whether a guide can drive a model before running anything."""
# %%
import gpp
from gpp.typecheck import check_model_guide

toy = gpp.load_corpus("toy")
for guide in ("Guide1", "Guide2", "PriorGuide"):
    print(guide, check_model_guide(toy, "Model", guide).verdict)

# %% [markdown]
# Two guides that look plausible but sample the first latent from the wrong
# space.  The report points at the carrier that disagrees.

# %%
unsound = gpp.load_corpus("toy_unsound")
for guide in ("GuidePois", "GuideNormal"):
    rep = check_model_guide(unsound, "Model", guide)
    print(guide, rep.verdict)
    for reason in rep.reasons:
        print("   ", reason)
