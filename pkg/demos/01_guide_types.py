"""Parse a model, check it, and read off the guide types it was given."""
# %%
import gpp
from gpp.parser import format_guide_type
from gpp.typecheck import infer_program_types

print(gpp.corpus_source("toy"))

# %% [markdown]
# Every procedure gets one operator per channel.  A top-level run uses the
# operator body with the continuation closed off by `1`.

# %%
toy = gpp.load_corpus("toy")
types = infer_program_types(toy)
for proc in ("Model", "Guide1"):
    decl = toy.proc(proc)
    for chan in filter(None, (decl.consume, decl.provide)):
        print(f"{proc:8s} {chan:7s} {format_guide_type(types.protocol(proc, chan))}")

# %% [markdown]
# Recursive procedures produce recursive operators.  The expression-tree
# generator calls itself twice in one arm, and that shows up as a nested
# application.

# %%
pcfg = infer_program_types(gpp.load_corpus("pcfg"))
td = pcfg.typedefs["PcfgGen.latent"]
print(f"{td.op}[{td.param}] = {format_guide_type(td.body)}")

# %% [markdown]
# Errors are reported with a source location.

# %%
bad = "proc P() consume a provide . = sample[recv](a, Normal(0.0, -1.0))"
try:
    infer_program_types(gpp.parse_program(bad, "bad.gpp"))
except gpp.TypeCheckError as exc:
    print("rejected:", exc)
