# %% [markdown]
# # Building a commuting pair and factorising it again
#
# We start from a block decomposition of `K = C^4`, two local channels `a` and
# `b`, and build maps `M` and `N` whose composite is `(a (x) b) o D` for the
# doubling map `D`. The forward pipeline should recover the block structure
# from `N o M` alone.

# %%
import numpy as np

from qfactor import check_conditions, factorise
from qfactor.synthetic import converse_instance

rng = np.random.default_rng(2024)
inst = converse_instance([(2, 1), (1, 2)], rng)
print("H layout:", inst.h_layout)

# %% [markdown]
# The three conditions: independence of `N` from `I`, unitality of
# `tr_A o M` on `K (x) J`, and the order-independence of the discarded output.

# %%
report = check_conditions(inst)
for key, value in report.to_dict().items():
    print(f"{key:28s} {value}")

# %%
cert = factorise(inst, seed=0)
print("blocks (dA, dB):", cert.decomposition.dims)
print("block weights:  ", np.round(cert.block_weights, 12))
print("Choi residual:  ", f"{cert.residual:.2e}")
print("CMI of Choi state (bits):", f"{cert.claim1_cmi:.2e}")

# %% [markdown]
# Each weight is `dA * dB / d_K`, so two blocks of size 2 in `C^4` get 1/2 each.
# The decomposition is only fixed up to local unitaries inside each block,
# so comparing bases directly is pointless; the composite map is what is
# pinned down, and its Choi residual is at round-off level.
