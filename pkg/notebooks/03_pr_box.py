# %% [markdown]
# # Why unitality cannot be dropped
#
# Two classical maps `X` and `Y` share a register `K` that holds a pair of
# bits or a blank symbol. If `K` is blank, whoever acts first writes a random
# bit together with their input, so the second party's output is forced to
# satisfy `a xor b = i j`. Both composition orders agree, and `N` does not read
# `I`, yet the composite is a PR box.

# %%
from qfactor.prbox import (build_pr_maps, chsh_win_prob, classical_max_win, composed_behavior,
                           demonstrate_necessity)

inst = build_pr_maps()
beh = composed_behavior(inst)
print("CHSH win probability of N o M on the blank input:", round(chsh_win_prob(beh), 12))
print("best classical strategy:", classical_max_win())

# %% [markdown]
# A factorised quantum strategy is capped at `cos^2(pi/8)`. The pipeline
# detects the problem before getting that far, because `tr_A o X` is not
# unital. Forcing the pipeline past the check shows the Choi state is not
# Markov.

# %%
rep = demonstrate_necessity()
print("failed conditions:", rep.failed)
print(f"unitality residual: {rep.conditions.cond2_unital_residual:.3f}")
print(f"CMI of the Choi state: {rep.cmi:.6f} bits")
print(f"Tsirelson bound: {rep.tsirelson_win:.6f}")
for line in rep.messages:
    print(" ", line)

# %% [markdown]
# The CMI comes out at exactly 1/5 bit. Only the blank value of `K` (one basis
# state out of five) carries correlation between the two outputs, and there it
# is one full bit.
