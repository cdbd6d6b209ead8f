# %% [markdown]
# # Aggregation rules and their robustness
#
# Every rule returns the set of all rankings consistent with its scores,
# without tie-breaking. The error between two aggregate sets is the
# asymmetric expected distance.

# %%
import numpy as np

from prefnet.analysis import weak_insensitivity_test
from prefnet.prefmath import perm_table
from prefnet.voting import RULES, aggregate, delta

profile = [(1, 2, 0), (0, 1, 2)]
print(aggregate("borda", profile).preferences)
print(len(aggregate("smith", [(0, 1, 2), (1, 2, 0), (2, 0, 1)])))

# %%
rng = np.random.default_rng(4)
P = perm_table(4).perms[rng.integers(0, 24, 40)]
Q = P[rng.integers(0, 40, 5)]
for rule in RULES:
    if rule == "dictatorship":
        continue
    print(f"{rule:20s} {delta(aggregate(rule, P), aggregate(rule, Q)):.3f}")

# %% [markdown]
# Perturb every voter by a mean distance and measure how far the aggregate
# moves. A small grid keeps this quick.

# %%
for rule in ("dictatorship:0", "borda", "plurality", "veto"):
    rep = weak_insensitivity_test(rule, P, sigma_fractions=[0.3, 0.7], samples=60, seed=2)
    print(f"{rule:15s} pass fraction {rep.pass_fraction:.2f}")
