# %% [markdown]
# # Rankings, distances and the edge distance model
#
# Preferences are permutations of `r` alternatives. Two rankings are compared
# by Kendall-Tau (pairwise disagreements) or by Spearman's footrule.

# %%
import numpy as np

from prefnet import distmodel
from prefnet.distmodel import EdgeDistribution
from prefnet.prefmath import count_at_distance, footrule_similarity, mahonian_row, norm_kt, perm_table

print(norm_kt((0, 1, 2), (1, 2, 0)))
print(footrule_similarity((0, 1, 2, 3, 4), (1, 4, 2, 0, 3)))

# %% [markdown]
# How many rankings sit at each raw KT distance from a fixed one:

# %%
print(mahonian_row(5))
print(count_at_distance(5, 1), sum(mahonian_row(5)))

# %% [markdown]
# Every edge carries a Gaussian truncated to [0, 1] and discretized on the
# grid of attainable normalized distances.

# %%
dist = distmodel.discretize(EdgeDistribution(0.3, 0.1), 5)
for x, p in zip(distmodel.grid(5), dist.pmf):
    print(f"{x:.1f} {'#' * int(200 * p)}")

# %% [markdown]
# Sampling a ranking at a given distance, then fitting the model back from
# the observed histogram.

# %%
rng = np.random.default_rng(0)
pt = perm_table(5)
draws = distmodel.sample(dist, rng, 5000)
hist = distmodel.histogram_of(draws, 5)
fit = distmodel.fit_mle(hist, 5)
print(fit)
