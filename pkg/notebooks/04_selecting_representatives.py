# %% [markdown]
# # Choosing representatives
#
# Greedy selection on the worst-case and total similarity objectives,
# compared against centrality baselines and random polling.

# %%
import numpy as np

from prefnet import analysis, selection

rng = np.random.default_rng(0)
D = rng.random((8, 8))
D = (D + D.T) / 2
np.fill_diagonal(D, 0)

for obj in ("min", "sum"):
    res = selection.greedy_select(obj, D, 3, rng)
    print(obj, res.members, res.weights, round(selection.rho(res.members, D), 3), round(selection.psi(res.members, D), 3))

# %% [markdown]
# The pairwise similarity game: Shapley value in closed form, and the other
# solution concepts agree with it.

# %%
print(selection.shapley_closed(D).round(3))
print(selection.tu_checks(D).ok)

# %% [markdown]
# A small error-vs-k experiment.

# %%
cfg = analysis.ExperimentConfig(n=80, graph="ws", graph_params=(("k", 6),), topics=60, r=5,
                                rules=("plurality", "borda"), ks=(1, 3, 5, 10), poll_runs=20,
                                tr_samples=1000, seed=1)
print(analysis.results_csv(analysis.run_experiment(cfg)))
