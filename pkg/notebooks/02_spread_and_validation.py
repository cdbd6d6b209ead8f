# %% [markdown]
# # Spreading preferences over a network
#
# A synthetic network gets edge parameters from a preset. The random
# preferences models then assign one ranking per node and topic, and we check
# how well the observed edge distances follow each edge's model.

# %%
import numpy as np

from prefnet import analysis, spread
from prefnet.network import generate_synthetic

net = generate_synthetic("er", 120, {"avg_degree": 2.0}, seed=11)
print(net.n, net.m)

# %%
profiles = spread.rpm_s(net, spread.SpreadConfig("rpm-s", topics=200, r=5, seed=1))
print(profiles.profile(0)[:5])

# %% [markdown]
# Failure fraction of the chi-square test per model. Independent cascade
# should fit best and uniform assignment worst.

# %%
reports = analysis.validate_models(net, 2000, seed=3)
print(analysis.validation_csv(reports))

# %% [markdown]
# The two-hop table and the deduced all-pairs distances.

# %%
table = spread.build_tr_table(5, 2000, seed=0)
print(table(0.1, 0.1), table(0.2, 0.3))
D = spread.msm_sp(net, table)
emp = analysis.empirical_distances(profiles)
print(f"deduced mean {D.mean():.3f}, simulated mean {emp.mean():.3f}")
