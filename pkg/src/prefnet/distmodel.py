"""Discrete truncated Gaussian over normalized Kendall-Tau distances.

For ``r`` alternatives the support is the grid ``{0, 1/C, ..., 1}`` with
``C = r(r-1)/2``.  Each grid point receives the truncated-Gaussian mass of the
half-step interval around it, so the intervals tile ``[0, 1]``.

Two parameterizations are used:

* :class:`EdgeDistribution` holds the *parent* Gaussian location/scale, the
  quantities estimated per node pair by :func:`fit_mle`;
* :func:`matched_dist` builds the discrete distribution whose own mean and
  standard deviation hit given targets (used where a distribution "with mean
  d" is required, e.g. the combination table and the insensitivity probe).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special, stats

SIGMA_CAP = 0.29
PMF_FLOOR = 1e-12
MLE_MU_GRID = np.round(np.arange(0, 101) * 0.01, 10)
MLE_SIGMA_GRID = np.round(np.arange(1, 59) * 0.005, 10)


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeDistribution:
    mu: float
    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise DistributionError(f"mu={self.mu} outside [0, 1]")
        if self.sigma < 0:
            raise DistributionError(f"sigma={self.sigma} is negative")
        if self.sigma > SIGMA_CAP + 1e-12:
            raise DistributionError(f"sigma={self.sigma} above cap {SIGMA_CAP}")


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    r: int
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.shape != (n_grid(self.r),):
            raise DistributionError(f"pmf must have {n_grid(self.r)} entries")
        if (pmf < 0).any() or abs(pmf.sum() - 1.0) > 1e-9:
            raise DistributionError("pmf must be non-negative and sum to 1")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    @property
    def grid(self) -> np.ndarray:
        return grid(self.r)

    def mean(self) -> float:
        return float(self.pmf @ self.grid)

    def std(self) -> float:
        g = self.grid
        m = self.pmf @ g
        return float(np.sqrt(max(self.pmf @ (g - m) ** 2, 0.0)))

    def __eq__(self, other):
        return isinstance(other, DiscreteDist) and self.r == other.r and np.array_equal(self.pmf, other.pmf)


def n_grid(r: int) -> int:
    return r * (r - 1) // 2 + 1


def grid(r: int) -> np.ndarray:
    c = r * (r - 1) // 2
    return np.arange(c + 1) / c


def _bin_edges(r: int) -> tuple[np.ndarray, np.ndarray]:
    g = grid(r)
    half = 1.0 / (r * (r - 1))
    return np.maximum(g - half, 0.0), np.minimum(g + half, 1.0)


def _log_interval_mass(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """log(Phi(b) - Phi(a)) for a < b, stable in both tails."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    lhi = special.log_ndtr(hi)
    llo = special.log_ndtr(lo)
    with np.errstate(divide="ignore"):
        return lhi + np.log1p(-np.exp(llo - lhi))


def log_pmf_parent(mu, sigma, r: int) -> np.ndarray:
    """Log pmf on the grid for parent parameters (broadcast; sigma > 0)."""
    lo, hi = _bin_edges(r)
    mu = np.asarray(mu, float)[..., None]
    sigma = np.asarray(sigma, float)[..., None]
    logm = _log_interval_mass((lo - mu) / sigma, (hi - mu) / sigma)
    return logm - special.logsumexp(logm, axis=-1, keepdims=True)


def _point_mass(x: float, r: int) -> np.ndarray:
    c = r * (r - 1) // 2
    pmf = np.zeros(c + 1)
    pmf[int(math.floor(x * c + 0.5))] = 1.0
    return pmf


def discretize(params: EdgeDistribution, r: int) -> DiscreteDist:
    if r < 2:
        raise DistributionError("r must be at least 2")
    if params.sigma < 0:
        raise DistributionError("sigma must be non-negative")
    if params.sigma == 0:
        return DiscreteDist(r, _point_mass(params.mu, r))
    pmf = np.exp(log_pmf_parent(params.mu, params.sigma, r))
    return DiscreteDist(r, pmf / pmf.sum())


def sample(dist: DiscreteDist, rng: np.random.Generator, size=None):
    """Draw grid distances (a float, or an array when ``size`` is given)."""
    idx = rng.choice(len(dist.pmf), size=size, p=dist.pmf)
    return dist.grid[idx]


def sample_index(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF lookup of raw grid indices for rows of ``cdf`` (vectorized)."""
    cdf = np.asarray(cdf)
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, cdf.shape[-1] - 1)


@lru_cache(maxsize=None)
def _mle_table(r: int) -> np.ndarray:
    # rows ordered sigma-major, so argmax's first hit is smallest sigma, then mu
    s, m = np.meshgrid(MLE_SIGMA_GRID, MLE_MU_GRID, indexing="ij")
    tab = log_pmf_parent(m.ravel(), s.ravel(), r)
    tab.setflags(write=False)
    return tab


def fit_mle(histogram, r: int) -> EdgeDistribution:
    """Grid-search maximum-likelihood parent (mu, sigma) for a distance histogram.

    ``histogram`` holds counts per grid point (length ``C(r,2)+1``).
    """
    h = np.asarray(histogram, dtype=float)
    if h.shape != (n_grid(r),):
        raise DistributionError(f"histogram must have {n_grid(r)} bins")
    if (h < 0).any() or h.sum() < 1:
        raise DistributionError("histogram needs a total count of at least 1")
    with np.errstate(invalid="ignore"):
        ll = np.where(h > 0, _mle_table(r), 0.0) @ h
    best = int(np.argmax(ll))
    si, mi = divmod(best, len(MLE_MU_GRID))
    return EdgeDistribution(float(MLE_MU_GRID[mi]), float(MLE_SIGMA_GRID[si]))


def histogram_of(distances, r: int) -> np.ndarray:
    """Counts per grid point for normalized distances that lie on the grid."""
    c = r * (r - 1) // 2
    k = np.rint(np.asarray(distances, float) * c).astype(int)
    return np.bincount(k, minlength=c + 1)


def kl_divergence(empirical: DiscreteDist, model: DiscreteDist) -> float:
    e = np.asarray(empirical.pmf)
    m = np.maximum(np.asarray(model.pmf), PMF_FLOOR)
    nz = e > 0
    return float(np.sum(e[nz] * np.log(e[nz] / m[nz])))


def emd(a: DiscreteDist, b: DiscreteDist) -> float:
    """1-D Wasserstein distance between two distributions on the same grid."""
    if len(a.pmf) != len(b.pmf):
        raise DistributionError("distributions live on different grids")
    c = len(a.pmf) - 1
    return float(np.abs(np.cumsum(a.pmf) - np.cumsum(b.pmf))[:-1].sum() / c)


def chi_square_critical(dof: int, alpha: float = 0.05) -> float:
    return float(stats.chi2.ppf(1.0 - alpha, dof))


def chi_square(observed, model: DiscreteDist, alpha: float = 0.05) -> tuple[float, bool]:
    """Pearson statistic of ``observed`` against ``model`` and whether it passes."""
    obs = np.asarray(observed, dtype=float)
    if obs.shape != model.pmf.shape:
        raise DistributionError("observed counts and model differ in grid size")
    total = obs.sum()
    expected = total * np.maximum(model.pmf, PMF_FLOOR)
    stat = float(np.sum((obs - expected) ** 2 / expected))
    return stat, stat <= chi_square_critical(len(obs) - 1, alpha)


# ---------------------------------------------------------------------------
# moments of the [0, 1]-truncated Gaussian

def _truncated_moments(m, s):
    a = (0.0 - np.asarray(m, float)) / s
    b = (1.0 - np.asarray(m, float)) / s
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean, var = stats.truncnorm.stats(a, b, loc=m, scale=s, moments="mv")
    return np.asarray(mean, float), np.sqrt(np.maximum(np.asarray(var, float), 0.0))


def _tilted_moments(beta: float) -> tuple[float, float]:
    """Mean and std of the density proportional to exp(beta*x) on [0, 1]."""
    b = abs(beta)
    if b < 1e-6:
        return 0.5 + beta / 12.0, math.sqrt(1.0 / 12.0)
    e = math.exp(-b)
    upper_mean = 1.0 / -math.expm1(-b) - 1.0 / b
    var = 1.0 / b**2 - e / math.expm1(-b) ** 2
    mean = upper_mean if beta > 0 else 1.0 - upper_mean
    return mean, math.sqrt(max(var, 0.0))


@lru_cache(maxsize=4096)
def sigma_max(mu_d: float) -> float:
    """Largest standard deviation a [0,1]-truncated Gaussian with mean ``mu_d`` can have.

    Scans parent scales on a log grid (solving the parent location that
    reproduces the mean) together with the infinite-scale limit, where the
    truncated Gaussian degenerates into an exponentially tilted uniform.
    """
    if not 0.0 <= mu_d <= 1.0:
        raise DistributionError(f"mean {mu_d} outside [0, 1]")
    if mu_d in (0.0, 1.0):
        return 0.0
    if mu_d > 0.5:
        return sigma_max(1.0 - mu_d)
    best = 0.0
    for s in np.geomspace(1e-2, 1e2, 16):
        def gap(m):
            return float(_truncated_moments(m, s)[0]) - mu_d
        lo, hi = -1.0 - 40 * s, 1.0 + 40 * s
        try:
            m = optimize.brentq(gap, lo, hi, xtol=1e-12)
        except ValueError:
            continue
        sd = float(_truncated_moments(m, s)[1])
        if np.isfinite(sd):
            best = max(best, sd)
    beta = optimize.brentq(lambda b: _tilted_moments(b)[0] - mu_d, -1e9, 1e9, xtol=1e-12)
    return max(best, _tilted_moments(beta)[1])


def _discrete_moments(m: float, log_s: float, r: int) -> tuple[float, float]:
    pmf = np.exp(log_pmf_parent(m, math.exp(log_s), r))
    g = grid(r)
    mean = pmf @ g
    return float(mean), float(np.sqrt(max(pmf @ (g - mean) ** 2, 0.0)))


def matched_dist(mean: float, std: float, r: int) -> DiscreteDist:
    """Discrete truncated Gaussian whose own mean is ``mean`` and std is close to ``std``.

    The mean is matched to solver precision.  The standard deviation is
    matched when attainable on the grid and otherwise pushed to the nearest
    attainable value.
    """
    if not 0.0 <= mean <= 1.0:
        raise DistributionError(f"mean {mean} outside [0, 1]")
    if std < 0:
        raise DistributionError("std must be non-negative")
    c = r * (r - 1) // 2
    if mean in (0.0, 1.0) or (std == 0.0 and abs(mean * c - round(mean * c)) < 1e-12):
        return DiscreteDist(r, _point_mass(mean, r))
    lo_ls, hi_ls = math.log(1e-4), math.log(1e2)

    def resid(x):
        mu, sd = _discrete_moments(x[0], x[1], r)
        return [mu - mean, sd - std]

    x0 = [mean, math.log(min(max(std, 2e-4), 50.0))]
    sol = optimize.least_squares(resid, x0, bounds=([-60.0, lo_ls], [61.0, hi_ls]), xtol=1e-12, ftol=1e-12)
    log_s = float(sol.x[1])
    s = math.exp(log_s)
    span = 1.0 + 60.0 * s
    m = optimize.brentq(lambda v: _discrete_moments(v, log_s, r)[0] - mean, -span, 1.0 + span, xtol=1e-13)
    pmf = np.exp(log_pmf_parent(m, s, r))
    return DiscreteDist(r, pmf / pmf.sum())


# ---------------------------------------------------------------------------
# histogram files

def read_histogram(path, r: int) -> np.ndarray:
    g = grid(r)
    counts = np.zeros(len(g))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            k = int(np.rint(float(row["grid_value"]) * (len(g) - 1)))
            if not 0 <= k < len(g) or abs(g[k] - float(row["grid_value"])) > 1e-6:
                raise DistributionError(f"grid value {row['grid_value']} not on the r={r} grid")
            counts[k] += float(row["count"])
    return counts


def write_histogram(path, counts, r: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grid_value", "count"])
        for x, c in zip(grid(r), counts):
            w.writerow([f"{x:.6g}", int(c) if float(c).is_integer() else c])
