"""Convergence diagnostics for the large-n limits of the block counts.

All distances are computed from exact laws (coefficient rows in log space),
never from samples. Grids beyond a few thousand use streamed rows, so memory
stays linear in n.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .models import (
    DomainError,
    _as_nb,
    ep_k_pmf,
    mr_poisson_rate,
    nb_k_pmf,
    nb_mr_falling_moment,
    validate_ep,
    validate_nb,
)
from .samplers import default_workers
from .specfn import sml_cdf, wright_mainardi

__all__ = [
    "ConvergenceTable",
    "tv_distance",
    "ks_distance",
    "shifted_poisson_tv",
    "thm1_pos_table",
    "thm1_neg_table",
    "thm1_mr_table",
    "diversity_table",
    "finite_regime_mass",
    "poissonization_table",
    "POS_GRID",
    "NEG_GRID",
]

POS_GRID = (100, 300, 1000, 3000, 5000)
NEG_GRID = (100, 300, 1000, 3000, 10000)
TAIL = 1e-14


@dataclass
class ConvergenceTable:
    """Per-n statistics along an increasing grid, with a first-vs-last verdict.

    ``key`` names the column whose decrease the verdict describes.
    """

    name: str
    params: dict
    n_grid: list
    columns: dict
    key: str
    target: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n-grid must be strictly increasing")
        for col, values in self.columns.items():
            if len(values) != len(self.n_grid):
                raise ValueError(f"column {col!r} does not match the grid")
            if not np.all(np.isfinite(values)):
                raise ArithmeticError(f"column {col!r} holds non-finite values")

    @property
    def values(self):
        return self.columns[self.key]

    @property
    def decreases(self):
        """Strict decrease between the first and last grid points."""
        v = self.values
        return len(v) >= 2 and v[-1] < v[0]

    @property
    def monotone(self):
        v = self.values
        return all(b <= a for a, b in zip(v, v[1:]))

    def rows(self):
        names = list(self.columns)
        yield ["n"] + names
        for i, n in enumerate(self.n_grid):
            yield [n] + [self.columns[c][i] for c in names]


def _map(fn, grid, workers):
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(grid))) as pool:
            return list(pool.map(fn, grid))
    return [fn(n) for n in grid]


# --------------------------------------------------------------------------
# distances
# --------------------------------------------------------------------------


def tv_distance(p, q):
    """(1/2) sum |p_i - q_i| for pmfs on 0, 1, 2, ... (shorter one zero-padded)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    p = np.where(p < TAIL, 0.0, p)
    q = np.where(q < TAIL, 0.0, q)
    return float(min(1.0, 0.5 * math.fsum(np.abs(p - q))))


def ks_distance(atoms, weights, cdf):
    """Kolmogorov distance between a discrete law and a continuous CDF.

    Both one-sided gaps are checked at every atom: the discrete CDF just
    before the atom and at the atom.
    """
    atoms = np.asarray(atoms, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    order = np.argsort(atoms)
    atoms, weights = atoms[order], weights[order]
    after = np.cumsum(weights) / weights.sum()
    before = np.concatenate([[0.0], after[:-1]])
    target = np.asarray(cdf(atoms), dtype=np.float64)
    gap = np.maximum(np.abs(after - target), np.abs(before - target))
    return float(min(1.0, gap.max()))


def shifted_poisson_tv(pk, mu):
    """TV between a law on k = 1..n (pk[k-1]) and 1 + Poisson(mu)."""
    pk = np.asarray(pk, dtype=np.float64)
    poi = stats.poisson.pmf(np.arange(pk.size), mu)
    beyond = float(stats.poisson.sf(pk.size - 1, mu))
    return float(min(1.0, 0.5 * (math.fsum(np.abs(pk - poi)) + beyond)))


# --------------------------------------------------------------------------
# block counts of the NB-CPSM
# --------------------------------------------------------------------------


def thm1_pos_table(alpha, z, n_grid=POS_GRID, workers=None):
    """TV(K(alpha, z, n), 1 + Poisson(z)) along the grid (alpha in (0,1), z > 0)."""
    params = validate_nb(alpha, z)
    if params.regime != "positive":
        raise DomainError("needs alpha in (0, 1) and z > 0")
    tv = _map(lambda n: shifted_poisson_tv(nb_k_pmf(params, n), z), n_grid, workers)
    return ConvergenceTable("thm1pos", {"alpha": alpha, "z": z}, list(n_grid), {"tv": tv}, "tv",
                            {"limit": "1 + Poisson(z)"})


def thm1_neg_table(alpha, z, n_grid=NEG_GRID, workers=None):
    """Mean and spread of K / n^(-alpha/(1-alpha)) against the constant (alpha z)^(1/(1-alpha)) / (-alpha)."""
    params = validate_nb(alpha, z)
    if params.regime != "negative":
        raise DomainError("needs alpha < 0 and z < 0")
    expo = -alpha / (1.0 - alpha)
    target = (alpha * z) ** (1.0 / (1.0 - alpha)) / -alpha

    def one(n):
        pk = nb_k_pmf(params, n)
        x = np.arange(1, n + 1) / n**expo
        mean = float(pk @ x)
        sd = math.sqrt(max(float(pk @ x**2) - mean**2, 0.0))
        return mean, sd

    res = _map(one, n_grid, workers)
    means = [m for m, _ in res]
    cols = {
        "mean": means,
        "sd": [s for _, s in res],
        "mean_ratio_error": [abs(m / target - 1.0) for m in means],
        "cv": [s / m for m, s in res],
    }
    return ConvergenceTable("thm1neg", {"alpha": alpha, "z": z}, list(n_grid), cols, "mean_ratio_error",
                            {"constant": target, "exponent": expo})


def thm1_mr_table(params, r, s, n_grid=POS_GRID, workers=None):
    """Falling factorial moments of M_r against lambda^s, lambda = alpha (1-alpha)_(r-1) z / r!."""
    params = _as_nb(params)
    lam = mr_poisson_rate(params, r)
    moments = _map(lambda n: nb_mr_falling_moment(params, n, r, s), n_grid, workers)
    cols = {"moment": moments, "rel_error": [abs(m / lam**s - 1.0) for m in moments]}
    return ConvergenceTable("thm1mr", {"alpha": params.alpha, "z": params.z, "r": r, "s": s},
                            list(n_grid), cols, "rel_error", {"lambda": lam, "lambda_pow_s": lam**s})


# --------------------------------------------------------------------------
# EP-SM diversity and Poissonization
# --------------------------------------------------------------------------


def diversity_table(alpha, theta, n_grid=(100, 1000, 5000), workers=None):
    """KS distance between the exact law of K_n / n^alpha and the scaled Mittag-Leffler CDF."""
    params = validate_ep(alpha, theta)
    if not 0 < alpha < 1:
        raise DomainError("the diversity limit needs alpha in (0, 1)")

    def one(n):
        pk = ep_k_pmf(params, n)
        return ks_distance(np.arange(1, n + 1) / n**alpha, pk, lambda s: sml_cdf(alpha, theta, s))

    ks = _map(one, n_grid, workers)
    return ConvergenceTable("diversity", {"alpha": alpha, "theta": theta}, list(n_grid), {"ks": ks}, "ks",
                            {"limit": "S_{alpha,theta}"})


def finite_regime_mass(alpha, theta, n):
    """Pr[K_n = m] for the finite regime alpha < 0, theta = m |alpha|."""
    params = validate_ep(alpha, theta)
    if params.regime != "finite":
        raise DomainError("needs alpha < 0 and theta = m|alpha|")
    pk = ep_k_pmf(params, n)
    return float(pk[params.m - 1]) if params.m <= n else 0.0


def poissonization_table(alpha, t, n_grid=POS_GRID, refined=False, workers=None):
    """TV between K(alpha, t n^alpha, n) and 1 + Poisson(t n^alpha).

    With ``refined`` the table also reports the distance to 1 + Poisson(omega),
    omega = t n^alpha + t M'(t)/M(t) with M the Wright-Mainardi function.
    """
    if not 0 < alpha < 1 or not t > 0:
        raise DomainError("needs alpha in (0, 1) and t > 0")
    shift = 0.0
    if refined:
        m, dm = wright_mainardi(alpha, t)
        shift = t * dm / m

    def one(n):
        z = t * n**alpha
        pk = nb_k_pmf(validate_nb(alpha, z), n)
        plain = shifted_poisson_tv(pk, z)
        if not refined:
            return (plain,)
        return plain, shifted_poisson_tv(pk, max(z + shift, 0.0))

    res = _map(one, n_grid, workers)
    cols = {"tv": [r[0] for r in res]}
    if refined:
        cols["tv_refined"] = [r[1] for r in res]
    return ConvergenceTable("poissonization", {"alpha": alpha, "t": t, "refined": refined}, list(n_grid),
                            cols, "tv", {"center_shift": shift})
