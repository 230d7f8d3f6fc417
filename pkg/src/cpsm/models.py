"""Parameter records and exact laws of the three sampling models.

EP-SM: Ewens-Pitman (alpha, theta). LS-CPSM: log-series compound Poisson (z).
NB-CPSM: negative-binomial compound Poisson (alpha, z).

Partition laws take multiplicity vectors (m_1, ..., m_n), m_i = number of
blocks of size i. Every function accepting a multiplicity vector also accepts
a 2-d array with one vector per row and then returns an array.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import special

from .specfn import (
    SignedLog,
    StableDensityEvaluator,
    bn_series,
    incgamma_ratio,
    log_ascending_factorial,
    scaled_gfc_log_rows,
)

__all__ = [
    "DomainError",
    "TruncationError",
    "EpParams",
    "NbParams",
    "Multiplicities",
    "validate_ep",
    "validate_nb",
    "log_block_weights",
    "ep_logpmf",
    "ep_pmf",
    "ls_logpmf",
    "ls_pmf",
    "nb_logpmf",
    "nb_pmf",
    "nb_log_normalizer",
    "nb_normalizer_incgamma",
    "ep_k_pmf",
    "nb_k_pmf",
    "nb_k_pmf_many",
    "nb_k_pgf",
    "nb_mr_falling_moment",
    "mr_poisson_rate",
    "tilted_poisson_pmf",
    "tilted_poisson_support",
    "xbar_logpdf",
    "xbar_density",
    "xbar_cdf",
    "xbar_mean",
    "logser_pmf",
    "negbin_pmf",
    "unconditioned_pmfs",
]

FINITE_TOL = 1e-12


class DomainError(ValueError):
    """Parameters or arguments outside the model's domain."""


class TruncationError(ArithmeticError):
    """A truncated infinite support did not capture enough mass."""


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EpParams:
    alpha: float
    theta: float
    regime: str  # "continuous" or "finite"
    m: int | None = None

    @property
    def max_blocks(self):
        return self.m


@dataclass(frozen=True)
class NbParams:
    alpha: float
    z: float
    regime: str  # "positive" or "negative"

    @property
    def sigma(self):
        return -self.alpha

    @property
    def zeta(self):
        return -self.z


def validate_ep(alpha, theta):
    alpha, theta = float(alpha), float(theta)
    if not (math.isfinite(alpha) and math.isfinite(theta)):
        raise DomainError("parameters must be finite")
    if 0.0 <= alpha < 1.0:
        if theta <= -alpha:
            raise DomainError(f"EP-SM with alpha={alpha} needs theta > -alpha, got {theta}")
        return EpParams(alpha, theta, "continuous")
    if alpha < 0.0:
        ratio = theta / -alpha
        m = round(ratio)
        if m < 1 or abs(ratio - m) > FINITE_TOL * max(1.0, abs(ratio)):
            raise DomainError(f"EP-SM with alpha<0 needs theta = -m*alpha, m a positive integer; got m={ratio}")
        return EpParams(alpha, theta, "finite", int(m))
    raise DomainError(f"EP-SM needs alpha < 1, got {alpha}")


def validate_nb(alpha, z):
    alpha, z = float(alpha), float(z)
    if 0.0 < alpha < 1.0 and z > 0.0:
        return NbParams(alpha, z, "positive")
    if alpha < 0.0 and z < 0.0:
        return NbParams(alpha, z, "negative")
    raise DomainError(f"NB-CPSM needs alpha in (0,1) with z>0, or alpha<0 with z<0; got ({alpha}, {z})")


def _as_ep(params):
    if isinstance(params, EpParams):
        return params
    return validate_ep(*params)


def _as_nb(params):
    if isinstance(params, NbParams):
        return params
    return validate_nb(*params)


# --------------------------------------------------------------------------
# multiplicity vectors
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Multiplicities:
    """Block counts (m_1, ..., m_n) of a partition of n."""

    m: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        object.__setattr__(self, "m", m)
        if not m:
            raise DomainError("empty multiplicity vector")
        if any(v < 0 for v in m):
            raise DomainError("multiplicities must be nonnegative")
        if sum(i * v for i, v in enumerate(m, start=1)) != len(m):
            raise DomainError(f"sum of i*m_i must equal n={len(m)}")

    @property
    def n(self):
        return len(self.m)

    @property
    def k(self):
        return sum(self.m)

    @classmethod
    def from_sizes(cls, sizes, n=None):
        sizes = [int(s) for s in sizes]
        n = sum(sizes) if n is None else int(n)
        m = [0] * n
        for s in sizes:
            m[s - 1] += 1
        return cls(tuple(m))

    def sizes(self):
        return [i for i, v in enumerate(self.m, start=1) for _ in range(v)]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.m, dtype=dtype)


def _mult_batch(mult):
    """Return (2-d int array, was_single) after validating every row."""
    if isinstance(mult, Multiplicities):
        arr = np.asarray(mult.m, dtype=np.int64)[None, :]
        return arr, True
    arr = np.asarray(mult, dtype=np.int64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    n = arr.shape[1]
    if n == 0 or np.any(arr < 0) or np.any(arr @ np.arange(1, n + 1) != n):
        raise DomainError("invalid multiplicity vector: need m_i >= 0 and sum i*m_i = n")
    return arr, single


def _finish(values, single):
    return float(values[0]) if single else values


@lru_cache(maxsize=64)
def log_block_weights(alpha, n):
    """log((1-alpha)_(i-1) / i!) for i = 0..n (entry 0 is unused and set to -inf)."""
    i = np.arange(1, n + 1, dtype=np.float64)
    out = np.empty(n + 1)
    out[0] = -np.inf
    out[1:] = special.gammaln(i - alpha) - special.gammaln(1.0 - alpha) - special.gammaln(i + 1)
    out.flags.writeable = False
    return out


def _log_new_block_products(params, n):
    """log prod_{i=1}^{k-1} (theta + i*alpha) for k = 0..n; -inf where the product vanishes."""
    out = np.zeros(n + 1)
    i = np.arange(1, n, dtype=np.float64)
    if params.regime == "finite":
        # theta + i*alpha = -alpha*(m - i), zero from i = m on
        factors = -params.alpha * (params.m - i)
    else:
        factors = params.theta + i * params.alpha
    with np.errstate(divide="ignore"):
        logs = np.where(factors > 0, np.log(np.where(factors > 0, factors, 1.0)), -np.inf)
    out[2:] = np.cumsum(logs)
    return out


# --------------------------------------------------------------------------
# partition laws
# --------------------------------------------------------------------------


def ep_logpmf(params, mult):
    """log of the Ewens-Pitman probability of a multiplicity vector."""
    params = _as_ep(params)
    arr, single = _mult_batch(mult)
    n = arr.shape[1]
    k = arr.sum(axis=1)
    lv = log_block_weights(params.alpha, n)
    # the common factor theta of (theta/alpha)_(k) alpha^k and (theta)_(n) is cancelled,
    # which keeps theta = 0 and theta in (-alpha, 0) well defined
    log_den = log_ascending_factorial(params.theta + 1.0, n - 1).logmag
    out = (math.lgamma(n + 1) + _log_new_block_products(params, n)[k] - log_den
           + arr @ lv[1:] - special.gammaln(arr + 1).sum(axis=1))
    return _finish(out, single)


def ep_pmf(params, mult):
    return np.exp(ep_logpmf(params, mult))


def ls_logpmf(z, mult):
    z = float(z)
    if not z > 0:
        raise DomainError("LS-CPSM needs z > 0")
    arr, single = _mult_batch(mult)
    n = arr.shape[1]
    i = np.arange(1, n + 1, dtype=np.float64)
    out = (math.lgamma(n + 1) - log_ascending_factorial(z, n).logmag
           + arr @ (math.log(z) - np.log(i)) - special.gammaln(arr + 1).sum(axis=1))
    return _finish(out, single)


def ls_pmf(z, mult):
    return np.exp(ls_logpmf(z, mult))


def _log_alpha_z(params):
    az = params.alpha * params.z
    assert az > 0, "alpha*z must be positive in both NB-CPSM regimes"
    return math.log(az)


def nb_log_normalizer(params, n, offsets=(0,)):
    """log sum_j C(n-o, j; alpha) z^j for each offset o; returns a dict keyed by n-o.

    The summands are positive in both regimes: C(n, j; alpha) z^j = E[n, j] (alpha z)^j.
    """
    params = _as_nb(params)
    la = _log_alpha_z(params)
    rows = scaled_gfc_log_rows(params.alpha, n, offsets)
    out = {}
    for m, row in rows.items():
        if m == 0:
            out[m] = 0.0
        else:
            out[m] = float(special.logsumexp(row + np.arange(m + 1) * la))
    return out


def nb_normalizer_incgamma(alpha, z, n):
    """sum_j C(n, j; alpha) z^j through the incomplete-gamma expansion (positive regime).

    The alternating sum cancels badly; only useful as a cross-check for small n.
    """
    params = validate_nb(alpha, z)
    if params.regime != "positive":
        raise DomainError("incomplete-gamma expansion is stated for z > 0")
    terms = []
    for i in range(1, n + 1):
        rising = log_ascending_factorial(-i * alpha, n)
        if rising.is_zero():
            continue
        mag = math.exp(rising.logmag + z + i * math.log(z) - math.lgamma(i + 1))
        terms.append((-1) ** i * rising.sign * mag * float(incgamma_ratio(n - i + 1, z)))
    return math.fsum(terms)


def nb_logpmf(params, mult):
    params = _as_nb(params)
    arr, single = _mult_batch(mult)
    n = arr.shape[1]
    lv = log_block_weights(params.alpha, n)
    log_norm = nb_log_normalizer(params, n)[n]
    out = (math.lgamma(n + 1) - log_norm + arr @ (_log_alpha_z(params) + lv[1:])
           - special.gammaln(arr + 1).sum(axis=1))
    return _finish(out, single)


def nb_pmf(params, mult):
    return np.exp(nb_logpmf(params, mult))


# --------------------------------------------------------------------------
# number of blocks
# --------------------------------------------------------------------------


def ep_k_pmf(params, n):
    """Pr[K_n = k], k = 1..n, under the EP-SM (index k-1).

    Computed term by term from the exact formula, without renormalisation, so
    the sum doubles as a check of the coefficient table.
    """
    params = _as_ep(params)
    n = int(n)
    row = scaled_gfc_log_rows(params.alpha, n)[n]
    log_den = log_ascending_factorial(params.theta + 1.0, n - 1).logmag
    lp = row[1:] + _log_new_block_products(params, n)[1:] - log_den
    return np.exp(lp)


def _nb_k_logweights(params, n, log_z_shift=0.0):
    row = scaled_gfc_log_rows(params.alpha, n)[n]
    return row[1:] + np.arange(1, n + 1) * (_log_alpha_z(params) + log_z_shift)


def nb_k_pmf(params, n):
    """Pr[K(alpha, z, n) = k], k = 1..n (index k-1)."""
    params = _as_nb(params)
    lw = _nb_k_logweights(params, int(n))
    return np.exp(lw - special.logsumexp(lw))


def nb_k_pmf_many(alpha, z, n):
    """nb_k_pmf for a vector of z values sharing alpha; shape (len(z), n)."""
    z = np.asarray(z, dtype=np.float64)
    validate_nb(alpha, float(z.flat[0]))
    if np.any(alpha * z <= 0):
        raise DomainError("every z must share the sign of alpha")
    row = scaled_gfc_log_rows(alpha, int(n))[int(n)]
    k = np.arange(1, n + 1)
    lw = row[None, 1:] + k[None, :] * np.log(alpha * z)[:, None]
    return np.exp(lw - special.logsumexp(lw, axis=1, keepdims=True))


def nb_k_pgf(params, n, s):
    """E[s^K] = sum_j C(n,j)(sz)^j / sum_j C(n,j) z^j for s > 0."""
    params = _as_nb(params)
    lw = _nb_k_logweights(params, int(n))
    k = np.arange(1, n + 1)
    return float(np.exp(special.logsumexp(lw + k * math.log(s)) - special.logsumexp(lw)))


def mr_poisson_rate(params, r):
    """alpha (1-alpha)_(r-1) z / r!, the limiting Poisson rate of M_r."""
    params = _as_nb(params)
    return math.exp(_log_alpha_z(params) + log_block_weights(params.alpha, r)[r])


def nb_mr_falling_moment(params, n, r, s):
    """E[(M_r)_[s]] for the NB-CPSM, exact for any n."""
    params = _as_nb(params)
    n, r, s = int(n), int(r), int(s)
    if r < 1 or s < 0:
        raise DomainError("need r >= 1 and s >= 0")
    if r * s > n:
        raise DomainError("r*s must not exceed n")
    norms = nb_log_normalizer(params, n, offsets=(0, r * s))
    log_fall = math.lgamma(n + 1) - math.lgamma(n - r * s + 1)
    log_rate = math.log(mr_poisson_rate(params, r))
    return math.exp(log_fall + s * log_rate + norms[n - r * s] - norms[n])


# --------------------------------------------------------------------------
# tilted Poisson mixing law (alpha < 0, z < 0)
# --------------------------------------------------------------------------


def _tilted_logweights(sigma, zeta, n, x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = (-zeta + x * math.log(zeta) - special.gammaln(x + 1)
              + special.gammaln(sigma * x + n) - special.gammaln(sigma * x))
    return np.where(x >= 1, lw, -np.inf)


def tilted_poisson_pmf(alpha, z, n, x):
    """Pr[X~ = x] for the tilted Poisson law; zero at x = 0."""
    params = validate_nb(alpha, z)
    if params.regime != "negative":
        raise DomainError("the tilted Poisson law needs alpha < 0 and z < 0")
    sigma, zeta = params.sigma, params.zeta
    log_norm = bn_series(sigma, zeta, n).logmag
    out = np.exp(_tilted_logweights(sigma, zeta, int(n), x) - log_norm)
    return float(out) if np.ndim(out) == 0 else out


def tilted_mean_guess(sigma, zeta, n):
    return zeta + (sigma * zeta) ** (1.0 / (1.0 + sigma)) * n ** (sigma / (1.0 + sigma)) / sigma + 1.0


@lru_cache(maxsize=128)
def tilted_poisson_support(alpha, z, n, tail=1e-14):
    """Support points 1..X and probabilities capturing all but ``tail`` of the mass."""
    params = validate_nb(alpha, z)
    if params.regime != "negative":
        raise DomainError("the tilted Poisson law needs alpha < 0 and z < 0")
    sigma, zeta = params.sigma, params.zeta
    log_norm = bn_series(sigma, zeta, n).logmag
    cap = int(10 * tilted_mean_guess(sigma, zeta, n)) + 50
    x = np.arange(1, cap + 1)
    p = np.exp(_tilted_logweights(sigma, zeta, int(n), x) - log_norm)
    # the mass beyond each point, summed from the small end; comparing the
    # cumulative sum with 1 would mix in the normaliser's rounding error
    beyond = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    if p[-1] > tail * 1e-3 or p[-1] >= p.max():
        raise TruncationError(f"tilted Poisson support capped at {cap} still has mass near the cap")
    last = int(np.flatnonzero(beyond < tail)[0]) + 1
    xs, ps = x[:last], p[:last]
    xs.flags.writeable = False
    ps.flags.writeable = False
    return xs, ps


# --------------------------------------------------------------------------
# mixing law X-bar (alpha in (0,1))
# --------------------------------------------------------------------------

_Y_LOG_RANGE = (-35.0, 35.0)
_Y_STEP = 0.01
# exp(y) must stay finite on the grid
_Y_LOG_CAP = 700.0


@lru_cache(maxsize=8)
def _stable_on_log_grid(alpha, upper=_Y_LOG_RANGE[1]):
    ly = np.arange(_Y_LOG_RANGE[0], upper + 0.5 * _Y_STEP, _Y_STEP)
    with np.errstate(over="ignore", under="ignore"):
        lf = StableDensityEvaluator(alpha).logpdf(np.exp(ly))
    ly.flags.writeable = False
    lf.flags.writeable = False
    return ly, lf


def _xbar_check(alpha, theta, n):
    if not 0 < alpha < 1:
        raise DomainError("X-bar needs alpha in (0, 1)")
    if not theta > -alpha:
        raise DomainError("X-bar needs theta > -alpha")
    if int(n) < 1:
        raise DomainError("n must be >= 1")


def xbar_logpdf(alpha, theta, n, z, method="quadrature"):
    alpha, theta, n = float(alpha), float(theta), int(n)
    _xbar_check(alpha, theta, n)
    z = np.asarray(z, dtype=np.float64)
    flat = np.atleast_1d(z).ravel()
    out = np.full(flat.shape, -np.inf)
    pos = flat > 0
    lz = np.log(flat[pos])
    log_const = (math.lgamma(theta + 1) - math.log(alpha) - math.lgamma(theta + n)
                 - math.lgamma(theta / alpha + 1))
    if method == "quadrature":
        # int_0^inf y^n exp(-y z^(1/alpha)) f_alpha(y) dy, trapezoid in log y
        # the integrand peaks near y = n / z^(1/alpha); small z needs a longer grid
        reach = math.log(n + 800.0) - lz.min(initial=0.0) / alpha
        upper = min(max(_Y_LOG_RANGE[1], 25.0 * math.ceil(reach / 25.0)), _Y_LOG_CAP)
        ly, lf = _stable_on_log_grid(alpha, upper)
        base = (n + 1) * ly + lf
        vals = np.empty(lz.size)
        for lo in range(0, lz.size, 256):
            lam = np.exp(lz[lo : lo + 256] / alpha)
            with np.errstate(over="ignore"):
                mat = base[None, :] - lam[:, None] * np.exp(ly)[None, :]
            vals[lo : lo + 256] = special.logsumexp(mat, axis=1) + math.log(_Y_STEP)
        out[pos] = log_const + ((theta + n) / alpha - 1.0) * lz + vals
    elif method == "series":
        row = scaled_gfc_log_rows(alpha, n)[n]
        j = np.arange(n + 1)
        sums = special.logsumexp(row[None, :] + j[None, :] * (math.log(alpha) + lz)[:, None], axis=1)
        out[pos] = log_const + (theta / alpha - 1.0) * lz - np.exp(lz) + sums
    else:
        raise ValueError(f"unknown method {method!r}")
    out = out.reshape(z.shape)
    return float(out) if out.ndim == 0 else out


def xbar_density(alpha, theta, n, z, method="quadrature"):
    """Density of X-bar = G_{theta+n,1}^alpha * S_{alpha,theta}.

    ``method="quadrature"`` integrates against the stable density;
    ``method="series"`` uses the finite coefficient expansion of the same integral.
    """
    return np.exp(xbar_logpdf(alpha, theta, n, z, method))


def xbar_mean(alpha, theta, n):
    """E[X-bar] = Gamma(theta+n+alpha)/Gamma(theta+n) * E[S_{alpha,theta}]."""
    from .specfn import sml_moment

    return math.exp(math.lgamma(theta + n + alpha) - math.lgamma(theta + n)) * sml_moment(alpha, theta, 1.0)


def xbar_log_window(alpha, theta):
    """A log z interval holding all but about 1e-15 of the X-bar mass.

    Near zero the density behaves like z^(theta/alpha), so the lower end moves
    out as theta approaches -alpha.
    """
    lo = min(-40.0, math.log(1e-15) * alpha / (theta + alpha) - 5.0)
    return lo, 12.0


@lru_cache(maxsize=32)
def _xbar_cdf_grid(alpha, theta, n, method):
    lz = np.arange(*xbar_log_window(alpha, theta), 0.005)
    dens = np.exp(xbar_logpdf(alpha, theta, n, np.exp(lz), method)) * np.exp(lz)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * 0.005)])
    return lz, cum / cum[-1], cum[-1]


def xbar_cdf(alpha, theta, n, z, method="quadrature"):
    """CDF of X-bar by cumulative trapezoid of the density on a log grid."""
    lz, cum, _ = _xbar_cdf_grid(float(alpha), float(theta), int(n), method)
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = np.interp(np.log(z), lz, cum, left=0.0, right=1.0)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# unconditioned compound Poisson ingredients
# --------------------------------------------------------------------------


def _check_q(q):
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")


def logser_pmf(q, x):
    """Pr[N = x] = -q^x / (x log(1-q)), x >= 1."""
    _check_q(q)
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x >= 1, -np.power(q, x) / (x * math.log1p(-q)), 0.0)
    return float(out) if out.ndim == 0 else out


def negbin_pmf(alpha, q, x):
    """Pr[N = x] = -binom(alpha, x)(-q)^x / (1 - (1-q)^alpha), x >= 1.

    Written as alpha (1-alpha)_(x-1) q^x / (x! (1 - (1-q)^alpha)), where numerator
    and denominator share the sign of alpha.
    """
    _check_q(q)
    alpha = float(alpha)
    if alpha == 0 or alpha >= 1:
        raise DomainError("alpha must lie in (0, 1) or be negative")
    x = np.asarray(x, dtype=np.float64)
    denom = -math.expm1(alpha * math.log1p(-q))
    with np.errstate(divide="ignore", invalid="ignore"):
        lv = special.gammaln(x - alpha) - special.gammaln(1 - alpha) - special.gammaln(x + 1)
        out = np.where(x >= 1, np.exp(lv + x * math.log(q) + math.log(alpha / denom)), 0.0)
    return float(out) if out.ndim == 0 else out


class UnconditionedLaws(NamedTuple):
    logser: object
    negbin: object
    rate_logser: float
    rate_negbin: float


def unconditioned_pmfs(q, alpha=None, z=None):
    """Type-size pmfs and Poisson rates of the two compound constructions.

    ``rate_logser = -z log(1-q)`` and ``rate_negbin = z (1 - (1-q)^alpha)``;
    the NB entries are None unless (alpha, z) are given.
    """
    _check_q(q)
    rate_ls = -z * math.log1p(-q) if (z is not None and z > 0) else None
    if alpha is None:
        return UnconditionedLaws(lambda x: logser_pmf(q, x), None, rate_ls, None)
    params = validate_nb(alpha, z)
    lam = params.z * -math.expm1(params.alpha * math.log1p(-q))
    assert lam > 0, "Poisson rate must be positive in both regimes"
    return UnconditionedLaws(
        lambda x: logser_pmf(q, x), lambda x: negbin_pmf(params.alpha, q, x), rate_ls, lam
    )
