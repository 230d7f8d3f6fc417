"""Signed log-space arithmetic and the special functions used by the models.

Everything that can overflow is carried as a log-magnitude. The generalized
factorial coefficients C(n, k; alpha) are stored through their scaled form
E[n, k] = C(n, k; alpha) / alpha**k (see :mod:`cpsm.kernels`), which is
positive for every alpha < 1, so signs are reattached only at the boundary:
sign C(n, k; alpha) = sign(alpha)**k.
"""

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special

from . import kernels

__all__ = [
    "SignedLog",
    "QuadratureError",
    "ConvergenceError",
    "UnsupportedSizeError",
    "log_ascending_factorial",
    "log_falling_factorial",
    "GfcTable",
    "gfc_table",
    "gfc_exact",
    "scaled_gfc_log_table",
    "scaled_gfc_log_rows",
    "incgamma_ratio",
    "wright_series",
    "wright_log_series",
    "wright_crossover",
    "wright_log_asymptotic",
    "wright_mainardi",
    "StableDensityEvaluator",
    "stable_density",
    "sml_density",
    "sml_logpdf",
    "sml_cdf",
    "sml_sf",
    "sml_moment",
    "bn_series",
]


class QuadratureError(ArithmeticError):
    """A quadrature did not reach its tolerance; ``achieved`` holds the last error estimate."""

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved


class ConvergenceError(ArithmeticError):
    """A series hit its term cap before the tail became negligible."""


class UnsupportedSizeError(ValueError):
    pass


# --------------------------------------------------------------------------
# signed log numbers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SignedLog:
    """A real number stored as ``sign * exp(logmag)``; ``sign == 0`` is exact zero."""

    sign: int
    logmag: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")
        if self.sign == 0 and self.logmag != -math.inf:
            object.__setattr__(self, "logmag", -math.inf)
        elif self.sign != 0 and self.logmag == -math.inf:
            object.__setattr__(self, "sign", 0)

    @classmethod
    def from_float(cls, x):
        x = float(x)
        if x == 0.0:
            return cls(0)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def one(cls):
        return cls(1, 0.0)

    @classmethod
    def zero(cls):
        return cls(0)

    def is_zero(self):
        return self.sign == 0

    def __float__(self):
        if self.sign == 0:
            return 0.0
        if self.logmag > 709.78:
            return self.sign * math.inf
        return self.sign * math.exp(self.logmag)

    def __neg__(self):
        return SignedLog(-self.sign, self.logmag)

    def __abs__(self):
        return SignedLog(abs(self.sign), self.logmag)

    def _coerce(self, other):
        if isinstance(other, SignedLog):
            return other
        return SignedLog.from_float(other)

    def __mul__(self, other):
        other = self._coerce(other)
        if self.sign == 0 or other.sign == 0:
            return SignedLog(0)
        return SignedLog(self.sign * other.sign, self.logmag + other.logmag)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("SignedLog division by zero")
        if self.sign == 0:
            return SignedLog(0)
        return SignedLog(self.sign * other.sign, self.logmag - other.logmag)

    def __pow__(self, k):
        k = int(k)
        if k == 0:
            return SignedLog.one()
        if self.sign == 0:
            if k < 0:
                raise ZeroDivisionError("zero to a negative power")
            return SignedLog(0)
        return SignedLog(self.sign ** (k % 2) if self.sign < 0 else 1, k * self.logmag)

    def __add__(self, other):
        other = self._coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.logmag >= other.logmag else (other, self)
        delta = lo.logmag - hi.logmag
        if hi.sign == lo.sign:
            return SignedLog(hi.sign, hi.logmag + math.log1p(math.exp(delta)))
        if delta == 0.0:
            return SignedLog(0)
        return SignedLog(hi.sign, hi.logmag + math.log1p(-math.exp(delta)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self


def _log_linear_product(a, b, count):
    """Return (sign, log|prod|) of prod_{i<count} (a + i*b)."""
    if count <= 0:
        return 1, 0.0
    factors = a + b * np.arange(count, dtype=np.float64)
    if np.any(factors == 0.0):
        return 0, -math.inf
    negatives = int(np.count_nonzero(factors < 0))
    return (-1 if negatives % 2 else 1), float(np.sum(np.log(np.abs(factors))))


def log_ascending_factorial(x, n):
    """(x)_(n) = x (x+1) ... (x+n-1) as a :class:`SignedLog`."""
    n = int(n)
    if n < 0:
        raise ValueError("order must be nonnegative")
    if n == 0:
        return SignedLog.one()
    x = float(x)
    if x > 0:
        return SignedLog(1, float(special.gammaln(x + n) - special.gammaln(x)))
    sign, logmag = _log_linear_product(x, 1.0, n)
    return SignedLog(sign, logmag)


def log_falling_factorial(a, n):
    """(a)_[n] = a (a-1) ... (a-n+1) as a :class:`SignedLog`."""
    n = int(n)
    if n < 0:
        raise ValueError("order must be nonnegative")
    sign, logmag = _log_linear_product(float(a), -1.0, n)
    return SignedLog(sign, logmag)


# --------------------------------------------------------------------------
# generalized factorial coefficients
# --------------------------------------------------------------------------

_table_cache = {}
_table_lock = threading.Lock()


def scaled_gfc_log_table(alpha, n):
    """Read-only table of log E[m, k] = log(C(m, k; alpha) / alpha**k), m, k <= n.

    Cached per alpha and grown geometrically. alpha = 0 is allowed here and
    yields log unsigned Stirling numbers of the first kind.
    """
    alpha = float(alpha)
    if alpha >= 1:
        raise ValueError("alpha must be < 1")
    n = int(n)
    with _table_lock:
        table = _table_cache.get(alpha)
        if table is None or table.shape[0] <= n:
            size = n if table is None else max(n, 2 * (table.shape[0] - 1))
            table = kernels.log_scaled_gfc_table(alpha, size)
            table.flags.writeable = False
            _table_cache[alpha] = table
    return table[: n + 1, : n + 1]


TABLE_LIMIT = 2000


@lru_cache(maxsize=64)
def _streamed_rows(alpha, n, extra):
    keep = {n, *(n - e for e in extra if n - e >= 0)}
    rows = kernels.log_scaled_gfc_rows(alpha, n, keep)
    for row in rows.values():
        row.flags.writeable = False
    return rows


def scaled_gfc_log_rows(alpha, n, offsets=(0,)):
    """Rows n - o of log E for each offset o, without holding the full table for large n."""
    alpha, n = float(alpha), int(n)
    offsets = tuple(sorted({int(o) for o in offsets}))
    if n <= TABLE_LIMIT:
        table = scaled_gfc_log_table(alpha, n)
        return {n - o: table[n - o, : n - o + 1] for o in offsets if n - o >= 0}
    rows = _streamed_rows(alpha, n, offsets)
    return {n - o: rows[n - o] for o in offsets if n - o >= 0}


class GfcTable:
    """Triangular table of C(n, k; alpha), 0 <= k <= n <= n_max, in signed-log form."""

    def __init__(self, alpha, n_max):
        alpha = float(alpha)
        if alpha == 0.0 or alpha >= 1.0:
            raise ValueError("generalized factorial coefficients need alpha in (0, 1) or alpha < 0")
        n_max = int(n_max)
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        self._alpha = alpha
        self._n_max = n_max
        self._log_scaled = scaled_gfc_log_table(alpha, n_max)
        self._log_abs_alpha = math.log(abs(alpha))

    @property
    def alpha(self):
        return self._alpha

    @property
    def n_max(self):
        return self._n_max

    @property
    def log_scaled(self):
        """log(C / alpha**k) as a read-only array; -inf marks structural zeros."""
        return self._log_scaled

    def _check(self, n, k):
        if not (0 <= n <= self._n_max):
            raise IndexError(f"n={n} outside table of size {self._n_max}")
        if k < 0:
            raise IndexError("k must be nonnegative")

    def sign(self, n, k):
        self._check(n, k)
        if k > n or self._log_scaled[n, k] == -math.inf:
            return 0
        return -1 if (self._alpha < 0 and k % 2) else 1

    def log_abs(self, n, k):
        self._check(n, k)
        if k > n:
            return -math.inf
        return float(self._log_scaled[n, k]) + k * self._log_abs_alpha

    def __getitem__(self, index):
        n, k = index
        return SignedLog(self.sign(n, k), self.log_abs(n, k))

    def row(self, n):
        """Row n as a list of SignedLog values C(n, 0), ..., C(n, n)."""
        return [self[n, k] for k in range(n + 1)]

    def row_log_abs(self, n):
        self._check(n, 0)
        return self._log_scaled[n, : n + 1] + np.arange(n + 1) * self._log_abs_alpha

    def row_signs(self, n):
        self._check(n, 0)
        k = np.arange(n + 1)
        signs = np.where((self._alpha < 0) & (k % 2 == 1), -1, 1)
        return np.where(np.isneginf(self._log_scaled[n, : n + 1]), 0, signs)

    def __repr__(self):
        return f"GfcTable(alpha={self._alpha!r}, n_max={self._n_max})"


def gfc_table(alpha, n_max):
    return GfcTable(alpha, n_max)


GFC_EXACT_MAX_N = 30


def gfc_exact(n, k, alpha):
    """Exact C(n, k; alpha) from the alternating sum, with rational alpha.

    Only meant as a ground-truth oracle for small n.
    """
    n, k = int(n), int(k)
    if n > GFC_EXACT_MAX_N:
        raise UnsupportedSizeError(f"exact coefficients limited to n <= {GFC_EXACT_MAX_N}")
    if n < 0 or k < 0:
        raise ValueError("n and k must be nonnegative")
    alpha = Fraction(alpha)
    if k > n:
        return Fraction(0)
    total = Fraction(0)
    for i in range(k + 1):
        term = Fraction(math.comb(k, i))
        rising = Fraction(1)
        for r in range(n):
            rising *= -i * alpha + r
        total += (-1) ** i * term * rising
    return total / math.factorial(k)


# --------------------------------------------------------------------------
# incomplete gamma and Wright functions
# --------------------------------------------------------------------------


def incgamma_ratio(a, x):
    """Regularized upper incomplete gamma Gamma(a, x) / Gamma(a)."""
    if np.any(np.asarray(a) <= 0):
        raise ValueError("a must be positive")
    if np.any(np.asarray(x) < 0):
        raise ValueError("x must be nonnegative")
    return special.gammaincc(a, x)


def _log_series_sum(log_terms_fn, start, tail_rtol, max_terms, chunk=256):
    """Sum positive terms exp(log_terms_fn(j)), j >= start, with a geometric tail bound.

    Valid when the term ratio is eventually decreasing, which holds for every
    series summed here.
    """
    acc = -math.inf
    j0 = start
    while j0 < start + max_terms:
        j = np.arange(j0, j0 + chunk, dtype=np.float64)
        lt = log_terms_fn(j)
        acc = np.logaddexp(acc, special.logsumexp(lt))
        lr = lt[-1] - lt[-2]
        if lr < 0 and np.all(np.diff(lt[-8:]) < 0):
            tail = lt[-1] + lr - math.log1p(-math.exp(lr))
            if tail < acc + math.log(tail_rtol):
                return float(acc), int(j0 + chunk - start)
        j0 += chunk
        chunk = min(chunk * 2, 1 << 16)
    raise ConvergenceError(f"series did not converge within {max_terms} terms")


def wright_log_series(sigma, tau, y, tail_rtol=1e-16, max_terms=2_000_000):
    """log W_{sigma,tau}(y) from the defining series, summed in log space."""
    sigma, tau, y = float(sigma), float(tau), float(y)
    if sigma <= 0 or tau < 0 or y < 0:
        raise ValueError("need sigma > 0, tau >= 0, y >= 0")
    if y == 0.0:
        return -math.inf if tau == 0.0 else -float(special.gammaln(tau))
    start = 1 if tau == 0.0 else 0
    log_y = math.log(y)

    def terms(j):
        return j * log_y - special.gammaln(j + 1) - special.gammaln(j * sigma + tau)

    value, _ = _log_series_sum(terms, start, tail_rtol, max_terms)
    return value


def wright_series(sigma, tau, y, tail_rtol=1e-16, max_terms=2_000_000):
    """W_{sigma,tau}(y) = sum_j y**j / (j! Gamma(j*sigma + tau)); inf on overflow."""
    lw = wright_log_series(sigma, tau, y, tail_rtol, max_terms)
    return math.exp(lw) if lw < 709.0 else math.inf


def _wright_log_max_term(sigma, tau, log_y):
    # terms are log-concave in j, so a coarse scan plus local refinement suffices
    j_guess = max(1.0, math.exp(log_y / (1.0 + sigma)))
    j = np.arange(0.0, 4.0 * j_guess + 50.0)
    if tau == 0.0:
        j = j[1:]
    lt = j * log_y - special.gammaln(j + 1) - special.gammaln(j * sigma + tau)
    return float(lt.max())


def wright_crossover(sigma, tau=0.0, log_max_term=280.0 * math.log(10.0)):
    """Largest y whose biggest series term stays below exp(log_max_term)."""
    lo, hi = 0.0, 10.0
    while _wright_log_max_term(sigma, tau, hi) < log_max_term:
        lo, hi = hi, 2.0 * hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _wright_log_max_term(sigma, tau, mid) < log_max_term:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def wright_log_asymptotic(sigma, y):
    """Leading log-asymptotics of W_{sigma,0}(y) without the additive constant.

    Only differences of this quantity are meaningful.
    """
    sigma = float(sigma)
    y = np.asarray(y, dtype=np.float64)
    out = np.log(y) / (2.0 * (1.0 + sigma)) + (sigma + 1.0) / sigma * (sigma * y) ** (1.0 / (1.0 + sigma))
    return float(out) if out.ndim == 0 else out


def wright_mainardi(alpha, t, rtol=1e-16, max_terms=5000, max_cancellation=1e12):
    """Return (M_alpha(t), M'_alpha(t)) from the power series and its termwise derivative."""
    alpha, t = float(alpha), float(t)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        m0 = math.gamma(alpha) * math.sin(math.pi * alpha) / math.pi
        m1 = -math.gamma(2 * alpha) * math.sin(2 * math.pi * alpha) / math.pi
        return m0, m1
    log_t = math.log(t)
    value_terms = []
    deriv_terms = []
    peak = 0.0
    for m in range(1, max_terms + 1):
        s = math.sin(math.pi * alpha * m)
        lg = math.lgamma(alpha * m)
        mag = math.exp((m - 1) * log_t + lg - math.lgamma(m))
        sign = -1.0 if (m - 1) % 2 else 1.0
        value_terms.append(sign * mag * s)
        if m >= 2:
            dmag = math.exp((m - 2) * log_t + lg - math.lgamma(m - 1))
            deriv_terms.append(sign * dmag * s)
        else:
            dmag = 0.0
        peak = max(peak, mag, dmag)
        if m > alpha * t + 10 and max(mag, dmag) < rtol * max(abs(math.fsum(value_terms)), 1e-300):
            break
    else:
        raise ConvergenceError("Wright-Mainardi series did not converge")
    value = math.fsum(value_terms) / math.pi
    deriv = math.fsum(deriv_terms) / math.pi
    if peak / math.pi > max_cancellation * max(abs(value), 1e-300):
        raise ConvergenceError(f"series cancellation too severe at t={t}")
    return value, deriv


# --------------------------------------------------------------------------
# positive stable law through its single-integral representation
# --------------------------------------------------------------------------

_TS_TMAX = 4.0
UNDERFLOW_EXPONENT = 1e10


@lru_cache(maxsize=32)
def _tanh_sinh(level):
    """Nodes on (0, pi) with complements pi - u and log weights, step 2**-level."""
    h = 2.0 ** -level
    t = np.arange(-_TS_TMAX, _TS_TMAX + 0.5 * h, h)
    s = 0.5 * math.pi * np.sinh(t)
    u = math.pi / (1.0 + np.exp(-2.0 * s))
    v = math.pi / (1.0 + np.exp(2.0 * s))
    abs_s = np.abs(s)
    log_sech2 = math.log(4.0) - 2.0 * (abs_s + np.log1p(np.exp(-2.0 * abs_s)))
    log_w = math.log(h) + 2.0 * math.log(0.5 * math.pi) + np.log(np.cosh(t)) + log_sech2
    for arr in (u, v, log_w):
        arr.flags.writeable = False
    return u, v, log_w


def _log_zolotarev_a(alpha, u, v):
    """log A(u), A(u) = [sin(alpha u)^alpha sin((1-alpha) u)^(1-alpha) / sin u]^(1/(1-alpha))."""
    sin_u = np.sin(np.minimum(u, v))
    return (alpha * np.log(np.sin(alpha * u)) + (1.0 - alpha) * np.log(np.sin((1.0 - alpha) * u))
            - np.log(sin_u)) / (1.0 - alpha)


def _ts_log_integral(log_integrand, n_points, tol, min_level=4, max_level=11, chunk=512):
    """log of int_0^pi g(u) du for each of n_points integrands, by level doubling.

    ``log_integrand(level, lo, hi)`` returns log g at the level's nodes for
    points lo:hi, as an array of shape (hi - lo, number of nodes). Convergence is declared per point when successive
    levels agree to ``tol`` in log (i.e. relative) terms.
    """
    out = np.empty(n_points)
    for lo in range(0, n_points, chunk):
        hi = min(lo + chunk, n_points)
        prev = None
        for level in range(min_level, max_level + 1):
            log_w = _tanh_sinh(level)[2]
            vals = special.logsumexp(log_integrand(level, lo, hi) + log_w, axis=1)
            if prev is not None:
                with np.errstate(invalid="ignore"):
                    diff = np.abs(vals - prev)
                diff = np.where(np.isneginf(vals) & np.isneginf(prev), 0.0, diff)
                # a huge log-value cannot be resolved beyond its own rounding
                if np.all(diff < tol + 8.0 * np.finfo(float).eps * np.abs(vals)):
                    break
            prev = vals
        else:
            raise QuadratureError("tanh-sinh quadrature did not converge", float(np.nanmax(diff)))
        out[lo:hi] = vals
    return out


_STABLE_TAIL_X = math.exp(2.0)


class StableDensityEvaluator:
    """Density and distribution function of the positive alpha-stable law.

    The law is fixed by E[exp(-t X)] = exp(-t**alpha). Values come from the
    representation P(X <= x) = (1/pi) int_0^pi exp(-A(u) x**(-alpha/(1-alpha))) du
    and its x-derivative, integrated with tanh-sinh quadrature whose node
    count is doubled until successive estimates agree to ``tol``.
    """

    def __init__(self, alpha, tol=1e-10, max_level=11):
        alpha = float(alpha)
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        self.alpha = alpha
        self.tol = float(tol)
        self.max_level = int(max_level)
        self._log_a = {}

    def _log_a_nodes(self, level):
        la = self._log_a.get(level)
        if la is None:
            u, v, _ = _tanh_sinh(level)
            la = _log_zolotarev_a(self.alpha, u, v)
            self._log_a[level] = la
        return la

    def _log_a_min(self):
        a = self.alpha
        return (a * math.log(a) + (1.0 - a) * math.log(1.0 - a)) / (1.0 - a)

    def _integral(self, log_c, kind):
        log_c = np.atleast_1d(np.asarray(log_c, dtype=np.float64))
        # exp(-c A(u)) <= exp(-c A(0)): past this point the integrand is zero in
        # double precision and only the log-value of an underflowed number is lost
        dead = log_c + self._log_a_min() > math.log(UNDERFLOW_EXPONENT)
        if np.any(dead):
            out = np.full(log_c.shape, -np.inf)
            live = ~dead
            if np.any(live):
                out[live] = self._integral(log_c[live], kind)
            return out

        def integrand(level, lo, hi):
            la = self._log_a_nodes(level)[None, :]
            lc = log_c[lo:hi, None]
            # A(u) blows up near u = pi; an infinite c*A is a zero integrand
            with np.errstate(over="ignore"):
                ca = np.exp(lc + la)
            with np.errstate(divide="ignore"):
                if kind == "pdf":
                    return la - ca
                if kind == "cdf":
                    return -ca
                return np.log(-np.expm1(-ca))

        return _ts_log_integral(integrand, log_c.size, self.tol, max_level=self.max_level)

    def _log_tail_series(self, lx):
        # f(x) = (1/pi) sum_k (-1)^(k+1) Gamma(alpha k + 1) sin(pi alpha k) / k! x^(-alpha k - 1);
        # for x >= 1 the terms shrink like 1/k! and the first one dominates
        a = self.alpha
        k = np.arange(1.0, 61.0)
        coef = (-1.0) ** (k + 1) * np.exp(special.gammaln(a * k + 1) - special.gammaln(k + 1)) * np.sin(np.pi * a * k)
        powers = np.exp(-a * lx[:, None] * (k[None, :] - 1.0))
        return np.log(powers @ coef) - (a + 1.0) * lx - math.log(math.pi)

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        flat = np.atleast_1d(x).ravel()
        out = np.full(flat.shape, -np.inf)
        pos = flat > 0
        far = pos & (flat >= _STABLE_TAIL_X)
        if np.any(far):
            out[far] = self._log_tail_series(np.log(flat[far]))
        pos &= ~far
        if np.any(pos):
            a = self.alpha
            lx = np.log(flat[pos])
            log_c = -a / (1.0 - a) * lx
            log_i = self._integral(log_c, "pdf")
            out[pos] = math.log(a / (1.0 - a)) - lx / (1.0 - a) - math.log(math.pi) + log_i
        out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def _tail(self, x, kind):
        x = np.asarray(x, dtype=np.float64)
        flat = np.atleast_1d(x).ravel()
        out = np.zeros(flat.shape) if kind == "cdf" else np.ones(flat.shape)
        pos = flat > 0
        if np.any(pos):
            a = self.alpha
            log_c = -a / (1.0 - a) * np.log(flat[pos])
            out[pos] = np.exp(self._integral(log_c, kind) - math.log(math.pi))
        out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        return self._tail(x, "cdf")

    def sf(self, x):
        return self._tail(x, "sf")


@lru_cache(maxsize=16)
def _evaluator(alpha):
    return StableDensityEvaluator(alpha)


def stable_density(evaluator, x):
    """f_alpha(x) for x > 0. ``evaluator`` may also be a bare alpha."""
    if not isinstance(evaluator, StableDensityEvaluator):
        evaluator = _evaluator(float(evaluator))
    return evaluator.pdf(x)


# --------------------------------------------------------------------------
# scaled Mittag-Leffler law S_{alpha, theta}
# --------------------------------------------------------------------------


def _check_sml(alpha, theta):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not theta > -alpha:
        raise ValueError("theta must exceed -alpha")


def sml_logpdf(alpha, theta, s):
    alpha, theta = float(alpha), float(theta)
    _check_sml(alpha, theta)
    s = np.asarray(s, dtype=np.float64)
    log_const = (special.gammaln(theta + 1) - math.log(alpha) - special.gammaln(theta / alpha + 1))
    with np.errstate(divide="ignore"):
        ls = np.log(s)
    y = np.exp(-ls / alpha)
    out = log_const + ((theta - 1) / alpha - 1) * ls + _evaluator(alpha).logpdf(y)
    out = np.where(s > 0, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def sml_density(alpha, theta, s):
    """Density of S_{alpha,theta} built from the positive stable density."""
    return np.exp(sml_logpdf(alpha, theta, s))


_SML_SERIES_MAX = 0.25


def _sml_lower_series(alpha, theta, s):
    # the density is Gamma(theta+1)/Gamma(theta/alpha+1) s^(theta/alpha) M_alpha(s);
    # integrating the Mainardi series term by term converges quickly for small s
    b = theta / alpha + 1.0
    k = np.arange(80.0)
    coef = special.rgamma(1.0 - alpha * (k + 1.0)) / (special.gamma(k + 1.0) * (k + b))
    log_c = special.gammaln(theta + 1.0) - special.gammaln(b)
    powers = (-s[:, None]) ** k[None, :]
    return np.exp(log_c + b * np.log(s)) * (powers @ coef)


def _sml_tail(alpha, theta, s, upper):
    # P(S <= s) = c * (1/pi) int A(u)^(-g) P(g + 1, s^(1/(1-alpha)) A(u)) du,
    # g = theta (1 - alpha) / alpha, c = Gamma(theta+1) Gamma(g+1) / Gamma(theta/alpha+1)
    alpha, theta = float(alpha), float(theta)
    _check_sml(alpha, theta)
    s = np.asarray(s, dtype=np.float64)
    flat = np.atleast_1d(s).ravel()
    out = np.ones(flat.shape) if upper else np.zeros(flat.shape)
    small = (flat > 0) & (flat <= _SML_SERIES_MAX)
    if np.any(small):
        low = _sml_lower_series(alpha, theta, flat[small])
        out[small] = 1.0 - low if upper else low
    pos = flat > _SML_SERIES_MAX
    if np.any(pos):
        g = theta * (1.0 - alpha) / alpha
        log_c = special.gammaln(theta + 1) + special.gammaln(g + 1) - special.gammaln(theta / alpha + 1)
        log_scale = np.log(flat[pos]) / (1.0 - alpha)
        ev = _evaluator(alpha)
        fn = special.gammaincc if upper else special.gammainc

        def integrand(level, lo, hi):
            la = ev._log_a_nodes(level)[None, :]
            with np.errstate(over="ignore", divide="ignore"):
                arg = np.exp(log_scale[lo:hi, None] + la)
                return -g * la + np.log(fn(g + 1.0, arg))

        log_i = _ts_log_integral(integrand, int(pos.sum()), ev.tol, max_level=ev.max_level)
        out[pos] = np.exp(log_c + log_i - math.log(math.pi))
    out = np.clip(out, 0.0, 1.0).reshape(s.shape)
    return float(out) if out.ndim == 0 else out


def sml_cdf(alpha, theta, s):
    """P(S_{alpha,theta} <= s)."""
    return _sml_tail(alpha, theta, s, upper=False)


def sml_sf(alpha, theta, s):
    """P(S_{alpha,theta} > s), accurate in the upper tail."""
    return _sml_tail(alpha, theta, s, upper=True)


def sml_moment(alpha, theta, p):
    """E[S_{alpha,theta}**p] in closed form (p > -theta/alpha - 1)."""
    return math.exp(math.lgamma(theta + 1) + math.lgamma(theta / alpha + p + 1)
                    - math.lgamma(theta / alpha + 1) - math.lgamma(theta + p * alpha + 1))


# --------------------------------------------------------------------------
# B_n series
# --------------------------------------------------------------------------


def bn_series(sigma, zeta, n, tail_rtol=1e-15, max_terms=10_000_000):
    """B_n(zeta) = sum_{j>=1} e^-zeta zeta^j / j! (sigma j)_(n) = E[G_{sigma P_zeta, 1}^n]."""
    sigma, zeta, n = float(sigma), float(zeta), int(n)
    if sigma <= 0 or zeta <= 0 or n < 1:
        raise ValueError("need sigma > 0, zeta > 0, n >= 1")
    log_zeta = math.log(zeta)

    def terms(j):
        return (-zeta + j * log_zeta - special.gammaln(j + 1)
                + special.gammaln(sigma * j + n) - special.gammaln(sigma * j))

    value, _ = _log_series_sum(terms, 1, tail_rtol, max_terms)
    return SignedLog(1, value)
