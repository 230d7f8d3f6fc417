"""Seeded samplers for random partitions and the auxiliary mixing laws.

All samplers take a ``numpy.random.Generator`` and an optional ``size``.
Partition samplers return multiplicity vectors: shape (n,) when ``size`` is
None, else (size, n). Batches for the CLI are built with :func:`sample_batch`,
which splits replicates into shards with their own streams so the output
depends only on (seed, shards), never on the worker count.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import interpolate, special, stats

from . import kernels
from .models import (
    DomainError,
    _as_ep,
    _as_nb,
    log_block_weights,
    negbin_pmf,
    nb_k_pmf,
    nb_k_pmf_many,
    tilted_poisson_support,
    validate_ep,
    validate_nb,
)
from .specfn import _log_zolotarev_a, scaled_gfc_log_table, sml_cdf, sml_sf

__all__ = [
    "RejectionLimitError",
    "SampleBatch",
    "rng_stream",
    "crp_sample",
    "ls_sample",
    "nb_k_sample",
    "nb_conditional_sample",
    "nb_rejection_oracle",
    "sample_positive_stable",
    "sample_sml",
    "sample_xbar",
    "sample_tilted_poisson",
    "ep_via_randomized_nb",
    "nb_via_randomized_ep",
    "sample_batch",
    "SAMPLE_MODELS",
]

DEFAULT_SEED = 20240601


class RejectionLimitError(RuntimeError):
    def __init__(self, message, attempts, accepted):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted


def rng_stream(seed=DEFAULT_SEED, shard=0):
    """PCG64 generator for (seed, shard); distinct shards get independent spawn keys."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(shard),))))


def _shape(size):
    return 1 if size is None else int(size)


def _finish(mult, size):
    return mult[0] if size is None else mult


def _inverse_cdf_rows(prob, u):
    """Index of the category picked by uniform u[i] from row prob[i] (or a shared prob)."""
    cdf = np.cumsum(prob, axis=-1)
    if cdf.ndim == 1:
        idx = np.searchsorted(cdf, u * cdf[-1], side="right")
        return np.minimum(idx, cdf.size - 1)
    idx = np.sum(cdf <= (u * cdf[:, -1])[:, None], axis=1)
    return np.minimum(idx, cdf.shape[1] - 1)


# --------------------------------------------------------------------------
# partitions
# --------------------------------------------------------------------------


def crp_sample(params, n, rng, size=None, backend=None):
    """Sequential Ewens-Pitman sampler.

    Item i+1 joins a block of size n_j with weight n_j - alpha and opens a new
    block with weight theta + k*alpha (zero once k = m in the finite regime).
    """
    params = _as_ep(params)
    n, reps = int(n), _shape(size)
    u = rng.random((reps, max(n - 1, 0)))
    cap = params.m if params.regime == "finite" else n
    mult = kernels.crp_kernel(params.alpha, np.full(reps, params.theta), np.full(reps, cap), n, u,
                              backend=backend)
    return _finish(mult, size)


def ls_sample(z, n, rng, size=None, backend=None):
    """LS-CPSM partitions; the law equals the EP-SM with alpha = 0 and theta = z."""
    if not z > 0:
        raise DomainError("LS-CPSM needs z > 0")
    return crp_sample(validate_ep(0.0, z), n, rng, size, backend)


def nb_k_sample(params, n, rng, size=None):
    params = _as_nb(params)
    p = nb_k_pmf(params, n)
    k = _inverse_cdf_rows(p, rng.random(_shape(size))) + 1
    return int(k[0]) if size is None else k


def _compose(alpha, n, ks, rng, backend):
    ks = np.asarray(ks, dtype=np.int64)
    log_e = scaled_gfc_log_table(alpha, n)
    log_v = log_block_weights(alpha, n)
    log_fact = special.gammaln(np.arange(n + 1) + 1.0)
    u = rng.random((ks.size, n))
    return kernels.compose_kernel(log_e, log_v, log_fact, ks, n, u, backend=backend)


def nb_conditional_sample(params, n, rng, size=None, backend=None):
    """Exact NB-CPSM sampler: K by inverse CDF, then block sizes left to right.

    Given t items left for j blocks, the next size is x with probability
    v_x t! E(t-x, j-1) / ((t-x)! j E(t, j)), v_x = (1-alpha)_(x-1)/x! and
    E the scaled coefficients.
    """
    params = _as_nb(params)
    n, reps = int(n), _shape(size)
    ks = np.atleast_1d(nb_k_sample(params, n, rng, reps))
    mult = _compose(params.alpha, n, ks, rng, backend)
    return _finish(mult, size)


def nb_rejection_oracle(params, q, n, rng, size=None, max_attempts=10**7, batch=1 << 16):
    """Naive NB-CPSM sampler: simulate the compound Poisson population until S = n.

    ``max_attempts`` bounds the number of proposals spent on any single
    accepted draw; exceeding it raises :class:`RejectionLimitError`.
    """
    params = _as_nb(params)
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    n, want = int(n), _shape(size)
    lam = params.z * -math.expm1(params.alpha * math.log1p(-q))
    p_size = negbin_pmf(params.alpha, q, np.arange(1, n + 1))
    # one extra category collects every size > n, which always overshoots
    probs = np.append(p_size, max(0.0, 1.0 - p_size.sum()))
    cdf = np.cumsum(probs)
    k_pmf = stats.poisson.pmf(np.arange(1, n + 1), lam)
    k_cdf = np.cumsum(k_pmf)
    p_live = float(k_cdf[-1])
    out = np.zeros((want, n), dtype=np.int64)
    got = 0
    attempts = 0
    waiting = 0
    while got < want:
        # proposals with K = 0 or K > n are rejected without looking at sizes,
        # so only the count of such proposals is simulated (geometric skips)
        skipped = rng.geometric(p_live, batch) - 1
        k = np.searchsorted(k_cdf, rng.random(batch) * k_cdf[-1], side="right") + 1
        k = np.minimum(k, n)
        draws = np.searchsorted(cdf, rng.random(int(k.sum())) * cdf[-1], side="right") + 1
        draws = np.minimum(draws, n + 1)
        seg = np.repeat(np.arange(batch), k)
        totals = np.bincount(seg, weights=draws, minlength=batch)
        hits = np.flatnonzero(totals == n)
        clock = np.cumsum(skipped + 1)
        gaps = np.diff(clock[hits], prepend=-waiting)
        if gaps.size and gaps.max() > max_attempts or waiting + clock[-1] > max_attempts and not hits.size:
            raise RejectionLimitError(
                f"no acceptance within {max_attempts} proposals after {got}/{want} draws "
                f"(n={n}, q={q}, rate={lam:.4g})", attempts + int(clock[-1]), got)
        accepted = hits[: want - got]
        if accepted.size:
            rank = np.full(batch, -1)
            rank[accepted] = np.arange(accepted.size)
            keep = rank[seg] >= 0
            np.add.at(out, (got + rank[seg[keep]], draws[keep] - 1), 1)
            got += accepted.size
        waiting = int(clock[-1] - clock[hits[-1]]) if hits.size else waiting + int(clock[-1])
        attempts += int(clock[-1])
    return _finish(out, size)


# --------------------------------------------------------------------------
# continuous mixing laws
# --------------------------------------------------------------------------


def sample_positive_stable(alpha, rng, size=None):
    """Kanter's exact sampler: X = (A(U)/E)^((1-alpha)/alpha)."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    reps = _shape(size)
    u = math.pi * rng.random(reps)
    e = rng.standard_exponential(reps)
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    x = np.exp((1.0 - alpha) / alpha * (_log_zolotarev_a(alpha, u, math.pi - u) - np.log(e)))
    return float(x[0]) if size is None else x


class _SmlInverse:
    """CDF inversion table for S_{alpha,theta} on a log-spaced grid."""

    def __init__(self, alpha, theta, points=3000, tail=1e-13):
        lo, hi = 0.0, 0.0
        while sml_cdf(alpha, theta, math.exp(lo)) > tail:
            lo -= 1.0
        while sml_sf(alpha, theta, math.exp(hi)) > tail:
            hi += 0.5
        ls = np.linspace(lo, hi, points)
        s = np.exp(ls)
        cdf = sml_cdf(alpha, theta, s)
        upper = cdf > 0.5
        cdf[upper] = 1.0 - sml_sf(alpha, theta, s[upper])
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self.lo, self.hi = lo, hi
        self._inv = interpolate.PchipInterpolator(cdf[keep], ls[keep], extrapolate=False)
        self._cmin, self._cmax = cdf[keep][0], cdf[keep][-1]

    def __call__(self, u):
        # mass outside the table (< tail) is clamped to its end points
        u = np.clip(u, self._cmin, self._cmax)
        return np.exp(self._inv(u))


@lru_cache(maxsize=16)
def _sml_inverse(alpha, theta):
    return _SmlInverse(alpha, theta)


def sample_sml(alpha, theta, rng, size=None):
    """S_{alpha,theta}: exact stable power when theta = 0, grid inversion otherwise."""
    alpha, theta = float(alpha), float(theta)
    if not 0 < alpha < 1 or not theta > -alpha:
        raise DomainError("need alpha in (0,1) and theta > -alpha")
    reps = _shape(size)
    if theta == 0.0:
        s = sample_positive_stable(alpha, rng, reps) ** -alpha
    else:
        s = _sml_inverse(alpha, theta)(rng.random(reps))
    return float(s[0]) if size is None else s


def sample_xbar(alpha, theta, n, rng, size=None):
    """X-bar = G^alpha * S with G ~ Gamma(theta + n, 1) independent of S ~ S_{alpha,theta}."""
    reps = _shape(size)
    g = rng.gamma(theta + n, 1.0, reps)
    s = sample_sml(alpha, theta, rng, reps)
    x = g**alpha * s
    return float(x[0]) if size is None else x


def sample_tilted_poisson(alpha, z, n, rng, size=None):
    xs, ps = tilted_poisson_support(float(alpha), float(z), int(n))
    idx = _inverse_cdf_rows(ps, rng.random(_shape(size)))
    out = xs[idx]
    return int(out[0]) if size is None else out


# --------------------------------------------------------------------------
# randomized constructions
# --------------------------------------------------------------------------


def ep_via_randomized_nb(alpha, theta, n, rng, size=None, backend=None, chunk=1 << 14):
    """EP-SM(alpha, theta) partitions as NB-CPSM(alpha, z) with z drawn from X-bar."""
    validate_ep(alpha, theta)
    if not 0 < alpha < 1:
        raise DomainError("this representation needs alpha in (0, 1)")
    n, reps = int(n), _shape(size)
    z = sample_xbar(alpha, theta, n, rng, reps)
    u = rng.random(reps)
    ks = np.empty(reps, dtype=np.int64)
    for lo in range(0, reps, chunk):
        p = nb_k_pmf_many(alpha, z[lo : lo + chunk], n)
        ks[lo : lo + chunk] = _inverse_cdf_rows(p, u[lo : lo + chunk]) + 1
    mult = _compose(alpha, n, ks, rng, backend)
    return _finish(mult, size)


def nb_via_randomized_ep(alpha, z, n, rng, size=None, backend=None):
    """NB-CPSM(alpha, z), alpha < 0, as EP-SM(alpha, -m alpha) with m drawn from the tilted Poisson law."""
    params = validate_nb(alpha, z)
    if params.regime != "negative":
        raise DomainError("this representation needs alpha < 0 and z < 0")
    n, reps = int(n), _shape(size)
    m = np.atleast_1d(sample_tilted_poisson(alpha, z, n, rng, reps))
    u = rng.random((reps, max(n - 1, 0)))
    mult = kernels.crp_kernel(alpha, -m * alpha, m, n, u, backend=backend)
    return _finish(mult, size)


# --------------------------------------------------------------------------
# sharded batches
# --------------------------------------------------------------------------


@dataclass
class SampleBatch:
    model: str
    params: dict
    n: int
    reps: int
    samples: np.ndarray
    seed: int
    shards: int
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples.ndim == 2:
            sums = self.samples @ np.arange(1, self.n + 1)
            if np.any(sums != self.n):
                raise AssertionError("sample batch holds a vector with sum i*m_i != n")


def _draw(model, params, n, reps, rng, backend):
    if model in ("ep", "crp"):
        return crp_sample(validate_ep(params["alpha"], params["theta"]), n, rng, reps, backend)
    if model == "ls":
        return ls_sample(params["z"], n, rng, reps, backend)
    if model == "nb":
        return nb_conditional_sample(validate_nb(params["alpha"], params["z"]), n, rng, reps, backend)
    if model == "nb-reject":
        return nb_rejection_oracle(validate_nb(params["alpha"], params["z"]), params.get("q", 0.5), n, rng, reps)
    if model == "ep-rand-nb":
        return ep_via_randomized_nb(params["alpha"], params["theta"], n, rng, reps, backend)
    if model == "nb-rand-ep":
        return nb_via_randomized_ep(params["alpha"], params["z"], n, rng, reps, backend)
    raise ValueError(f"unknown sampling model {model!r}")


SAMPLE_MODELS = ("ep", "ls", "nb", "crp", "nb-reject", "ep-rand-nb", "nb-rand-ep")


def default_workers():
    env = os.environ.get("CPSM_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def shard_sizes(reps, shards):
    base, extra = divmod(int(reps), int(shards))
    return [base + (1 if i < extra else 0) for i in range(int(shards))]


def sample_batch(model, params, n, reps, seed=DEFAULT_SEED, shards=1, workers=None, backend=None):
    """Draw ``reps`` partitions split over ``shards`` independent streams, merged in shard order."""
    if shards < 1:
        raise ValueError("shards must be >= 1")
    sizes = shard_sizes(reps, shards)
    workers = default_workers() if workers is None else int(workers)

    def run(shard):
        rng = rng_stream(seed, shard)
        if sizes[shard] == 0:
            return np.zeros((0, n), dtype=np.int64)
        return _draw(model, params, n, sizes[shard], rng, backend)

    if workers > 1 and shards > 1:
        with ThreadPoolExecutor(max_workers=min(workers, shards)) as pool:
            parts = list(pool.map(run, range(shards)))
    else:
        parts = [run(s) for s in range(shards)]
    return SampleBatch(model, dict(params), int(n), int(reps), np.concatenate(parts, axis=0), int(seed), int(shards))
