"""Exact and Monte Carlo checks of the structural identities between the models.

Every check returns a :class:`DiagnosticsReport`; ``passed`` is true exactly
when every residual is at or below its tolerance.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special, stats

from . import samplers
from .models import (
    DomainError,
    _as_nb,
    _tilted_logweights,
    ep_k_pmf,
    ep_pmf,
    ls_pmf,
    nb_k_pmf_many,
    nb_mr_falling_moment,
    nb_pmf,
    validate_ep,
    validate_nb,
    xbar_log_window,
    xbar_logpdf,
    tilted_mean_guess,
)
from .specfn import bn_series

__all__ = [
    "PartitionEnumeration",
    "DiagnosticsReport",
    "enumerate_partitions",
    "partition_number",
    "check_normalization",
    "check_thm2_ii",
    "check_thm2_i_mc",
    "check_thm2_i_quad",
    "check_mr_moments",
    "check_samplers",
    "empirical_counts",
    "chi_square_gof",
    "chi_square_homogeneity",
    "empirical_tv",
]

ENUMERATION_MAX_N = 20


# --------------------------------------------------------------------------
# enumeration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionEnumeration:
    n: int
    table: np.ndarray  # one multiplicity vector per row

    def __len__(self):
        return self.table.shape[0]

    def __iter__(self):
        return iter(self.table)

    def index(self):
        """Map from multiplicity tuple to row number."""
        return {tuple(int(v) for v in row): i for i, row in enumerate(self.table)}


def _partitions_desc(n, largest):
    if n == 0:
        yield []
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _partitions_desc(n - first, first):
            yield [first] + rest


@lru_cache(maxsize=32)
def enumerate_partitions(n):
    """All multiplicity vectors of n, in reverse lexicographic order of block sizes."""
    n = int(n)
    if not 1 <= n <= ENUMERATION_MAX_N:
        raise DomainError(f"enumeration supports 1 <= n <= {ENUMERATION_MAX_N}")
    rows = []
    for sizes in _partitions_desc(n, n):
        m = np.zeros(n, dtype=np.int64)
        np.add.at(m, np.asarray(sizes) - 1, 1)
        rows.append(m)
    table = np.array(rows)
    table.flags.writeable = False
    return PartitionEnumeration(n, table)


def partition_number(n):
    """p(n) by Euler's pentagonal recurrence."""
    p = [1] + [0] * n
    for m in range(1, n + 1):
        total, j = 0, 1
        while True:
            g1, g2 = j * (3 * j - 1) // 2, j * (3 * j + 1) // 2
            if g1 > m:
                break
            sign = 1 if j % 2 else -1
            total += sign * p[m - g1]
            if g2 <= m:
                total += sign * p[m - g2]
            j += 1
        p[m] = total
    return p[n]


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    return value


@dataclass
class DiagnosticsReport:
    check: str
    params: dict
    residuals: dict
    tolerance: dict
    passed: bool = field(init=False)
    runtime: float = 0.0
    seed: int = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.tolerance, dict):
            self.tolerance = {k: float(self.tolerance) for k in self.residuals}
        self.passed = all(
            math.isfinite(v) and v <= self.tolerance[k] for k, v in self.residuals.items()
        )

    @property
    def max_residual(self):
        return max(self.residuals.values(), default=0.0)

    def to_dict(self, include_runtime=True):
        out = _jsonable(asdict(self))
        if not include_runtime:
            out.pop("runtime")
        return out

    def to_json(self, include_runtime=True):
        return json.dumps(self.to_dict(include_runtime), sort_keys=True)


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# --------------------------------------------------------------------------
# exact checks
# --------------------------------------------------------------------------


def _pmf_for(model, params):
    if model == "ep":
        p = validate_ep(params["alpha"], params["theta"])
        return lambda mult: ep_pmf(p, mult)
    if model == "ls":
        z = params["z"]
        return lambda mult: ls_pmf(z, mult)
    if model == "nb":
        p = validate_nb(params["alpha"], params["z"])
        return lambda mult: nb_pmf(p, mult)
    raise ValueError(f"unknown model {model!r}")


def check_normalization(model, params, n, tol=1e-10):
    """|sum over all partitions of the pmf - 1|."""
    with _Timer() as t:
        probs = _pmf_for(model, params)(enumerate_partitions(n).table)
        total = math.fsum(probs)
    return DiagnosticsReport(
        "normalization", {"model": model, **params, "n": n},
        {"abs_error": abs(total - 1.0)}, tol, runtime=t.elapsed,
        details={"sum": total, "partitions": len(probs)},
    )


def _tilted_masses(alpha, z, n):
    """Tilted Poisson masses for m = 1.. until they underflow, with exact tails."""
    params = validate_nb(alpha, z)
    sigma, zeta = params.sigma, params.zeta
    log_norm = bn_series(sigma, zeta, n).logmag
    cap = int(20 * tilted_mean_guess(sigma, zeta, n)) + 100
    while True:
        m = np.arange(1, cap + 1)
        lw = _tilted_logweights(sigma, zeta, n, m) - log_norm
        if lw[-1] < -745.0 and lw[-1] < lw.max():
            break
        cap *= 2
    w = np.exp(lw)
    # tail[i] = mass strictly beyond m[i], summed from the small end
    tail = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    return m, w, tail


def check_thm2_ii(alpha, z, n, tol=1e-8, rtail=1e-12):
    """NB-CPSM pmf against its mixture of finite-regime EP-SM pmfs, for every partition of n.

    For alpha < 0, z < 0 the NB-CPSM(alpha, z) law equals the EP-SM(alpha, -m alpha)
    law averaged over m from the tilted Poisson distribution; EP-SM(alpha, -m alpha)
    vanishes for partitions with more than m blocks. The series stops once the
    remaining mixing mass is below ``rtail`` times the partial sum of every partition.
    """
    params = validate_nb(alpha, z)
    if params.regime != "negative":
        raise DomainError("the series mixture needs alpha < 0 and z < 0")
    n = int(n)
    with _Timer() as t:
        table = enumerate_partitions(n).table
        target = nb_pmf(params, table)
        ms, ws, tail = _tilted_masses(alpha, z, n)
        terms = np.array([ep_pmf(validate_ep(alpha, -int(m) * alpha), table) for m in ms]) * ws[:, None]
        partial = np.cumsum(terms, axis=0)
        done = np.all(tail[:, None] <= rtail * partial, axis=1)
        last = int(np.argmax(done)) + 1 if done.any() else len(ms)
        mixture = np.array([math.fsum(col) for col in terms[:last].T])
        rel = np.abs(mixture - target) / target
    worst = int(np.argmax(rel))
    return DiagnosticsReport(
        "thm2ii", {"alpha": alpha, "z": z, "n": n},
        {"max_rel_error": float(rel.max())}, tol, runtime=t.elapsed,
        details={"terms": last, "tail_mass": float(tail[last - 1]), "worst_partition": table[worst].tolist(),
                 "nb_pmf": float(target[worst]), "mixture": float(mixture[worst])},
    )


def check_thm2_i_quad(alpha, theta, n, k=None, tol=1e-3, step=0.005):
    """Pr[K = k] under EP-SM against the z-average of the NB-CPSM block-count law.

    The average is taken over the X-bar density in its finite series form,
    by a trapezoid rule in log z.
    """
    validate_ep(alpha, theta)
    n = int(n)
    if not 0 < alpha < 1:
        raise DomainError("the integral mixture needs alpha in (0, 1)")
    with _Timer() as t:
        lz = np.arange(*xbar_log_window(alpha, theta), step)
        z = np.exp(lz)
        w = np.exp(xbar_logpdf(alpha, theta, n, z, method="series") + lz)
        mass = float(np.trapezoid(w, dx=step))
        pk = nb_k_pmf_many(alpha, z, n)
        mixed = np.trapezoid(w[:, None] * pk, dx=step, axis=0)
        exact = ep_k_pmf(validate_ep(alpha, theta), n)
        ks = range(1, n + 1) if k is None else [int(k)]
        residuals = {f"k={j}": float(abs(mixed[j - 1] - exact[j - 1])) for j in ks}
    return DiagnosticsReport(
        "thm2i_quad", {"alpha": alpha, "theta": theta, "n": n, "k": k}, residuals, tol,
        runtime=t.elapsed,
        details={"mixture": mixed.tolist(), "ep_k_pmf": exact.tolist(), "density_mass": mass},
    )


def check_thm2_i_mc(alpha, theta, n, reps=100_000, seed=samplers.DEFAULT_SEED, shards=1, chunk=1 << 16):
    """Monte Carlo version: average nb_k_pmf(k; z) over z drawn from X-bar.

    Each k passes when |estimate - ep_k_pmf(k)| <= 3 standard errors.
    """
    validate_ep(alpha, theta)
    n = int(n)
    with _Timer() as t:
        total = np.zeros(n)
        total_sq = np.zeros(n)
        for shard, size in enumerate(samplers.shard_sizes(reps, shards)):
            rng = samplers.rng_stream(seed, shard)
            for lo in range(0, size, chunk):
                z = samplers.sample_xbar(alpha, theta, n, rng, min(chunk, size - lo))
                pk = nb_k_pmf_many(alpha, z, n)
                total += pk.sum(axis=0)
                total_sq += (pk**2).sum(axis=0)
        mean = total / reps
        var = np.maximum(total_sq / reps - mean**2, 0.0)
        se = np.sqrt(var / reps)
        exact = ep_k_pmf(validate_ep(alpha, theta), n)
    residuals = {f"k={j}": float(abs(mean[j - 1] - exact[j - 1])) for j in range(1, n + 1)}
    # a floor covers cells whose standard error is exactly zero (n = 1)
    tolerance = {f"k={j}": float(3 * se[j - 1] + 1e-12) for j in range(1, n + 1)}
    return DiagnosticsReport(
        "thm2i_mc", {"alpha": alpha, "theta": theta, "n": n, "reps": reps, "shards": shards},
        residuals, tolerance, runtime=t.elapsed, seed=seed,
        details={"estimate": mean.tolist(), "se": se.tolist(), "ep_k_pmf": exact.tolist()},
    )


def check_mr_moments(params, n, r, s, tol=1e-10):
    """E[(M_r)_[s]]: closed form against the sum over all partitions of n."""
    params = _as_nb(params)
    n, r, s = int(n), int(r), int(s)
    if r * s > n:
        raise DomainError("r*s must not exceed n")
    with _Timer() as t:
        formula = nb_mr_falling_moment(params, n, r, s)
        table = enumerate_partitions(n).table
        probs = nb_pmf(params, table)
        mr = table[:, r - 1] if r <= n else np.zeros(len(table), dtype=np.int64)
        falling = special.poch(mr - s + 1.0, s)
        enumerated = math.fsum(probs * falling)
        scale = max(abs(enumerated), abs(formula))
        rel = abs(formula - enumerated) / scale if scale > 0 else 0.0
    return DiagnosticsReport(
        "moments", {"alpha": params.alpha, "z": params.z, "n": n, "r": r, "s": s},
        {"rel_error": rel}, tol, runtime=t.elapsed,
        details={"formula": formula, "enumeration": enumerated},
    )


# --------------------------------------------------------------------------
# goodness of fit for partition samplers
# --------------------------------------------------------------------------


def empirical_counts(samples, enumeration):
    """Counts of each enumerated partition among the sampled multiplicity vectors."""
    samples = np.asarray(samples, dtype=np.int64)
    index = enumeration.index()
    rows, counts = np.unique(samples, axis=0, return_counts=True)
    out = np.zeros(len(enumeration), dtype=np.int64)
    for row, c in zip(rows, counts):
        out[index[tuple(int(v) for v in row)]] += c
    return out


def _pool(expected, *observed, min_expected=5.0):
    """Merge the smallest cells into one until the merged cell reaches min_expected."""
    if expected.min() >= min_expected:
        return (expected,) + observed
    order = np.argsort(expected, kind="stable")
    reached = np.flatnonzero(np.cumsum(expected[order]) >= min_expected)
    small = order[: reached[0] + 1] if reached.size else order
    keep = np.setdiff1d(np.arange(expected.size), small)
    pooled = [np.append(expected[keep], expected[small].sum())]
    pooled += [np.append(o[keep], o[small].sum()) for o in observed]
    return tuple(pooled)


def chi_square_gof(counts, probs, min_expected=5.0):
    """Pearson chi-square test of counts against exact cell probabilities.

    Returns (statistic, degrees of freedom, p-value).
    """
    counts = np.asarray(counts, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    expected = counts.sum() * probs / probs.sum()
    expected, counts = _pool(expected, counts, min_expected=min_expected)
    nonzero = expected > 0
    stat = float(np.sum((counts[nonzero] - expected[nonzero]) ** 2 / expected[nonzero]))
    df = int(nonzero.sum()) - 1
    return stat, df, float(stats.chi2.sf(stat, df)) if df > 0 else 1.0


def chi_square_homogeneity(counts_a, counts_b, min_expected=5.0):
    """Two-sample chi-square test that two count vectors share one law."""
    a = np.asarray(counts_a, dtype=np.float64)
    b = np.asarray(counts_b, dtype=np.float64)
    pooled = (a + b) * min(a.sum(), b.sum()) / (a.sum() + b.sum())
    _, a, b = _pool(pooled, a, b, min_expected=min_expected)
    live = (a + b) > 0
    if live.sum() < 2:
        return 0.0, 0, 1.0
    res = stats.chi2_contingency(np.vstack([a[live], b[live]]), correction=False)
    return float(res.statistic), int(res.dof), float(res.pvalue)


def empirical_tv(counts, probs):
    counts = np.asarray(counts, dtype=np.float64)
    return 0.5 * float(np.abs(counts / counts.sum() - np.asarray(probs)).sum())


_SAMPLER_CASES = (
    ("crp", "ep", {"alpha": 0.5, "theta": 1.0}, 8),
    ("nb", "nb", {"alpha": 0.5, "z": 2.0}, 8),
    ("nb-reject", "nb", {"alpha": 0.5, "z": 1.0, "q": 0.5}, 6),
    ("nb-rand-ep", "nb", {"alpha": -1.0, "z": -1.0}, 8),
    ("ep-rand-nb", "ep", {"alpha": 0.5, "theta": 1.0}, 6),
)


def check_samplers(reps=100_000, seed=samplers.DEFAULT_SEED, shards=1, p_min=1e-3, tv_max=0.02,
                   cases=_SAMPLER_CASES):
    """Chi-square and TV tests of each partition sampler against its exact pmf."""
    reports = []
    for sampler, model, params, n in cases:
        with _Timer() as t:
            batch = samplers.sample_batch(sampler, params, n, reps, seed, shards)
            enum = enumerate_partitions(n)
            law = {k: v for k, v in params.items() if k != "q"}
            probs = _pmf_for(model, law)(enum.table)
            counts = empirical_counts(batch.samples, enum)
            stat, df, p = chi_square_gof(counts, probs)
            tv = empirical_tv(counts, probs)
        reports.append(DiagnosticsReport(
            "samplers", {"sampler": sampler, **params, "n": n, "reps": reps, "shards": shards},
            {"p_value_shortfall": max(0.0, p_min - p), "tv": tv}, {"p_value_shortfall": 0.0, "tv": tv_max},
            runtime=t.elapsed, seed=seed, details={"chi2": stat, "df": df, "p_value": p},
        ))
    return reports
