"""Hot loops: coefficient recurrence and the two partition samplers.

Each kernel has a numba version and a numpy version with the same inputs and
outputs. Public wrappers pick one through :func:`cpsm._accel.resolve_backend`.
Random numbers are always drawn by the caller, so both versions consume the
same uniforms in the same order.

The coefficient tables hold log E[n, k] where E[n, k] = C(n, k; alpha) / alpha**k.
E satisfies E[n+1, k] = (n - k*alpha) E[n, k] + E[n, k-1], whose coefficients
are positive whenever alpha < 1, so the recurrence never cancels and the
alpha = 0 limit (unsigned Stirling numbers of the first kind) comes for free.
"""

import math

import numpy as np

from ._accel import njit, resolve_backend

NEG_INF = -np.inf


# --------------------------------------------------------------------------
# coefficient recurrence
# --------------------------------------------------------------------------


@njit
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit
def _advance_row_nb(prev, cur, n, alpha):
    # prev holds row n, cur receives row n + 1
    cur[0] = -np.inf
    for k in range(1, n + 2):
        a = -np.inf
        if k <= n and prev[k] != -np.inf:
            a = math.log(n - k * alpha) + prev[k]
        cur[k] = _logaddexp(a, prev[k - 1])


@njit
def _gfc_table_nb(alpha, n_max):
    out = np.full((n_max + 1, n_max + 1), -np.inf)
    out[0, 0] = 0.0
    for n in range(n_max):
        _advance_row_nb(out[n], out[n + 1], n, alpha)
    return out


@njit
def _gfc_rows_nb(alpha, n_max, keep):
    n_keep = 0
    for flag in keep:
        if flag:
            n_keep += 1
    out = np.full((n_keep, n_max + 1), -np.inf)
    prev = np.full(n_max + 1, -np.inf)
    cur = np.full(n_max + 1, -np.inf)
    prev[0] = 0.0
    slot = 0
    if keep[0]:
        out[slot, :] = prev
        slot += 1
    for n in range(n_max):
        _advance_row_nb(prev, cur, n, alpha)
        if keep[n + 1]:
            out[slot, :] = cur
            slot += 1
        prev, cur = cur, prev
    return out


def _advance_row_np(prev, cur, n, alpha):
    cur[0] = NEG_INF
    k = np.arange(1, n + 1)
    with np.errstate(divide="ignore"):
        stay = np.log(n - k * alpha) + prev[1 : n + 1]
    cur[1 : n + 1] = np.logaddexp(stay, prev[0:n])
    cur[n + 1] = prev[n]


def _gfc_table_np(alpha, n_max):
    out = np.full((n_max + 1, n_max + 1), NEG_INF)
    out[0, 0] = 0.0
    for n in range(n_max):
        _advance_row_np(out[n], out[n + 1], n, alpha)
    return out


def _gfc_rows_np(alpha, n_max, keep):
    out = np.full((int(keep.sum()), n_max + 1), NEG_INF)
    prev = np.full(n_max + 1, NEG_INF)
    cur = np.full(n_max + 1, NEG_INF)
    prev[0] = 0.0
    slot = 0
    if keep[0]:
        out[slot] = prev
        slot += 1
    for n in range(n_max):
        _advance_row_np(prev, cur, n, alpha)
        if keep[n + 1]:
            out[slot] = cur
            slot += 1
        prev, cur = cur, prev
    return out


def log_scaled_gfc_table(alpha, n_max, backend=None):
    """Full (n_max+1, n_max+1) table of log E[n, k]; -inf marks exact zeros."""
    alpha = float(alpha)
    n_max = int(n_max)
    if resolve_backend(backend) == "numba":
        return _gfc_table_nb(alpha, n_max)
    return _gfc_table_np(alpha, n_max)


def log_scaled_gfc_rows(alpha, n_max, keep, backend=None):
    """Stream the recurrence up to ``n_max`` and return only the rows in ``keep``.

    Memory is O(len(keep) * n_max) instead of O(n_max**2). Returns a dict
    mapping each kept n to its row (length n + 1).
    """
    alpha = float(alpha)
    n_max = int(n_max)
    wanted = sorted({int(n) for n in keep})
    if wanted and (wanted[0] < 0 or wanted[-1] > n_max):
        raise ValueError("kept rows must lie in [0, n_max]")
    mask = np.zeros(n_max + 1, dtype=np.bool_)
    mask[wanted] = True
    if resolve_backend(backend) == "numba":
        rows = _gfc_rows_nb(alpha, n_max, mask)
    else:
        rows = _gfc_rows_np(alpha, n_max, mask)
    return {n: rows[i, : n + 1].copy() for i, n in enumerate(wanted)}


# --------------------------------------------------------------------------
# sequential (Chinese restaurant) sampler
# --------------------------------------------------------------------------


@njit
def _crp_nb(alpha, theta, cap, n, u):
    reps = u.shape[0]
    mult = np.zeros((reps, n), dtype=np.int64)
    sizes = np.zeros(n, dtype=np.int64)
    for r in range(reps):
        sizes[:] = 0
        sizes[0] = 1
        k = 1
        for i in range(1, n):
            w_old = i - k * alpha
            w_new = theta[r] + k * alpha if k < cap[r] else 0.0
            if w_new < 0.0:
                w_new = 0.0
            target = u[r, i - 1] * (w_old + w_new)
            cum = 0.0
            chosen = k
            for b in range(k):
                cum += sizes[b] - alpha
                if target < cum:
                    chosen = b
                    break
            if chosen == k and w_new == 0.0:
                chosen = k - 1
            if chosen == k:
                sizes[k] = 1
                k += 1
            else:
                sizes[chosen] += 1
        for b in range(k):
            mult[r, sizes[b] - 1] += 1
    return mult


def _crp_np(alpha, theta, cap, n, u):
    reps = u.shape[0]
    sizes = np.zeros((reps, n), dtype=np.int64)
    sizes[:, 0] = 1
    k = np.ones(reps, dtype=np.int64)
    rows = np.arange(reps)
    cols = np.arange(n)
    for i in range(1, n):
        w_old = i - k * alpha
        w_new = np.where(k < cap, theta + k * alpha, 0.0)
        w_new = np.maximum(w_new, 0.0)
        target = u[:, i - 1] * (w_old + w_new)
        contrib = np.where(cols[None, :] < k[:, None], sizes - alpha, 0.0)
        cum = np.cumsum(contrib, axis=1)
        chosen = np.sum((cum <= target[:, None]) & (cols[None, :] < k[:, None]), axis=1)
        chosen = np.where((chosen == k) & (w_new == 0.0), k - 1, chosen)
        sizes[rows, chosen] += 1
        k = k + (chosen == k)
    mult = np.zeros((reps, n), dtype=np.int64)
    for b in range(n):
        s = sizes[:, b]
        occupied = s > 0
        np.add.at(mult, (rows[occupied], s[occupied] - 1), 1)
    return mult


def crp_kernel(alpha, theta, cap, n, u, backend=None):
    """Seat ``n`` items for each row of ``u`` (shape (reps, n-1)).

    ``theta`` and ``cap`` are per-replicate arrays; ``cap`` bounds the number
    of blocks (m in the finite regime, n otherwise).
    """
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    cap = np.ascontiguousarray(cap, dtype=np.int64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if resolve_backend(backend) == "numba":
        return _crp_nb(float(alpha), theta, cap, int(n), u)
    return _crp_np(float(alpha), theta, cap, int(n), u)


# --------------------------------------------------------------------------
# block-size composition given the number of blocks
# --------------------------------------------------------------------------


@njit
def _compose_nb(log_e, log_v, log_fact, ks, n, u, guard):
    reps = ks.shape[0]
    mult = np.zeros((reps, n), dtype=np.int64)
    probs = np.zeros(n + 1)
    for r in range(reps):
        t = n
        j = ks[r]
        step = 0
        while j > 1:
            top = t - j + 1
            base = log_fact[t] - math.log(j) - log_e[t, j]
            total = 0.0
            for x in range(1, top + 1):
                lp = log_v[x] + base - log_fact[t - x] + log_e[t - x, j - 1]
                p = math.exp(lp)
                if p > 1.0 + guard:
                    raise ValueError("composition probability exceeds one")
                probs[x] = p
                total += p
            if abs(total - 1.0) > 1e-9:
                raise ValueError("composition probabilities do not sum to one")
            target = u[r, step] * total
            cum = 0.0
            chosen = top
            for x in range(1, top + 1):
                cum += probs[x]
                if target < cum:
                    chosen = x
                    break
            mult[r, chosen - 1] += 1
            t -= chosen
            j -= 1
            step += 1
        if j == 1:
            mult[r, t - 1] += 1
    return mult


def _compose_np(log_e, log_v, log_fact, ks, n, u, guard):
    reps = ks.shape[0]
    mult = np.zeros((reps, n), dtype=np.int64)
    t = np.full(reps, n, dtype=np.int64)
    j = ks.astype(np.int64).copy()
    step = 0
    while True:
        active = np.flatnonzero(j > 1)
        if active.size == 0:
            break
        states = t[active] * (n + 1) + j[active]
        uniq, inverse = np.unique(states, return_inverse=True)
        chosen = np.empty(active.size, dtype=np.int64)
        for s_idx, code in enumerate(uniq):
            tt, jj = divmod(int(code), n + 1)
            top = tt - jj + 1
            x = np.arange(1, top + 1)
            lp = (log_v[x] + log_fact[tt] - math.log(jj) - log_e[tt, jj]
                  - log_fact[tt - x] + log_e[tt - x, jj - 1])
            p = np.exp(lp)
            if np.any(p > 1.0 + guard):
                raise ValueError("composition probability exceeds one")
            total = p.sum()
            if abs(total - 1.0) > 1e-9:
                raise ValueError("composition probabilities do not sum to one")
            cdf = np.cumsum(p)
            members = np.flatnonzero(inverse == s_idx)
            target = u[active[members], step] * total
            pick = np.searchsorted(cdf, target, side="right") + 1
            chosen[members] = np.minimum(pick, top)
        np.add.at(mult, (active, chosen - 1), 1)
        t[active] -= chosen
        j[active] -= 1
        step += 1
    last = np.flatnonzero(j == 1)
    np.add.at(mult, (last, t[last] - 1), 1)
    return mult


def compose_kernel(log_e, log_v, log_fact, ks, n, u, guard=1e-12, backend=None):
    """Draw block sizes left to right given ``ks`` blocks per replicate.

    ``log_e`` is the scaled coefficient table of size >= n+1, ``log_v[x]`` is
    log((1-alpha)_(x-1) / x!), ``u`` has shape (reps, n).
    """
    log_e = np.ascontiguousarray(log_e, dtype=np.float64)
    log_v = np.ascontiguousarray(log_v, dtype=np.float64)
    log_fact = np.ascontiguousarray(log_fact, dtype=np.float64)
    ks = np.ascontiguousarray(ks, dtype=np.int64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if resolve_backend(backend) == "numba":
        return _compose_nb(log_e, log_v, log_fact, ks, int(n), u, float(guard))
    return _compose_np(log_e, log_v, log_fact, ks, int(n), u, float(guard))
