"""Both backends must agree exactly on identical inputs."""

import numpy as np
import pytest
from scipy import special

from cpsm import _accel, kernels
from cpsm.models import log_block_weights
from cpsm.specfn import scaled_gfc_log_table

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


@pytest.mark.parametrize("alpha", [0.5, 0.0, -1.0, -2.5, 0.99])
def test_table_parity(alpha):
    a = kernels.log_scaled_gfc_table(alpha, 80, backend="numba")
    b = kernels.log_scaled_gfc_table(alpha, 80, backend="numpy")
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=0)


def test_rows_parity_and_consistency():
    keep = [0, 3, 50, 120]
    a = kernels.log_scaled_gfc_rows(0.3, 120, keep, backend="numba")
    b = kernels.log_scaled_gfc_rows(0.3, 120, keep, backend="numpy")
    full = kernels.log_scaled_gfc_table(0.3, 120, backend="numpy")
    for n in keep:
        np.testing.assert_allclose(a[n], b[n], rtol=1e-13)
        np.testing.assert_allclose(a[n], full[n, : n + 1], rtol=1e-13)


def test_stirling_limit():
    # alpha = 0 gives unsigned Stirling numbers of the first kind
    t = np.exp(kernels.log_scaled_gfc_table(0.0, 6, backend="numpy"))
    assert np.allclose(t[5, 1:6], [24, 50, 35, 10, 1])


@pytest.mark.parametrize("alpha,theta,cap", [(0.5, 1.0, 30), (0.0, 2.0, 30), (-1.0, 3.0, 3)])
def test_crp_parity(alpha, theta, cap):
    n, reps = 30, 500
    u = np.random.default_rng(1).random((reps, n - 1))
    th = np.full(reps, theta)
    cp = np.full(reps, cap)
    a = kernels.crp_kernel(alpha, th, cp, n, u, backend="numba")
    b = kernels.crp_kernel(alpha, th, cp, n, u, backend="numpy")
    assert np.array_equal(a, b)
    assert np.all(a @ np.arange(1, n + 1) == n)
    assert np.all(a.sum(axis=1) <= cap)


@pytest.mark.parametrize("alpha", [0.5, -1.0])
def test_compose_parity(alpha):
    n, reps = 25, 400
    rng = np.random.default_rng(2)
    ks = rng.integers(1, n + 1, reps)
    u = rng.random((reps, n))
    args = (scaled_gfc_log_table(alpha, n), log_block_weights(alpha, n), special.gammaln(np.arange(n + 1) + 1.0), ks, n, u)
    a = kernels.compose_kernel(*args, backend="numba")
    b = kernels.compose_kernel(*args, backend="numpy")
    assert np.array_equal(a, b)
    assert np.array_equal(a.sum(axis=1), ks)
    assert np.all(a @ np.arange(1, n + 1) == n)


def test_compose_rejects_bad_table():
    n = 6
    bad = np.array(scaled_gfc_log_table(0.5, n))
    bad[6, 2] -= 1.0
    u = np.full((1, n), 0.5)
    for backend in ("numba", "numpy"):
        with pytest.raises(ValueError):
            kernels.compose_kernel(bad, log_block_weights(0.5, n), special.gammaln(np.arange(n + 1) + 1.0),
                                   np.array([2]), n, u, backend=backend)


def test_backend_resolution(monkeypatch):
    assert _accel.resolve_backend("numpy") == "numpy"
    with pytest.raises(ValueError):
        _accel.resolve_backend("cuda")
    monkeypatch.setattr(_accel, "USE_NUMBA", False)
    assert _accel.resolve_backend() == "numpy"


def test_env_flag_gives_identical_cli_output():
    import os
    import subprocess
    import sys

    argv = [sys.executable, "-m", "cpsm", "sample", "--model", "nb", "--alpha", "0.5", "--z", "2", "--n", "9",
            "--reps", "300", "--seed", "4"]
    probe = [sys.executable, "-c", "from cpsm import _accel; print(_accel.resolve_backend())"]
    outs, backends = [], []
    for flag in ("0", "1"):
        env = {**os.environ, "CPSM_DISABLE_NUMBA": flag}
        outs.append(subprocess.run(argv, capture_output=True, env=env, check=True).stdout)
        backends.append(subprocess.run(probe, capture_output=True, env=env, text=True, check=True).stdout.strip())
    assert backends == ["numba", "numpy"]
    assert outs[0] == outs[1]
