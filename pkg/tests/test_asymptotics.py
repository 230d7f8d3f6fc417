import math

import numpy as np
import pytest
from scipy import stats

from cpsm.asymptotics import (
    ConvergenceTable,
    diversity_table,
    finite_regime_mass,
    ks_distance,
    poissonization_table,
    shifted_poisson_tv,
    thm1_mr_table,
    thm1_neg_table,
    thm1_pos_table,
    tv_distance,
)
from cpsm.identities import enumerate_partitions
from cpsm.models import DomainError, ep_pmf, validate_ep, validate_nb


# ---------------------------------------------------------------- distances


def test_tv_examples():
    assert tv_distance([0.5, 0.5], [1.0]) == 0.5
    assert tv_distance([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0
    assert tv_distance([1.0], [0.0, 1.0]) == 1.0


def test_ks_examples():
    uniform = lambda x: np.clip(x, 0, 1)
    assert ks_distance([0.5], [1.0], uniform) == pytest.approx(0.5)
    n = 40
    atoms = np.arange(1, n + 1) / n
    assert ks_distance(atoms, np.ones(n), uniform) == pytest.approx(1 / n)
    # unsorted atoms and unnormalised weights give the same answer
    assert ks_distance(atoms[::-1], 3 * np.ones(n), uniform) == pytest.approx(1 / n)


def test_shifted_poisson_tv():
    mu = 1.7
    assert shifted_poisson_tv([1.0], mu) == pytest.approx(1 - math.exp(-mu))
    exact = stats.poisson.pmf(np.arange(60), mu)
    assert shifted_poisson_tv(exact, mu) < 1e-14


# ---------------------------------------------------------------- tables


def test_table_validation_and_rows():
    t = ConvergenceTable("x", {}, [1, 5], {"a": [2.0, 1.0], "b": [0, 0]}, "a")
    assert t.decreases and t.monotone
    assert list(t.rows()) == [["n", "a", "b"], [1, 2.0, 0], [5, 1.0, 0]]
    with pytest.raises(ValueError):
        ConvergenceTable("x", {}, [5, 1], {"a": [1.0, 2.0]}, "a")
    with pytest.raises(ValueError):
        ConvergenceTable("x", {}, [1, 5], {"a": [1.0]}, "a")
    with pytest.raises(ArithmeticError):
        ConvergenceTable("x", {}, [1, 5], {"a": [1.0, math.nan]}, "a")


def test_positive_regime_table():
    t = thm1_pos_table(0.5, 2.0, (50, 200, 800))
    assert t.decreases and t.monotone
    assert t.values[-1] < 1e-2


def test_positive_regime_table_rejects_negative_parameters():
    with pytest.raises(DomainError):
        thm1_pos_table(-1.0, -1.0)


def test_negative_regime_table():
    t = thm1_neg_table(-1.0, -1.0, (100, 400, 1600))
    assert t.target["constant"] == pytest.approx(1.0)
    assert t.target["exponent"] == pytest.approx(0.5)
    assert t.decreases
    cv = t.columns["cv"]
    assert cv[-1] < cv[0]


def test_mr_table():
    t = thm1_mr_table(validate_nb(0.5, 2.0), 2, 2, (50, 500, 2000))
    lam = 0.5 * 0.5 * 2.0 / 2
    assert t.target["lambda"] == pytest.approx(lam)
    assert t.decreases
    assert t.columns["moment"][-1] == pytest.approx(lam**2, rel=0.05)


def test_diversity_table():
    t = diversity_table(0.5, 1.0, (50, 500))
    assert t.decreases
    with pytest.raises(DomainError):
        diversity_table(-1.0, 2.0)


def test_finite_regime_mass_by_hand_and_enumeration():
    # n = 3 items, three blocks: (theta + alpha)(theta + 2 alpha) / ((theta + 1)(theta + 2))
    assert finite_regime_mass(-1.0, 3.0, 3) == pytest.approx(0.1)
    enum = enumerate_partitions(9).table
    p = ep_pmf(validate_ep(-1.0, 3.0), enum)
    assert finite_regime_mass(-1.0, 3.0, 9) == pytest.approx(p[enum.sum(axis=1) == 3].sum(), rel=1e-12)
    assert finite_regime_mass(-1.0, 3.0, 2) == 0.0
    with pytest.raises(DomainError):
        finite_regime_mass(0.5, 1.0, 10)


def test_finite_regime_mass_increases():
    masses = [finite_regime_mass(-0.5, 2.0, n) for n in (10, 100, 1000)]
    assert masses[0] < masses[1] < masses[2] < 1


def test_poissonization_tables():
    plain = poissonization_table(0.5, 1.0, (100, 1000))
    assert plain.decreases and "tv_refined" not in plain.columns
    refined = poissonization_table(0.5, 1.0, (100, 1000), refined=True)
    # the refined column is reported, not ordered against the plain one
    assert refined.columns["tv"] == plain.columns["tv"]
    assert all(0 <= v <= 1 for v in refined.columns["tv_refined"])
    assert refined.target["center_shift"] != 0


def test_tables_do_not_depend_on_workers():
    a = thm1_pos_table(0.3, 1.0, (20, 40, 60), workers=1)
    b = thm1_pos_table(0.3, 1.0, (20, 40, 60), workers=3)
    assert a.columns == b.columns
