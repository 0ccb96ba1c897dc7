import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ktcs.errors import InvalidParameter, NoSignChange
from ktcs.fock import KtcsParams
from ktcs.statistics import (
    PAIRS, csi_measures, factorial_moment, find_crossover, joint_factorial_moment, mandel,
    mandel_limit, number_distribution, oracle_csi, oracle_factorial_moment,
    oracle_joint_moment, oracle_mandel,
)

params_st = st.builds(
    lambda K, j, p, q, z: KtcsParams(math.sqrt(z), 0.0, p, q, K, j % K),
    st.integers(1, 5), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4),
    st.floats(0.05, 100.0),
)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_gate_function():
    params = KtcsParams(2.0, 0, 0, 0, 2, 0)
    assert np.all(number_distribution(params, np.arange(1, 40, 2)) == 0)


def test_distribution_sums_to_one():
    params = KtcsParams(3.0, 0, 1, 2, 3, 2)
    assert number_distribution(params, np.arange(400)).sum() == pytest.approx(1, abs=1e-10)


def test_tcs_distribution_has_no_gaps():
    P = number_distribution(KtcsParams(30.0, 0, 0, 0, 1, 0), np.arange(30))
    assert np.all(P > 0)


def test_vacuum_mean():
    params = KtcsParams(1e-6, 0, 0, 0, 1, 0)
    assert factorial_moment(params, "c", 1) < 1e-11


@settings(max_examples=40, deadline=None)
@given(params_st)
def test_charge_identities(params):
    a, b, c = (factorial_moment(params, m, 1) for m in "abc")
    assert a - c == pytest.approx(params.q, abs=1e-9 * max(1, c))
    assert b - c == pytest.approx(params.p, abs=1e-9 * max(1, c))


def test_factorial_moment_example():
    params = KtcsParams(math.sqrt(5), 0, 1, 0, 2, 1)
    n = np.arange(1, 200, 2)
    P = number_distribution(params, n)
    expect = float(np.sum((n + 1) * n * P))
    assert rel(factorial_moment(params, "b", 2), expect) < 1e-10


def test_joint_moment_examples():
    params = KtcsParams(math.sqrt(3), 0, 1, 2, 2, 0)
    assert rel(joint_factorial_moment(params, "ac", 2, 1),
               oracle_joint_moment(params, "ac", 2, 1)) < 1e-9
    n = np.arange(0, 200, 2)
    P = number_distribution(params, n)
    expect = float(np.sum((n + 2) * (n + 1) * P))
    assert rel(joint_factorial_moment(params, "ab", 1, 1), expect) < 1e-10
    vac = KtcsParams(1e-6, 0, 0, 0, 1, 0)
    assert joint_factorial_moment(vac, "bc", 1, 1) < 1e-11


@settings(max_examples=50, deadline=None)
@given(params_st, st.integers(1, 3), st.integers(1, 3))
def test_closed_forms_match_oracle(params, l, m):
    for mode in "abc":
        assert rel(factorial_moment(params, mode, l),
                   oracle_factorial_moment(params, mode, l)) < 1e-8
    for pair in PAIRS:
        assert rel(joint_factorial_moment(params, pair, l, m),
                   oracle_joint_moment(params, pair, l, m)) < 1e-8


@settings(max_examples=40, deadline=None)
@given(params_st)
def test_mandel_two_routes_and_oracle(params):
    m = mandel(params)
    scale = max(1.0, max(abs(m[x]) for x in "abc"))
    assert m.discrepancy < 1e-8 * scale
    for x, o in zip("abc", oracle_mandel(params)):
        assert abs(m[x] - o) < 1e-8 * max(1.0, abs(o))


@settings(max_examples=30, deadline=None)
@given(params_st)
def test_csi_matches_oracle(params):
    c = csi_measures(params)
    J, G = oracle_csi(params)
    for pair in PAIRS:
        assert rel(c.J[pair], J[pair]) < 1e-8 or abs(c.J[pair] - J[pair]) < 1e-10
        assert abs(c.G[pair] - G[pair]) < 1e-8 * max(1.0, abs(G[pair]))
    assert c.flagged == []


@pytest.mark.parametrize("K", [2, 3, 4])
@pytest.mark.parametrize("p,q", [(1, 2), (2, 0), (0, 0)])
def test_small_z_limits(K, p, q):
    # a mode with zero charge offset behaves like mode c and tends to K - 1;
    # a charged mode sits on a fixed occupation and tends to -1
    m = mandel_limit(KtcsParams(1.0, 0, p, q, K, 0))
    assert m.Mc == pytest.approx(K - 1, abs=1e-4)
    assert m.Ma == pytest.approx(-1 if q else K - 1, abs=1e-4)
    assert m.Mb == pytest.approx(-1 if p else K - 1, abs=1e-4)
    for j in range(1, K):
        mj = mandel_limit(KtcsParams(1.0, 0, p, q, K, j))
        assert all(mj[x] == pytest.approx(-1, abs=1e-4) for x in "abc")


def test_equal_charges_give_equal_mandel():
    for K in (1, 2, 5):
        m = mandel(KtcsParams(1.0, 0, 0, 0, K, 0), 7.0)
        assert m.Ma == m.Mb == m.Mc


def test_swapping_charges_swaps_modes_a_and_b():
    for z in (0.3, 4.0, 40.0):
        m1 = mandel(KtcsParams(1.0, 0, 1, 3, 3, 1), z)
        m2 = mandel(KtcsParams(1.0, 0, 3, 1, 3, 1), z)
        assert m1.Ma == pytest.approx(m2.Mb, rel=1e-13)
        assert m1.Mb == pytest.approx(m2.Ma, rel=1e-13)
        assert m1.Mc == pytest.approx(m2.Mc, rel=1e-13)
        c1 = csi_measures(KtcsParams(1.0, 0, 1, 3, 3, 1), z)
        c2 = csi_measures(KtcsParams(1.0, 0, 3, 1, 3, 1), z)
        assert c1.G["ac"] == pytest.approx(c2.G["bc"], rel=1e-12)
        assert c1.G["ab"] == pytest.approx(c2.G["ab"], rel=1e-12)


def test_tcs_stays_sub_poissonian():
    params = KtcsParams(1.0, 0, 0, 0, 1, 0)
    assert all(mandel(params, z).Mc < 0 for z in np.linspace(0.01, 50, 120))


def test_csi_sign_examples():
    z = np.linspace(0.05, 40, 80)
    tcs = KtcsParams(1.0, 0, 1, 2, 1, 0)
    for zz in z:
        g = csi_measures(tcs, zz).G
        assert g["bc"] < 0 and g["ac"] < 0
    g = csi_measures(KtcsParams(1.0, 0, 0, 0, 2, 1), 2.0).G
    assert all(v < 0 for v in g.values())


def test_csi_positive_region_widens_with_k():
    # G_ac is positive on an initial z-interval that grows with K
    ends = []
    for K in (2, 3, 4):
        params = KtcsParams(1.0, 0, 1, 2, K, 0)
        assert csi_measures(params, 0.05).G["ac"] > 0
        z = np.linspace(0.05, 40, 800)
        ends.append(next(zz for zz in z if csi_measures(params, zz).G["ac"] < 0))
    assert ends[0] < ends[1] < ends[2]


@pytest.mark.parametrize("p,expect", [(0, 7.5628), (1, 12.0114), (3, 20.5606)])
def test_crossover_values(p, expect):
    z = find_crossover(KtcsParams(1.0, 0, p, 0, 3, 0), "c", 60.0)
    assert z == pytest.approx(expect, abs=1e-3)


def test_crossover_requires_sign_change():
    with pytest.raises(NoSignChange):
        find_crossover(KtcsParams(1.0, 0, 0, 0, 1, 0), "c", 30.0)


def test_mandel_rejects_nonpositive_z():
    with pytest.raises(InvalidParameter):
        mandel(KtcsParams(1.0, 0, 0, 0, 2, 0), 0.0)
