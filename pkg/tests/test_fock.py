import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaln

from ktcs.errors import InvalidParameter, NonNormalizable, TruncationTooSmall
from ktcs.fock import (
    KtcsParams, auto_n_max, build_ktcs, build_tcs, derivative_ratios, log_rho,
    normalization, normalization_series, overlap, overlap_closed_form, series_value,
)
from ktcs.io import dump_state, load_state


def brute_series(K, j, p, q, z, terms=400):
    n = np.arange(j, terms * K, K)
    logt = n * math.log(z) - (gammaln(n + p + 1) + gammaln(n + q + 1) + gammaln(n + 1))
    return float(np.exp(logt).sum())


params_st = st.builds(
    lambda K, j, p, q, r, phi: KtcsParams(r, phi, p, q, K, j % K),
    st.integers(1, 5), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4),
    st.floats(0.1, 6.0), st.floats(-math.pi, math.pi),
)


def test_vacuum_limit():
    s = build_ktcs(KtcsParams(0.0, 0.0, 0, 0, 1, 0))
    assert s.amplitudes[0] == 1 and np.all(s.amplitudes[1:] == 0)


def test_residue_support():
    s = build_ktcs(KtcsParams.from_xi(1.7, 0, 0, 2, 1))
    assert s.amplitudes[0] == 0 and s.amplitudes[2] == 0 and s.amplitudes[1] != 0


def test_eigenvalue_k3():
    params = KtcsParams.from_xi(2.0, 0, 0, 3, 0)
    s = build_ktcs(params, n_max=auto_n_max(params, 1e-30) + 3)
    assert abs(s.norm() - 1) < 1e-12
    lowered = s.apply_abc(3).amplitudes
    assert np.linalg.norm(lowered - params.xi ** 3 * s.amplitudes) < 1e-10


@pytest.mark.parametrize("K,j,p,q,z", [(1, 0, 0, 0, 1.0), (3, 2, 1, 2, 10.0), (5, 4, 4, 0, 100.0)])
def test_normalization_against_plain_sum(K, j, p, q, z):
    params = KtcsParams(math.sqrt(z), 0, p, q, K, j)
    assert normalization(params) == pytest.approx(brute_series(K, j, p, q, z) ** -0.5, rel=1e-12)


def test_large_argument_does_not_overflow():
    # rho(n) overflows a double near n ~ 57; z = 900 needs far more terms
    params = KtcsParams(30.0, 0, 0, 0, 1, 0)
    s = build_ktcs(params)
    assert np.isfinite(s.amplitudes).all()
    assert abs(s.norm() - 1) < 1e-12


def test_log_rho_values():
    assert log_rho(3, 1, 2) == pytest.approx(math.log(24 * 120 * 6))
    assert log_rho(0, 0, 0) == 0


@pytest.mark.parametrize("z", [1.0, 10.0, 100.0])
def test_series_derivatives_against_finite_differences(z):
    params = KtcsParams(1.0, 0, 1, 2, 3, 1)
    d = derivative_ratios(params, z, 2)
    S = lambda x: 1 / normalization(params, x) ** 2
    h = 1e-4 * z
    fd1 = (S(z + h) - S(z - h)) / (2 * h)
    h = 1e-3 * z
    fd2 = (S(z + h) - 2 * S(z) + S(z - h)) / h ** 2
    # d holds z^k S^(k) / S
    assert d[1] * S(z) / z == pytest.approx(fd1, rel=1e-6)
    assert d[2] * S(z) / z ** 2 == pytest.approx(fd2, rel=1e-5)


def test_series_cache_holds_n():
    params = KtcsParams(2.0, 0, 0, 1, 2, 0)
    cache = normalization_series(params)
    assert cache.N == pytest.approx(normalization(params), rel=1e-14)


def test_overlap_examples():
    a = build_ktcs(KtcsParams.from_xi(3.0, 0, 0, 2, 0))
    assert overlap(a, a) == pytest.approx(1, abs=1e-13)
    b = build_ktcs(KtcsParams.from_xi(3.0, 0, 0, 2, 1))
    assert abs(overlap(a, b)) < 1e-15
    pa, pb = KtcsParams.from_xi(3.0, 0, 0, 2, 0), KtcsParams.from_xi(2.0, 0, 0, 2, 0)
    direct = overlap(build_ktcs(pa), build_ktcs(pb))
    assert abs(direct - overlap_closed_form(pa, pb)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(params_st, st.floats(0.1, 5.0), st.floats(-3, 3))
def test_overlap_closed_form_matches_amplitudes(params, r2, phi2):
    other = params.replace(xi=r2 * np.exp(1j * phi2))
    direct = overlap(build_ktcs(other, tail=1e-30), build_ktcs(params, tail=1e-30))
    assert abs(direct - overlap_closed_form(other, params)) < 1e-11


@settings(max_examples=60, deadline=None)
@given(params_st)
def test_eigenvalue_and_charges(params):
    # one extra chain element past the cut keeps the top of the vector exact
    s = build_ktcs(params, n_max=auto_n_max(params, 1e-30) + params.K)
    lowered = s.apply_abc(params.K).amplitudes
    scale = max(1.0, abs(params.xi) ** params.K)
    assert np.linalg.norm(lowered - params.xi ** params.K * s.amplitudes) < 1e-9 * scale
    P, Q = s.charge_values()
    assert P == pytest.approx(params.p, abs=1e-10)
    assert Q == pytest.approx(params.q, abs=1e-10)
    n = np.flatnonzero(s.amplitudes)
    assert np.all((n - params.j) % params.K == 0)


def test_continuity_in_xi():
    base = KtcsParams.from_xi(1.5 + 0.5j, 1, 0, 2, 1)
    s0 = build_ktcs(base, n_max=80)
    dist = []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        s = build_ktcs(base.replace(xi=base.xi + eps), n_max=80)
        dist.append(np.linalg.norm(s.amplitudes - s0.amplitudes) ** 2)
    assert all(a > b for a, b in zip(dist, dist[1:]))
    assert dist[-1] < 1e-7


def test_truncation_errors():
    params = KtcsParams.from_xi(4.0, 0, 0, 1, 0)
    with pytest.raises(TruncationTooSmall):
        build_ktcs(params, n_max=2)
    n = auto_n_max(params)
    tail = 1 - build_ktcs(params, n_max=n).norm() ** 2
    assert tail < 1e-13


def test_validation():
    with pytest.raises(InvalidParameter):
        KtcsParams(1.0, 0, 0, 0, 2, 2)
    with pytest.raises(InvalidParameter):
        KtcsParams(1.0, 0, -1, 0, 2, 0)
    with pytest.raises(NonNormalizable):
        build_ktcs(KtcsParams(0.0, 0, 0, 0, 2, 1))


def test_series_value_complex_argument():
    w = 2.0 * np.exp(0.7j)
    n = np.arange(1, 200, 3)
    expect = np.sum(np.exp(n * np.log(w) - (gammaln(n + 3) + gammaln(n + 1) + gammaln(n + 1))))
    assert series_value(3, 1, 2, 0, w) == pytest.approx(expect, rel=1e-13)


def test_state_dump_roundtrip(tmp_path):
    s = build_tcs(1.2 - 0.3j, 1, 2)
    path = dump_state(s, tmp_path / "s.json")
    data = json.loads(path.read_text())
    assert set(data) == {"K", "j", "p", "q", "xi", "n_max", "amplitudes"}
    back = load_state(path)
    assert np.array_equal(back.amplitudes, s.amplitudes)
    assert back.params == s.params
