import cmath
import math

import numpy as np
import pytest

from ktcs.errors import ConstraintViolated, IndexOutOfRange
from ktcs.fock import KtcsParams, auto_n_max, build_ktcs, build_tcs
from ktcs.transforms import (
    bracket_mod, coherent_integral_leakage, coherent_integral_reconstruct, cross_dimension,
    ktcs_to_tcs, phase_identity_residual, rotate_index, superpose, tcs_to_ktcs,
)


def max_gap(a, b):
    n = max(a.n_max, b.n_max)
    return float(np.abs(a.padded(n) - b.padded(n)).max())


def test_bracket_mod_branches():
    assert bracket_mod(2, 5) == 2
    assert bracket_mod(0, 5) == 0
    assert bracket_mod(-2, 5) == 3


def test_rotate_identity():
    s = build_ktcs(KtcsParams.from_xi(2.0, 0, 0, 3, 1))
    assert rotate_index(s, 1) is s


@pytest.mark.parametrize("xi,p,q,K,m,l", [(2.0, 0, 0, 2, 1, 0), (1 + 1j, 1, 0, 3, 0, 2),
                                          (0.8 - 0.4j, 2, 3, 4, 3, 1)])
def test_rotate_matches_direct_build(xi, p, q, K, m, l):
    src = KtcsParams.from_xi(xi, p, q, K, m)
    n_max = auto_n_max(src.replace(j=l), 1e-30) + K
    rotated = rotate_index(build_ktcs(src, n_max=n_max + K), l)
    direct = build_ktcs(src.replace(j=l), n_max=n_max + K)
    assert max_gap(rotated, direct) < 1e-10


def test_rotate_round_trip():
    src = KtcsParams.from_xi(1.3 + 0.2j, 1, 1, 3, 2)
    s = build_ktcs(src, n_max=60)
    back = rotate_index(rotate_index(s, 0), 2)
    assert np.abs(back.amplitudes[:50] - s.amplitudes[:50]).max() < 1e-10


def test_rotate_rejects_bad_index():
    s = build_ktcs(KtcsParams.from_xi(1.0, 0, 0, 2, 0))
    with pytest.raises(IndexOutOfRange):
        rotate_index(s, 2)


def test_ktcs_to_tcs_k1_is_trivial():
    d = ktcs_to_tcs(KtcsParams.from_xi(1.5, 0, 0, 1, 0))
    assert d.coefficients.shape == (1,)
    assert d.coefficients[0] == pytest.approx(1.0, abs=1e-15)


def test_even_cat_cancels_odd_terms():
    d = ktcs_to_tcs(KtcsParams.from_xi(1.7, 0, 0, 2, 0))
    assert d.coefficients[0] == pytest.approx(d.coefficients[1], abs=1e-15)
    s = d.to_state()
    assert np.abs(s.amplitudes[1::2]).max() < 1e-13


def test_ktcs_to_tcs_reconstruction():
    params = KtcsParams.from_xi(2.0, 1, 2, 3, 1)
    s = ktcs_to_tcs(params).to_state()
    assert max_gap(s, build_ktcs(params, n_max=s.n_max)) < 1e-12


def test_fourier_rows():
    # inverting the K-point DFT of the KTCS->TCS rows recovers the TCS->KTCS weights
    xi, p, q, K = 1.4 + 0.3j, 0, 1, 4
    rows = np.array([ktcs_to_tcs(KtcsParams.from_xi(xi, p, q, K, j)).coefficients
                     for j in range(K)])
    back = [c for c, _ in tcs_to_ktcs(xi, p, q, K)]
    inv = np.linalg.inv(rows)
    assert np.allclose(inv[0], back, atol=1e-12)


def test_tcs_to_ktcs():
    (coeff, params), = tcs_to_ktcs(1.1, 0, 0, 1)
    assert coeff == pytest.approx(1.0, abs=1e-15)
    terms = tcs_to_ktcs(1.5, 0, 1, 2)
    tcs = build_tcs(1.5, 0, 1)
    rebuilt = superpose(terms, tcs.n_max)
    assert max_gap(rebuilt, tcs) < 1e-12
    # and back again
    rebuilt2 = superpose([(c * cc, pp) for c, p in terms for cc, pp in ktcs_to_tcs(p).terms()],
                         tcs.n_max)
    assert max_gap(rebuilt2, tcs) < 1e-12


def test_phase_identity():
    assert phase_identity_residual(1 + 0.5j, 0, 0, 4, 3, 2) < 1e-13
    assert phase_identity_residual(2.0, 2, 1, 3, 1, 2) < 1e-13


def test_cross_dimension_same_k_is_identity():
    params = KtcsParams.from_xi(1.2 + 0.7j, 1, 2, 3, 2)
    cd = cross_dimension(params, 3)
    s = cd.to_state()
    assert max_gap(s, build_ktcs(params, n_max=s.n_max)) < 1e-12


def test_cross_dimension_to_one_matches_tcs_decomposition():
    params = KtcsParams.from_xi(1.6, 0, 0, 2, 1)
    cd = cross_dimension(params, 1)
    d = ktcs_to_tcs(params)
    assert np.allclose(cd.coefficients[0], d.coefficients, atol=1e-15)


def test_cross_dimension_general():
    params = KtcsParams.from_xi(1.6, 0, 0, 2, 1)
    s = cross_dimension(params, 3).to_state()
    assert max_gap(s, build_ktcs(params, n_max=s.n_max)) < 1e-11


def test_coherent_integral_tcs_case():
    xi = 1.0
    root = xi ** (1 / 3)
    params = KtcsParams.from_xi(xi, 0, 0, 1, 0)
    s = coherent_integral_reconstruct(params, root, root, root)
    assert max_gap(s, build_ktcs(params, n_max=s.n_max)) < 1e-10


def test_coherent_integral_k2():
    params = KtcsParams.from_xi(1.0, 0, 0, 2, 0)
    s = coherent_integral_reconstruct(params, 1, 1, 1, quadrature_n=256)
    assert max_gap(s, build_ktcs(params, n_max=s.n_max)) < 1e-8


def test_coherent_integral_charged_state_and_error_decay():
    params = KtcsParams.from_xi(0.9 * cmath.exp(0.4j), 1, 2, 3, 1)
    a = 0.9 ** (1 / 3) * cmath.exp(0.4j / 3)
    s = coherent_integral_reconstruct(params, a, a, a, quadrature_n=64)
    assert max_gap(s, build_ktcs(params, n_max=s.n_max)) < 1e-10
    coarse = coherent_integral_leakage(params, a, a, a, quadrature_n=4, box=12)
    fine = coherent_integral_leakage(params, a, a, a, quadrature_n=32, box=12)
    assert fine < coarse and fine < 1e-12


def test_coherent_integral_rejects_bad_triple():
    params = KtcsParams.from_xi(1.0, 1, 1, 2, 0)
    with pytest.raises(ConstraintViolated):
        coherent_integral_reconstruct(params, 1, 1, 2)
    with pytest.raises(ConstraintViolated):
        coherent_integral_reconstruct(KtcsParams(0.0, 0, 1, 1, 1, 0), 0, 0, 0)
