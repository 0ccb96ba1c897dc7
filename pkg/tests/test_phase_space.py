import cmath
import math

import numpy as np
import pytest

from ktcs.fock import KtcsParams, build_ktcs, normalization
from ktcs.phase_space import (
    ResolutionWarning, count_peaks, fringe_minimum, q_point, q_slice,
)


def dense_q(params, alpha, beta, gamma, box=30):
    """Husimi value from the Fock amplitudes and explicit coherent-state vectors."""
    s = build_ktcs(params, n_max=box - 1 - max(params.p, params.q))
    psi = s.to_dense(box)
    n = np.arange(box)
    lf = np.array([math.lgamma(k + 1) for k in n])

    def coh(a):
        with np.errstate(divide="ignore"):
            mag = np.where(n == 0, 0.0, n * np.log(abs(a) + 1e-300)) - 0.5 * lf
        return np.exp(mag - abs(a) ** 2 / 2) * np.exp(1j * cmath.phase(a) * n)

    amp = np.einsum("i,j,k,ijk->", coh(alpha).conj(), coh(beta).conj(), coh(gamma).conj(), psi)
    return abs(amp) ** 2 / math.pi ** 3


def test_origin_values():
    assert q_point(KtcsParams(2.0, 0, 1, 0, 2, 0), 0, 0, 0) == 0
    params = KtcsParams(2.0, 0, 0, 0, 3, 0)
    assert q_point(params, 0, 0, 0) == pytest.approx(normalization(params) ** 2 / math.pi ** 3,
                                                     rel=1e-14)


@pytest.mark.parametrize("point", [(0.3 + 0.2j, -0.5j, 1.1), (1.0, 1.0, 1.0),
                                   (-0.7, 0.4 + 0.9j, 0.2)])
def test_q_point_against_dense_overlap(point):
    params = KtcsParams.from_xi(1.3 * cmath.exp(0.5j), 1, 2, 2, 1)
    assert q_point(params, *point) == pytest.approx(dense_q(params, *point), rel=1e-10)


def test_slice_matches_pointwise():
    params = KtcsParams.from_xi(5.0, 0, 1, 2, 1)
    x = np.linspace(-2, 2, 9)
    grid = q_slice(params, x=x, y=x)
    for iy, yy in enumerate(x):
        for ix, xx in enumerate(x):
            a = complex(xx, yy)
            want = math.pi ** 3 * q_point(params, a, a, a)
            assert grid.values[iy, ix] == pytest.approx(want, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("K,j", [(2, 0), (2, 1), (3, 2)])
def test_rotational_symmetry(K, j):
    params = KtcsParams(5.0, 0, 0, 0, K, j)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2, 2, 20) + 1j * rng.uniform(-2, 2, 20)
    rot = pts * cmath.exp(2j * math.pi / (3 * K))
    a = q_slice(params, x=pts.real, y=pts.imag).values.diagonal()
    b = q_slice(params, x=rot.real, y=rot.imag).values.diagonal()
    assert np.abs(a - b).max() < 1e-10 * a.max()


def test_nonnegative_and_vanishing_at_window_edge():
    params = KtcsParams(12.0, 0, 0, 0, 3, 1)
    grid = q_slice(params, nx=200, half_width=4.0)
    v = grid.values
    assert np.all(np.isfinite(v)) and v.min() >= 0
    edge = np.concatenate([v[0], v[-1], v[:, 0], v[:, -1]])
    assert edge.max() < 1e-4 * v.max()
    far = q_slice(params, nx=200, half_width=6.0).values
    far_edge = np.concatenate([far[0], far[-1], far[:, 0], far[:, -1]])
    assert far_edge.max() < 1e-12 * far.max()


@pytest.mark.parametrize("xi,K,j,hw,expect", [
    (5.0, 2, 0, 2.5, 6), (5.0, 2, 1, 2.5, 6), (12.0, 3, 0, 4.0, 9), (5.0, 1, 0, 2.5, 3),
])
def test_bell_count(xi, K, j, hw, expect):
    grid = q_slice(KtcsParams(xi, 0, 0, 0, K, j), nx=400, half_width=hw)
    assert count_peaks(grid) == expect


def test_low_floor_sees_interference_bump():
    # for j = 0 constructive fringes add a lower maximum at the origin
    grid = q_slice(KtcsParams(5.0, 0, 0, 0, 2, 0), nx=401, half_width=2.5)
    assert count_peaks(grid, floor=0.01) > count_peaks(grid)


def test_coarse_grid_warns():
    grid = q_slice(KtcsParams(5.0, 0, 0, 0, 2, 0), nx=50, half_width=2.5)
    with pytest.warns(ResolutionWarning):
        count_peaks(grid)


def test_fringes_destructive_only_for_odd_state():
    odd = fringe_minimum(KtcsParams(5.0, 0, 0, 0, 2, 1))
    even = fringe_minimum(KtcsParams(5.0, 0, 0, 0, 2, 0))
    assert odd.interior and odd.value < 1e-10
    assert even.value > 1e-2
    # the odd-state zero sits on the line halfway between neighbouring bells
    assert abs(cmath.phase(odd.location)) == pytest.approx(math.pi / 6, abs=1e-3)
