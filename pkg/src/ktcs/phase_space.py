r"""Husimi Q-function of trio coherent states.

The full function of three complex amplitudes is available pointwise through
:func:`q_point`.  Grids are only produced on the slice
:math:`\alpha = \beta = \gamma = x + iy`, where

.. math::
    \pi^3 Q(x, y) = N^2 e^{-3(x^2+y^2)} (x^2+y^2)^{p+q} |S(\xi (x-iy)^3)|^2 .

Grids store :math:`\pi^3 Q` to match the usual figure normalization.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidParameter
from .fock import KtcsParams, chain_log_weights, log_normalization, log_rho, log_series

__all__ = ["QGrid", "q_point", "q_slice", "count_peaks", "default_window",
           "ResolutionWarning", "FringeMinimum", "bell_radius", "fringe_minimum"]


class ResolutionWarning(UserWarning):
    """Grid too coarse for reliable peak counting."""


@dataclass(frozen=True)
class QGrid:
    """``values[iy, ix] = pi^3 Q(x[ix], y[iy])`` on a rectangular grid."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    params: Optional[KtcsParams] = None
    meta: dict = field(default_factory=dict)

    @property
    def x_range(self) -> Tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    @property
    def y_range(self) -> Tuple[float, float]:
        return float(self.y[0]), float(self.y[-1])

    @property
    def nx(self) -> int:
        return len(self.x)

    @property
    def ny(self) -> int:
        return len(self.y)


def _log_overlap_terms(params, alpha, beta, gamma):
    """log-magnitudes and phases of the terms of (alpha,beta,gamma | xi,p,q)_{Kj}."""
    p, q = params.p, params.q
    amps = np.array([alpha, beta, gamma], dtype=complex)
    # effective series argument is xi * conj(alpha beta gamma); it sets the truncation
    w = abs(params.xi * alpha * beta * gamma)
    n, _ = chain_log_weights(params.K, params.j, p, q, max(w, 1e-300))
    log_N = log_normalization(params)
    with np.errstate(divide="ignore"):
        la, lb, lg = np.log(np.abs(amps))
        lr = math.log(params.xi_mod) if params.xi_mod > 0 else -math.inf
    # c_n = N xi^n / sqrt(rho);   (alpha|n+q) = conj(alpha)^(n+q)/sqrt((n+q)!) ...
    half_rho = 0.5 * log_rho(n, p, q)
    with np.errstate(invalid="ignore"):
        log_c = log_N + np.where(n == 0, 0.0, n * lr) - half_rho
        log_bra = (np.where(n + q == 0, 0.0, (n + q) * la)
                   + np.where(n + p == 0, 0.0, (n + p) * lb)
                   + np.where(n == 0, 0.0, n * lg)
                   - half_rho)
    phase = n * params.xi_arg - ((n + q) * np.angle(alpha) + (n + p) * np.angle(beta)
                                 + n * np.angle(gamma))
    return log_c + log_bra, phase


def q_point(params: KtcsParams, alpha, beta, gamma) -> float:
    """Three-mode Husimi function ``|(alpha, beta, gamma | state>|^2 / pi^3``."""
    logt, phase = _log_overlap_terms(params, complex(alpha), complex(beta), complex(gamma))
    top = logt.max()
    if top == -np.inf:
        return 0.0
    s = np.sum(np.exp(logt - top) * np.exp(1j * phase))
    gauss = abs(alpha) ** 2 + abs(beta) ** 2 + abs(gamma) ** 2
    with np.errstate(divide="ignore"):
        log_q = 2 * (top + math.log(abs(s))) - gauss - 3 * math.log(math.pi)
    return math.exp(log_q) if log_q > -np.inf else 0.0


def _slice_values(params: KtcsParams, alpha: np.ndarray) -> np.ndarray:
    """Vectorized ``pi^3 Q`` at ``alpha = beta = gamma``."""
    alpha = np.asarray(alpha, complex)
    rho2 = np.abs(alpha) ** 2
    w = params.xi * np.conj(alpha) ** 3
    log_S, _ = log_series(params.K, params.j, params.p, params.q, w)
    pq = params.p + params.q
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pow = np.where(rho2 == 0, 0.0 if pq == 0 else -np.inf, pq * np.log(rho2))
    log_val = 2 * log_normalization(params) - 3 * rho2 + log_pow + 2 * log_S
    return np.where(np.isfinite(log_val), np.exp(log_val), 0.0)


def default_window(params: KtcsParams) -> float:
    """Half-width of the square window; bells sit near ``|alpha| = |xi|^(1/3)``."""
    return 1.6 * params.xi_mod ** (1.0 / 3.0) * 1.5


def q_slice(params: KtcsParams, x=None, y=None, nx: int = 400, ny: Optional[int] = None,
            half_width: Optional[float] = None) -> QGrid:
    """``pi^3 Q`` on the ``alpha = beta = gamma = x + iy`` slice.

    Either pass explicit coordinate arrays ``x`` and ``y`` or let a square
    ``nx`` by ``ny`` grid of half-width ``half_width`` (default
    :func:`default_window`) be built.
    """
    if x is None or y is None:
        hw = default_window(params) if half_width is None else half_width
        if not (hw > 0 and math.isfinite(hw)):
            raise InvalidParameter("window half-width must be positive and finite")
        ny = nx if ny is None else ny
        x = np.linspace(-hw, hw, nx) if x is None else np.asarray(x, float)
        y = np.linspace(-hw, hw, ny) if y is None else np.asarray(y, float)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    X, Y = np.meshgrid(x, y)
    values = _slice_values(params, X + 1j * Y)
    meta = {"K": params.K, "j": params.j, "p": params.p, "q": params.q,
            "xi": [params.xi.real, params.xi.imag], "scale": "pi^3 Q"}
    return QGrid(x, y, values, params, meta)


def count_peaks(grid: QGrid, floor: float = 0.75) -> int:
    """Number of local maxima above ``floor * max``.

    The ``3K`` bells are images of each other under rotation by
    ``2 pi/(3K)`` and so share the global maximum height, while interference
    maxima (for ``j = 0`` a bump at the origin) are lower.  The default
    ``floor`` therefore counts bells only; pass a small ``floor`` to count
    every maximum.

    A point counts when it is strictly above the neighbours that precede it
    in row-major order and not below the ones that follow, so a peak split
    evenly between two grid nodes is counted once.  The outermost grid lines
    are never counted.
    """
    if grid.nx < 200 or grid.ny < 200:
        warnings.warn("peak counting below 200x200 is unreliable", ResolutionWarning,
                      stacklevel=2)
    v = grid.values
    c = v[1:-1, 1:-1]
    is_max = c > floor * v.max()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            nb = v[1 + dy: v.shape[0] - 1 + dy, 1 + dx: v.shape[1] - 1 + dx]
            is_max &= (c > nb) if (dy, dx) < (0, 0) else (c >= nb)
    return int(is_max.sum())


@dataclass(frozen=True)
class FringeMinimum:
    """Deepest point of ``Q`` on the bell ring between two neighbouring bells.

    ``value`` is relative to the bell height.  ``interior`` is False when
    the minimum lies on the edge of the search band, i.e. there is no
    isolated zero between the bells.
    """

    value: float
    location: complex
    interior: bool
    bell_radius: float


def bell_radius(params: KtcsParams, n: int = 4001) -> float:
    """Radius of the bell centred on ``arg(alpha) = arg(xi)/3``."""
    hw = default_window(params)
    r = np.linspace(hw / n, hw, n)
    direction = cmath.exp(1j * params.xi_arg / 3)
    vals = _slice_values(params, r * direction)
    return float(r[int(np.argmax(vals))])


def fringe_minimum(params: KtcsParams, band: float = 0.2, n: int = 200) -> FringeMinimum:
    """Locate the minimum of ``Q`` between two adjacent bells.

    The search covers the annular sector ``|alpha| in R [1-band, 1+band]``
    between the bell at angle ``arg(xi)/3`` and its neighbour, ``R`` being the
    bell radius.  The best node of an ``n`` by ``n`` polar grid is polished
    with Nelder-Mead; destructive fringes show up as values near zero.
    """
    if not (0 < band < 1):
        raise InvalidParameter("band must lie in (0, 1)")
    R = bell_radius(params)
    theta0 = params.xi_arg / 3
    rr = np.linspace((1 - band) * R, (1 + band) * R, n)
    th = theta0 + np.linspace(0, 2 * np.pi / (3 * params.K), n)
    RR, TT = np.meshgrid(rr, th)
    alpha = RR * np.exp(1j * TT)
    top = float(_slice_values(params, np.array([R * cmath.exp(1j * theta0)]))[0])
    vals = _slice_values(params, alpha) / top
    i, k = np.unravel_index(np.argmin(vals), vals.shape)
    best, where = float(vals[i, k]), complex(alpha[i, k])
    on_edge = k in (0, n - 1)
    if not on_edge:
        f = lambda u: float(_slice_values(params, np.array([complex(u[0], u[1])]))[0]) / top
        res = minimize(f, [where.real, where.imag], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-300, "maxiter": 4000})
        z = complex(res.x[0], res.x[1])
        if (1 - band) * R < abs(z) < (1 + band) * R and res.fun < best:
            best, where = float(res.fun), z
    return FringeMinimum(best, where, not on_edge, R)
