r"""Photon-number statistics of K-dimensional trio coherent states.

Every quantity is available along two routes:

* a *closed form* built from derivatives of the normalization series
  :math:`S(z) = N^{-2}`, following the factorial-moment identities
  :math:`\langle n_c^{(l)}\rangle = z^l S^{(l)}/S`,
  :math:`\langle n_a^{(l)}\rangle = z^{l-q} S^{-1} (z^q S)^{(l)}` and their
  nested two-mode versions;
* an *oracle*: direct summation of the target function against the chain
  distribution :math:`P_n`.

The printed explicit expressions for the Mandel parameters and for the
Cauchy-Schwarz quantities :math:`J_{xy}` in terms of ``N, N', N''`` are
evaluated as a third, diagnostic route.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateMean, InvalidParameter, NoSignChange
from .fock import KtcsParams, chain_log_weights, derivative_ratios, log_rho

__all__ = [
    "MODES", "mode_offset", "MandelTriple", "CsiMeasures",
    "number_distribution", "chain_distribution",
    "factorial_moment", "joint_factorial_moment", "mandel", "mandel_limit",
    "csi_measures", "find_crossover",
    "oracle_expectation", "oracle_factorial_moment", "oracle_joint_moment",
    "oracle_mandel", "oracle_csi",
]

MODES = ("a", "b", "c")
PAIRS = ("ab", "ac", "bc")
#: disagreement between the printed formulas and the moment route that is flagged
DIAGNOSTIC_TOL = 1e-6


def mode_offset(params: KtcsParams, mode: str) -> int:
    """Charge offset of a mode: ``q`` for ``a``, ``p`` for ``b``, ``0`` for ``c``."""
    if mode == "a":
        return params.q
    if mode == "b":
        return params.p
    if mode == "c":
        return 0
    raise InvalidParameter(f"mode must be one of 'a', 'b', 'c', got {mode!r}")


def _at(params: KtcsParams, z) -> KtcsParams:
    return params if z is None else params.replace(xi_mod=math.sqrt(z))


# ---------------------------------------------------------------------------
# number distribution


def chain_distribution(params: KtcsParams, z=None, rel_cutoff=1e-20):
    """Chain indices on the residue class and their probabilities ``P_n``."""
    z = params.z if z is None else z
    n, logt = chain_log_weights(params.K, params.j, params.p, params.q, z, rel_cutoff)
    return n, np.exp(logt - logsumexp(logt))


def number_distribution(params: KtcsParams, n) -> np.ndarray:
    r"""Probability :math:`P_n` of finding ``n`` quanta in mode ``c``.

    Modes ``a`` and ``b`` then hold ``n + q`` and ``n + p`` quanta with
    certainty.  Vectorized over ``n``; zero off the residue class ``j mod K``.
    """
    n_arr = np.atleast_1d(np.asarray(n))
    if np.any(n_arr < 0):
        raise InvalidParameter("n must be >= 0")
    K, j = params.K, params.j
    on_class = (n_arr - j) % K == 0
    z = params.z
    if z == 0:
        out = np.where(n_arr == 0, 1.0, 0.0) if j == 0 else np.zeros(n_arr.shape)
    else:
        _, logt = chain_log_weights(K, j, params.p, params.q, z)
        log_S = logsumexp(logt)
        with np.errstate(invalid="ignore"):
            logP = n_arr * math.log(z) - log_rho(n_arr, params.p, params.q) - log_S
        out = np.where(on_class, np.exp(logP), 0.0)
    return out if np.ndim(n) else float(out[0])


# ---------------------------------------------------------------------------
# closed forms: polynomial-in-z combinations of S and its derivatives
#
# An expression is a dict {(power, order): coeff} standing for
# sum coeff * z**power * S^(order).


def _diff(expr):
    out = defaultdict(float)
    for (a, d), c in expr.items():
        if a != 0:
            out[(a - 1, d)] += c * a
        out[(a, d + 1)] += c
    return {k: v for k, v in out.items() if v != 0}


def _mul_z(expr, k):
    return {(a + k, d): c for (a, d), c in expr.items()}


def _diff_n(expr, times):
    for _ in range(times):
        expr = _diff(expr)
    return expr


def _evaluate(expr, R):
    # z**a S^(d) / S == z**(a - d) * R_d; callers guarantee a == d overall
    total = 0.0
    for (a, d), c in expr.items():
        if a != d:
            raise AssertionError("unbalanced closed-form expression")
        total += c * R[d]
    return total


def _single_expr(offset: int, l: int):
    # z^(l - off) d^l/dz^l (z^off S)
    return _mul_z(_diff_n({(offset, 0): 1.0}, l), l - offset)


def _joint_expr(pair: str, l: int, m: int, p: int, q: int):
    if pair == "ab":
        inner = _mul_z(_diff_n({(q, 0): 1.0}, l), l + p - q)
        return _mul_z(_diff_n(inner, m), m - p)
    if pair == "ac":
        inner = _mul_z(_diff_n({(q, 0): 1.0}, l), l - q)
        return _mul_z(_diff_n(inner, m), m)
    if pair == "bc":
        # b carries order l, c carries order m
        inner = _mul_z(_diff_n({(0, 0): 1.0}, m), m + p)
        return _mul_z(_diff_n(inner, l), l - p)
    raise InvalidParameter(f"pair must be one of {PAIRS}, got {pair!r}")


def factorial_moment(params: KtcsParams, mode: str, l: int, z=None) -> float:
    r"""Closed-form :math:`\langle n_x^{(l)}\rangle` at ``z`` (default ``|xi|^2``)."""
    if l < 1:
        raise InvalidParameter("l must be >= 1")
    expr = _single_expr(mode_offset(params, mode), l)
    R = derivative_ratios(params, z, l)
    return _evaluate(expr, R)


def joint_factorial_moment(params: KtcsParams, pair: str, l: int, m: int, z=None) -> float:
    r"""Closed-form :math:`\langle n_x^{(l)} n_y^{(m)}\rangle` for ``pair`` in ab, ac, bc."""
    if l < 1 or m < 1:
        raise InvalidParameter("l and m must be >= 1")
    expr = _joint_expr(pair, l, m, params.p, params.q)
    R = derivative_ratios(params, z, l + m)
    return _evaluate(expr, R)


# ---------------------------------------------------------------------------
# oracle route


def _falling(x, l):
    out = np.ones_like(x, dtype=float)
    for i in range(l):
        out = out * (x - i)
    return out


def oracle_expectation(params: KtcsParams, f: Callable, z=None) -> float:
    """``sum_n f(n) P_n`` over the residue class."""
    n, P = chain_distribution(params, z)
    return float(np.dot(f(n.astype(float)), P))


def oracle_factorial_moment(params, mode, l, z=None):
    off = mode_offset(params, mode)
    return oracle_expectation(params, lambda n: _falling(n + off, l), z)


def oracle_joint_moment(params, pair, l, m, z=None):
    x, y = pair
    ox, oy = mode_offset(params, x), mode_offset(params, y)
    return oracle_expectation(params, lambda n: _falling(n + ox, l) * _falling(n + oy, m), z)


# ---------------------------------------------------------------------------
# Mandel parameters


@dataclass(frozen=True)
class MandelTriple:
    """Mandel parameters of the three modes at one ``z``.

    ``explicit`` holds the same three numbers from the printed
    ``N, N', N''`` expressions; ``discrepancy`` is the largest absolute
    difference between the two routes.
    """

    z: float
    Ma: float
    Mb: float
    Mc: float
    explicit: Tuple[float, float, float] = (math.nan, math.nan, math.nan)
    discrepancy: float = math.nan

    def __getitem__(self, mode: str) -> float:
        return {"a": self.Ma, "b": self.Mb, "c": self.Mc}[mode]


def _mandel_from_moments(n1, n2):
    if abs(n1) < 1e-300:
        raise DegenerateMean(f"mean occupation {n1!r} too small")
    return (n2 - n1 * n1) / n1


def _normalization_derivatives(R, z):
    """``N'/N`` and ``N''/N`` from the scaled series derivatives."""
    s1 = R[1] / z
    s2 = R[2] / z ** 2
    return -0.5 * s1, 0.75 * s1 * s1 - 0.5 * s2


def _mandel_explicit(R, z, p, q):
    n1, n2 = _normalization_derivatives(R, z)
    curv = n2 - n1 * n1  # (N N'' - N'^2) / N^2

    def charged(c):
        den = 2 * z * n1 - c
        if abs(den) < 1e-300:
            raise DegenerateMean("vanishing denominator in explicit Mandel formula")
        return (2 * z * z * curv + c) / den

    if abs(n1) < 1e-300:
        raise DegenerateMean("vanishing N' in explicit Mandel formula")
    return charged(q), charged(p), z * curv / n1


def mandel(params: KtcsParams, z=None) -> MandelTriple:
    """Mandel parameters ``(Ma, Mb, Mc)`` at ``z > 0``.

    The returned values come from the factorial moments; the printed
    explicit formulas are evaluated alongside for cross-checking.
    """
    z = params.z if z is None else float(z)
    if not z > 0:
        raise InvalidParameter("mandel requires z > 0")
    R = derivative_ratios(params, z, 2)
    values = []
    for mode in MODES:
        off = mode_offset(params, mode)
        n1 = _evaluate(_single_expr(off, 1), R)
        n2 = _evaluate(_single_expr(off, 2), R)
        values.append(float(_mandel_from_moments(n1, n2)))
    explicit = tuple(float(v) for v in _mandel_explicit(R, z, params.p, params.q))
    disc = float(max(abs(a - b) for a, b in zip(values, explicit)))
    return MandelTriple(z, *values, explicit=tuple(explicit), discrepancy=disc)


def mandel_limit(params: KtcsParams, h: float = 1e-8) -> MandelTriple:
    """``z -> 0`` limit from ``z = h`` with one Richardson step against ``z = 2h``."""
    m1, m2 = mandel(params, h), mandel(params, 2 * h)
    ext = [float(2 * m1[x] - m2[x]) for x in MODES]
    return MandelTriple(0.0, *ext, explicit=m1.explicit, discrepancy=m1.discrepancy)


def oracle_mandel(params: KtcsParams, z=None) -> Tuple[float, float, float]:
    out = []
    for mode in MODES:
        n1 = oracle_factorial_moment(params, mode, 1, z)
        n2 = oracle_factorial_moment(params, mode, 2, z)
        out.append(_mandel_from_moments(n1, n2))
    return tuple(out)


# ---------------------------------------------------------------------------
# Cauchy-Schwarz inequality


@dataclass(frozen=True)
class CsiMeasures:
    """CSI quantities ``J_xy`` and ``G_xy = J_xy / <n_x n_y>^2``.

    ``J`` and ``G`` come from the moment route.  ``J_printed`` repeats ``J``
    from the long explicit expressions, and ``discrepancy`` records the
    relative disagreement per pair; ``flagged`` lists pairs whose
    disagreement exceeds ``DIAGNOSTIC_TOL``.
    """

    z: float
    J: Dict[str, float]
    G: Dict[str, float]
    J_printed: Dict[str, float] = field(default_factory=dict)
    discrepancy: Dict[str, float] = field(default_factory=dict)

    @property
    def flagged(self):
        return [k for k, v in self.discrepancy.items() if v > DIAGNOSTIC_TOL]

    def as_tuple(self):
        return tuple(self.J[k] for k in PAIRS) + tuple(self.G[k] for k in PAIRS)


def _printed_j(R, z, p, q):
    """Explicit CSI expressions, divided through by ``N^3``."""
    n1, n2 = _normalization_derivatives(R, z)
    Jab = (p * q * (1 - p - q) + 24 * z ** 3 * n1 ** 3
           - 2 * z ** 2 * n1 * ((2 + 7 * (p + q) - (p - q) ** 2) * n1 + 4 * z * n2)
           + 2 * z * (6 * p * q * n1 + z * (p + q - (p - q) ** 2) * n2))
    Jac = 2 * z ** 2 * (12 * z * n1 ** 3 + q * (1 - q) * n2
                        - n1 * ((2 + 7 * q - q * q) * n1 + 4 * z * n2))
    Jbc = 2 * z ** 2 * (12 * z * n1 ** 3 + p * (1 - p) * n2
                        - n1 * ((2 + 7 * p - p * p) * n1 + 4 * z * n2))
    return {"ab": Jab, "ac": Jac, "bc": Jbc}


def _csi_from(single2, joint11):
    J, G = {}, {}
    for pair in PAIRS:
        x, y = pair
        J[pair] = float(single2[x] * single2[y] - joint11[pair] ** 2)
        if abs(joint11[pair]) < 1e-300:
            raise DegenerateMean(f"<n_{x} n_{y}> vanishes")
        G[pair] = float(J[pair] / joint11[pair] ** 2)
    return J, G


def csi_measures(params: KtcsParams, z=None) -> CsiMeasures:
    """Cauchy-Schwarz quantities for the three mode pairs at ``z > 0``."""
    z = params.z if z is None else float(z)
    if not z > 0:
        raise InvalidParameter("csi_measures requires z > 0")
    p, q = params.p, params.q
    R = derivative_ratios(params, z, 2)
    single2 = {x: _evaluate(_single_expr(mode_offset(params, x), 2), R) for x in MODES}
    joint11 = {pair: _evaluate(_joint_expr(pair, 1, 1, p, q), R) for pair in PAIRS}
    J, G = _csi_from(single2, joint11)
    printed = _printed_j(R, z, p, q)
    disc = {}
    for pair in PAIRS:
        scale = max(abs(J[pair]), single2[pair[0]] * single2[pair[1]], 1e-300)
        disc[pair] = float(abs(printed[pair] - J[pair]) / scale)
    printed = {k: float(v) for k, v in printed.items()}
    return CsiMeasures(z, J, G, printed, disc)


def oracle_csi(params: KtcsParams, z=None):
    single2 = {x: oracle_factorial_moment(params, x, 2, z) for x in MODES}
    joint11 = {pair: oracle_joint_moment(params, pair, 1, 1, z) for pair in PAIRS}
    return _csi_from(single2, joint11)


# ---------------------------------------------------------------------------
# crossover


def find_crossover(params: KtcsParams, mode: str, z_hi: float,
                   z_lo: float = 1e-3, tol: float = 1e-5) -> float:
    """First ``z`` in ``(z_lo, z_hi]`` where the Mandel parameter of ``mode`` changes sign.

    The bracket is located by scanning in factors of 1.2, then refined by
    bisection to ``|dz| < tol``.
    """
    f = lambda z: mandel(params, z)[mode]  # noqa: E731
    a, fa = z_lo, f(z_lo)
    b = a
    while b < z_hi:
        b = min(a * 1.2, z_hi)
        fb = f(b)
        if fa == 0:
            return a
        if np.sign(fb) != np.sign(fa):
            break
        a, fa = b, fb
    else:
        raise NoSignChange(f"M_{mode} keeps its sign on [{z_lo}, {z_hi}]")
    while b - a >= tol:
        mid = 0.5 * (a + b)
        fm = f(mid)
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)
