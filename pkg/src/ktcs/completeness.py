r"""Weight function, moment problem and over-completeness checks.

The resolution of unity over the states :math:`|\xi,p,q\rangle_{Kj}` needs a
radial weight :math:`\widetilde W(x)` whose power moments are the chain
weights :math:`\rho(n) = (n+p)!(n+q)!n!`.  One solution is

.. math::
    \widetilde W(x) = 2\int_0^\infty t^{-1+(p+q)/2} e^{-x/t}
    K_{q-p}(2\sqrt t)\, dt
    = \int_{-\infty}^{\infty} 4 u^{p+q} e^{-x/u^2} K_{q-p}(2u)\, dv,
    \qquad u = e^v ,

and the weight of a single sector is :math:`W_{Kj} = \widetilde W\,S_{Kj}/\pi`.
Both the inner integral and the moment integrals are taken with the
trapezoid rule on a logarithmic variable.  Their integrands decay doubly
exponentially at both ends, so halving the step until two estimates agree
converges geometrically.

The factor 2 in front comes from
:math:`\int_0^\infty \tau^{\nu-1} e^{-\tau-t/\tau} d\tau = 2 t^{\nu/2} K_\nu(2\sqrt t)`;
without it every moment would be :math:`\rho(n)/2`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DomainError, InvalidParameter, MomentMismatch, QuadratureNotConverged,
)
from .fock import KtcsParams, log_normalization, log_rho, log_series

__all__ = [
    "bessel_k", "weight_tilde", "weight", "MomentProblem", "MomentReport",
    "RadialRule", "radial_rule", "verify_moments", "KernelCheck",
    "reproducing_kernel_check", "resolution_of_unity", "CarlemanResult",
    "carleman_ratio", "carleman_test",
]

_EULER = 0.5772156649015329


# ---------------------------------------------------------------------------
# modified Bessel functions of the second kind, integer order


def _k01_series(x):
    """K_0 and K_1 from the ascending series; accurate for ``0 < x <= 2``."""
    y = 0.25 * x * x
    lx = np.log(0.5 * x)
    term0 = np.ones_like(x)       # y^k / (k!)^2
    term1 = np.ones_like(x)       # y^k / (k! (k+1)!)
    harm = 0.0                    # H_k
    i0 = np.zeros_like(x)
    s0 = np.zeros_like(x)
    i1 = np.zeros_like(x)
    s1 = np.zeros_like(x)
    for k in range(40):
        if k:
            term0 = term0 * y / (k * k)
            term1 = term1 * y / (k * (k + 1))
            harm += 1.0 / k
        i0 += term0
        s0 += term0 * harm
        i1 += term1
        # psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
        s1 += term1 * (2 * harm + 1.0 / (k + 1) - 2 * _EULER)
    k0 = -(lx + _EULER) * i0 + s0
    k1 = 1.0 / x + 0.5 * x * i1 * lx - 0.25 * x * s1
    return k0, k1


def _k01_cf2(x):
    """K_0 and K_1 from Steed's continued fraction; used for ``x > 2``."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 2000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < 1e-17 * np.abs(s)):
            break
    else:  # pragma: no cover - CF2 converges in < 100 terms for x > 2
        raise QuadratureNotConverged("continued fraction for K_0 did not converge")
    k0 = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = k0 * (x + 0.5 - a1 * h) / x
    return k0, k1


def bessel_k(order, x):
    """Modified Bessel function of the second kind ``K_n(x)`` for integer ``n``.

    Parameters
    ----------
    order : int
        Integer order; ``K_{-n} = K_n``.
    x : float or array_like
        Positive argument(s).

    Returns
    -------
    float or ndarray
        Same shape as ``x``.  Underflows to 0 beyond ``x ~ 700``.

    Notes
    -----
    ``K_0`` and ``K_1`` come from the ascending series for ``x <= 2`` and from
    Steed's continued fraction above; higher orders follow from the upward
    recurrence ``K_{n+1} = K_{n-1} + (2n/x) K_n``, which is stable for this
    function.
    """
    if int(order) != order:
        raise InvalidParameter(f"order must be an integer, got {order!r}")
    n = abs(int(order))
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("bessel_k needs x > 0")
    flat = np.atleast_1d(arr).ravel()
    k0 = np.empty_like(flat)
    k1 = np.empty_like(flat)
    small = flat <= 2.0
    if small.any():
        k0[small], k1[small] = _k01_series(flat[small])
    if (~small).any():
        k0[~small], k1[~small] = _k01_cf2(flat[~small])
    if n == 0:
        out = k0
    else:
        km, k = k0, k1
        with np.errstate(over="ignore"):
            for m in range(1, n):
                km, k = k, km + (2.0 * m / flat) * k
        out = k
    out = out.reshape(np.shape(arr))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# the radial weight


_V_HI = 6.5        # u = e^6.5 = 665: K(2u) has long underflowed
_STEP0 = 0.04


def _inner_grid(x_min: float, h: float):
    v_lo = min(-30.0, 0.5 * math.log(x_min) - 5.0)
    n = int(math.ceil((_V_HI - v_lo) / h))
    return _V_HI - h * np.arange(n + 1)[::-1]


def _weight_tilde_step(x, p, q, h):
    v = _inner_grid(float(x.min()), h)
    u = np.exp(v)
    with np.errstate(divide="ignore"):
        log_g = math.log(4.0 * h) + (p + q) * v + np.log(bessel_k(q - p, 2.0 * u))
    # log of 4 u^{p+q} K(2u) e^{-x/u^2} h for every (x, v)
    log_terms = log_g[None, :] - np.outer(x, np.exp(-2.0 * v))
    edge = np.maximum(log_terms[:, 0], log_terms[:, -1])
    return logsumexp(log_terms, axis=1), edge, len(v)


def _log_weight_tilde(x, p, q, rtol=1e-12, max_halvings=6):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(x > 0)):
        raise DomainError("weight_tilde needs x > 0")
    h = _STEP0
    prev, _, nodes = _weight_tilde_step(x, p, q, h)
    for _ in range(max_halvings):
        h /= 2
        cur, edge, nodes = _weight_tilde_step(x, p, q, h)
        if np.max(edge - cur) > math.log(1e-16):
            raise QuadratureNotConverged("inner integrand not negligible at the window edge")
        if np.max(np.abs(np.expm1(cur - prev))) < rtol:
            return cur, nodes
        prev = cur
    raise QuadratureNotConverged("weight_tilde: step halving did not reach tolerance")


def weight_tilde(x, p: int = 0, q: int = 0, rtol: float = 1e-12):
    """Radial weight ``W~(x; p, q)``; vectorized over ``x > 0``.

    Raises
    ------
    QuadratureNotConverged
        If step halving stalls above ``rtol``.
    """
    _check_charges(p, q)
    log_w, _ = _log_weight_tilde(x, p, q, rtol)
    out = np.exp(log_w)
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


def weight(params: KtcsParams, x):
    """Full sector weight ``W_{Kj}(x) = W~(x) / (pi N_{Kj}(x)^2)``."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    log_w, _ = _log_weight_tilde(x_arr, params.p, params.q)
    log_S = np.array([-2.0 * log_normalization(params, z=float(v)) for v in x_arr])
    out = np.exp(log_w + log_S) / math.pi
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


def _check_charges(p, q):
    if p < 0 or q < 0 or int(p) != p or int(q) != q:
        raise InvalidParameter(f"charges must be non-negative integers, got p={p}, q={q}")


# ---------------------------------------------------------------------------
# moment problem


@dataclass(frozen=True)
class RadialRule:
    """Nodes ``x`` and weights ``w`` with ``sum(w * x**n) ~ rho(n)`` for ``n <= n_max``.

    ``w`` already contains ``W~(x)``; ``inner_nodes`` is the size of the
    last inner grid.
    """

    x: np.ndarray
    w: np.ndarray
    n_max: int
    step: float
    inner_nodes: int

    def moment(self, n) -> np.ndarray:
        n = np.atleast_1d(np.asarray(n, dtype=float))
        return np.exp(logsumexp(np.log(self.w)[None, :] + np.outer(n, np.log(self.x)), axis=1))


def _s_window(p, q, n_max, x_lo):
    # x^{n+1} W~(x) ~ y^{3(n+1)+p+q} e^{-3y} with y = x^{1/3}
    peak = n_max + 1 + (p + q) / 3.0
    y_hi = peak + 9.0 * math.sqrt(peak + 1.0) + 20.0
    return math.log(x_lo), 3.0 * math.log(y_hi)


def radial_rule(p: int, q: int, n_max: int, nodes: Optional[int] = None,
                x_lo: float = 1e-19, rtol: float = 1e-10, max_halvings: int = 8) -> RadialRule:
    """Trapezoid rule in ``s = ln x`` for the moments of ``W~``.

    With ``nodes`` given the rule is built once on that many points.
    Otherwise the step is halved, starting from 0.4, until the moments
    ``0..n_max`` change by less than ``rtol``.
    """
    _check_charges(p, q)
    s_lo, s_hi = _s_window(p, q, n_max, x_lo)
    ns = np.arange(n_max + 1)

    def build(count):
        s = np.linspace(s_lo, s_hi, count)
        h = s[1] - s[0]
        x = np.exp(s)
        log_w, inner = _log_weight_tilde(x, p, q)
        w = np.exp(log_w + s) * h
        w[[0, -1]] *= 0.5
        return RadialRule(x, w, n_max, h, inner)

    if nodes is not None:
        return build(int(nodes))
    count = int((s_hi - s_lo) / 0.4) + 1
    rule = build(count)
    prev = rule.moment(ns)
    for _ in range(max_halvings):
        count = 2 * count - 1
        rule = build(count)
        cur = rule.moment(ns)
        if np.max(np.abs(cur / prev - 1.0)) < rtol:
            return rule
        prev = cur
    raise QuadratureNotConverged("moment quadrature did not converge")


@dataclass(frozen=True)
class MomentProblem:
    """Stieltjes problem ``int W~(x) x^n dx = (n+p)!(n+q)!n!`` for ``n <= n_max_check``."""

    p: int = 0
    q: int = 0
    n_max_check: int = 8
    tolerance: float = 1e-6

    def __post_init__(self):
        _check_charges(self.p, self.q)
        if not 0 <= self.n_max_check <= 10:
            raise InvalidParameter("n_max_check must lie in [0, 10]")
        if not self.tolerance > 0:
            raise InvalidParameter("tolerance must be positive")

    def log_moments(self, n=None) -> np.ndarray:
        n = np.arange(self.n_max_check + 1) if n is None else np.asarray(n)
        return log_rho(n, self.p, self.q)

    def is_log_convex(self) -> bool:
        lm = self.log_moments(np.arange(self.n_max_check + 3))
        return bool(np.all(np.diff(lm, 2) > 0))


@dataclass
class MomentReport:
    p: int
    q: int
    tolerance: float
    n: List[int]
    computed: List[float]
    exact: List[float]
    rel_error: List[float]
    outer_nodes: int
    inner_nodes: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q, "tolerance": self.tolerance,
            "moments": [
                {"n": n, "computed": c, "exact": e, "rel_error": r}
                for n, c, e, r in zip(self.n, self.computed, self.exact, self.rel_error)
            ],
            "max_rel_error": max(self.rel_error),
            "quadrature": {"outer_nodes": self.outer_nodes, "inner_nodes": self.inner_nodes},
            "passed": self.passed,
        }


def verify_moments(problem: MomentProblem, raise_on_fail: bool = True) -> MomentReport:
    """Integrate ``W~ x^n`` numerically and compare with ``rho(n)``.

    Raises
    ------
    MomentMismatch
        When some relative error exceeds ``problem.tolerance`` and
        ``raise_on_fail`` is set; the report is attached as ``.report``.
    """
    rule = radial_rule(problem.p, problem.q, problem.n_max_check)
    ns = np.arange(problem.n_max_check + 1)
    computed = rule.moment(ns)
    exact = np.exp(problem.log_moments(ns))
    rel = np.abs(computed / exact - 1.0)
    passed = bool(np.all(rel <= problem.tolerance))
    report = MomentReport(problem.p, problem.q, problem.tolerance, ns.tolist(),
                          computed.tolist(), exact.tolist(), rel.tolist(),
                          len(rule.x), rule.inner_nodes, passed)
    if not passed and raise_on_fail:
        err = MomentMismatch(f"moment error {rel.max():.3g} above {problem.tolerance:g}")
        err.report = report
        raise err
    return report


# ---------------------------------------------------------------------------
# reproducing kernel and resolution of unity


@dataclass(frozen=True)
class KernelCheck:
    """Outcome of reproducing a state from the weighted integral over its family."""

    residual: float           # max |reproduced - exact| on the residue class
    off_residue: float        # max |reproduced| off the residue class
    reproduced: np.ndarray
    exact: np.ndarray
    n_radial: int
    n_angular: int


def _angular_average(k, n_angular):
    """``(1/2pi) int e^{i k phi} d phi`` by the trapezoid rule (exactly 0 or 1 up to rounding)."""
    phi = 2 * np.pi * np.arange(n_angular) / n_angular
    return np.exp(1j * np.outer(np.atleast_1d(k), phi)).mean(axis=1)


def reproducing_kernel_check(params: KtcsParams, n_radial: int = 200, n_angular: int = 64,
                             n_max: Optional[int] = None) -> KernelCheck:
    r"""Rebuild ``|xi>_{Kj}`` from ``int d^2 xi' W_{Kj} <xi'|xi> |xi'>``.

    ``xi'`` runs over ``n_radial`` log-spaced radii (nodes of
    :func:`radial_rule`) times ``n_angular`` equispaced angles.  Amplitudes
    on chain indices ``0..n_max`` are compared with the exact ones.
    """
    from .fock import build_ktcs  # local import keeps module import light

    K, j, p, q = params.K, params.j, params.p, params.q
    exact_state = build_ktcs(params, n_max)
    n = np.arange(exact_state.n_max + 1)
    rule = radial_rule(p, q, int(n[-1]), nodes=n_radial)
    r = np.sqrt(rule.x)
    phi = 2 * np.pi * np.arange(n_angular) / n_angular
    log_N = log_normalization(params)
    # <xi'|xi> (N(xi')N(xi))^{-1} = S(conj(xi') xi); W N(xi')^2 = W~/pi
    w_arg = np.outer(r, np.exp(-1j * phi)) * params.xi
    log_S, arg_S = log_series(K, j, p, q, w_arg)
    kernel = np.exp(log_S + 1j * arg_S)                  # (radial, angular)
    fourier = np.exp(1j * np.outer(phi, n)) / n_angular  # angular average with e^{i n phi}
    ang = kernel @ fourier                               # (radial, n)
    # d^2 xi = r dr dphi = (1/2) dx dphi, and the angular average carries 2 pi
    radial = (rule.w[:, None] * np.exp(np.outer(0.5 * np.log(rule.x), n)) * ang).sum(axis=0)
    reproduced = np.exp(log_N - 0.5 * log_rho(n, p, q)) * radial
    on = (n % K) == j
    exact = exact_state.amplitudes
    return KernelCheck(float(np.max(np.abs(reproduced[on] - exact[on]))),
                       float(np.max(np.abs(reproduced[~on]), initial=0.0)),
                       reproduced, exact, len(rule.x), n_angular)


def resolution_of_unity(K: int, p: int, q: int, n_max: int = 6, n_radial: int = 200,
                        n_angular: int = 64) -> np.ndarray:
    """Matrix of ``sum_j int d^2 xi W_{Kj} |xi><xi|`` on chain indices ``0..n_max``.

    Only this finite principal block of the identity can be checked.
    """
    rule = radial_rule(p, q, n_max, nodes=n_radial)
    n = np.arange(n_max + 1)
    # sector projectors: n and n' contribute only when in the same class
    same = (n[:, None] % K) == (n[None, :] % K)
    ang = _angular_average((n[:, None] - n[None, :]).ravel(), n_angular).reshape(len(n), len(n))
    half = 0.5 * (n[:, None] + n[None, :])
    radial = np.exp(logsumexp(np.log(rule.w)[None, None, :]
                              + half[:, :, None] * np.log(rule.x)[None, None, :], axis=2))
    norm = np.exp(-0.5 * (log_rho(n, p, q)[:, None] + log_rho(n, p, q)[None, :]))
    return np.where(same, ang * radial * norm, 0.0)


# ---------------------------------------------------------------------------
# uniqueness test


class CarlemanResult(NamedTuple):
    estimate: float    # extrapolated T
    verdict: str       # "non-unique", "unique" or "inconclusive"
    raw: float         # ln S_n / ln n at n_probe


def carleman_ratio(K: int, j: int, p: int, q: int, n) -> np.ndarray:
    """``ln(S_n) / ln(n)`` with ``S_n = [(Kn+j+q)!(Kn+j+p)!(Kn+j)!]^{-1/(2n)}``."""
    n = np.asarray(n, dtype=float)
    log_S = -log_rho(K * n + j, p, q) / (2 * n)
    return log_S / np.log(n)


def carleman_test(K: int, j: int = 0, p: int = 0, q: int = 0,
                  n_probe: int = 10 ** 6) -> CarlemanResult:
    """Logarithmic test on the Carleman series of the moment sequence.

    ``ln S_n / ln n`` approaches its limit ``T`` only like ``1/ln n``, since
    ``ln S_n = T ln n + c + O(ln n / n)``.  The estimate is therefore the
    slope of ``ln S_n`` against ``ln n`` between ``sqrt(n_probe)`` and
    ``n_probe``, which removes the constant ``c``.
    """
    if K < 1 or not 0 <= j < K:
        raise InvalidParameter("need K >= 1 and 0 <= j < K")
    _check_charges(p, q)
    if n_probe < 10 ** 4:
        raise InvalidParameter("n_probe must be at least 1e4")
    n1 = float(n_probe)
    n0 = math.floor(math.sqrt(n1))
    f1, f0 = carleman_ratio(K, j, p, q, [n1, n0])
    T = (f1 * math.log(n1) - f0 * math.log(n0)) / (math.log(n1) - math.log(n0))
    if T < -1 - 1e-6:
        verdict = "non-unique"
    elif T > -1 + 1e-6:
        verdict = "unique"
    else:
        verdict = "inconclusive"
    return CarlemanResult(float(T), verdict, float(f1))
