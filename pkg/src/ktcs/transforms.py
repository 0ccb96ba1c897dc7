"""Changes of basis among trio coherent states.

All routines here return either a :class:`~ktcs.fock.TrioState` or a list
of ``(coefficient, KtcsParams)`` terms that can be summed back into one with
:func:`superpose`.  Reconstructions are always compared against
:func:`~ktcs.fock.build_ktcs` in the tests, never only against each other.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConstraintViolated, IndexOutOfRange, InvalidParameter
from .fock import (
    DEFAULT_TAIL, KtcsParams, TrioState, auto_n_max, build_ktcs, log_normalization,
)

__all__ = [
    "bracket_mod", "rotate_index", "TcsSuperposition", "ktcs_to_tcs", "tcs_to_ktcs",
    "phase_identity_residual", "CrossDimension", "cross_dimension", "superpose",
    "coherent_integral_reconstruct", "coherent_integral_leakage",
]


def bracket_mod(x: int, K: int) -> int:
    """``[x]_K``: ``x`` if ``x >= 0`` else ``x + K`` (inputs satisfy ``|x| < K``)."""
    return x if x >= 0 else x + K


def _ratio_N(params: KtcsParams, l: int, m: int) -> float:
    """``N_{Kl} / N_{Km}`` at ``z = |xi|^2``."""
    return math.exp(log_normalization(params.replace(j=l)) - log_normalization(params.replace(j=m)))


def superpose(terms: Sequence[Tuple[complex, KtcsParams]], n_max: int) -> TrioState:
    """Sum ``coefficient * |params>`` over ``terms`` on chain indices ``0..n_max``."""
    p, q = terms[0][1].p, terms[0][1].q
    amp = np.zeros(n_max + 1, dtype=complex)
    for coeff, params in terms:
        if coeff == 0:
            continue
        amp += coeff * build_ktcs(params, n_max).amplitudes
    return TrioState(amp, p, q)


def _common_n_max(params_list, tail=DEFAULT_TAIL):
    return max(auto_n_max(p, tail) for p in params_list)


# ---------------------------------------------------------------------------


def rotate_index(state: TrioState, l: int) -> TrioState:
    """Map ``|xi,p,q>_{Km}`` to ``|xi,p,q>_{Kl}`` with the rotation operator.

    ``state.params`` must identify the source state.  The operator is
    ``(N_{Kl}/N_{Km}) xi^{-d} (abc)^d`` with ``d = [m - l]_K``.
    """
    params = state.params
    if params is None:
        raise InvalidParameter("rotate_index needs a state built by build_ktcs")
    K, m = params.K, params.j
    if not (0 <= l < K):
        raise IndexOutOfRange(f"target index l={l} outside [0, {K - 1}]")
    d = bracket_mod(m - l, K)
    if d == 0:
        return state
    if params.xi_mod == 0:
        raise InvalidParameter("rotation is undefined at xi = 0")
    lowered = state.apply_abc(d)
    factor = _ratio_N(params, l, m) * params.xi ** (-d)
    return TrioState(factor * lowered.amplitudes, state.p, state.q, params.replace(j=l))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TcsSuperposition:
    """``sum_k coefficients[k] * TCS(phases[k], p, q)``."""

    coefficients: np.ndarray
    phases: np.ndarray
    p: int
    q: int

    def terms(self) -> List[Tuple[complex, KtcsParams]]:
        return [(complex(c), KtcsParams.from_xi(x, self.p, self.q, 1, 0))
                for c, x in zip(self.coefficients, self.phases)]

    def to_state(self, n_max: Optional[int] = None, tail: float = DEFAULT_TAIL) -> TrioState:
        terms = self.terms()
        if n_max is None:
            n_max = _common_n_max([t[1] for t in terms], tail)
        return superpose(terms, n_max)


def ktcs_to_tcs(params: KtcsParams) -> TcsSuperposition:
    """Write ``|xi,p,q>_{Kj}`` as ``K`` trio coherent states on a circle of radius ``|xi|``."""
    K, j = params.K, params.j
    jp = np.arange(K)
    scale = math.exp(log_normalization(params) - log_normalization(params.replace(K=1, j=0))) / K
    coeffs = scale * np.exp(-2j * np.pi * j * jp / K)
    phases = params.xi * np.exp(2j * np.pi * jp / K)
    return TcsSuperposition(coeffs, phases, params.p, params.q)


def tcs_to_ktcs(xi, p: int, q: int, K: int) -> List[Tuple[complex, KtcsParams]]:
    """Write ``TCS(xi)`` as ``sum_j N/N_{Kj} |xi,p,q>_{Kj}``."""
    tcs = KtcsParams.from_xi(xi, p, q, 1, 0)
    log_N = log_normalization(tcs)
    out = []
    for j in range(K):
        params = KtcsParams.from_xi(xi, p, q, K, j)
        out.append((math.exp(log_N - log_normalization(params)), params))
    return out


def phase_identity_residual(chi, p: int, q: int, K: int, j: int, jprime: int,
                            tail: float = DEFAULT_TAIL) -> float:
    """Largest amplitude gap between ``|chi e^{-2 pi i j/K}>_{Kj'}`` and ``e^{-2 pi i j j'/K} |chi>_{Kj'}``."""
    rotated = KtcsParams.from_xi(chi * cmath.exp(-2j * math.pi * j / K), p, q, K, jprime)
    plain = KtcsParams.from_xi(chi, p, q, K, jprime)
    n_max = _common_n_max([rotated, plain], tail)
    lhs = build_ktcs(rotated, n_max)
    rhs = cmath.exp(-2j * math.pi * j * jprime / K) * build_ktcs(plain, n_max).amplitudes
    return float(np.max(np.abs(lhs.amplitudes - rhs)))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossDimension:
    """``|xi>_{Kj} = sum_{j', j''} coefficients[j', j''] |xi_{K j''}>_{K' j'}``."""

    coefficients: np.ndarray  # shape (K', K)
    source: KtcsParams
    target_K: int

    def component(self, jprime: int, jpp: int) -> KtcsParams:
        s = self.source
        xi = s.xi * cmath.exp(2j * math.pi * jpp / s.K)
        return KtcsParams.from_xi(xi, s.p, s.q, self.target_K, jprime)

    def terms(self):
        Kp, K = self.coefficients.shape
        return [(complex(self.coefficients[a, b]), self.component(a, b))
                for a in range(Kp) for b in range(K)]

    def to_state(self, n_max: Optional[int] = None, tail: float = DEFAULT_TAIL) -> TrioState:
        terms = self.terms()
        if n_max is None:
            n_max = _common_n_max([t[1] for t in terms] + [self.source], tail)
        return superpose(terms, n_max)


def cross_dimension(params: KtcsParams, target_K: int) -> CrossDimension:
    """Expand a KTCS of dimension ``K`` over K'TCS's, ``K' = target_K``.

    Every normalization constant is evaluated at ``z = |xi|^2``.
    """
    if target_K < 1:
        raise InvalidParameter("target_K must be >= 1")
    K, j = params.K, params.j
    log_NKj = log_normalization(params)
    jp = np.arange(target_K)
    jpp = np.arange(K)
    inv_N = np.array([math.exp(log_NKj - log_normalization(params.replace(K=target_K, j=int(a))))
                      for a in jp])
    phase = np.exp(-2j * np.pi * j * jpp / K)
    coeffs = inv_N[:, None] * phase[None, :] / K
    return CrossDimension(coeffs, params, target_K)


# ---------------------------------------------------------------------------
# coherent-state integral


def _check_triple(params, alpha, beta, gamma):
    if alpha == 0 or beta == 0 or gamma == 0:
        raise ConstraintViolated("alpha, beta and gamma must all be non-zero")
    if abs(alpha * beta * gamma - params.xi) >= 1e-12 * max(1.0, abs(params.xi)):
        raise ConstraintViolated(
            f"alpha*beta*gamma = {alpha * beta * gamma} differs from xi = {params.xi}")


def _mode_coeffs(amp: complex, n: np.ndarray) -> np.ndarray:
    """``amp**n / sqrt(n!)`` without the Gaussian factor."""
    with np.errstate(divide="ignore"):
        log_mag = n * math.log(abs(amp)) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    return np.exp(log_mag) * np.exp(1j * cmath.phase(amp) * n)


def _angular_weights(k: np.ndarray, nodes: int) -> np.ndarray:
    """Trapezoid approximation of ``(1/2pi) int exp(i k theta) dtheta`` on ``nodes`` points."""
    theta = 2 * np.pi * np.arange(nodes) / nodes
    return np.exp(1j * np.outer(k, theta)).mean(axis=1)


def _coherent_integral_tensor(params, alpha, beta, gamma, quadrature_n, box):
    """Reconstructed amplitudes on the box ``n_a, n_b, n_c < box``."""
    _check_triple(params, alpha, beta, gamma)
    K, j, p, q = params.K, params.j, params.p, params.q
    n = np.arange(box)
    ka = np.arange(-(box - 1), box)  # n_a - n_c ranges
    Dt = _angular_weights(ka - q, quadrature_n)
    Dtp = _angular_weights(ka - p, quadrature_n)
    off = box - 1
    na, nb, nc = np.meshgrid(n, n, n, indexing="ij")
    # phase selection from the two angular integrals
    sel = Dt[na - nc + off] * Dtp[nb - nc + off]
    total = np.zeros((box, box, box), dtype=complex)
    for jp in range(K):
        rot = cmath.exp(2j * math.pi * jp / (3 * K))
        a, b, g = alpha * rot, beta * rot, gamma * rot
        ca, cb, cg = _mode_coeffs(a, n), _mode_coeffs(b, n), _mode_coeffs(g, n)
        prod = ca[:, None, None] * cb[None, :, None] * cg[None, None, :]
        weight = cmath.exp(-2j * math.pi * j * jp / K) / (a ** q * b ** p)
        total += weight * prod
    # the exp(+|.|^2/2) prefactor cancels the coherent-state Gaussians exactly
    N = math.exp(log_normalization(params))
    return (N / K) * total * sel


def coherent_integral_reconstruct(params: KtcsParams, alpha, beta, gamma,
                                  quadrature_n: int = 128,
                                  n_max: Optional[int] = None) -> TrioState:
    """Rebuild ``|xi,p,q>_{Kj}`` from three phase-correlated coherent states.

    The two angular integrals are done by the uniform trapezoid rule with
    ``quadrature_n`` nodes each.  The ``j'``-th summand uses amplitudes
    ``alpha e^{2 pi i j'/(3K)}`` (same for ``beta``, ``gamma``) so that their
    product is ``xi e^{2 pi i j'/K}``.  Chain amplitudes are returned; see
    :func:`coherent_integral_leakage` for the weight left off the chain.
    """
    alpha, beta, gamma = complex(alpha), complex(beta), complex(gamma)
    n_max = auto_n_max(params) if n_max is None else n_max
    box = n_max + max(params.p, params.q) + 1
    tensor = _coherent_integral_tensor(params, alpha, beta, gamma, quadrature_n, box)
    n = np.arange(n_max + 1)
    amp = tensor[n + params.q, n + params.p, n]
    return TrioState(amp, params.p, params.q)


def coherent_integral_leakage(params: KtcsParams, alpha, beta, gamma,
                              quadrature_n: int, box: int) -> float:
    """Norm of the reconstructed vector off the correlated chain (aliasing error)."""
    tensor = _coherent_integral_tensor(params, complex(alpha), complex(beta), complex(gamma),
                                       quadrature_n, box)
    n = np.arange(box)
    na, nb, nc = np.meshgrid(n, n, n, indexing="ij")
    off_chain = (na - nc != params.q) | (nb - nc != params.p)
    return float(np.linalg.norm(tensor[off_chain]))
