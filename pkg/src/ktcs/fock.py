r"""K-dimensional trio coherent states on the correlated Fock chain.

A state with charges ``p`` and ``q`` lives on the chain

.. math::
    |n+q\rangle_a |n+p\rangle_b |n\rangle_c, \qquad n = 0, 1, 2, \dots

so a single complex vector indexed by the chain index ``n`` describes it.
The state :math:`|\xi,p,q\rangle_{Kj}` has amplitudes

.. math::
    c_n = N_{Kj}\,\frac{\xi^n}{\sqrt{\rho(n)}}, \qquad
    \rho(n) = (n+p)!\,(n+q)!\,n!

on the residue class ``n = j (mod K)`` and zero elsewhere.  The inverse
square of the normalization constant is the series
:math:`S(z) = \sum_m z^{Km+j}/\rho(Km+j)` with :math:`z = |\xi|^2`.

Factorial weights overflow a double near ``n = 57``, so every weight here is
handled as a logarithm and sums are taken after subtracting the largest term.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidParameter, NonNormalizable, TruncationTooSmall

__all__ = [
    "KtcsParams", "TrioState", "SeriesCache",
    "log_rho", "normalization_series", "normalization", "log_normalization",
    "derivative_ratios", "chain_log_weights", "log_series", "series_value",
    "build_ktcs", "build_tcs", "overlap", "overlap_closed_form",
    "auto_n_max",
]

#: relative size below which series terms are dropped
SERIES_REL_CUTOFF = 1e-18
#: default dropped-probability bound for automatic truncation
DEFAULT_TAIL = 1e-14


def log_rho(n, p, q):
    """Natural log of ``(n+p)! (n+q)! n!``; vectorized over ``n``."""
    n = np.asarray(n, dtype=float)
    out = gammaln(n + p + 1) + gammaln(n + q + 1) + gammaln(n + 1)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KtcsParams:
    """Labels of one state ``|xi, p, q>_{Kj}`` with ``xi = xi_mod * exp(i xi_arg)``."""

    xi_mod: float
    xi_arg: float = 0.0
    p: int = 0
    q: int = 0
    K: int = 1
    j: int = 0

    def __post_init__(self):
        for name in ("p", "q", "K", "j"):
            value = getattr(self, name)
            if int(value) != value:
                raise InvalidParameter(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.K < 1:
            raise InvalidParameter(f"K must be >= 1, got {self.K}")
        if not 0 <= self.j < self.K:
            raise InvalidParameter(f"j must satisfy 0 <= j < K={self.K}, got {self.j}")
        if self.p < 0 or self.q < 0:
            raise InvalidParameter(f"charges must be non-negative, got p={self.p}, q={self.q}")
        if not (self.xi_mod >= 0 and math.isfinite(self.xi_mod)):
            raise InvalidParameter(f"xi_mod must be finite and >= 0, got {self.xi_mod}")
        if not math.isfinite(self.xi_arg):
            raise InvalidParameter("xi_arg must be finite")
        object.__setattr__(self, "xi_mod", float(self.xi_mod))
        object.__setattr__(self, "xi_arg", float(self.xi_arg))

    @classmethod
    def from_xi(cls, xi, p=0, q=0, K=1, j=0):
        xi = complex(xi)
        return cls(abs(xi), cmath.phase(xi) if xi != 0 else 0.0, p, q, K, j)

    @property
    def xi(self) -> complex:
        return cmath.rect(self.xi_mod, self.xi_arg)

    @property
    def z(self) -> float:
        return self.xi_mod ** 2

    def replace(self, **changes) -> "KtcsParams":
        if "xi" in changes:
            xi = complex(changes.pop("xi"))
            changes["xi_mod"] = abs(xi)
            changes["xi_arg"] = cmath.phase(xi) if xi != 0 else 0.0
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SeriesCache:
    """``S(z) = N^-2`` and its first two derivatives at one ``z``."""

    z: float
    S: float
    dS: float
    d2S: float
    terms_used: int
    log_S: float

    @property
    def N(self) -> float:
        if self.S <= 0:
            raise NonNormalizable(f"S({self.z}) = 0; the state cannot be normalized")
        return math.exp(-0.5 * self.log_S)


# ---------------------------------------------------------------------------
# series machinery


def _log_z(z: float) -> float:
    if z < 0:
        raise InvalidParameter(f"z must be >= 0, got {z}")
    return math.log(z) if z > 0 else -math.inf


def _initial_terms(K: int, log_z: float) -> int:
    # the summand peaks near n = z**(1/3); go well past it
    peak = math.exp(log_z / 3.0) if log_z > -math.inf else 0.0
    return max(8, int((3.0 * peak + 40.0) / K) + 1)


def chain_log_weights(K, j, p, q, z, rel_cutoff=SERIES_REL_CUTOFF, n_min_max=0):
    """Chain indices ``n = j + K m`` and ``log(z**n / rho(n))``.

    Terms are generated until they are decreasing and smaller than
    ``rel_cutoff`` times the largest one, and at least up to ``n_min_max``.
    For ``z == 0`` only the ``n = 0`` term survives, and only when ``j == 0``.
    """
    log_z = _log_z(z)
    if log_z == -math.inf:
        if j == 0:
            n = np.arange(0, max(n_min_max, 0) + 1, K)
            logt = np.full(n.shape, -np.inf)
            logt[0] = 0.0
            return n, logt
        n = np.arange(j, max(n_min_max, j) + 1, K)
        return n, np.full(n.shape, -np.inf)
    drop = math.log(rel_cutoff)
    count = max(_initial_terms(K, log_z), (n_min_max - j) // K + 2)
    while True:
        n = j + K * np.arange(count)
        logt = n * log_z - log_rho(n, p, q)
        if logt[-1] < logt[-2] and logt[-1] - logt.max() < drop:
            break
        count *= 2
    # trim terms beyond the cutoff but keep n_min_max covered
    keep = np.nonzero(logt - logt.max() >= drop)[0][-1] + 2
    keep = max(keep, (n_min_max - j) // K + 1 if n_min_max >= j else 1)
    return n[:keep], logt[:keep]


def _log_falling(n, d):
    """log of the falling factorial n (n-1) ... (n-d+1); -inf where it vanishes."""
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(n >= d, gammaln(n + 1) - gammaln(np.maximum(n - d, 0) + 1), -np.inf)
    return out


def _log_derivative_sums(K, j, p, q, z, order):
    """``log S^{(d)}(z)`` for ``d = 0..order`` by term-wise differentiation."""
    if z == 0:
        out = np.full(order + 1, -np.inf)
        for d in range(order + 1):
            if d % K == j:
                out[d] = math.lgamma(d + 1) - log_rho(d, p, q)
        return out, 1
    n, logt = chain_log_weights(K, j, p, q, z)
    log_z = math.log(z)
    out = np.empty(order + 1)
    for d in range(order + 1):
        out[d] = logsumexp(_log_falling(n, d) + logt - d * log_z)
    return out, len(n)


def normalization_series(params: KtcsParams, z: Optional[float] = None) -> SeriesCache:
    """Evaluate ``S``, ``dS/dz`` and ``d2S/dz2``.

    Parameters
    ----------
    params : KtcsParams
        Only ``K, j, p, q`` are used.
    z : float, optional
        Argument of the series; defaults to ``params.z``.

    Returns
    -------
    SeriesCache
        ``S`` itself is returned even when it vanishes (``z = 0``, ``j > 0``);
        asking that cache for ``N`` raises :class:`NonNormalizable`.
    """
    z = params.z if z is None else float(z)
    logs, used = _log_derivative_sums(params.K, params.j, params.p, params.q, z, 2)
    S, dS, d2S = (math.exp(v) if v > -math.inf else 0.0 for v in logs)
    return SeriesCache(z=z, S=S, dS=dS, d2S=d2S, terms_used=used, log_S=float(logs[0]))


def log_normalization(params: KtcsParams, z: Optional[float] = None) -> float:
    """``log N_{Kj}`` at ``z`` (default ``|xi|^2``)."""
    z = params.z if z is None else float(z)
    n, logt = chain_log_weights(params.K, params.j, params.p, params.q, z)
    log_S = logsumexp(logt)
    if log_S == -math.inf:
        raise NonNormalizable(f"S(z={z}) vanishes for j={params.j}; no normalizable state")
    return -0.5 * float(log_S)


def normalization(params: KtcsParams, z: Optional[float] = None) -> float:
    return math.exp(log_normalization(params, z))


def derivative_ratios(params: KtcsParams, z: Optional[float], order: int) -> np.ndarray:
    r"""Scaled derivatives :math:`R_d = z^d S^{(d)}(z) / S(z)` for ``d = 0..order``.

    These are the building blocks of every moment formula; ``R_d`` equals the
    ``d``-th factorial moment of mode ``c``.
    """
    z = params.z if z is None else float(z)
    logs, _ = _log_derivative_sums(params.K, params.j, params.p, params.q, z, order)
    if logs[0] == -math.inf:
        raise NonNormalizable(f"S(z={z}) vanishes for j={params.j}")
    if z == 0:
        out = np.zeros(order + 1)
        out[0] = 1.0
        return out
    d = np.arange(order + 1)
    return np.exp(logs - logs[0] + d * math.log(z))


def log_series(K, j, p, q, w, rel_cutoff=SERIES_REL_CUTOFF):
    r"""Complex-argument series :math:`S(w) = \sum_m w^{Km+j}/\rho(Km+j)`.

    Returns ``(log|S(w)|, arg S(w))``, vectorized over ``w``.  Magnitudes and
    phases of the summands are tracked separately so that ``|w|`` in the
    thousands stays finite.
    """
    w = np.asarray(w, dtype=complex)
    shape = w.shape
    w = w.ravel()
    r = np.abs(w)
    rmax = float(r.max()) if r.size else 0.0
    n, _ = chain_log_weights(K, j, p, q, max(rmax, 1e-300), rel_cutoff)
    lr = log_rho(n, p, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(r)
        logt = np.where(n[None, :] == 0, 0.0, n[None, :] * logr[:, None]) - lr[None, :]
    top = logt.max(axis=1)
    safe_top = np.where(np.isfinite(top), top, 0.0)
    terms = np.exp(logt - safe_top[:, None]) * np.exp(1j * n[None, :] * np.angle(w)[:, None])
    s = terms.sum(axis=1)
    with np.errstate(divide="ignore"):
        log_abs = np.where(np.isfinite(top), safe_top + np.log(np.abs(s)), -np.inf)
    return log_abs.reshape(shape), np.angle(s).reshape(shape)


def series_value(K, j, p, q, w) -> complex:
    """``S(w)`` as an ordinary complex number (may overflow for huge ``|w|``)."""
    la, ph = log_series(K, j, p, q, w)
    if np.ndim(la) == 0:
        return 0j if la == -np.inf else cmath.rect(math.exp(float(la)), float(ph))
    return np.where(np.isfinite(la), np.exp(la) * np.exp(1j * ph), 0)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class TrioState:
    """Amplitudes ``c_n`` of ``sum_n c_n |n+q, n+p, n>`` for ``n = 0..n_max``."""

    amplitudes: np.ndarray
    p: int
    q: int
    params: Optional[KtcsParams] = None

    @property
    def n_max(self) -> int:
        return len(self.amplitudes) - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def padded(self, n_max: int) -> np.ndarray:
        out = np.zeros(n_max + 1, dtype=complex)
        k = min(n_max, self.n_max) + 1
        out[:k] = self.amplitudes[:k]
        return out

    def apply_abc(self, power: int = 1) -> "TrioState":
        """Apply ``(a b c)**power``; each power lowers the chain index by one."""
        amp = self.amplitudes
        out = np.zeros_like(amp)
        if power == 0:
            return dataclasses.replace(self, amplitudes=amp.copy(), params=None)
        n = np.arange(power, len(amp))
        factor = np.ones(len(n))
        for i in range(power):
            m = (n - i).astype(float)
            factor *= (m + self.q) * (m + self.p) * m
        out[: len(n)] = amp[power:] * np.sqrt(factor)
        return TrioState(out, self.p, self.q)

    def charge_values(self):
        """``(<P>, <Q>)`` computed from the mode occupations of the chain."""
        prob = self.probabilities()
        total = prob.sum()
        n = np.arange(len(prob))
        na, nb, nc = (prob @ (n + self.q), prob @ (n + self.p), prob @ n)
        return (nb - nc) / total, (na - nc) / total

    def to_dense(self, box: int) -> np.ndarray:
        """Embed into a dense ``(box, box, box)`` three-mode amplitude array."""
        psi = np.zeros((box, box, box), dtype=complex)
        for n, c in enumerate(self.amplitudes):
            if n + max(self.p, self.q) < box:
                psi[n + self.q, n + self.p, n] = c
            elif c != 0:
                raise TruncationTooSmall(f"box={box} cannot hold chain index {n}")
        return psi


def auto_n_max(params: KtcsParams, tail: float = DEFAULT_TAIL) -> int:
    """Smallest chain index whose dropped probability is below ``tail``."""
    n, logt = chain_log_weights(params.K, params.j, params.p, params.q, params.z,
                                min(SERIES_REL_CUTOFF, tail * 1e-4))
    return _auto_cut(n, logt - logsumexp(logt), tail)


def _auto_cut(n, logP, tail):
    P = np.exp(logP)
    # probability strictly beyond each index
    beyond = np.concatenate([np.cumsum(P[::-1])[::-1][1:], [0.0]])
    k = int(np.argmax(beyond < tail))
    return int(n[k])


def build_ktcs(params: KtcsParams, n_max: Optional[int] = None,
               tail: float = DEFAULT_TAIL) -> TrioState:
    """Fock amplitudes of ``|xi, p, q>_{Kj}`` on chain indices ``0..n_max``.

    With ``n_max=None`` the cut is the smallest index leaving a dropped
    probability below ``tail``.  An explicit ``n_max`` dropping more than
    ``1e-8`` raises :class:`TruncationTooSmall`.

    Magnitudes are produced by multiplying exact ratios
    ``|c_{n+K}/c_n| = r^K / sqrt(rho(n+K)/rho(n))`` outward from the largest
    amplitude, so neighbouring components agree with the recursion to a few
    ulps; this keeps ``(abc)^K c = xi^K c`` tight even for large ``|xi|^K``.
    """
    K, j, p, q = params.K, params.j, params.p, params.q
    z = params.z
    if z == 0:
        if j > 0:
            raise NonNormalizable("xi = 0 admits a normalized state only for j = 0")
        amp = np.zeros((n_max or 0) + 1, dtype=complex)
        amp[0] = 1.0
        return TrioState(amp, p, q, params)

    cutoff = min(SERIES_REL_CUTOFF, tail * 1e-4)
    n, logt = chain_log_weights(K, j, p, q, z, cutoff, n_min_max=n_max or 0)
    logP = logt - logsumexp(logt)
    if n_max is None:
        n_max = _auto_cut(n, logP, tail)
    else:
        dropped = float(np.exp(logP[n > n_max]).sum()) if np.any(n > n_max) else 0.0
        if dropped > 1e-8:
            raise TruncationTooSmall(
                f"n_max={n_max} drops probability {dropped:.3g} > 1e-8")
    sel = n <= n_max
    n, logP = n[sel], logP[sel]

    peak = int(np.argmax(logP))
    r_K = params.xi_mod ** K
    step = np.ones(len(n) - 1)
    for i in range(1, K + 1):
        m = n[:-1].astype(float) + i
        step *= (m + p) * (m + q) * m
    ratio = r_K / np.sqrt(step)
    mags = np.empty(len(n))
    mags[peak] = math.exp(0.5 * logP[peak])
    if peak + 1 < len(n):
        mags[peak + 1:] = mags[peak] * np.cumprod(ratio[peak:])
    if peak > 0:
        mags[:peak] = (mags[peak] / np.cumprod(ratio[:peak][::-1]))[::-1]

    amp = np.zeros(n_max + 1, dtype=complex)
    amp[n] = mags * np.exp(1j * params.xi_arg * n)
    return TrioState(amp, p, q, params)


def build_tcs(xi, p=0, q=0, n_max=None, tail=DEFAULT_TAIL) -> TrioState:
    """Trio coherent state, the ``K = 1`` member of the family."""
    return build_ktcs(KtcsParams.from_xi(xi, p, q, 1, 0), n_max, tail)


def overlap(a: TrioState, b: TrioState) -> complex:
    """``<a|b>`` by direct amplitude summation over the shared chain."""
    if a.p != b.p or a.q != b.q:
        return 0j
    n_max = max(a.n_max, b.n_max)
    return complex(np.vdot(a.padded(n_max), b.padded(n_max)))


def overlap_closed_form(bra: KtcsParams, ket: KtcsParams) -> complex:
    """``<bra|ket>`` from the normalization series alone.

    For matching ``(K, j, p, q)`` this is
    ``N(|xi'|^2) N(|xi|^2) S(conj(xi') xi)``; otherwise zero.
    """
    if (bra.K, bra.j, bra.p, bra.q) != (ket.K, ket.j, ket.p, ket.q):
        return 0j
    la, ph = log_series(ket.K, ket.j, ket.p, ket.q, bra.xi.conjugate() * ket.xi)
    if la == -np.inf:
        return 0j
    mag = log_normalization(bra) + log_normalization(ket) + float(la)
    return cmath.rect(math.exp(mag), float(ph))
