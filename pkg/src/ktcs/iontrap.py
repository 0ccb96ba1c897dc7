r"""Trapped-ion preparation of two-dimensional trio coherent states.

Fourteen lasers drive a single ion in a three-dimensional trap.  In the
Lamb-Dicke limit the interaction reduces to

.. math::
    H = \zeta\,[(abc)^2 - \xi^2]\,\sigma_+ + \mathrm{h.c.},

and with spontaneous decay at rate :math:`\Gamma` the ion ends up in the
dark state :math:`|g\rangle \otimes |\Psi\rangle` with
:math:`(abc)^2 |\Psi\rangle = \xi^2 |\Psi\rangle`.

Both ``H`` and the decay conserve the two charges and the parity of the
chain index, so all dynamics happen on the basis ``|s, j, m>``: electronic
level ``s`` (0 = g, 1 = e), parity ``j`` and chain index ``n = 2m + j``.
Basis index is ``s * 2M + j * M + m`` with ``M = m_max + 1``.  Time is in
units of ``1/Gamma`` throughout.

The initial state is ``|e> (sqrt(1-w) |Psi_{l0}> + sqrt(w) |Psi_{l1}>)``,
so ``w = 0`` prepares the even state and ``w = 1`` the odd one.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import reduce
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import expm

from .errors import InvalidParameter, StepTooLarge
from .fock import KtcsParams, auto_n_max, build_ktcs, log_rho

__all__ = [
    "LaserConfig", "LambDickeWarning", "xi_from_lasers", "laser_operators",
    "verify_laser_identity", "lamb_dicke_operator", "SimConfig", "ChainDensity",
    "chain_index", "lowering_squared", "build_hamiltonian", "initial_state",
    "target_vector", "phonon_distribution", "fidelity", "dark_state_residual",
    "DensityRun", "evolve_density", "liouvillian_apply", "McwfRun", "mcwf_run",
]

GROUND, EXCITED = 0, 1


class LambDickeWarning(UserWarning):
    """Lamb-Dicke parameter too large for the lowest-order reduction."""


# ---------------------------------------------------------------------------
# laser geometry


#: Rabi-frequency multiples of Omega for lasers 1..13 and the sign of exp(-i phi_l)
_RABI = np.array([1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 4, 4, 4], dtype=float)
_PHASE_SHIFT = np.array([math.pi] * 4 + [0.0] * 6 + [math.pi] * 3)
#: direction (coefficients of a, b, c) of each A_l
_DIRECTIONS = np.array([
    (1, 1, 1), (1, -1, 1), (1, 1, -1), (1, -1, -1),
    (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1),
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
], dtype=float)


@dataclass(frozen=True)
class LaserConfig:
    """Base Rabi frequency ``omega``, carrier laser ``omega14``, Lamb-Dicke ``eta``, phase ``phi``."""

    omega: float
    omega14: float
    eta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (self.omega > 0 and self.omega14 > 0):
            raise InvalidParameter("omega and omega14 must be positive")
        if not self.eta > 0:
            raise InvalidParameter("eta must be positive")
        if self.eta > 0.3:
            warnings.warn(f"eta = {self.eta} is not small; the lowest-order sideband "
                          "reduction is unreliable", LambDickeWarning, stacklevel=3)

    def rabi_frequencies(self) -> np.ndarray:
        """``Omega_1..Omega_14``."""
        return np.append(self.omega * _RABI, self.omega14)

    def phases(self) -> np.ndarray:
        """``phi_1..phi_14``."""
        return np.append(self.phi + _PHASE_SHIFT, math.pi)


def xi_from_lasers(cfg: LaserConfig) -> Tuple[complex, complex]:
    """Coupling ``zeta`` and eigenvalue ``xi**2`` produced by a laser setting."""
    scale = cfg.omega * cfg.eta ** 6
    zeta = 0.5 * scale * np.exp(-1j * cfg.phi)
    xi2 = 2.0 * cfg.omega14 / scale * np.exp(1j * cfg.phi)
    return complex(zeta), complex(xi2)


def _ladder(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


def _mode_operators(n_max: int):
    low = _ladder(n_max)
    eye = np.eye(n_max + 1)
    a = reduce(np.kron, [low, eye, eye])
    b = reduce(np.kron, [eye, low, eye])
    c = reduce(np.kron, [eye, eye, low])
    return a, b, c


def laser_operators(n_max: int) -> List[np.ndarray]:
    """Dense ``A_1..A_13`` on the box ``n_a, n_b, n_c <= n_max``."""
    a, b, c = _mode_operators(n_max)
    return [da * a + db * b + dc * c for da, db, dc in _DIRECTIONS]


def _identity_sides(n_max: int):
    A = laser_operators(n_max)
    weights = np.array([1] * 4 + [-2] * 6 + [4] * 3, dtype=float)
    lhs = sum(w * np.linalg.matrix_power(op, 6) for w, op in zip(weights, A))
    a, b, c = _mode_operators(n_max)
    abc = a @ b @ c
    return lhs, 360.0 * abc @ abc


def verify_laser_identity(n_max: int = 6, trials: int = 20, seed: int = 0) -> float:
    """Relative residual of ``sum A_l^6 - 2 sum A_m^6 + 4 sum A_n^6 = 360 (abc)^2``.

    Both sides are applied to ``trials`` random unit vectors; the largest
    difference is divided by the spectral norm of the right-hand side.
    Truncated ladder matrices on different modes still commute, so the
    polynomial identity holds exactly in the box.
    """
    if not 0 <= n_max <= 8:
        raise InvalidParameter("n_max must lie in [0, 8]")
    lhs, rhs = _identity_sides(n_max)
    rng = np.random.default_rng(seed)
    dim = lhs.shape[0]
    v = rng.normal(size=(dim, trials)) + 1j * rng.normal(size=(dim, trials))
    v /= np.linalg.norm(v, axis=0)
    diff = np.linalg.norm(lhs @ v - rhs @ v, axis=0).max()
    scale = max(np.linalg.norm(rhs, 2), 1.0)
    return float(diff / scale)


def lamb_dicke_operator(cfg: LaserConfig, n_max: int) -> np.ndarray:
    """Coefficient of ``sigma_+`` in the lowest-order interaction, as a dense matrix."""
    A = laser_operators(n_max)
    rabi, phase = cfg.rabi_frequencies(), cfg.phases()
    dim = A[0].shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for k, op in enumerate(A):
        out -= cfg.eta ** 6 / math.factorial(6) * rabi[k] * np.exp(-1j * phase[k]) \
            * np.linalg.matrix_power(op, 6)
    out += rabi[13] * np.exp(-1j * phase[13]) * np.eye(dim)
    return out


# ---------------------------------------------------------------------------
# simulation settings


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one preparation run (time unit ``1/gamma``).

    ``m_max=None`` picks the smallest truncation whose target tail is below
    ``1e-12``, plus five guard levels.  ``record_every`` sets the spacing of
    the output checkpoints.
    """

    xi: complex
    zeta: complex
    gamma: float = 1.0
    p: int = 0
    q: int = 0
    w: float = 0.0
    l: int = 0
    m_max: Optional[int] = None
    dt: float = 0.01
    t_max: float = 200.0
    n_traj: int = 1000
    seed: int = 0
    record_every: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "xi", complex(self.xi))
        object.__setattr__(self, "zeta", complex(self.zeta))
        for name in ("p", "q", "l", "n_traj", "seed"):
            value = getattr(self, name)
            if int(value) != value:
                raise InvalidParameter(f"{name} must be an integer")
            object.__setattr__(self, name, int(value))
        if self.p < 0 or self.q < 0 or self.l < 0:
            raise InvalidParameter("p, q and l must be non-negative")
        if not 0.0 <= self.w <= 1.0:
            raise InvalidParameter(f"w must lie in [0, 1], got {self.w}")
        if not self.gamma > 0:
            raise InvalidParameter("gamma must be positive")
        if self.xi == 0:
            raise InvalidParameter("xi must be non-zero")
        if self.n_traj < 1:
            raise InvalidParameter("n_traj must be >= 1")
        if not (self.dt > 0 and self.t_max >= 0 and self.record_every > 0):
            raise InvalidParameter("dt and record_every must be positive, t_max >= 0")
        if self.dt * self.gamma > 0.05:
            raise StepTooLarge(f"dt * gamma = {self.dt * self.gamma} exceeds 0.05")
        if self.m_max is None:
            object.__setattr__(self, "m_max", self.auto_m_max())
        elif 2 * self.l + 1 >= 2 * (self.m_max + 1):
            raise InvalidParameter("initial index l lies outside the truncation")

    @property
    def M(self) -> int:
        return self.m_max + 1

    @property
    def dim(self) -> int:
        return 4 * self.M

    def target(self, j: int) -> KtcsParams:
        return KtcsParams.from_xi(self.xi, self.p, self.q, 2, j)

    def auto_m_max(self) -> int:
        n_top = max(auto_n_max(self.target(j), tail=1e-12) for j in (0, 1))
        return max(n_top // 2 + 5, self.l + 5)

    def sector_weights(self) -> Tuple[float, float]:
        return 1.0 - self.w, self.w

    @classmethod
    def from_json(cls, data: Union[str, dict]) -> "SimConfig":
        """Build from the run-config layout ``{xi: [re, im], zeta_over_gamma, ...}``."""
        if isinstance(data, str):
            data = json.loads(data)
        data = dict(data)
        gamma = float(data.pop("gamma", 1.0))
        xi = data.pop("xi")
        zeta = data.pop("zeta_over_gamma")
        kwargs = {
            "xi": complex(*xi) if isinstance(xi, (list, tuple)) else complex(xi),
            "zeta": gamma * (complex(*zeta) if isinstance(zeta, (list, tuple)) else complex(zeta)),
            "gamma": gamma,
        }
        rename = {"dt_gamma": "dt", "t_max_gamma": "t_max", "record_every_gamma": "record_every"}
        for key, value in data.items():
            name = rename.get(key, key)
            if name in ("dt", "t_max", "record_every"):
                value = float(value) / gamma
            kwargs[name] = value
        unknown = set(kwargs) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise InvalidParameter(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs)

    def to_json(self) -> dict:
        g = self.gamma
        return {
            "xi": [self.xi.real, self.xi.imag],
            "zeta_over_gamma": [self.zeta.real / g, self.zeta.imag / g],
            "gamma": g, "p": self.p, "q": self.q, "w": self.w, "l": self.l,
            "m_max": self.m_max, "dt_gamma": self.dt * g, "t_max_gamma": self.t_max * g,
            "record_every_gamma": self.record_every * g, "n_traj": self.n_traj,
            "seed": self.seed,
        }


def chain_index(s: int, j: int, m, M: int):
    """Position of ``|s, j, m>`` in the basis."""
    return s * 2 * M + j * M + np.asarray(m)


# ---------------------------------------------------------------------------
# operators on the chain


def lowering_squared(M: int, j: int, p: int, q: int) -> np.ndarray:
    """``(abc)^2`` on parity sector ``j``: ``|m> -> g_m |m-1>``."""
    m = np.arange(1, M)
    n = 2 * m + j
    g = np.exp(0.5 * (log_rho(n, p, q) - log_rho(n - 2, p, q)))
    return np.diag(g, 1)


def build_hamiltonian(cfg: SimConfig) -> np.ndarray:
    """``zeta [(abc)^2 - xi^2] sigma_+ + h.c.`` as a dense Hermitian matrix."""
    M = cfg.M
    H = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for j in (0, 1):
        X = cfg.zeta * (lowering_squared(M, j, cfg.p, cfg.q) - cfg.xi ** 2 * np.eye(M))
        e = chain_index(EXCITED, j, np.arange(M), M)
        g = chain_index(GROUND, j, np.arange(M), M)
        H[np.ix_(e, g)] = X
        H[np.ix_(g, e)] = X.conj().T
    return H


def _lowering_sigma(cfg: SimConfig) -> np.ndarray:
    """``sigma_-`` = |g><e| on the chain basis."""
    M = cfg.M
    S = np.zeros((cfg.dim, cfg.dim))
    half = 2 * M
    S[np.arange(half), np.arange(half) + half] = 1.0
    return S


def _excited_projector(cfg: SimConfig) -> np.ndarray:
    d = np.zeros(cfg.dim)
    d[2 * cfg.M:] = 1.0
    return np.diag(d)


def initial_state(cfg: SimConfig) -> np.ndarray:
    """``|e> (sqrt(1-w) |Psi_{l0}> + sqrt(w) |Psi_{l1}>)``."""
    psi = np.zeros(cfg.dim, dtype=complex)
    for j, weight in enumerate(cfg.sector_weights()):
        psi[chain_index(EXCITED, j, cfg.l, cfg.M)] = math.sqrt(weight)
    return psi


def target_vector(cfg: SimConfig, j: int) -> np.ndarray:
    """``|g> |xi, p, q>_{2j}`` on the chain basis (truncated, not renormalized)."""
    M = cfg.M
    state = build_ktcs(cfg.target(j), n_max=2 * M - 1 + j)
    amps = state.amplitudes[j::2][:M]
    vec = np.zeros(cfg.dim, dtype=complex)
    vec[chain_index(GROUND, j, np.arange(M), M)] = amps
    return vec


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class ChainDensity:
    """Density matrix on the ``|s, j, m>`` basis at time ``t``."""

    rho: np.ndarray
    m_max: int
    t: float = 0.0

    @property
    def M(self) -> int:
        return self.m_max + 1

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def hermiticity_error(self) -> float:
        return float(np.abs(self.rho - self.rho.conj().T).max())

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())

    def populations(self) -> np.ndarray:
        """Diagonal reshaped to ``[s, j, m]``."""
        return np.real(np.diag(self.rho)).reshape(2, 2, self.M)

    def sector_population(self, j: int) -> float:
        return float(self.populations()[:, j, :].sum())

    def excited_population(self) -> float:
        return float(self.populations()[EXCITED].sum())

    def phonon_distribution(self) -> np.ndarray:
        """``Pi_n`` for ``n = 0 .. 2M - 1``."""
        pops = self.populations().sum(axis=0)  # [j, m]
        return pops.T.ravel()                   # n = 2m + j

    def ground_phonon_state(self, j: int) -> np.ndarray:
        """Dominant eigenvector of the ground-state block of sector ``j``."""
        idx = chain_index(GROUND, j, np.arange(self.M), self.M)
        block = self.rho[np.ix_(idx, idx)]
        vals, vecs = np.linalg.eigh(0.5 * (block + block.conj().T))
        return vecs[:, -1]


def _as_density(state, m_max: Optional[int] = None) -> ChainDensity:
    if isinstance(state, ChainDensity):
        return state
    psi = np.asarray(state)
    if psi.ndim != 1:
        raise InvalidParameter("expected a ChainDensity or a state vector")
    if m_max is None:
        m_max = psi.size // 4 - 1
    psi = psi / np.linalg.norm(psi)
    return ChainDensity(np.outer(psi, psi.conj()), m_max)


def phonon_distribution(state, n: Optional[int] = None):
    """``Pi_n`` of a :class:`ChainDensity` or a chain state vector.

    With ``n`` omitted the whole distribution is returned.  Indices beyond
    the truncation have probability 0.
    """
    pi = _as_density(state).phonon_distribution()
    if n is None:
        return pi
    if n < 0:
        raise InvalidParameter("n must be non-negative")
    return float(pi[n]) if n < pi.size else 0.0


def fidelity(state, target: KtcsParams) -> float:
    """``<target, g| rho |target, g>`` for a two-dimensional target state."""
    if target.K != 2:
        raise InvalidParameter("the preparation scheme only produces K = 2 states")
    dens = _as_density(state)
    M = dens.M
    state_t = build_ktcs(target, n_max=2 * M - 1 + target.j)
    vec = np.zeros(4 * M, dtype=complex)
    vec[chain_index(GROUND, target.j, np.arange(M), M)] = state_t.amplitudes[target.j::2][:M]
    return float(np.real(vec.conj() @ dens.rho @ vec))


def dark_state_residual(phonon: np.ndarray, cfg: SimConfig, j: int) -> float:
    """``||(abc)^2 Psi - xi^2 Psi||`` for a normalized sector-``j`` phonon vector.

    The top chain level is left out: its image needs the first level above
    the truncation.
    """
    psi = np.asarray(phonon, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    r = lowering_squared(cfg.M, j, cfg.p, cfg.q) @ psi - cfg.xi ** 2 * psi
    return float(np.linalg.norm(r[:-1]))


# ---------------------------------------------------------------------------
# deterministic master-equation oracle


def _active_indices(cfg: SimConfig) -> np.ndarray:
    M = cfg.M
    sectors = [j for j, w in enumerate(cfg.sector_weights()) if w > 0]
    return np.sort(np.concatenate([chain_index(s, j, np.arange(M), M)
                                   for s in (GROUND, EXCITED) for j in sectors]))


def _effective_hamiltonian(cfg: SimConfig) -> np.ndarray:
    return build_hamiltonian(cfg) - 0.5j * cfg.gamma * _excited_projector(cfg)


def liouvillian_apply(cfg: SimConfig, rho: np.ndarray, H: Optional[np.ndarray] = None) -> np.ndarray:
    """``-i[H, rho] + gamma (s- rho s+ - {s+ s-, rho}/2)`` on the full basis."""
    H = build_hamiltonian(cfg) if H is None else H
    S = _lowering_sigma(cfg)
    Pe = _excited_projector(cfg)
    comm = -1j * (H @ rho - rho @ H)
    return comm + cfg.gamma * (S @ rho @ S.T - 0.5 * (Pe @ rho + rho @ Pe))


@dataclass
class DensityRun:
    """Checkpointed output of :func:`evolve_density`."""

    config: SimConfig
    times: np.ndarray
    fidelity: np.ndarray          # (T, 2): F_0, F_1
    phonon: np.ndarray            # (T, 2M)
    excited: np.ndarray           # (T,)
    sector: np.ndarray            # (T, 2)
    trace: np.ndarray             # (T,)
    final: ChainDensity
    method: str

    def snapshot(self, t: float) -> np.ndarray:
        return self.phonon[int(np.argmin(np.abs(self.times - t)))]


def _checkpoints(cfg: SimConfig) -> np.ndarray:
    count = int(math.floor(cfg.t_max / cfg.record_every + 1e-9))
    return cfg.record_every * np.arange(count + 1)


def _record(cfg, rho_full, t, targets):
    dens = ChainDensity(rho_full, cfg.m_max, t)
    F = [float(np.real(v.conj() @ rho_full @ v)) for v in targets]
    return dens, F


def evolve_density(cfg: SimConfig, method: str = "lawson", trace_tol: float = 1e-8) -> DensityRun:
    """Integrate the master equation deterministically.

    ``method="lawson"`` is a fourth-order integrating-factor Runge-Kutta
    scheme: the non-Hermitian part ``exp(-i H_eff h)`` is applied exactly and
    only the recycling term ``gamma s- rho s+`` goes through the RK stages,
    so the step is limited by ``gamma`` rather than by the fast chain
    couplings.  ``method="exact"`` exponentiates the Liouvillian of each pair
    of parity blocks; it is used to validate the integrator.

    Raises
    ------
    StepTooLarge
        If the trace drifts by more than ``trace_tol``.
    """
    if method not in ("lawson", "exact"):
        raise InvalidParameter(f"unknown method {method!r}")
    idx = _active_indices(cfg)
    H_full = build_hamiltonian(cfg)
    H_eff = (H_full - 0.5j * cfg.gamma * _excited_projector(cfg))[np.ix_(idx, idx)]
    S = _lowering_sigma(cfg)[np.ix_(idx, idx)]
    psi0 = initial_state(cfg)[idx]
    rho = np.outer(psi0, psi0.conj())
    targets = [target_vector(cfg, j) for j in (0, 1)]
    checkpoints = _checkpoints(cfg)
    n_sub = max(1, int(math.ceil(cfg.record_every / cfg.dt - 1e-9)))
    h = cfg.record_every / n_sub

    def embed(r):
        full = np.zeros((cfg.dim, cfg.dim), dtype=complex)
        full[np.ix_(idx, idx)] = r
        return full

    if method == "lawson":
        E1 = expm(-1j * H_eff * h)
        E2 = expm(-0.5j * H_eff * h)
        g = cfg.gamma

        def J(r):
            return g * (S @ r @ S.T)

        def P1(r):
            return E1 @ r @ E1.conj().T

        def P2(r):
            return E2 @ r @ E2.conj().T

        def advance(r):
            for _ in range(n_sub):
                k1 = J(r)
                k2 = J(P2(r + 0.5 * h * k1))
                k3 = J(P2(r) + 0.5 * h * k2)
                k4 = J(P1(r) + h * P2(k3))
                r = P1(r + h / 6 * k1) + h / 3 * P2(k2 + k3) + h / 6 * k4
                r = 0.5 * (r + r.conj().T)
            return r
    else:
        advance = _exact_block_propagator(cfg, idx, H_eff, S)

    rows = []
    for k, t in enumerate(checkpoints):
        if k:
            rho = advance(rho)
        full = embed(rho)
        dens, F = _record(cfg, full, t, targets)
        tr = dens.trace()
        if abs(tr - 1.0) > trace_tol:
            raise StepTooLarge(f"trace drifted to {tr:.12g} at t = {t}")
        rows.append((F, dens.phonon_distribution(), dens.excited_population(),
                     [dens.sector_population(0), dens.sector_population(1)], tr))
    F, phon, exc, sec, tr = (np.array(c) for c in zip(*rows))
    return DensityRun(cfg, checkpoints, F, phon, exc, sec, tr, dens, method)


def _exact_block_propagator(cfg, idx, H_eff, S):
    """``rho -> exp(L T) rho`` over one record interval, block by block."""
    M = cfg.M
    # positions (within idx) of each active sector
    sector_of = ((idx % (2 * M)) >= M).astype(int)
    blocks = {j: np.nonzero(sector_of == j)[0] for j in (0, 1) if np.any(sector_of == j)}
    props = {}
    for a, ia in blocks.items():
        for b, ib in blocks.items():
            Ha, Hb = H_eff[np.ix_(ia, ia)], H_eff[np.ix_(ib, ib)]
            Sa, Sb = S[np.ix_(ia, ia)], S[np.ix_(ib, ib)]
            da, db = len(ia), len(ib)
            # row-major vec: vec(A X B) = (A kron B^T) vec(X)
            L = (-1j * np.kron(Ha, np.eye(db)) + 1j * np.kron(np.eye(da), Hb.conj())
                 + cfg.gamma * np.kron(Sa, Sb))
            props[a, b] = expm(L * cfg.record_every)

    def advance(r):
        out = np.zeros_like(r)
        for (a, b), P in props.items():
            ia, ib = blocks[a], blocks[b]
            blk = r[np.ix_(ia, ib)].ravel()
            out[np.ix_(ia, ib)] = (P @ blk).reshape(len(ia), len(ib))
        return out

    return advance


# ---------------------------------------------------------------------------
# Monte Carlo wave functions


@dataclass
class McwfRun:
    """Trajectory averages with standard errors at each checkpoint."""

    config: SimConfig
    times: np.ndarray
    fidelity: np.ndarray          # (T, 2)
    fidelity_err: np.ndarray      # (T, 2)
    phonon: np.ndarray            # (T, 2M)
    phonon_err: np.ndarray        # (T, 2M)
    excited: np.ndarray
    excited_err: np.ndarray
    jumps: np.ndarray             # (n_traj,) number of jumps per trajectory

    def snapshot(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        k = int(np.argmin(np.abs(self.times - t)))
        return self.phonon[k], self.phonon_err[k]


class _UniformStream:
    """Per-trajectory uniforms drawn in blocks from independent generators.

    Trajectory ``i`` uses ``SeedSequence(seed, spawn_key=(i,))``, so its
    random numbers do not depend on how many trajectories run alongside.
    """

    def __init__(self, seed: int, n_traj: int, block: int = 256):
        self._gens = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_traj)]
        self._block = block
        self._buf = np.array([g.random(block) for g in self._gens])
        self._pos = np.zeros(n_traj, dtype=int)

    def take(self, rows: np.ndarray) -> np.ndarray:
        out = np.empty(len(rows))
        for k, i in enumerate(rows):
            if self._pos[i] == self._block:
                self._buf[i] = self._gens[i].random(self._block)
                self._pos[i] = 0
            out[k] = self._buf[i, self._pos[i]]
            self._pos[i] += 1
        return out


def _mean_err(x: np.ndarray):
    n = x.shape[0]
    mean = x.mean(axis=0)
    err = x.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, err


def mcwf_run(cfg: SimConfig, max_jump_probability: float = 0.1) -> McwfRun:
    """Quantum-jump unravelling of the master equation.

    Every trajectory carries an unnormalized state propagated with the exact
    non-unitary step ``exp(-i H_eff dt)``.  A jump ``sigma_-`` happens at the
    end of the step in which the squared norm falls below a uniform random
    threshold; the threshold is then redrawn.  Over one step this jumps with
    probability ``gamma dt <P_e>`` to first order.

    Raises
    ------
    StepTooLarge
        If any step loses more than ``max_jump_probability`` of the norm.
    """
    idx = _active_indices(cfg)
    M = cfg.M
    H_eff = _effective_hamiltonian(cfg)[np.ix_(idx, idx)]
    S = _lowering_sigma(cfg)[np.ix_(idx, idx)]
    n_steps = max(1, int(math.ceil(cfg.record_every / cfg.dt - 1e-9)))
    U = expm(-1j * H_eff * (cfg.record_every / n_steps))
    UT = U.T.copy()
    ST = S.T.copy()
    checkpoints = _checkpoints(cfg)

    n_traj = cfg.n_traj
    psi = np.tile(initial_state(cfg)[idx], (n_traj, 1))
    rng = _UniformStream(cfg.seed, n_traj)
    threshold = rng.take(np.arange(n_traj))
    jumps = np.zeros(n_traj, dtype=int)

    targets = np.array([target_vector(cfg, j)[idx] for j in (0, 1)])
    excited_mask = idx >= 2 * M
    # column n = 2m + j of the phonon distribution for every active index
    phonon_col = 2 * (idx % M) + (idx % (2 * M)) // M

    def observe():
        norm2 = np.einsum("ij,ij->i", psi.conj(), psi).real
        phi = psi / np.sqrt(norm2)[:, None]
        prob = np.abs(phi) ** 2
        F = np.abs(phi @ targets.conj().T) ** 2
        pi = np.zeros((n_traj, 2 * M))
        np.add.at(pi.T, phonon_col, prob.T)
        exc = prob[:, excited_mask].sum(axis=1)
        return F, pi, exc

    out_F, out_Fe, out_P, out_Pe, out_E, out_Ee = [], [], [], [], [], []
    for k, t in enumerate(checkpoints):
        if k:
            for _ in range(n_steps):
                before = np.einsum("ij,ij->i", psi.conj(), psi).real
                psi = psi @ UT
                norm2 = np.einsum("ij,ij->i", psi.conj(), psi).real
                if np.any(1.0 - norm2 / before > max_jump_probability):
                    raise StepTooLarge("jump probability per step above "
                                       f"{max_jump_probability}; reduce dt")
                hit = np.nonzero(norm2 < threshold)[0]
                if hit.size:
                    jumped = psi[hit] @ ST
                    jumped /= np.linalg.norm(jumped, axis=1)[:, None]
                    psi[hit] = jumped
                    jumps[hit] += 1
                    threshold[hit] = rng.take(hit)
        F, pi, exc = observe()
        for store, val in ((out_F, F), (out_P, pi), (out_E, exc)):
            store.append(val)
    F = np.array(out_F)
    P = np.array(out_P)
    E = np.array(out_E)
    Fm, Fe = zip(*(_mean_err(x) for x in F))
    Pm, Pe = zip(*(_mean_err(x) for x in P))
    Em, Ee = zip(*(_mean_err(x) for x in E))
    return McwfRun(cfg, checkpoints, np.array(Fm), np.array(Fe), np.array(Pm), np.array(Pe),
                   np.array(Em), np.array(Ee), jumps)
