"""Four-level Hamiltonian, vectorized Lindblad generator and its stable reduction.

Vectorization is column-stacking: ``vec(rho)[i + 4 j] = rho[i, j]`` (0-based),
so ``vec(A X B) = (B.T kron A) vec(X)`` and rho_21 sits at index 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR
from .errors import GridTooCoarse, ReductionError, SingularSystem
from .params import AtomicParams

__all__ = [
    "LiouvillianSystem",
    "build_hamiltonian",
    "build_decay_superoperator",
    "build_liouvillian",
    "signal_superoperator",
    "orthonormal_completion",
    "steady_state",
    "probe_transmission",
    "probe_power",
    "dc_sweep",
    "kappa_from_slope",
    "vec",
    "unvec",
    "RHO21_INDEX",
]

N_LEVELS = 4
DIM = N_LEVELS * N_LEVELS
RHO21_INDEX = 1


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(N_LEVELS, N_LEVELS, order="F")


def _unit(i: int, j: int) -> np.ndarray:
    e = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    e[i, j] = 1.0
    return e


def build_hamiltonian(params: AtomicParams, omega_sig: complex = 0.0) -> np.ndarray:
    """hbar-normalized Hamiltonian [rad/s] with an optional complex signal Rabi frequency."""
    p = params
    d2 = -p.delta_p
    d3 = -p.delta_p - p.delta_c
    d4 = -p.delta_p - p.delta_c + p.delta_lo
    h = np.array([
        [0.0, p.omega_p / 2, 0.0, 0.0],
        [p.omega_p / 2, d2, p.omega_c / 2, 0.0],
        [0.0, p.omega_c / 2, d3, (p.omega_lo + np.conj(omega_sig)) / 2],
        [0.0, 0.0, (p.omega_lo + omega_sig) / 2, d4],
    ], dtype=complex)
    return h


def commutator_superoperator(h: np.ndarray) -> np.ndarray:
    """Matrix of rho -> -i [h, rho] in the column-stacked basis."""
    eye = np.eye(N_LEVELS)
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def build_decay_superoperator(params: AtomicParams) -> np.ndarray:
    """Dissipator: -1/2 {Gamma, rho} plus the repopulation terms.

    Repopulation follows the vectorized generator literally: ground state
    refilled from levels 1, 2, 3, 4 at gamma, gamma+gamma2, gamma, gamma+gamma4
    and level 2 fed from level 3 at gamma3. Trace is preserved exactly.
    """
    p = params
    g = np.array([0.0, p.gamma2, p.gamma3, p.gamma4]) + p.gamma
    big_gamma = np.diag(g).astype(complex)
    eye = np.eye(N_LEVELS)
    d = -0.5 * (np.kron(big_gamma, eye) + np.kron(eye, big_gamma))
    # 1-based (row, col) of the repopulation entries E_{i,j}
    for (row, col), rate in {
        (1, 1): p.gamma,
        (1, 6): p.gamma + p.gamma2,
        (1, 16): p.gamma + p.gamma4,
        (6, 11): p.gamma3,
        (1, 11): p.gamma,
    }.items():
        d[row - 1, col - 1] += rate
    return d


def signal_superoperator(k: int, l: int) -> np.ndarray:
    """d(A1)/d[H1]_{kl} for 1-based level indices (k, l)."""
    if not (1 <= k <= 4 and 1 <= l <= 4) or k == l:
        raise ValueError(f"level pair ({k}, {l}) must be off-diagonal in 1..4")
    return commutator_superoperator(_unit(k - 1, l - 1))


def orthonormal_completion(first: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Real orthonormal basis whose first column is ``first``.

    Gram-Schmidt (two passes) over [first, e_1, ..., e_n], skipping candidates
    that are linearly dependent on the columns accepted so far.
    """
    first = np.asarray(first, dtype=float)
    n = first.size
    cols = [first / np.linalg.norm(first)]
    for j in range(n):
        if len(cols) == n:
            break
        v = np.zeros(n)
        v[j] = 1.0
        basis = np.array(cols).T
        for _ in range(2):
            v = v - basis @ (basis.T @ v)
        nv = np.linalg.norm(v)
        if nv > tol:
            cols.append(v / nv)
    if len(cols) != n:
        raise ReductionError("orthonormal completion failed")
    return np.array(cols).T


def _u4() -> np.ndarray:
    return vec(np.eye(N_LEVELS)).real / 2.0


_Q_CACHE = orthonormal_completion(_u4())


def velocity_superoperator(params: AtomicParams) -> np.ndarray:
    """A_v: Doppler-coupling generator per unit normalized velocity v/sigma_v.

    Overall sign is immaterial for the symmetric Gaussian average; the relative
    sign between probe and control terms encodes counter-propagation.
    """
    eye = np.eye(N_LEVELS)
    d_p = np.diag([0.0, -1.0, -1.0, -1.0])
    d_c = np.diag([0.0, 0.0, -1.0, -1.0])
    sv = params.sigma_v
    return (-1j * params.k_p * sv * (np.kron(eye, d_p) - np.kron(d_p, eye))
            + 1j * params.k_c * sv * (np.kron(eye, d_c) - np.kron(d_c, eye)))


@dataclass
class LiouvillianSystem:
    """Vectorized generator and its 15-dimensional stable reduction."""

    a0: np.ndarray
    q: np.ndarray
    c0: np.ndarray
    w0: np.ndarray
    cv: np.ndarray
    _f_cache: dict = field(default_factory=dict, repr=False)
    _z0: np.ndarray | None = field(default=None, repr=False)

    @property
    def out_row(self) -> np.ndarray:
        """Row selecting rho_21 from z: [Q [0; I15]]_2."""
        return self.q[RHO21_INDEX, 1:]

    def f(self, k: int, l: int) -> np.ndarray:
        """Signal-action matrix F_kl (15x15)."""
        key = (k, l)
        if key not in self._f_cache:
            b = self.q.T @ signal_superoperator(k, l) @ self.q
            self._f_cache[key] = b[1:, 1:]
        return self._f_cache[key]

    @property
    def f34(self) -> np.ndarray:
        return self.f(3, 4)

    @property
    def f43(self) -> np.ndarray:
        return self.f(4, 3)

    @property
    def z0(self) -> np.ndarray:
        if self._z0 is None:
            self._z0, _ = steady_state(self)
        return self._z0

    def expand(self, z: np.ndarray) -> np.ndarray:
        """Density matrix from reduced coordinates z (trace fixed to 1)."""
        return unvec(self.q @ np.concatenate(([0.5], z)))


def _reduce(a: np.ndarray, q: np.ndarray, what: str, check_col: bool = False):
    b = q.T @ a @ q
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(b[0, :]).max() > 1e-12 * scale:
        raise ReductionError(f"first row of Q^T {what} Q is not zero "
                             f"(max {np.abs(b[0, :]).max():.3e}); vectorization mismatch")
    if check_col and np.abs(b[1:, 0]).max() > 1e-12 * scale:
        raise ReductionError(f"{what} leaks into the trace column")
    return b


def build_liouvillian(params: AtomicParams) -> LiouvillianSystem:
    """Assemble A0, the orthonormal transform Q and the reduced blocks C0, w0, C_v."""
    h0 = build_hamiltonian(params)
    a0 = commutator_superoperator(h0) + build_decay_superoperator(params)
    q = _Q_CACHE.copy()
    b0 = _reduce(a0, q, "A0")
    if params.temperature > 0:
        from .errors import BlockLeakage
        av = velocity_superoperator(params)
        bv = q.T @ av @ q
        scale = max(np.abs(av).max(), 1.0)
        leak = max(np.abs(bv[0, :]).max(), np.abs(bv[:, 0]).max())
        if leak > 1e-12 * scale:
            raise BlockLeakage(f"velocity generator leaks into trace block ({leak:.3e})")
        cv = bv[1:, 1:]
    else:
        cv = np.zeros((DIM - 1, DIM - 1), dtype=complex)
    return LiouvillianSystem(a0=a0, q=q, c0=b0[1:, 1:].copy(), w0=b0[1:, 0].copy(), cv=cv)


def steady_state(sys: LiouvillianSystem):
    """Stationary reduced state z0 (C0 z0 = -w0/2) and the density matrix."""
    try:
        z0 = np.linalg.solve(sys.c0, -0.5 * sys.w0)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(z0)):
        raise SingularSystem("non-finite steady state")
    rho = sys.expand(z0)
    return z0, rho


def _steady_rho(params: AtomicParams) -> np.ndarray:
    sys = build_liouvillian(params.replace(temperature=0.0))
    return steady_state(sys)[1]


def probe_transmission(rho_bar: np.ndarray, params: AtomicParams, slices: int = 1):
    """Transmitted probe power and per-slice amplitude attenuation [1/m].

    ``slices == 1`` is the uniform thin-cell formula P0 exp(-2 alpha L). For
    more slices the probe Rabi frequency is attenuated slice by slice and each
    slice uses its own local steady state (``rho_bar`` is the entrance slice).
    """
    if slices < 1:
        raise ValueError("slices must be >= 1")
    dx = params.cell_length / slices
    power = params.probe_power_in
    omega_p = params.omega_p
    alphas = np.empty(slices)
    for i in range(slices):
        local = params if i == 0 else params.replace(omega_p=omega_p)
        rho = rho_bar if i == 0 else _steady_rho(local)
        alpha = -local.absorption_prefactor * rho[1, 0].imag
        alphas[i] = alpha
        power *= np.exp(-2.0 * alpha * dx)
        omega_p *= np.exp(-alpha * dx)
    return power, alphas


def probe_power(params: AtomicParams, slices: int = 1) -> float:
    """Steady-state transmitted probe power P-bar [W] at zero velocity."""
    return probe_transmission(_steady_rho(params), params, slices)[0]


def dc_sweep(params: AtomicParams, e_lo_grid, gamma_scale: float = 1.0, slices: int = 1):
    """Static transmission curve vs LO field and its slope.

    Returns ``(e_lo, p_over_p0, dp_de)``; the slope uses central differences
    inside the grid and one-sided differences at the endpoints.
    """
    e_lo = np.asarray(e_lo_grid, dtype=float)
    if e_lo.ndim != 1 or e_lo.size < 3:
        raise GridTooCoarse("dc_sweep needs at least 3 grid points")
    if np.any(e_lo <= 0) or np.any(np.diff(e_lo) <= 0):
        raise ValueError("e_lo_grid must be positive and strictly increasing")
    base = params.replace(gamma3=params.gamma3 * gamma_scale,
                          gamma4=params.gamma4 * gamma_scale)
    ratio = np.array([probe_power(base.replace(e_lo=float(e)), slices)
                      for e in e_lo]) / params.probe_power_in
    slope = np.gradient(ratio, e_lo)
    return e_lo, ratio, slope


def kappa_from_slope(params: AtomicParams, rel_step: float = 1e-4, slices: int = 1) -> float:
    """Static intrinsic gain (hbar/mu_rf) dP/dE_LO by a central difference [W/Hz]."""
    h = rel_step * params.e_lo
    p_plus = probe_power(params.replace(e_lo=params.e_lo + h), slices)
    p_minus = probe_power(params.replace(e_lo=params.e_lo - h), slices)
    return HBAR / params.mu_rf * (p_plus - p_minus) / (2 * h)
