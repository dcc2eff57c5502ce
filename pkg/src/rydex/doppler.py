"""Thermal Doppler averaging of steady states and transfer functions.

With ``x = v / sigma_v`` a standard normal variable, a velocity class evolves
under ``C0 + x Cv``. Averages over x are done either numerically (adaptive
Gauss-Kronrod, or Gauss-Hermite for comparison) or, for transfer functions,
analytically through eigendecompositions of ``(sI - C0)^-1 Cv`` and the
Gaussian pole expectation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .atomic import (LiouvillianSystem, build_liouvillian, probe_transmission, steady_state,
                     velocity_superoperator)
from .dynamics import _split, photocurrent_per_watt
from .constants import HBAR
from .errors import BlockLeakage, IllConditioned, NonConvergent, PoleHit
from .faddeeva import gaussian_pole_expectation
from .params import AtomicParams

__all__ = [
    "velocity_liouvillian",
    "doppler_static_rho",
    "doppler_transfer_numeric",
    "EigenPack",
    "eigenpack",
    "doppler_transfer_analytic",
    "doppler_transconductance",
]

_X_MAX = 10.0


def velocity_liouvillian(params: AtomicParams, q: np.ndarray | None = None) -> np.ndarray:
    """Reduced Doppler generator C_v (per unit x = v / sigma_v).

    Raises
    ------
    BlockLeakage
        If Q^T A_v Q couples to the trace direction.
    """
    if q is None:
        q = build_liouvillian(params.replace(temperature=0.0)).q
    av = velocity_superoperator(params)
    bv = q.T @ av @ q
    scale = max(np.abs(av).max(), 1.0)
    leak = max(np.abs(bv[0, :]).max(), np.abs(bv[:, 0]).max())
    if leak > 1e-12 * scale:
        raise BlockLeakage(f"velocity generator leaks into the trace block ({leak:.3e})")
    return bv[1:, 1:].copy()


def _system(params: AtomicParams, sys: LiouvillianSystem | None) -> LiouvillianSystem:
    if sys is None or (params.temperature > 0 and not np.any(sys.cv)):
        sys = build_liouvillian(params)
    return sys


def _gauss(x):
    return np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)


def _average(fn, nodes: int | None, rtol: float):
    """Gaussian average of a vector-valued fn(x).

    ``nodes=None`` uses adaptive Gauss-Kronrod on [-10, 10] split at 0;
    an integer uses probabilists' Gauss-Hermite with that many nodes.
    """
    if nodes is None:
        res, err, info = integrate.quad_vec(lambda x: _gauss(x) * fn(x), -_X_MAX, _X_MAX,
                                            epsabs=0.0, epsrel=rtol, norm="max", limit=20000,
                                            points=(0.0,), full_output=True)
        if not info.success:
            raise NonConvergent(f"adaptive quadrature did not converge ({info.message})")
        return res
    x, w = np.polynomial.hermite_e.hermegauss(int(nodes))
    w = w / w.sum()
    return sum(wi * fn(xi) for xi, wi in zip(x, w))


def doppler_static_rho(params: AtomicParams, nodes: int | None = None,
                       rtol: float = 1e-10) -> np.ndarray:
    """Velocity-averaged steady-state density matrix.

    Each class sees probe/control detunings shifted by -k_p v and +k_c v.
    At T = 0 this is the zero-velocity steady state.
    """
    sys = build_liouvillian(params)
    if params.temperature == 0:
        return steady_state(sys)[1]
    rhs = -0.5 * sys.w0

    def fn(x):
        z = np.linalg.solve(sys.c0 + x * sys.cv, rhs)
        return sys.q[:, 1:] @ z

    vec_part = _average(fn, nodes, rtol)
    return sys.expand(sys.q[:, 1:].T @ vec_part)


def doppler_transfer_numeric(sys: LiouvillianSystem | None, params: AtomicParams, k: int, l: int,
                             s, nodes: int | None = None, rtol: float = 1e-9,
                             check_nodes: bool = True):
    """Doppler-averaged T_kl(s) by quadrature over velocity classes.

    Each class uses ``(sI - C0 - x Cv)^-1`` and its own steady state solving
    ``(C0 + x Cv) z_x = -w0/2``.

    Parameters
    ----------
    nodes : int or None
        None selects adaptive Gauss-Kronrod; an integer selects Gauss-Hermite,
        checked against twice the node count when ``check_nodes`` is set.

    Raises
    ------
    NonConvergent
        If the adaptive rule fails or doubling the Gauss-Hermite nodes changes
        the result by more than 1e-4 relative.
    PoleHit
        If ``s`` is an eigenvalue of a sampled class generator.
    """
    sys = _system(params, sys)
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    f = sys.f(k, l)
    row = sys.out_row
    rhs = -0.5 * sys.w0
    eye = np.eye(sys.c0.shape[0])

    def fn(x):
        a = sys.c0 + x * sys.cv
        z = np.linalg.solve(a, rhs)
        mats = s_arr[:, None, None] * eye[None] - a[None]
        try:
            y = np.linalg.solve(mats, np.broadcast_to(f @ z, (s_arr.size, z.size))[..., None])
        except np.linalg.LinAlgError as exc:
            raise PoleHit(f"velocity class x={x:.6g} is singular at s") from exc
        return y[..., 0] @ row

    val = _average(fn, nodes, rtol)
    if nodes is not None and check_nodes:
        ref = _average(fn, 2 * int(nodes), rtol)
        rel = np.max(np.abs(ref - val) / np.maximum(np.abs(ref), 1e-300))
        if rel > 1e-4:
            raise NonConvergent(f"Gauss-Hermite {nodes} vs {2 * nodes} nodes differ by {rel:.2e}")
    return val if np.ndim(s) else val[0]


@dataclass
class EigenPack:
    """Eigen-structure of M(s) = (sI - C0)^-1 Cv with biorthonormal left vectors.

    ``right[:, m]`` is s_m and ``left[m, :]`` is t_m^T, so ``left @ right = I``.
    """

    s: complex
    matrix: np.ndarray
    eigvals: np.ndarray
    right: np.ndarray
    left: np.ndarray
    cond: float

    def reconstruction_residual(self) -> float:
        rec = self.right @ np.diag(self.eigvals) @ self.left
        return float(np.abs(rec - self.matrix).max() / max(np.abs(self.matrix).max(), 1e-300))

    def biorthogonality_residual(self) -> float:
        n = self.eigvals.size
        return float(np.abs(self.left @ self.right - np.eye(n)).max())


def eigenpack(sys: LiouvillianSystem, s: complex, max_cond: float = 1e8) -> EigenPack:
    """Eigendecomposition of (sI - C0)^-1 Cv.

    Raises
    ------
    IllConditioned
        If the eigenvector matrix condition number exceeds ``max_cond``.
    """
    n = sys.c0.shape[0]
    m = np.linalg.solve(s * np.eye(n) - sys.c0, sys.cv)
    lam, vecs = np.linalg.eig(m)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    cond = float(np.linalg.cond(vecs))
    if not np.isfinite(cond) or cond > max_cond:
        raise IllConditioned(f"eigenvector condition number {cond:.3e} at s={s}")
    left = np.linalg.inv(vecs)
    return EigenPack(s=complex(s), matrix=m, eigvals=lam, right=vecs, left=left, cond=cond)


def doppler_transfer_analytic(sys: LiouvillianSystem | None, params: AtomicParams, k: int, l: int,
                              s, max_cond: float = 1e8):
    """Doppler-averaged T_kl(s) from the eigen-expansion.

    ``T^D(s) = sum_mn E[1/((1 - lam_m(s) X)(1 - lam_n(0) X))]
    (r s_m)(t_m^T (sI - C0)^-1 F_kl s'_n)(t'_n^T z0)``
    with primes denoting the eigen-structure at s = 0.

    Raises
    ------
    IllConditioned
        When an eigenvector basis is too ill-conditioned; use the numeric path.
    """
    sys = _system(params, sys)
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    n = sys.c0.shape[0]
    p0 = eigenpack(sys, 0.0, max_cond)
    f = sys.f(k, l)
    fs = f @ p0.right
    right_weight = p0.left @ sys.z0
    out = np.empty(s_arr.size, dtype=complex)
    ev = np.linalg.eigvals(sys.c0)
    for i, sv in enumerate(s_arr):
        if np.any(np.abs(sv - ev) <= 1e-9 * np.abs(ev)):
            raise PoleHit("evaluation point coincides with an eigenvalue of C0")
        ps = eigenpack(sys, sv, max_cond)
        left_weight = sys.out_row @ ps.right
        middle = ps.left @ np.linalg.solve(sv * np.eye(n) - sys.c0, fs)
        e = gaussian_pole_expectation(ps.eigvals[:, None], p0.eigvals[None, :])
        out[i] = np.einsum("m,mn,mn,n->", left_weight, middle, e, right_weight)
    return out if np.ndim(s) else out[0]


def doppler_transconductance(params: AtomicParams, omega, method: str = "analytic",
                             nodes: int | None = None, sys: LiouvillianSystem | None = None):
    """Doppler-averaged g_q^D(i omega) [S] for a uniform cell.

    Uses the velocity-averaged steady state for the photocurrent and the
    averaged G_I2 from the chosen ``method`` ("analytic" or "numeric").
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    sys = _system(params, sys)
    rho = doppler_static_rho(params)
    p_bar = probe_transmission(rho, params)[0]
    s_all = np.concatenate([1j * omega, -1j * omega])
    if method == "analytic":
        t34 = doppler_transfer_analytic(sys, params, 3, 4, s_all)
        t43 = doppler_transfer_analytic(sys, params, 4, 3, s_all)
    elif method == "numeric":
        t34 = doppler_transfer_numeric(sys, params, 3, 4, s_all, nodes=nodes)
        t43 = doppler_transfer_numeric(sys, params, 4, 3, s_all, nodes=nodes)
    else:
        raise ValueError("method must be 'analytic' or 'numeric'")
    gi = 0.5 * (t43 + t34)
    n = omega.size
    gi2 = _split(gi[:n], gi[n:])[1]
    i_ph = photocurrent_per_watt(params) * p_bar
    return i_ph * 2 * params.absorption_prefactor * gi2 * params.mu_rf / HBAR
