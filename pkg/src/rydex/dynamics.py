"""Small-signal Laplace-domain response of the probe to the RF signal field.

The signal enters the Hamiltonian as ``[H1]_43 = Omega_sig / 2`` and
``[H1]_34 = conj(Omega_sig) / 2``; for a real Rabi frequency the coherence
rho_21 then responds through ``G_I = (T43 + T34) / 2`` and for an imaginary one
through ``G_Q = i (T43 - T34) / 2``.

Time-domain work uses a real 15-state realization obtained by rewriting the
reduced coordinates in a Hermitian (generalized Gell-Mann) basis, where the
generator, the I/Q input vectors and the Re/Im output rows are all real.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .atomic import (DIM, N_LEVELS, LiouvillianSystem, build_liouvillian, orthonormal_completion,
                     probe_transmission, _steady_rho)
from .constants import HBAR, Q_E, TWO_PI
from .errors import DegenerateRealization, GridMismatch, PoleHit
from .params import AtomicParams

__all__ = [
    "transfer_T",
    "gains_iq",
    "RealRealization",
    "real_realization",
    "Transconductance",
    "quantum_transconductance",
    "photocurrent_response",
    "PoleZero",
    "pole_zero",
    "impulse_step_response",
    "rise_time",
    "bandwidth_3db",
    "intrinsic_gain_kappa",
    "kappa_bridge",
    "photocurrent_per_watt",
    "lti_rho21_response",
    "default_frequency_grid",
    "small_signal_check",
]


def default_frequency_grid(f_if: float | None = None, points: int = 512,
                           fmin: float = 1e2, fmax: float = 1e7) -> np.ndarray:
    """Log-spaced frequency grid [Hz], with the IF inserted if given."""
    f = np.logspace(np.log10(fmin), np.log10(fmax), points)
    if f_if is not None:
        f = np.unique(np.append(f, f_if))
    return f


def small_signal_check(omega_sig, omega_lo: float, limit: float = 0.1) -> float:
    """Warn when max |Omega_sig| / Omega_LO exceeds ``limit``; returns the ratio."""
    ratio = float(np.max(np.abs(omega_sig))) / omega_lo
    if ratio > limit:
        warnings.warn(f"signal Rabi frequency is {ratio:.3g} of Omega_LO; "
                      "small-signal response may be inaccurate", RuntimeWarning, stacklevel=3)
    return ratio


def _check_poles(sys: LiouvillianSystem, s: np.ndarray) -> None:
    ev = np.linalg.eigvals(sys.c0)
    d = np.abs(s[:, None] - ev[None, :])
    tol = 1e-9 * np.maximum(np.abs(ev), 1e-300)
    if np.any(d <= tol[None, :]):
        raise PoleHit("evaluation point coincides with an eigenvalue of C0")


def _resolvent_apply(c0: np.ndarray, s: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve (s I - C0) X = rhs for every s; rhs has shape (15,) or (15, m)."""
    n = c0.shape[0]
    mats = s[:, None, None] * np.eye(n)[None] - c0[None]
    b = rhs if rhs.ndim == 2 else rhs[:, None]
    out = np.linalg.solve(mats, np.broadcast_to(b, (s.size,) + b.shape))
    return out if rhs.ndim == 2 else out[..., 0]


def transfer_T(sys: LiouvillianSystem, k: int, l: int, s):
    """Perturbation transfer function T_kl(s) from [H1]_kl to rho_21 [1/(rad/s)].

    Parameters
    ----------
    sys : LiouvillianSystem
    k, l : int
        1-based level indices of the perturbed Hamiltonian entry.
    s : complex or array_like
        Laplace variable [rad/s].
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    _check_poles(sys, s_arr)
    x = _resolvent_apply(sys.c0, s_arr, sys.f(k, l) @ sys.z0)
    out = x @ sys.out_row
    return out if np.ndim(s) else out[0]


def _split(g_s, g_conj):
    """Real-coefficient split from G(s) and G(conj s)."""
    g1 = 0.5 * (g_s + np.conj(g_conj))
    g2 = (g_s - np.conj(g_conj)) / 2j
    return g1, g2


def gains_iq(sys: LiouvillianSystem, s, mode: str = "sampled"):
    """In-phase/quadrature gains and their real-coefficient parts.

    Returns ``(G_I, G_Q, G_I1, G_I2, G_Q1, G_Q2)`` evaluated at ``s``; in each
    channel ``G = G1 + i G2`` with G1, G2 real-coefficient rational functions.
    ``mode="sampled"`` splits by evaluating at ``s`` and ``conj(s)``,
    ``mode="rational"`` evaluates the real realization directly.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    if mode == "sampled":
        both = np.concatenate([s_arr, np.conj(s_arr)])
        t34 = transfer_T(sys, 3, 4, both)
        t43 = transfer_T(sys, 4, 3, both)
        n = s_arr.size
        gi = 0.5 * (t43 + t34)
        gq = 0.5j * (t43 - t34)
        gi1, gi2 = _split(gi[:n], gi[n:])
        gq1, gq2 = _split(gq[:n], gq[n:])
        gi, gq = gi[:n], gq[:n]
    elif mode == "rational":
        _check_poles(sys, s_arr)
        rr = real_realization(sys)
        gi1, gi2, gq1, gq2 = (rr.evaluate(s_arr, ch, part)
                              for ch in ("I", "Q") for part in ("re", "im"))
        gi = gi1 + 1j * gi2
        gq = gq1 + 1j * gq2
    else:
        raise ValueError("mode must be 'sampled' or 'rational'")
    res = (gi, gq, gi1, gi2, gq1, gq2)
    if np.ndim(s) == 0:
        res = tuple(r[0] for r in res)
    return res


def _hermitian_basis() -> np.ndarray:
    """Orthonormal Hermitian basis of 4x4 matrices, as columns of vec form (16x16 unitary)."""
    cols = []
    for i in range(N_LEVELS):
        m = np.zeros((N_LEVELS, N_LEVELS), complex)
        m[i, i] = 1.0
        cols.append(m)
    for i in range(N_LEVELS):
        for j in range(i + 1, N_LEVELS):
            m = np.zeros((N_LEVELS, N_LEVELS), complex)
            m[i, j] = m[j, i] = 1 / np.sqrt(2)
            cols.append(m)
            m = np.zeros((N_LEVELS, N_LEVELS), complex)
            m[i, j], m[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            cols.append(m)
    return np.array([c.reshape(-1, order="F") for c in cols]).T


def _real_frame(q: np.ndarray) -> np.ndarray:
    """15x15 unitary M with z = M x, x the real coordinates of a traceless Hermitian part."""
    u16 = _hermitian_basis()
    trace_dir = np.zeros(DIM)
    trace_dir[:N_LEVELS] = 0.5
    w = u16 @ orthonormal_completion(trace_dir)
    return q[:, 1:].T @ w[:, 1:]


@dataclass
class RealRealization:
    """Real state-space form ``x' = A x + b u``, ``rho21 = (c_re + i c_im) x``.

    ``b_i`` and ``b_q`` are the input vectors for the in-phase and quadrature
    signal Rabi components; ``c_re``/``c_im`` select Re/Im rho_21.
    """

    a: np.ndarray
    b_i: np.ndarray
    b_q: np.ndarray
    c_re: np.ndarray
    c_im: np.ndarray

    def vectors(self, channel: str = "I", part: str = "im"):
        b = {"I": self.b_i, "Q": self.b_q}[channel]
        c = {"re": self.c_re, "im": self.c_im}[part]
        return b, c

    def evaluate(self, s, channel: str = "I", part: str = "im") -> np.ndarray:
        b, c = self.vectors(channel, part)
        s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
        return _resolvent_apply(self.a.astype(complex), s_arr, b.astype(complex)) @ c


def real_realization(sys: LiouvillianSystem, tol: float = 1e-9) -> RealRealization:
    """Real 15-state realization of the I/Q gains.

    Raises
    ------
    DegenerateRealization
        If the transformed generator or input vectors are not real to ``tol``.
    """
    m = _real_frame(sys.q)
    mh = m.conj().T
    a = mh @ sys.c0 @ m
    z0 = sys.z0
    b_i = mh @ (0.5 * (sys.f43 + sys.f34) @ z0)
    b_q = mh @ (0.5j * (sys.f43 - sys.f34) @ z0)
    c = sys.out_row @ m
    scale_a = np.abs(a).max()
    if np.abs(a.imag).max() > tol * scale_a:
        raise DegenerateRealization("generator is not real in the Hermitian basis")
    for name, b in (("b_i", b_i), ("b_q", b_q)):
        if np.abs(b.imag).max() > tol * max(np.abs(b).max(), 1e-300):
            raise DegenerateRealization(f"input vector {name} is not real")
    return RealRealization(a=a.real.copy(), b_i=b_i.real.copy(), b_q=b_q.real.copy(),
                           c_re=c.real.copy(), c_im=c.imag.copy())


def photocurrent_per_watt(params: AtomicParams) -> float:
    """Photodiode responsivity q_e eta / (hbar omega_p) [A/W]."""
    return Q_E * params.pd_quantum_efficiency / (HBAR * params.omega_probe_optical)


@dataclass
class Transconductance:
    """Quantum transconductance samples.

    Attributes
    ----------
    omega : ndarray
        Angular frequencies [rad/s].
    samples : ndarray, shape (slices, n)
        g_q(x, i omega) per slice [S].
    x : ndarray
        Slice mid-points [m].
    cell_length : float
    scale : ndarray
        Per-slice factor turning G_I2 into g_q [S rad/s].
    """

    omega: np.ndarray
    samples: np.ndarray
    x: np.ndarray
    cell_length: float
    scale: np.ndarray

    @property
    def integrated(self) -> np.ndarray:
        """Slice integral of g_q over the cell, L g_q for a uniform cell [S m]."""
        dx = self.cell_length / self.samples.shape[0]
        return self.samples.sum(axis=0) * dx

    @property
    def mean(self) -> np.ndarray:
        """Length-averaged g_q [S]."""
        return self.integrated / self.cell_length

    @property
    def dc_value(self) -> float:
        idx = np.flatnonzero(self.omega == 0)
        if idx.size:
            return float(self.mean[idx[0]].real)
        raise ValueError("omega grid does not contain 0")


def _slice_systems(params: AtomicParams, slices: int):
    """Per-slice (params, system, steady rho) with the probe attenuated slice by slice."""
    p0 = params.replace(temperature=0.0)
    rho_entry = _steady_rho(p0)
    _, alphas = probe_transmission(rho_entry, p0, slices)
    dx = params.cell_length / slices
    out = []
    omega_p = params.omega_p
    for i in range(slices):
        local = p0.replace(omega_p=omega_p)
        out.append((local, build_liouvillian(local)))
        omega_p *= np.exp(-alphas[i] * dx)
    return out


def quantum_transconductance(sys: LiouvillianSystem | None, params: AtomicParams, omega,
                             slices: int = 1, mode: str = "sampled") -> Transconductance:
    """Quantum transconductance g_q(x, i omega) [S].

    ``g_q = I_ph * 2 k_p N0 mu12^2 / (eps0 hbar Omega_p(x)) * G_I2(x, i omega) * mu_rf / hbar``
    with ``I_ph`` the steady photocurrent at the cell exit.

    Parameters
    ----------
    sys : LiouvillianSystem or None
        Zero-velocity system of the entrance slice; rebuilt when ``None``.
    omega : array_like
        Angular frequencies [rad/s].
    slices : int
        1 gives the uniform-cell result.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if slices < 1:
        raise ValueError("slices must be >= 1")
    p_bar = _p_bar(params, slices)
    i_ph = photocurrent_per_watt(params) * p_bar
    if slices == 1:
        systems = [(params, sys if sys is not None else build_liouvillian(params))]
    else:
        systems = _slice_systems(params, slices)
    samples = np.empty((slices, omega.size), dtype=complex)
    scale = np.empty(slices)
    for i, (local, s_i) in enumerate(systems):
        gi2 = gains_iq(s_i, 1j * omega, mode=mode)[3]
        scale[i] = i_ph * 2 * local.absorption_prefactor * params.mu_rf / HBAR
        samples[i] = scale[i] * gi2
    dx = params.cell_length / slices
    x = (np.arange(slices) + 0.5) * dx
    return Transconductance(omega=omega, samples=samples, x=x,
                            cell_length=params.cell_length, scale=scale)


def _p_bar(params: AtomicParams, slices: int) -> float:
    p0 = params.replace(temperature=0.0)
    return probe_transmission(_steady_rho(p0), p0, slices)[0]


def intrinsic_gain_kappa(params: AtomicParams, sys: LiouvillianSystem | None, omega,
                         slices: int = 1) -> np.ndarray:
    """Frequency-dependent intrinsic gain kappa(i omega) [W/Hz].

    ``kappa = P_bar * integral 2 k_p N0 mu12^2 / (eps0 hbar Omega_p(x)) G_I2(x, i omega) dx``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    p_bar = _p_bar(params, slices)
    if slices == 1:
        systems = [(params, sys if sys is not None else build_liouvillian(params))]
    else:
        systems = _slice_systems(params, slices)
    dx = params.cell_length / slices
    acc = np.zeros(omega.size, dtype=complex)
    for local, s_i in systems:
        acc += 2 * local.absorption_prefactor * gains_iq(s_i, 1j * omega)[3] * dx
    return p_bar * acc


def kappa_bridge(params: AtomicParams, gq: Transconductance) -> np.ndarray:
    """kappa from the transconductance: (hbar w_p / q_e eta)(hbar / mu_rf) * integral g_q dx."""
    return gq.integrated / photocurrent_per_watt(params) * HBAR / params.mu_rf


def photocurrent_response(gq: Transconductance, e_spectrum, omega=None) -> np.ndarray:
    """Photocurrent spectrum from the signal field spectrum.

    ``dI(i w) = integral g_q(x, i w) [E(x, i w) + conj(E(x, -i w))] / 2 dx``
    for a field uniform along the cell. The grid must be symmetric about 0.

    Raises
    ------
    GridMismatch
        If the grid is not symmetric or the spectrum length differs.
    """
    w = gq.omega if omega is None else np.asarray(omega, dtype=float)
    e = np.asarray(e_spectrum, dtype=complex)
    if e.shape != w.shape or w.shape != gq.omega.shape or not np.allclose(w, gq.omega):
        raise GridMismatch("spectrum and transconductance grids differ")
    if not np.allclose(w, -w[::-1], rtol=0, atol=1e-12 * max(np.abs(w).max(), 1.0)):
        raise GridMismatch("frequency grid must be symmetric about 0")
    return gq.integrated * 0.5 * (e + np.conj(e[::-1]))


@dataclass
class PoleZero:
    poles: np.ndarray
    zeros: np.ndarray
    gain: float
    dc_gain: float

    def evaluate(self, s) -> np.ndarray:
        """Rational reconstruction gain * prod(s - z) / prod(s - p)."""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        num = np.prod(s[:, None] - self.zeros[None, :], axis=1)
        den = np.prod(s[:, None] - self.poles[None, :], axis=1)
        return self.gain * num / den


def pole_zero(rr: RealRealization, scale: float = 1.0, channel: str = "I",
              part: str = "im", zero_tol: float = 1e-8) -> PoleZero:
    """Poles, transmission zeros and gains of ``scale * c (sI - A)^-1 b``.

    Zeros are the finite generalized eigenvalues of the Rosenbrock pencil
    ``([[A, b], [c, 0]], diag(I, 0))``, computed on a time-rescaled system.

    Raises
    ------
    DegenerateRealization
        If the number of finite zeros is not below the number of poles.
    """
    b, c = rr.vectors(channel, part)
    a = rr.a
    n = a.shape[0]
    t0 = 1.0 / np.abs(np.linalg.eigvals(a)).max()
    an = a * t0
    bn = b / np.linalg.norm(b)
    cn = c / np.linalg.norm(c)
    pencil_a = np.block([[an, bn[:, None]], [cn[None, :], np.zeros((1, 1))]])
    pencil_b = np.zeros((n + 1, n + 1))
    pencil_b[:n, :n] = np.eye(n)
    alpha, beta = linalg.eig(pencil_a, pencil_b, right=False, homogeneous_eigvals=True)
    finite = np.abs(beta) > zero_tol * np.abs(alpha)
    zeros = np.sort_complex(alpha[finite] / beta[finite] / t0)
    poles = np.sort_complex(np.linalg.eigvals(a))
    if zeros.size >= poles.size:
        raise DegenerateRealization(f"{zeros.size} zeros for {poles.size} poles")
    rel_deg = n - zeros.size
    markov = c @ np.linalg.matrix_power(a, rel_deg - 1) @ b
    dc = -c @ np.linalg.solve(a, b)
    return PoleZero(poles=poles, zeros=zeros, gain=float(scale * markov), dc_gain=float(scale * dc))


def impulse_step_response(rr: RealRealization, t_grid, scale: float = 1.0,
                          channel: str = "I", part: str = "im"):
    """Impulse and step responses of ``scale * c (sI - A)^-1 b`` on a uniform grid.

    The impulse response ``c exp(A t) b`` is propagated with one matrix
    exponential per step; the step response uses the exact integral
    ``c A^-1 (exp(A t) - I) b``.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("t_grid must be 1-D with at least 2 points")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("t_grid must be uniform")
    b, c = rr.vectors(channel, part)
    a = rr.a
    phi = linalg.expm(a * dt[0])
    x = linalg.expm(a * t[0]) @ b
    states = np.empty((t.size, b.size))
    for i in range(t.size):
        states[i] = x
        x = phi @ x
    impulse = scale * states @ c
    a_inv_c = np.linalg.solve(a.T, c)
    step = scale * (states - b[None, :]) @ a_inv_c
    return impulse, step


def rise_time(t, step) -> float:
    """10 %-90 % rise time of the running-max envelope of the normalized step."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(step, dtype=float)
    final = y[-1]
    if final == 0:
        raise ValueError("step response has zero final value")
    env = np.maximum.accumulate(y / final)

    def crossing(level):
        i = int(np.argmax(env >= level))
        if env[i] < level:
            raise ValueError("step response never reaches the requested level")
        if i == 0:
            return t[0]
        return t[i - 1] + (level - env[i - 1]) * (t[i] - t[i - 1]) / (env[i] - env[i - 1])

    return crossing(0.9) - crossing(0.1)


def bandwidth_3db(rr: RealRealization, channel: str = "I", part: str = "im",
                  fmax: float = 1e8) -> float:
    """First frequency [Hz] where |G(i 2 pi f)| falls to |G(0)|/sqrt(2)."""
    g0 = abs(rr.evaluate(0.0, channel, part)[0])
    target = g0 / np.sqrt(2)
    f = np.logspace(0, np.log10(fmax), 2000)
    mag = np.abs(rr.evaluate(1j * TWO_PI * f, channel, part))
    below = np.flatnonzero(mag < target)
    if below.size == 0:
        raise ValueError("no 3 dB crossing below fmax")
    j = below[0]
    if j == 0:
        return float(f[0])
    fn = lambda x: abs(rr.evaluate(1j * TWO_PI * x, channel, part)[0]) - target
    return float(optimize.brentq(fn, f[j - 1], f[j], xtol=1e-9 * f[j]))


def lti_rho21_response(sys: LiouvillianSystem, omega_sig, dt: float,
                       omega_lo: float | None = None) -> np.ndarray:
    """Linear prediction of delta rho_21(t) for a sampled complex signal Rabi frequency.

    The input is taken piecewise linear between samples and the state equation
    ``dz/dt = C0 dz + (F43 Omega/2 + F34 conj(Omega)/2) z0`` is integrated
    exactly on that interpolant, starting from the steady state. Passing
    ``omega_lo`` enables the small-signal warning.
    """
    u = np.asarray(omega_sig, dtype=complex)
    if omega_lo is not None:
        small_signal_check(u, omega_lo)
    n = sys.c0.shape[0]
    b = 0.5 * np.stack([sys.f43 @ sys.z0, sys.f34 @ sys.z0], axis=1)
    # expm of [[A dt, I, 0], [0, 0, I], [0, 0, 0]] yields the first-order-hold integrals
    blk = np.zeros((3 * n, 3 * n), dtype=complex)
    blk[:n, :n] = sys.c0 * dt
    blk[:n, n:2 * n] = np.eye(n)
    blk[n:2 * n, 2 * n:] = np.eye(n)
    eb = linalg.expm(blk)
    phi = eb[:n, :n]
    p0 = eb[:n, n:2 * n] * dt
    p1 = eb[:n, 2 * n:] * dt
    v_lo = (p0 - p1) @ b
    v_hi = p1 @ b
    drive = np.stack([u, np.conj(u)], axis=1)
    # forced part by superposition, then one pass of the homogeneous recursion
    forced = drive[:-1] @ v_lo.T + drive[1:] @ v_hi.T
    z = np.zeros(n, dtype=complex)
    out = np.zeros(u.size, dtype=complex)
    row = sys.out_row
    for k in range(u.size - 1):
        z = phi @ z + forced[k]
        out[k + 1] = row @ z
    return out
