"""Fixed-step RK4 integration of the vectorized master equation (reference oracle)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .atomic import (build_decay_superoperator, build_hamiltonian, commutator_superoperator,
                     signal_superoperator, steady_state, build_liouvillian, unvec, vec)
from .errors import UnstableStep
from .params import AtomicParams

__all__ = ["Trajectory", "rk4_master_solver"]


@dataclass
class Trajectory:
    """Decimated RK4 output.

    Attributes
    ----------
    t : ndarray
        Sample times [s].
    rho : ndarray, shape (n, 4, 4)
    power : ndarray
        Transmitted probe power P(t) [W] (uniform thin cell).
    """

    t: np.ndarray
    rho: np.ndarray
    power: np.ndarray

    @property
    def rho21(self) -> np.ndarray:
        return self.rho[:, 1, 0]


def rk4_master_solver(params: AtomicParams, omega_sig_fn: Callable[[np.ndarray], np.ndarray] | None,
                      t_span: tuple[float, float], dt: float = 1e-9, decimation: int = 1,
                      rho0: np.ndarray | None = None, trace_tol: float = 1e-6) -> Trajectory:
    """Integrate d rho/dt = -i[H(t), rho] + D[rho] with classical RK4.

    ``H(t)`` carries the signal Rabi frequency ``omega_sig_fn(t)`` in the LO
    rotating frame. The trajectory starts from the zero-velocity steady state
    unless ``rho0`` is given.

    Raises
    ------
    ValueError
        If ``dt`` exceeds the explicit stability guard 2 / max|eig(A0)|.
    UnstableStep
        If the trace drifts from 1 by more than ``trace_tol``.
    """
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    if decimation < 1:
        raise ValueError("decimation must be >= 1")
    a0 = commutator_superoperator(build_hamiltonian(params)) + build_decay_superoperator(params)
    lam_max = np.abs(np.linalg.eigvals(a0)).max()
    if dt > 2.0 / lam_max:
        raise ValueError(f"dt={dt:.3e} s exceeds the stability guard {2.0 / lam_max:.3e} s")
    s43 = 0.5 * signal_superoperator(4, 3)
    s34 = 0.5 * signal_superoperator(3, 4)
    if rho0 is None:
        rho0 = steady_state(build_liouvillian(params.replace(temperature=0.0)))[1]
    x = vec(np.asarray(rho0, dtype=complex)).copy()
    n_steps = int(round((t1 - t0) / dt))
    times = t0 + dt * np.arange(n_steps + 1)
    if omega_sig_fn is None:
        drive = np.zeros(2 * n_steps + 1, dtype=complex)
    else:
        # signal sampled at every step and half step
        drive = np.asarray(omega_sig_fn(t0 + 0.5 * dt * np.arange(2 * n_steps + 1)),
                           dtype=complex)
    out = np.empty(((n_steps // decimation) + 1, 16), dtype=complex)
    diag_idx = np.array([0, 5, 10, 15])

    def gen(u):
        return a0 + u * s43 + np.conj(u) * s34

    a_0 = gen(drive[0])
    out[0] = x
    for k in range(n_steps):
        a_h = gen(drive[2 * k + 1])
        a_1 = gen(drive[2 * k + 2])
        k1 = a_0 @ x
        k2 = a_h @ (x + 0.5 * dt * k1)
        k3 = a_h @ (x + 0.5 * dt * k2)
        k4 = a_1 @ (x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        a_0 = a_1
        if (k + 1) % decimation == 0:
            out[(k + 1) // decimation] = x
        if k % 1024 == 0:
            drift = abs(x[diag_idx].sum() - 1.0)
            if not np.isfinite(drift) or drift > trace_tol:
                raise UnstableStep(f"trace drift {drift:.3e} at t={times[k + 1]:.3e} s")
    keep = np.arange(0, n_steps + 1, decimation)
    drift = abs(x[diag_idx].sum() - 1.0)
    if not np.isfinite(drift) or drift > trace_tol:
        raise UnstableStep(f"trace drift {drift:.3e} at the end of the run")
    rho = np.array([unvec(v) for v in out])
    alpha = -params.absorption_prefactor * rho[:, 1, 0].imag
    power = params.probe_power_in * np.exp(-2.0 * alpha * params.cell_length)
    return Trajectory(t=times[keep], rho=rho, power=power)
