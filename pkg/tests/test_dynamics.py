import numpy as np
import pytest

from rydex.atomic import kappa_from_slope, signal_superoperator, steady_state, vec
from rydex.dynamics import (RealRealization, bandwidth_3db, default_frequency_grid, gains_iq,
                            impulse_step_response, intrinsic_gain_kappa, kappa_bridge,
                            lti_rho21_response, photocurrent_response, pole_zero,
                            quantum_transconductance, real_realization, rise_time,
                            small_signal_check, transfer_T)
from rydex.errors import GridMismatch, PoleHit
from rydex.rk4 import rk4_master_solver

TWO_PI = 2 * np.pi


def _full_transfer(sys_, k, l, s):
    """Oracle: resolvent of the unreduced 16x16 generator acting on S_kl vec(rho_bar)."""
    rho = steady_state(sys_)[1]
    rhs = signal_superoperator(k, l) @ vec(rho)
    return np.linalg.solve(s * np.eye(16) - sys_.a0, rhs)[1]


@pytest.mark.parametrize("f", [1e3, 1.5e5, 3e6])
@pytest.mark.parametrize("kl", [(3, 4), (4, 3)])
def test_reduced_transfer_matches_full_generator(sys0, f, kl):
    s = 1j * TWO_PI * f
    assert transfer_T(sys0, *kl, s) == pytest.approx(_full_transfer(sys0, *kl, s), rel=1e-9)


def test_transfer_vectorized(sys0):
    s = 1j * TWO_PI * np.array([1e3, 1e4, 1e5])
    assert np.allclose(transfer_T(sys0, 4, 3, s), [transfer_T(sys0, 4, 3, v) for v in s])


def test_pole_hit_raises(sys0):
    with pytest.raises(PoleHit):
        transfer_T(sys0, 4, 3, np.linalg.eigvals(sys0.c0)[0])


def test_sampled_and_rational_gains_agree(sys0):
    s = 1j * TWO_PI * default_frequency_grid(150e3, points=64)
    a = gains_iq(sys0, s, mode="sampled")
    b = gains_iq(sys0, s, mode="rational")
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-9, atol=1e-12 * np.abs(x).max())


def test_split_parts_are_real_on_real_axis(sys0):
    sigma = -np.array([1e4, 1e5, 1e6])
    parts = gains_iq(sys0, sigma + 0j)[2:]
    scale = max(np.abs(g).max() for g in parts)
    for g in parts:
        assert np.abs(g.imag).max() < 1e-9 * scale


def test_gi2_dominates_quadrature(sys0):
    _, _, _, gi2, _, gq2 = gains_iq(sys0, 0j)
    assert abs(gi2) > 10 * abs(gq2)


def test_real_realization_is_real(sys0):
    rr = real_realization(sys0)
    assert rr.a.dtype == float and rr.b_i.dtype == float
    ev_a = np.linalg.eigvals(rr.a)
    ev_c = np.linalg.eigvals(sys0.c0)
    dist = np.abs(ev_a[:, None] - ev_c[None, :]).min(axis=1)
    assert dist.max() < 1e-8 * np.abs(ev_c).max()


def test_kappa_transfer_matches_slope(params0, sys0):
    k = intrinsic_gain_kappa(params0, sys0, [0.0])[0]
    assert k.real == pytest.approx(kappa_from_slope(params0), rel=1e-6)
    assert abs(k.imag) < 1e-12 * abs(k)


def test_kappa_bridge(params0, sys0):
    w = TWO_PI * np.array([0.0, 1e5, 1e6])
    gq = quantum_transconductance(sys0, params0, w)
    assert np.allclose(kappa_bridge(params0, gq), intrinsic_gain_kappa(params0, sys0, w),
                       rtol=1e-12)


def test_sliced_transconductance_converges(params0):
    w = [0.0, TWO_PI * 1.5e5]
    g = [quantum_transconductance(None, params0, w, slices=n).integrated for n in (1, 16, 32)]
    assert np.abs(g[2] - g[1]).max() < np.abs(g[1] - g[0]).max()


def test_photocurrent_response_grid_checks(params0, sys0):
    w = TWO_PI * np.linspace(-1e5, 1e5, 11)
    gq = quantum_transconductance(sys0, params0, w)
    e = np.ones(11, dtype=complex)
    out = photocurrent_response(gq, e)
    assert np.allclose(out, gq.integrated)
    with pytest.raises(GridMismatch):
        photocurrent_response(gq, e[:5])
    gq_bad = quantum_transconductance(sys0, params0, TWO_PI * np.linspace(0, 1e5, 11))
    with pytest.raises(GridMismatch):
        photocurrent_response(gq_bad, e)


def test_pole_zero_counts_and_reconstruction(sys0, params0):
    rr = real_realization(sys0)
    scale = quantum_transconductance(sys0, params0, [0.0]).scale[0]
    pz = pole_zero(rr, scale)
    assert pz.poles.size == 15 and pz.zeros.size == 13
    s = 1j * TWO_PI * np.logspace(2, 7, 50)
    ref = scale * rr.evaluate(s)
    assert np.max(np.abs(pz.evaluate(s) - ref) / np.abs(ref)) < 1e-6
    assert pz.dc_gain == pytest.approx(scale * rr.evaluate(0.0)[0].real, rel=1e-9)


def _first_order(tau):
    return RealRealization(a=np.array([[-1 / tau]]), b_i=np.array([1 / tau]), b_q=np.zeros(1),
                           c_re=np.zeros(1), c_im=np.array([1.0]))


def test_rise_time_and_bandwidth_first_order():
    tau = 1e-6
    rr = _first_order(tau)
    t = np.linspace(0, 30 * tau, 60001)
    imp, step = impulse_step_response(rr, t)
    assert np.allclose(step, 1 - np.exp(-t / tau), atol=1e-12)
    assert np.allclose(imp, np.exp(-t / tau) / tau, rtol=1e-9)
    assert rise_time(t, step) == pytest.approx(np.log(9) * tau, rel=1e-6)
    assert bandwidth_3db(rr) == pytest.approx(1 / (TWO_PI * tau), rel=1e-8)


def test_step_is_integral_of_impulse(sys0):
    rr = real_realization(sys0)
    # slowest pole is near -5e4 rad/s, so settle for 400 us
    t = np.linspace(0, 400e-6, 400001)
    imp, step = impulse_step_response(rr, t)
    trap = np.concatenate(([0.0], np.cumsum(0.5 * (imp[1:] + imp[:-1]) * np.diff(t))))
    # trapezoid error is O((|p| dt)^2) for the fastest poles
    assert np.allclose(trap, step, atol=1e-4 * np.abs(step).max())
    assert step[-1] == pytest.approx(rr.evaluate(0.0)[0].real, rel=1e-6)


def test_uniform_grid_required(sys0):
    with pytest.raises(ValueError):
        impulse_step_response(real_realization(sys0), [0.0, 1e-6, 3e-6])


def test_lti_tone_matches_frequency_response(sys0, params0):
    f = 150e3
    dt = 10e-9
    eps = 1e-3 * params0.omega_lo
    t = np.arange(0, 400e-6, dt)
    u = eps * np.exp(1j * TWO_PI * f * t)
    d = lti_rho21_response(sys0, u, dt)
    s = 1j * TWO_PI * f
    pred = 0.5 * eps * (transfer_T(sys0, 4, 3, s) * np.exp(s * t)
                        + transfer_T(sys0, 3, 4, -s) * np.exp(-s * t))
    tail = t > 350e-6
    assert np.max(np.abs(d[tail] - pred[tail])) < 1e-4 * np.max(np.abs(pred))


def test_lti_matches_rk4_single_tone(sys0, params0):
    f = 150e3
    dt = 1e-9
    eps = 1e-3 * params0.omega_lo
    t_end = 20e-6
    fn = lambda t: eps * np.exp(1j * TWO_PI * f * t)
    traj = rk4_master_solver(params0, fn, (0.0, t_end), dt=dt, decimation=100)
    rho_bar = steady_state(sys0)[1]
    d_rk = traj.rho21 - rho_bar[1, 0]
    d_lti = lti_rho21_response(sys0, fn(traj.t), 100 * dt)
    nmse = np.sum(np.abs(d_rk - d_lti) ** 2) / np.sum(np.abs(d_lti) ** 2)
    assert 10 * np.log10(nmse) < -30


def test_small_signal_warning(params0):
    with pytest.warns(RuntimeWarning):
        small_signal_check([0.5 * params0.omega_lo], params0.omega_lo)
    assert small_signal_check([1e-4 * params0.omega_lo], params0.omega_lo) == pytest.approx(1e-4)


def test_frequency_grid_contract():
    f = default_frequency_grid(points=512)
    assert f.size == 512 and np.all(np.diff(f) > 0)
    assert 150e3 in default_frequency_grid(150e3, points=16)
