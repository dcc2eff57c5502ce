import numpy as np
import pytest

from rydex.atomic import (DIM, _u4, build_decay_superoperator, build_hamiltonian,
                          build_liouvillian, commutator_superoperator, dc_sweep, kappa_from_slope,
                          probe_power, steady_state, unvec, vec, velocity_superoperator)
from rydex.constants import HBAR
from rydex.errors import GridTooCoarse


def test_vec_roundtrip_and_rho21_index(rng):
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.array_equal(unvec(vec(m)), m)
    assert vec(m)[1] == m[1, 0]


def test_vec_kron_identity(rng):
    a, x, b = (rng.standard_normal((4, 4)) for _ in range(3))
    assert np.allclose(vec(a @ x @ b), np.kron(b.T, a) @ vec(x))


def test_trace_row_annihilates_generator(params0):
    a0 = commutator_superoperator(build_hamiltonian(params0)) + build_decay_superoperator(params0)
    assert np.abs(_u4() @ a0).max() < 1e-9 * np.abs(a0).max()


def test_q_is_orthonormal_with_trace_column(sys0):
    q = sys0.q
    assert np.allclose(q.T @ q, np.eye(DIM), atol=1e-13)
    assert np.allclose(q[:, 0], _u4())


def test_reduced_blocks_match_full_generator(sys0):
    b = sys0.q.T @ sys0.a0 @ sys0.q
    assert np.abs(b[0]).max() < 1e-6
    assert np.allclose(b[1:, 1:], sys0.c0)
    assert np.allclose(b[1:, 0], sys0.w0)


def test_steady_state_is_a_density_matrix(sys0):
    z0, rho = steady_state(sys0)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.allclose(rho, rho.conj().T, atol=1e-13)
    assert np.linalg.eigvalsh(rho).min() > -1e-12
    # stationary under the full generator
    assert np.abs(sys0.a0 @ vec(rho)).max() < 1e-6 * np.abs(sys0.a0).max()


def test_steady_state_matches_null_space(sys0):
    w, v = np.linalg.eig(sys0.a0)
    k = np.argmin(np.abs(w))
    rho = unvec(v[:, k])
    rho = rho / np.trace(rho)
    assert np.allclose(rho, steady_state(sys0)[1], atol=1e-9)


def test_poles_stable(sys0):
    assert np.linalg.eigvals(sys0.c0).real.max() < 0


def test_committed_transmission_is_partial(params0):
    ratio = probe_power(params0) / params0.probe_power_in
    assert 0.1 < ratio < 0.9


def test_sliced_transmission_converges(params0):
    p1 = probe_power(params0, slices=1)
    p32 = probe_power(params0, slices=32)
    p64 = probe_power(params0, slices=64)
    assert abs(p64 - p32) < abs(p32 - p1)


def test_dc_sweep_grid_checks(params0):
    with pytest.raises(GridTooCoarse):
        dc_sweep(params0, [0.01, 0.02])
    with pytest.raises(ValueError):
        dc_sweep(params0, [0.03, 0.02, 0.04])


def test_kappa_slope_matches_sweep_gradient(params0):
    e = params0.e_lo * np.linspace(0.99, 1.01, 5)
    _, ratio, slope = dc_sweep(params0, e)
    k_sweep = HBAR / params0.mu_rf * slope[2] * params0.probe_power_in
    assert k_sweep == pytest.approx(kappa_from_slope(params0), rel=1e-4)


def test_detuned_probe_absorbs_less(params0):
    p_res = probe_power(params0)
    p_off = probe_power(params0.replace(delta_p=20 * params0.gamma2))
    assert p_off > p_res


def test_velocity_generator_block_structure(cfg):
    p = cfg.atomic
    sys_ = build_liouvillian(p)
    assert np.abs(sys_.cv).max() > 0
    assert np.allclose(sys_.cv, sys_.q[:, 1:].T @ velocity_superoperator(p) @ sys_.q[:, 1:])
