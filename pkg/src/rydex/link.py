"""Waveform-level single-carrier link and discrete-time MIMO capacity.

The continuous-time chain is RF field -> atoms -> photodiode -> TIA -> IQ
downconversion at f_IF -> matched filter -> symbol-rate sampling. Voltages are
normalized by ``V_ref`` so that the baseband model reads
``y = sqrt(P_T / P_qref) H x + w`` with ``PSD[w]`` in 1/Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import sici

from .atomic import build_liouvillian, probe_transmission, _steady_rho
from .constants import ETA0, HBAR, K_B, Q_E, TWO_PI
from .dynamics import lti_rho21_response, photocurrent_per_watt, quantum_transconductance
from .errors import ClippedADC
from .noise import (bbr_field_psd, circuit_thermal_psd, coherence_factor, tia_output_psd)
from .params import AtomicParams, Config, LinkConfig, ReceiverChain
from .rk4 import rk4_master_solver

__all__ = [
    "los_field_strength",
    "qref_power",
    "baseband_noise_psd",
    "thermal_noise_two_ways",
    "qam_constellation",
    "qam_map",
    "pulse_shape",
    "BasebandFrame",
    "shape_symbols",
    "SingleCarrierResult",
    "simulate_single_carrier",
    "equivalent_noise_psd_dbm",
    "discrete_channel_step",
    "mutual_impedance",
    "coupling_matrix",
    "capacity",
    "mimo_capacity",
]


def _db(x):
    return 10.0 * np.log10(x)


def _lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def los_field_strength(cfg: LinkConfig, tx_power_dbm: float | None = None) -> float:
    """Free-space field amplitude |E| = sqrt(2 eta0 EIRP / (4 pi d^2)) [V/m]."""
    p = cfg.tx_power_dbm if tx_power_dbm is None else tx_power_dbm
    eirp = 1e-3 * _lin(p + cfg.bs_gain_db)
    return float(np.sqrt(2 * ETA0 * eirp / (4 * np.pi * cfg.distance**2)))


def _gq_at_if(params: AtomicParams, cfg: LinkConfig) -> complex:
    return complex(quantum_transconductance(None, params, [TWO_PI * cfg.f_if]).mean[0])


def qref_power(cfg: LinkConfig, chain: ReceiverChain, gq_at_if, params: AtomicParams) -> float:
    """Quantum reference power P_qref [W].

    ``1/sqrt(P_qref) = R_T K_c L |g_q| sqrt(8 pi eta0 / lambda^2) / (2 V_ref)``
    with lambda the carrier wavelength and g_q [S] taken at the IF.
    """
    lam = params.lambda_lo
    inv = (chain.r_t * chain.k_c * params.cell_length * abs(gq_at_if)
           * np.sqrt(8 * np.pi * ETA0 / lam**2) / (2 * cfg.v_ref))
    return float(1.0 / inv**2)


def _i_ph_bar(params: AtomicParams) -> float:
    p0 = params.replace(temperature=0.0)
    return photocurrent_per_watt(params) * probe_transmission(_steady_rho(p0), p0)[0]


def baseband_noise_psd(cfg: LinkConfig, chain: ReceiverChain, params: AtomicParams, gq_at_if,
                       zeta: float | None = None, e_n_bb: float | None = None,
                       i_ph_bar: float | None = None, temperature: float | None = None) -> dict:
    """Baseband noise PSD components in normalized units [1/Hz].

    ``n_bbr = (R_T K_c L |g_q| sqrt(zeta) sqrt(2) E_n / (sqrt(2) V_ref))^2 / 2``,
    ``n_shot = (R_T K_c sqrt(2 q I) / V_ref)^2 / 2``,
    ``n_TIA = (V_n R_T / (V_ref (Z_in + R_s)))^2 / 2 + (I_n K_c R_T / V_ref)^2 / 2`` and
    ``n_th = (K_c R_T / V_ref)^2 4 kB T / R_s / 2``. RIN is added as ``n_rin`` in
    the same way as shot noise. ``E_n`` defaults to sqrt((4 pi / 3) eta0 B_nu).
    """
    t = params.temperature if temperature is None else temperature
    p_t = params.replace(temperature=t)
    if zeta is None:
        zeta = coherence_factor(params.cell_length / params.lambda_lo)
    if e_n_bb is None:
        e_n_bb = np.sqrt(bbr_field_psd(p_t, 1.0))
    if i_ph_bar is None:
        i_ph_bar = _i_ph_bar(params)
    g = chain.r_t * chain.k_c / cfg.v_ref
    lg = params.cell_length * abs(gq_at_if)
    out = {
        "n_bbr": 0.5 * (g * lg * np.sqrt(zeta) * np.sqrt(2) * e_n_bb / np.sqrt(2)) ** 2,
        "n_shot": 0.5 * (g * np.sqrt(2 * Q_E * i_ph_bar)) ** 2,
        "n_rin": 0.5 * g**2 * 2 * i_ph_bar**2 * _lin(chain.rin_dbc_hz),
        "n_tia": 0.5 * (chain.v_n_tia * chain.r_t / (cfg.v_ref * (chain.z_in + chain.r_s))) ** 2
        + 0.5 * (chain.i_n_tia * g) ** 2,
        "n_th": 0.5 * g**2 * 4 * K_B * t / chain.r_s,
    }
    out = {k: float(v) for k, v in out.items()}
    out["total"] = float(sum(out.values()))
    out["sigma_w2"] = cfg.bandwidth * out["total"]
    return out


def thermal_noise_two_ways(cfg: LinkConfig, chain: ReceiverChain, temperature: float) -> dict:
    """Bias-resistor thermal noise in baseband units by two routes.

    ``direct`` is the baseband formula; ``via_output_psd`` maps the current PSD
    2 kB T / R_s through the TIA output PSD and the load; ``via_circuit`` takes
    the 4 kB T / R_s term of the combined circuit PSD, which carries no K_c.
    """
    direct = 0.5 * (chain.k_c * chain.r_t / cfg.v_ref) ** 2 * 4 * K_B * temperature / chain.r_s
    via_out = float(tia_output_psd(2 * K_B * temperature / chain.r_s, chain)) * chain.r_l / cfg.v_ref**2
    no_rs = chain.replace(i_n_tia=0.0, v_n_tia=0.0)
    via_circ = circuit_thermal_psd(no_rs, temperature) * chain.r_l / cfg.v_ref**2
    return {"direct": float(direct), "via_output_psd": via_out, "via_circuit": float(via_circ),
            "k_c_squared": chain.k_c**2}


# --- symbols and pulses -------------------------------------------------------

def qam_constellation(order: int) -> np.ndarray:
    """Gray-coded square QAM points with unit average energy, indexed by symbol value."""
    m = int(round(np.sqrt(order)))
    if m * m != order or m < 2:
        raise ValueError("order must be a square number >= 4")
    bits = int(np.log2(m))
    gray = np.arange(m) ^ (np.arange(m) >> 1)
    levels = np.empty(m)
    levels[gray] = 2 * np.arange(m) - (m - 1)
    idx = np.arange(order)
    pts = levels[idx >> bits] + 1j * levels[idx & (m - 1)]
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def qam_map(values, order: int) -> np.ndarray:
    return qam_constellation(order)[np.asarray(values, dtype=int)]


def pulse_shape(kind: str, sps_: int, span: int, rolloff: float = 0.35) -> np.ndarray:
    """Pulse sampled at ``sps_`` per symbol over +-``span`` symbols.

    ``sinc`` is a Hann-windowed Nyquist sinc with peak 1; ``rrc`` is the
    root-raised cosine scaled so that its self-convolution peaks at 1.
    """
    t = np.arange(-span * sps_, span * sps_ + 1) / sps_
    if kind == "sinc":
        win = 0.5 * (1 + np.cos(np.pi * t / (span + 1)))
        return np.sinc(t) * win
    if kind != "rrc":
        raise ValueError("pulse must be 'sinc' or 'rrc'")
    b = rolloff
    h = np.empty_like(t)
    sing = np.isclose(np.abs(4 * b * t), 1.0) if b > 0 else np.zeros(t.shape, bool)
    zero = np.isclose(t, 0.0)
    tt = t[~sing & ~zero]
    h[~sing & ~zero] = ((np.sin(np.pi * tt * (1 - b)) + 4 * b * tt * np.cos(np.pi * tt * (1 + b)))
                        / (np.pi * tt * (1 - (4 * b * tt) ** 2)))
    h[zero] = 1 - b + 4 * b / np.pi
    if sing.any():
        h[sing] = b / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
                                    + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b)))
    return h / np.sqrt(np.sum(h**2) / sps_)


@dataclass
class BasebandFrame:
    """Complex baseband samples with their rate and the symbol sampling instants."""

    samples: np.ndarray
    sample_rate: float
    pilot_index: np.ndarray
    symbols: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


def shape_symbols(symbols, cfg: LinkConfig) -> BasebandFrame:
    """Pulse-shaped Tx frame normalized to unit mean power."""
    n_sps = cfg.samples_per_symbol
    h = pulse_shape(cfg.pulse, n_sps, cfg.pulse_span, cfg.rolloff)
    pad = 2 * cfg.pulse_span
    up = np.zeros((symbols.size + 2 * pad) * n_sps, dtype=complex)
    up[(pad + np.arange(symbols.size)) * n_sps] = symbols
    x = np.convolve(up, h)[cfg.pulse_span * n_sps: cfg.pulse_span * n_sps + up.size]
    active = slice(pad * n_sps, (pad + symbols.size) * n_sps)
    x = x / np.sqrt(np.mean(np.abs(x[active]) ** 2))
    return BasebandFrame(samples=x, sample_rate=n_sps / cfg.symbol_period,
                         pilot_index=(pad + np.arange(symbols.size)) * n_sps, symbols=symbols)


def _matched_filter(y, cfg: LinkConfig) -> np.ndarray:
    n_sps = cfg.samples_per_symbol
    h = pulse_shape(cfg.pulse, n_sps, cfg.pulse_span, cfg.rolloff)
    h = h / np.sum(h * h)
    return np.convolve(y, h[::-1])[cfg.pulse_span * n_sps: cfg.pulse_span * n_sps + y.size]


# --- single-carrier simulation ------------------------------------------------

@dataclass
class SingleCarrierResult:
    tx: BasebandFrame
    t: np.ndarray
    rx_baseband: np.ndarray
    rx_symbols: np.ndarray
    tx_symbols: np.ndarray
    evm: float
    snr_db: float
    gain: complex
    delay_samples: int
    noise: dict
    e_sig: float
    p_qref: float
    extra: dict = field(default_factory=dict)


def _photocurrent_lti(params, omega_sig, dt):
    sys = build_liouvillian(params.replace(temperature=0.0))
    drho = lti_rho21_response(sys, omega_sig, dt)
    p0 = params.replace(temperature=0.0)
    p_bar = probe_transmission(_steady_rho(p0), p0)[0]
    # dP = P_bar * 2 L pref * Im d rho21 to first order
    return photocurrent_per_watt(params) * p_bar * 2 * params.cell_length \
        * params.absorption_prefactor * drho.imag


def _photocurrent_rk4(params, omega_sig, dt, cfg: LinkConfig):
    ratio = dt / cfg.rk_step
    dec = int(round(ratio))
    if abs(ratio - dec) > 1e-9 or dec < 1:
        raise ValueError("sample period must be an integer multiple of rk_step")
    t_s = np.arange(omega_sig.size) * dt

    def drive(t):
        return np.interp(t, t_s, omega_sig.real) + 1j * np.interp(t, t_s, omega_sig.imag)

    p0 = params.replace(temperature=0.0)
    traj = rk4_master_solver(p0, drive, (0.0, t_s[-1]), dt=cfg.rk_step, decimation=dec)
    p_bar = probe_transmission(_steady_rho(p0), p0)[0]
    return photocurrent_per_watt(params) * (traj.power - p_bar)


def _evaluate(y_mf, frame: BasebandFrame, cfg: LinkConfig, max_delay: int):
    """Genie timing: pick the sample delay with the smallest data-aided EVM."""
    guard = cfg.pulse_span
    sl = slice(guard, frame.symbols.size - guard) if frame.symbols.size > 2 * guard + 4 \
        else slice(0, frame.symbols.size)
    ref = frame.symbols[sl]
    best = None
    for d in range(max_delay + 1):
        idx = frame.pilot_index + d
        if idx[-1] >= y_mf.size:
            break
        r = y_mf[idx]
        rr = r[sl]
        g = np.vdot(ref, rr) / np.vdot(ref, ref)
        err = np.mean(np.abs(rr / g - ref) ** 2) / np.mean(np.abs(ref) ** 2)
        if best is None or err < best[0]:
            best = (err, d, g, r)
    err, d, g, r = best
    return float(np.sqrt(err)), d, complex(g), r / g


def simulate_single_carrier(config: Config, mode: str = "lti", noise: bool = True,
                            seed: int | None = None, n_symbols: int | None = None,
                            e_sig: float | None = None, timing_offset: int = 0,
                            rng_noise: np.random.Generator | None = None) -> SingleCarrierResult:
    """Single-carrier downlink through the atomic receiver.

    Parameters
    ----------
    mode : {"lti", "rk4"}
        ``lti`` propagates the linearized state-space response (the g_q path);
        ``rk4`` integrates the full master equation and reads P(t).
    noise : bool
        Inject white noise at the TIA output with the baseband noise PSD.
    e_sig : float, optional
        Signal field amplitude [V/m]; defaults to the line-of-sight value.
    timing_offset : int
        Extra sampling delay in samples added to the genie timing.

    Raises
    ------
    ClippedADC
        If the normalized baseband exceeds 1 (i.e. V_ref).
    """
    params, chain, cfg = config.atomic, config.receiver, config.link
    seed = cfg.seed if seed is None else seed
    n_sym = cfg.n_symbols if n_symbols is None else n_symbols
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    values = rng.integers(0, cfg.modulation_order, n_sym)
    frame = shape_symbols(qam_map(values, cfg.modulation_order), cfg)
    fs = frame.sample_rate
    dt = 1.0 / fs
    t = frame.t
    e0 = los_field_strength(cfg) if e_sig is None else float(e_sig)
    carrier = np.exp(1j * TWO_PI * cfg.f_if * t)
    omega_sig = params.mu_rf * e0 / HBAR * frame.samples * carrier
    if mode == "lti":
        d_i = _photocurrent_lti(params, omega_sig, dt)
    elif mode == "rk4":
        d_i = _photocurrent_rk4(params, omega_sig, dt, cfg)
    else:
        raise ValueError("mode must be 'lti' or 'rk4'")
    v = chain.r_t * chain.k_c * d_i / cfg.v_ref
    gq = _gq_at_if(params, cfg)
    nb = baseband_noise_psd(cfg, chain, params, gq)
    if noise:
        if rng_noise is None:
            rng_noise = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        v = v + rng_noise.standard_normal(v.size) * np.sqrt(nb["total"] * fs)
    y = v * np.conj(carrier)
    y_mf = _matched_filter(y, cfg)
    if np.abs(y_mf).max() > 1.0:
        raise ClippedADC(f"baseband peak {np.abs(y_mf).max():.3g} exceeds V_ref")
    evm, d, g, rx = _evaluate(y_mf, frame, cfg, max_delay=2 * cfg.samples_per_symbol)
    if timing_offset:
        d = d + int(timing_offset)
        idx = np.clip(frame.pilot_index + d, 0, y_mf.size - 1)
        rx = y_mf[idx] / g
        ref = frame.symbols
        evm = float(np.sqrt(np.mean(np.abs(rx - ref) ** 2) / np.mean(np.abs(ref) ** 2)))
    return SingleCarrierResult(tx=frame, t=t, rx_baseband=y_mf, rx_symbols=rx,
                               tx_symbols=frame.symbols, evm=evm, snr_db=float(-20 * np.log10(evm)),
                               gain=g, delay_samples=d, noise=nb, e_sig=e0,
                               p_qref=qref_power(cfg, chain, gq, params),
                               extra={"e_sig_over_e_lo": e0 / params.e_lo, "gq_at_if": gq,
                                      "photocurrent": d_i})


def equivalent_noise_psd_dbm(result: SingleCarrierResult, config: Config) -> float:
    """Received isotropic power minus SNR spread over the bandwidth [dBm/Hz]."""
    cfg, lam = config.link, config.atomic.lambda_lo
    p_rx = cfg.tx_power_dbm + cfg.bs_gain_db + 20 * np.log10(lam / (4 * np.pi * cfg.distance))
    return float(p_rx - result.snr_db - 10 * np.log10(cfg.bandwidth))


# --- discrete-time model and MIMO ---------------------------------------------

def discrete_channel_step(x, h, scale: float, sigma_w: float, rng: np.random.Generator):
    """y = scale * H x + w with w ~ CN(0, sigma_w^2).

    ``x`` is (n_tx,) or (n_tx, n). ``h`` is a scalar, an (n_rx, n_tx) matrix or
    an (n_taps, n_rx, n_tx) multipath stack convolved along the sample axis.
    """
    if sigma_w < 0:
        raise ValueError("sigma_w must be >= 0")
    x = np.asarray(x, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if h.ndim == 3:
        xs = x if x.ndim == 2 else x[:, None]
        y = np.zeros((h.shape[1], xs.shape[1]), dtype=complex)
        for m in range(h.shape[0]):
            y[:, m:] += h[m] @ xs[:, :xs.shape[1] - m]
        if x.ndim == 1:
            y = y[:, 0]
    elif h.ndim == 0:
        y = h * x
    else:
        y = h @ x
    y = scale * y
    if sigma_w > 0:
        w = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) * sigma_w / np.sqrt(2)
        y = y + w
    return y


def mutual_impedance(spacing_wl: float, length_wl: float = 0.5) -> complex:
    """Induced-EMF mutual impedance of two parallel side-by-side dipoles [ohm]."""
    k = TWO_PI
    d, l = spacing_wl, length_wl
    u0 = k * d
    u1 = k * (np.sqrt(d**2 + l**2) + l)
    u2 = k * (np.sqrt(d**2 + l**2) - l)
    si0, ci0 = sici(u0)
    si1, ci1 = sici(u1)
    si2, ci2 = sici(u2)
    r = ETA0 / (4 * np.pi) * (2 * ci0 - ci1 - ci2)
    x = -ETA0 / (4 * np.pi) * (2 * si0 - si1 - si2)
    return complex(r, x)


_Z_SELF_HALFWAVE = complex(73.08, 42.51)


def coupling_matrix(n: int, spacing_wl: float = 0.5, length_wl: float = 0.5) -> np.ndarray:
    """Receive coupling matrix (Z_A + Z_L)(Z + Z_L I)^-1 of a uniform linear array.

    Loads are conjugate-matched to the isolated element, so the matrix is the
    identity without coupling (unit self-term normalization).
    """
    z = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            z[i, j] = _Z_SELF_HALFWAVE if i == j else mutual_impedance(abs(i - j) * spacing_wl,
                                                                      length_wl)
    z_l = np.conj(_Z_SELF_HALFWAVE)
    return (_Z_SELF_HALFWAVE + z_l) * np.linalg.inv(z + z_l * np.eye(n))


def capacity(h: np.ndarray, snr: float, scheme: str = "svd_waterfill") -> float:
    """log-det capacity [bit/s/Hz] for y = sqrt(snr) H x + w with E||x||^2 = 1, E|w_i|^2 = 1."""
    sv2 = np.linalg.svd(h, compute_uv=False) ** 2
    n_tx = h.shape[1]
    if scheme == "equal":
        return float(np.sum(np.log2(1 + snr * sv2 / n_tx)))
    if scheme != "svd_waterfill":
        raise ValueError("scheme must be 'svd_waterfill' or 'equal'")
    g = snr * sv2[sv2 > 0]
    if g.size == 0:
        return 0.0
    g = np.sort(g)[::-1]
    for k in range(g.size, 0, -1):
        mu = (1 + np.sum(1 / g[:k])) / k
        if mu > 1 / g[k - 1]:
            p = mu - 1 / g[:k]
            return float(np.sum(np.log2(1 + g[:k] * p)))
    return 0.0


def _link_snrs(config: Config, tx_power_dbm: float) -> tuple[float, float]:
    """Per-link SNR (path loss included) for the quantum and classical receivers."""
    params, chain, cfg = config.atomic, config.receiver, config.link
    lam = params.lambda_lo
    p_t = 1e-3 * _lin(tx_power_dbm + cfg.bs_gain_db)
    path = (lam / (4 * np.pi * cfg.distance)) ** 2
    gq = _gq_at_if(params, cfg) * _lin(cfg.gq_improvement_db / 2)
    p_qref = qref_power(cfg, chain, gq, params)
    nb = baseband_noise_psd(cfg, chain, params, gq)
    snr_q = p_t * path / p_qref / nb["sigma_w2"]
    noise_c = K_B * params.temperature * _lin(cfg.classical_nf_db) * cfg.bandwidth
    snr_c = p_t * path * _lin(cfg.ue_gain_classical_db) / noise_c
    return float(snr_q), float(snr_c)


def mimo_capacity(config: Config, n_antennas: int = 8, tx_power_dbm=None, trials: int = 200,
                  seed: int | None = None, schemes=("svd_waterfill", "equal"),
                  receivers=("quantum", "classical_mc"), coupling: np.ndarray | None = None) -> dict:
    """Rayleigh MIMO capacity samples.

    H has i.i.d. CN(0, 1) entries (E||H||_F^2 = n^2); the link budget enters
    through the per-link SNR. The classical receiver sees C H with C the
    mutual-coupling matrix; the quantum receiver uses H directly.

    Returns
    -------
    dict
        ``{"p_t_dbm": array, (scheme, receiver): array (n_power, trials)}``.
    """
    cfg = config.link
    seed = cfg.seed if seed is None else seed
    if trials < 1:
        raise ValueError("trials must be >= 1")
    powers = np.atleast_1d(np.asarray(cfg.tx_power_dbm if tx_power_dbm is None else tx_power_dbm,
                                      dtype=float))
    if coupling is None:
        coupling = coupling_matrix(n_antennas, cfg.mc_spacing_wavelengths,
                                   cfg.mc_dipole_length_wavelengths)
    snrs = [_link_snrs(config, p) for p in powers]
    out = {"p_t_dbm": powers}
    for s in schemes:
        for r in receivers:
            out[(s, r)] = np.empty((powers.size, trials))
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
        h = (rng.standard_normal((n_antennas, n_antennas))
             + 1j * rng.standard_normal((n_antennas, n_antennas))) / np.sqrt(2)
        mats = {"quantum": h, "classical_mc": coupling @ h}
        for i, (snr_q, snr_c) in enumerate(snrs):
            for r in receivers:
                snr = snr_q if r == "quantum" else snr_c
                for s in schemes:
                    out[(s, r)][i, trial] = capacity(mats[r], snr, s)
    return out
