"""Blackbody-radiation noise, receiver-chain noise and noise factors.

All PSDs are double-sided. Current PSDs are in A^2/Hz, TIA output PSDs in
W/Hz at the matched load.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .constants import C0, ETA0, H_PLANCK, K_B, Q_E, TWO_PI
from .params import AtomicParams, ReceiverChain

__all__ = [
    "spectral_radiance",
    "f_n",
    "bbr_correlation",
    "normalized_correlation",
    "coherence_factor",
    "bbr_field_psd",
    "bbr_current_psd",
    "snr_bound_and_sensitivity",
    "internal_noise_psds",
    "tia_output_psd",
    "circuit_thermal_psd",
    "equivalent_aperture",
    "NoiseFactors",
    "noise_factors",
    "NoiseBudget",
    "noise_budget",
    "nf_sweep",
    "to_db",
]


def to_db(x):
    return 10.0 * np.log10(x)


def spectral_radiance(nu, temperature):
    """Planck spectral radiance B_nu(T) [W Hz^-1 m^-2 sr^-1]; zero at T = 0."""
    nu = np.asarray(nu, dtype=float)
    t = np.asarray(temperature, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        x = H_PLANCK * nu / (K_B * t)
        out = 2 * nu**2 / C0**2 * H_PLANCK * nu / np.expm1(x)
    return np.where(t > 0, out, 0.0)


def f_n(beta, n: int):
    """f_n(beta) = integral_{-1}^{1} x^n exp(i beta x) dx for n = 0 or 2 (real)."""
    if n not in (0, 2):
        raise ValueError("closed forms are provided for n = 0 and n = 2")
    b = np.asarray(beta, dtype=float)
    out = np.empty_like(b)
    small = np.abs(b) < 0.5
    bs = b[small]
    # series: 2 sum_k (-1)^k b^{2k} / ((2k)! (2k + n + 1))
    acc = np.zeros_like(bs)
    term = np.ones_like(bs)
    for k in range(14):
        if k:
            term = term * (-bs**2) / ((2 * k - 1) * (2 * k))
        acc += term / (2 * k + n + 1)
    out[small] = 2 * acc
    bl = b[~small]
    s, c = np.sin(bl), np.cos(bl)
    if n == 0:
        out[~small] = 2 * s / bl
    else:
        out[~small] = 2 * s / bl + 4 * c / bl**2 - 4 * s / bl**3
    return out if out.ndim else float(out)


def normalized_correlation(beta):
    """R_33(beta) / R_33(0) = 3 (sin b - b cos b) / b^3."""
    return 0.375 * (2 * f_n(beta, 0) - 2 * f_n(beta, 2))


def bbr_correlation(u, nu, temperature):
    """(3,3) entry of the BBR field correlation at separation u along the cell [V^2 m^-2 Hz^-1].

    ``pi eta0 B_nu (2 f0(beta) - 2 f2(beta))`` with beta = 2 pi nu u / c.
    """
    beta = TWO_PI * np.asarray(nu, dtype=float) * np.asarray(u, dtype=float) / C0
    return np.pi * ETA0 * spectral_radiance(nu, temperature) * (2 * f_n(beta, 0) - 2 * f_n(beta, 2))


def coherence_factor(ell: float, epsabs: float = 1e-12) -> float:
    """BBR coherence factor zeta(ell) for a cell of ell LO wavelengths.

    ``zeta = (2 / ell^2) integral_0^ell (ell - u) rho(2 pi u) du`` with rho the
    normalized correlation; the integral is split at the zeros of sin(2 pi u).
    """
    ell = float(ell)
    if not ell > 0:
        raise ValueError("ell must be positive")
    kern = lambda u: (ell - u) * normalized_correlation(TWO_PI * u)
    edges = np.append(np.arange(0.0, ell, 0.5), ell)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            total += integrate.quad(kern, a, b, epsabs=epsabs * ell * ell, epsrel=1e-12,
                                    limit=200)[0]
    return 2.0 * total / ell**2


def bbr_field_psd(params: AtomicParams, zeta: float | None = None) -> float:
    """(4 pi / 3) eta0 B_nu zeta, the BBR in-phase field PSD [V^2 m^-2 Hz^-1]."""
    if zeta is None:
        zeta = coherence_factor(params.cell_length / params.lambda_lo)
    return 4 * np.pi / 3 * ETA0 * spectral_radiance(params.f_lo, params.temperature) * zeta


def bbr_current_psd(gq_total, params: AtomicParams, zeta: float | None = None):
    """BBR-induced photocurrent PSD (4 pi/3) eta0 B zeta L^2 |g_q|^2 [A^2/Hz].

    Parameters
    ----------
    gq_total : complex or array_like
        Integrated transconductance L g_q(i omega) [S m].
    """
    return bbr_field_psd(params, zeta) * np.abs(gq_total) ** 2


def snr_bound_and_sensitivity(p_sig_psd, nu: float, temperature: float, ell: float | None = None,
                              zeta: float | None = None):
    """BBR-limited SNR bound and in-phase sensitivity [V m^-1 Hz^-1/2].

    ``SNR = (P_sig / 4) / ((4 pi / 3) eta0 B_nu zeta)`` and
    ``E_I,min = sqrt((4 pi / 3) eta0 B_nu zeta)``.
    Pass ``zeta`` directly, or ``ell`` to compute it (zeta = 1 if neither).
    """
    if zeta is None:
        zeta = 1.0 if ell is None else coherence_factor(ell)
    floor = 4 * np.pi / 3 * ETA0 * spectral_radiance(nu, temperature) * zeta
    with np.errstate(divide="ignore"):
        snr = 0.25 * np.asarray(p_sig_psd, dtype=float) / floor
    return snr, float(np.sqrt(floor))


def internal_noise_psds(params: AtomicParams, chain: ReceiverChain, i_ph_bar: float,
                        temperature: float | None = None) -> dict:
    """Shot, R_s thermal and RIN photocurrent PSDs [A^2/Hz]."""
    if i_ph_bar < 0:
        raise ValueError("i_ph_bar must be >= 0")
    t = params.temperature if temperature is None else temperature
    return {
        "shot": Q_E * i_ph_bar,
        "rs_thermal": 2 * K_B * t / chain.r_s,
        "rin": i_ph_bar**2 * 10 ** (chain.rin_dbc_hz / 10),
    }


def tia_output_psd(current_psd, chain: ReceiverChain):
    """TIA output PSD PSD[dI] (R_T K_c)^2 / R_L [W/Hz]."""
    return np.asarray(current_psd, dtype=float) * (chain.r_t * chain.k_c) ** 2 / chain.r_l


def circuit_thermal_psd(chain: ReceiverChain, temperature: float) -> float:
    """Combined TIA and bias-resistor thermal output PSD [W/Hz].

    ``R_T^2 / (2 R_L) (I_n^2 K_c^2 + V_n^2 / (R_s + Z_in)^2 + 4 kB T / R_s)``.
    """
    return chain.r_t**2 / (2 * chain.r_l) * (
        chain.i_n_tia**2 * chain.k_c**2
        + chain.v_n_tia**2 / (chain.r_s + chain.z_in) ** 2
        + 4 * K_B * temperature / chain.r_s)


def equivalent_aperture(wavelength: float) -> float:
    """Dipole equivalent aperture 3 lambda^2 / (8 pi) [m^2]."""
    return 3 * wavelength**2 / (8 * np.pi)


@dataclass
class NoiseFactors:
    f_q: float
    g_q: float
    f_tia: float
    g_tia: float
    f_total: float
    g_total: float

    def as_db(self) -> dict:
        return {k: float(to_db(v)) for k, v in asdict(self).items()}


def noise_factors(params: AtomicParams, chain: ReceiverChain, gq_at_if, psd_delta_i_n: float,
                  wavelength: float | None = None, e_sig: float = 1.0,
                  temperature: float | None = None) -> NoiseFactors:
    """Noise factors and gains of the atomic front end and the TIA, cascaded by Friis.

    Parameters
    ----------
    gq_at_if : complex
        Transconductance g_q at the IF [S]; the cell length comes from ``params``.
    psd_delta_i_n : float
        Total photocurrent noise PSD (BBR + shot + R_s thermal + RIN) [A^2/Hz].
    wavelength : float, optional
        Wavelength of the equivalent dipole; defaults to the LO wavelength.
    e_sig : float
        Signal amplitude; it cancels and is kept only to expose that property.

    Raises
    ------
    ZeroDivisionError
        If the atomic gain is zero.
    """
    t = params.temperature if temperature is None else temperature
    lam = params.lambda_lo if wavelength is None else wavelength
    a_eq = equivalent_aperture(lam)
    lg = params.cell_length * abs(gq_at_if)
    p_in = a_eq * e_sig**2 / (2 * ETA0)
    snr_in = p_in / (K_B * t)
    snr_out = (lg * e_sig) ** 2 / 4 / psd_delta_i_n
    f_q = snr_in / snr_out
    g_q = (lg * e_sig * chain.k_c) ** 2 * chain.z_in / 2 / p_in
    if g_q == 0:
        raise ZeroDivisionError("atomic front-end gain is zero")
    f_tia = 1 + ((chain.i_n_tia * chain.k_c) ** 2 / 2
                 + (chain.v_n_tia / (chain.r_s + chain.z_in)) ** 2 / 2) / psd_delta_i_n
    g_tia = chain.r_t**2 / (chain.z_in * chain.r_l)
    return NoiseFactors(f_q=f_q, g_q=g_q, f_tia=f_tia, g_tia=g_tia,
                        f_total=f_q + (f_tia - 1) / g_q, g_total=g_q * g_tia)


@dataclass
class NoiseBudget:
    """Per-source photocurrent PSDs [A^2/Hz], TIA output PSDs [W/Hz] and factors."""

    current_psd: dict
    output_psd: dict
    circuit_thermal: float
    factors: NoiseFactors
    zeta: float
    sensitivity: float

    @property
    def total_current_psd(self) -> float:
        return float(sum(self.current_psd.values()))


def noise_budget(params: AtomicParams, chain: ReceiverChain, gq_at_if, i_ph_bar: float,
                 zeta: float | None = None) -> NoiseBudget:
    """Full noise budget at the IF for transconductance ``gq_at_if`` [S]."""
    if zeta is None:
        zeta = coherence_factor(params.cell_length / params.lambda_lo)
    cur = {"bbr": float(bbr_current_psd(params.cell_length * gq_at_if, params, zeta))}
    cur.update(internal_noise_psds(params, chain, i_ph_bar))
    out = {k: float(tia_output_psd(v, chain)) for k, v in cur.items()}
    total = sum(cur.values())
    factors = noise_factors(params, chain, gq_at_if, total)
    _, sens = snr_bound_and_sensitivity(0.0, params.f_lo, params.temperature, zeta=zeta)
    return NoiseBudget(current_psd=cur, output_psd=out,
                       circuit_thermal=circuit_thermal_psd(chain, params.temperature),
                       factors=factors, zeta=zeta, sensitivity=sens)


def nf_sweep(params: AtomicParams, chain: ReceiverChain, gq_at_if, i_ph_bar: float, r_s_grid,
             zeta: float | None = None) -> dict:
    """Noise factors versus bias resistance; returns arrays keyed like the CSV columns."""
    if zeta is None:
        zeta = coherence_factor(params.cell_length / params.lambda_lo)
    r_s_grid = np.asarray(r_s_grid, dtype=float)
    cols = {k: np.empty(r_s_grid.size) for k in ("f_q", "f_tia", "f_total", "g_q", "g_tia")}
    for i, r in enumerate(r_s_grid):
        nb = noise_budget(params, chain.replace(r_s=float(r)), gq_at_if, i_ph_bar, zeta)
        for k in cols:
            cols[k][i] = getattr(nb.factors, k)
    out = {"r_s_ohm": r_s_grid}
    out.update({f"{k}_db": to_db(v) for k, v in cols.items()})
    return out
