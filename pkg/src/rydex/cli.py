"""Command-line front end: ``rydex <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
``RYDEX_THREADS`` caps the BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import os
import sys

if os.environ.get("RYDEX_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["RYDEX_THREADS"])

import argparse
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError, RydexError
from .io import RunManifest, csv_text, json_text
from .params import DEFAULT_CONFIG_NAME, Config, config_to_dict, load_config

COMMANDS = ("steady", "dcsweep", "tf", "gq", "impulse", "pz", "doppler-tf", "noise", "nf-sweep",
            "sensitivity", "zeta", "simulate-sc", "mimo-capacity")


class _Output:
    """A table (header + rows) and/or a JSON summary produced by a subcommand."""

    def __init__(self, header=None, rows=None, summary=None, files=None):
        self.header = header
        self.rows = rows
        self.summary = summary or {}
        self.files = files or {}


def _cfg(args) -> Config:
    cfg = load_config(args.config)
    atomic, link = cfg.atomic, cfg.link
    if args.temp is not None:
        if args.temp < 0:
            raise ConfigError("--temp must be >= 0 K")
        atomic = atomic.replace(temperature=float(args.temp))
    if args.seed is not None:
        link = link.replace(seed=int(args.seed))
    return Config(atomic, cfg.receiver, link, cfg.description)


def _freq_grid(args, fmin=1e2, fmax=1e7, points=512):
    lo = fmin if args.fmin is None else args.fmin
    hi = fmax if args.fmax is None else args.fmax
    n = points if args.points is None else args.points
    if not (0 < lo < hi) or n < 2:
        raise ConfigError("frequency grid needs 0 < --fmin < --fmax and --points >= 2")
    return np.logspace(np.log10(lo), np.log10(hi), n)


def _rows(*cols):
    return list(zip(*[np.asarray(c).tolist() for c in cols]))


# --- subcommands ----------------------------------------------------------------

def cmd_steady(cfg: Config, args) -> _Output:
    from .atomic import build_liouvillian, probe_transmission, steady_state
    from .dynamics import photocurrent_per_watt
    p0 = cfg.atomic.replace(temperature=0.0)
    _, rho = steady_state(build_liouvillian(p0))
    p_bar, alphas = probe_transmission(rho, p0, args.slices)
    rows = [(i + 1, j + 1, rho[i, j].real, rho[i, j].imag) for i in range(4) for j in range(4)]
    summary = {"p_bar_w": p_bar, "p_over_p0": p_bar / p0.probe_power_in,
               "alpha_per_m": alphas[0], "i_ph_bar_a": photocurrent_per_watt(p0) * p_bar,
               "omega_lo_rad_s": p0.omega_lo, "rho": [[r[2], r[3]] for r in rows]}
    return _Output(["row", "col", "rho_re", "rho_im"], rows, summary)


def cmd_dcsweep(cfg: Config, args) -> _Output:
    from .atomic import dc_sweep, kappa_from_slope
    e0 = cfg.atomic.e_lo
    lo = 0.05 * e0 if args.fmin is None else args.fmin
    hi = 4.0 * e0 if args.fmax is None else args.fmax
    n = 200 if args.points is None else args.points
    e, ratio, slope = dc_sweep(cfg.atomic, np.linspace(lo, hi, n), slices=args.slices)
    summary = {"kappa_slope_w_per_hz": kappa_from_slope(cfg.atomic, slices=args.slices)}
    return _Output(["e_lo_v_per_m", "p_over_p0", "dp_over_p0_de_m_per_v"],
                   _rows(e, ratio, slope), summary)


def cmd_tf(cfg: Config, args) -> _Output:
    from .atomic import build_liouvillian
    from .dynamics import gains_iq
    f = _freq_grid(args)
    sys_ = build_liouvillian(cfg.atomic.replace(temperature=0.0))
    gi, gq, gi1, gi2, gq1, gq2 = gains_iq(sys_, 1j * 2 * np.pi * f)
    return _Output(["f_hz", "gi_re", "gi_im", "gq_re", "gq_im", "gi1_re", "gi1_im",
                    "gi2_re", "gi2_im", "gq1_re", "gq1_im", "gq2_re", "gq2_im"],
                   _rows(f, gi.real, gi.imag, gq.real, gq.imag, gi1.real, gi1.imag,
                         gi2.real, gi2.imag, gq1.real, gq1.imag, gq2.real, gq2.imag))


def cmd_gq(cfg: Config, args) -> _Output:
    from .dynamics import intrinsic_gain_kappa, quantum_transconductance
    f = _freq_grid(args)
    w = 2 * np.pi * np.concatenate(([0.0], f))
    p = cfg.atomic.replace(temperature=0.0)
    g = quantum_transconductance(None, p, w, slices=args.slices)
    k = intrinsic_gain_kappa(p, None, w, slices=args.slices)
    m = g.mean
    summary = {"gq_dc_s": m[0].real, "kappa_dc_w_per_hz": k[0].real,
               "gq_if_s": complex(quantum_transconductance(None, p, [2 * np.pi * cfg.link.f_if],
                                                           slices=args.slices).mean[0])}
    return _Output(["f_hz", "gq_re_s", "gq_im_s", "gq_abs_s", "kappa_re_w_per_hz",
                    "kappa_im_w_per_hz"],
                   _rows(w / (2 * np.pi), m.real, m.imag, np.abs(m), k.real, k.imag), summary)


def _rr_and_scale(cfg: Config):
    from .atomic import build_liouvillian
    from .dynamics import quantum_transconductance, real_realization
    p = cfg.atomic.replace(temperature=0.0)
    sys_ = build_liouvillian(p)
    scale = quantum_transconductance(sys_, p, [0.0]).scale[0]
    return real_realization(sys_), scale


def cmd_impulse(cfg: Config, args) -> _Output:
    from .dynamics import bandwidth_3db, impulse_step_response, rise_time
    rr, scale = _rr_and_scale(cfg)
    tmax = 20e-6 if args.fmax is None else args.fmax
    n = 4001 if args.points is None else args.points
    t = np.linspace(0.0, tmax, n)
    imp, step = impulse_step_response(rr, t, scale)
    tr = rise_time(t, step)
    bw = bandwidth_3db(rr)
    summary = {"rise_time_s": tr, "bandwidth_3db_hz": bw, "bw_times_tr": bw * tr}
    return _Output(["t_s", "impulse_s_per_s", "step_s"], _rows(t, imp, step), summary)


def cmd_pz(cfg: Config, args) -> _Output:
    from .dynamics import pole_zero
    rr, scale = _rr_and_scale(cfg)
    pz = pole_zero(rr, scale)
    rows = [("pole", p.real, p.imag) for p in pz.poles] + [("zero", z.real, z.imag) for z in pz.zeros]
    summary = {"n_poles": pz.poles.size, "n_zeros": pz.zeros.size, "gain": pz.gain,
               "dc_gain_s": pz.dc_gain}
    return _Output(["kind", "re_rad_s", "im_rad_s"], rows, summary)


def cmd_doppler_tf(cfg: Config, args) -> _Output:
    from .doppler import doppler_transconductance
    f = _freq_grid(args, 1e3, 1e7, 64)
    g = doppler_transconductance(cfg.atomic, 2 * np.pi * f, method=args.method)
    return _Output(["f_hz", "gq_re_s", "gq_im_s", "gq_abs_s"], _rows(f, g.real, g.imag, np.abs(g)),
                   {"temperature_k": cfg.atomic.temperature, "method": args.method})


def _gq_if_and_current(cfg: Config):
    from .link import _gq_at_if, _i_ph_bar
    return _gq_at_if(cfg.atomic, cfg.link), _i_ph_bar(cfg.atomic)


def cmd_noise(cfg: Config, args) -> _Output:
    from .noise import noise_budget
    gq, i_ph = _gq_if_and_current(cfg)
    nb = noise_budget(cfg.atomic, cfg.receiver, gq, i_ph)
    rows = [(k, v, nb.output_psd[k]) for k, v in nb.current_psd.items()]
    summary = {"current_psd_a2_per_hz": nb.current_psd, "output_psd_w_per_hz": nb.output_psd,
               "circuit_thermal_w_per_hz": nb.circuit_thermal, "zeta": nb.zeta,
               "sensitivity_v_per_m_rthz": nb.sensitivity, "factors_db": nb.factors.as_db(),
               "gq_if_s": gq, "i_ph_bar_a": i_ph}
    return _Output(["source", "current_psd_a2_per_hz", "tia_output_psd_w_per_hz"], rows, summary)


def cmd_nf_sweep(cfg: Config, args) -> _Output:
    from .noise import nf_sweep
    gq, i_ph = _gq_if_and_current(cfg)
    lo = 1e2 if args.fmin is None else args.fmin
    hi = 1e5 if args.fmax is None else args.fmax
    n = 50 if args.points is None else args.points
    r = np.logspace(np.log10(lo), np.log10(hi), n)
    out = nf_sweep(cfg.atomic, cfg.receiver, gq, i_ph, r)
    keys = ["r_s_ohm", "f_q_db", "f_tia_db", "f_total_db", "g_q_db", "g_tia_db"]
    i = int(np.argmin(out["f_total_db"]))
    summary = {"f_total_min_db": out["f_total_db"][i], "argmin_r_s_ohm": r[i]}
    return _Output(keys, _rows(*[out[k] for k in keys]), summary)


def cmd_sensitivity(cfg: Config, args) -> _Output:
    from .noise import snr_bound_and_sensitivity
    zeta = args.zeta
    _, e = snr_bound_and_sensitivity(0.0, cfg.atomic.f_lo, cfg.atomic.temperature, ell=args.ell,
                                     zeta=zeta)
    summary = {"e_i_min_v_per_m_rthz": e, "e_i_min_v_per_cm_rthz": e / 100,
               "temperature_k": cfg.atomic.temperature, "f_hz": cfg.atomic.f_lo}
    return _Output(["e_i_min_v_per_m_rthz", "e_i_min_v_per_cm_rthz"], [(e, e / 100)], summary)


def cmd_zeta(cfg: Config, args) -> _Output:
    from .noise import coherence_factor
    ell = cfg.atomic.cell_length / cfg.atomic.lambda_lo if args.ell is None else args.ell
    z = coherence_factor(ell)
    return _Output(["ell", "zeta"], [(ell, z)], {"ell": ell, "zeta": z})


def cmd_simulate_sc(cfg: Config, args) -> _Output:
    from .link import equivalent_noise_psd_dbm, simulate_single_carrier
    res = simulate_single_carrier(cfg, mode=args.mode, noise=not args.no_noise,
                                  n_symbols=args.symbols)
    tx = res.tx.samples
    wave = csv_text(["t_s", "tx_i", "tx_q", "rx_i", "rx_q"],
                    _rows(res.t, tx.real, tx.imag, res.rx_baseband.real, res.rx_baseband.imag),
                    "{digest}")
    k = np.arange(res.tx_symbols.size)
    cons = csv_text(["sym_index", "tx_re", "tx_im", "rx_re", "rx_im"],
                    _rows(k, res.tx_symbols.real, res.tx_symbols.imag, res.rx_symbols.real,
                          res.rx_symbols.imag), "{digest}")
    summary = {"evm": res.evm, "snr_db": res.snr_db, "noise": res.noise, "mode": args.mode,
               "noise_enabled": not args.no_noise, "e_sig_v_per_m": res.e_sig,
               "e_sig_over_e_lo": res.extra["e_sig_over_e_lo"], "p_qref_w": res.p_qref,
               "gain": res.gain, "delay_samples": res.delay_samples,
               "equivalent_noise_psd_dbm_per_hz": equivalent_noise_psd_dbm(res, cfg)}
    return _Output(summary=summary, files={"waveform.csv": wave, "constellation.csv": cons})


def cmd_mimo(cfg: Config, args) -> _Output:
    from .link import mimo_capacity
    lo = -20.0 if args.fmin is None else args.fmin
    hi = 30.0 if args.fmax is None else args.fmax
    n = 11 if args.points is None else args.points
    powers = np.linspace(lo, hi, n)
    out = mimo_capacity(cfg, n_antennas=args.antennas, tx_power_dbm=powers, trials=args.trials)
    rows = []
    for i, p in enumerate(powers):
        for (scheme, receiver), samples in ((k, v) for k, v in out.items() if k != "p_t_dbm"):
            c = samples[i]
            rows.append((p, scheme, receiver, c.mean(), np.percentile(c, 5), np.percentile(c, 95)))
    return _Output(["p_t_dbm", "scheme", "receiver", "mean_capacity", "p5", "p95"], rows,
                   {"antennas": args.antennas, "trials": args.trials})


HANDLERS = {
    "steady": cmd_steady, "dcsweep": cmd_dcsweep, "tf": cmd_tf, "gq": cmd_gq,
    "impulse": cmd_impulse, "pz": cmd_pz, "doppler-tf": cmd_doppler_tf, "noise": cmd_noise,
    "nf-sweep": cmd_nf_sweep, "sensitivity": cmd_sensitivity, "zeta": cmd_zeta,
    "simulate-sc": cmd_simulate_sc, "mimo-capacity": cmd_mimo,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG_NAME,
                        help="JSON config file (default: packaged cs133_default.json)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--temp", type=float, default=None, help="vapor temperature [K]")
    common.add_argument("--fmin", type=float, default=None,
                        help="lower end of the sweep (Hz; field, ohm or dBm for some commands)")
    common.add_argument("--fmax", type=float, default=None)
    common.add_argument("--points", type=int, default=None)
    common.add_argument("--ell", type=float, default=None, help="cell length in LO wavelengths")
    common.add_argument("--slices", type=int, default=1)

    parser = argparse.ArgumentParser(prog="rydex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rydex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "doppler-tf":
            p.add_argument("--method", choices=("analytic", "numeric"), default="analytic")
        elif name == "sensitivity":
            p.add_argument("--zeta", type=float, default=None,
                           help="coherence factor (default 1, or from --ell)")
        elif name == "simulate-sc":
            p.add_argument("--mode", choices=("lti", "rk4"), default="lti")
            p.add_argument("--no-noise", action="store_true")
            p.add_argument("--symbols", type=int, default=None)
        elif name == "mimo-capacity":
            p.add_argument("--antennas", type=int, default=8)
            p.add_argument("--trials", type=int, default=200)
    return parser


def _emit(name: str, text: str, out_dir: Path | None, written: list) -> None:
    if out_dir is None:
        sys.stdout.write(text)
    else:
        path = out_dir / name
        path.write_text(text)
        written.append(str(path))


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        cfg = _cfg(args)
        arguments = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
                     if k not in ("out", "config", "format")}
        manifest = RunManifest(command=args.command, config_path=str(args.config),
                               parameters=config_to_dict(cfg), seed=cfg.link.seed,
                               arguments=arguments, tool_version=__version__)
        result = HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"rydex: configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"rydex: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except RydexError as exc:
        print(f"rydex: error: {exc}", file=sys.stderr)
        return 2
    digest = manifest.digest
    out_dir = args.out
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    written: list = []
    stem = args.command.replace("-", "_")
    summary = dict(result.summary)
    summary["parameters"] = manifest.parameters
    for fname, text in result.files.items():
        _emit(fname, text.replace("{digest}", digest), out_dir, written)
    if result.files:
        _emit(f"{stem}_summary.json", json_text(summary, digest), out_dir, written)
    elif args.format == "csv" and result.header is not None:
        _emit(f"{stem}.csv", csv_text(result.header, result.rows, digest), out_dir, written)
        if out_dir is not None and result.summary:
            _emit(f"{stem}_summary.json", json_text(summary, digest), out_dir, written)
    else:
        body = dict(summary)
        if result.header is not None:
            body["table"] = {"columns": result.header, "rows": result.rows}
        _emit(f"{stem}.json", json_text(body, digest), out_dir, written)
    if out_dir is not None:
        manifest.outputs = written
        manifest.duration_s = time.perf_counter() - t0
        manifest.write(out_dir)
    return 0


def main(argv=None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
