"""Command-line entry point: ``freqswap <command> [options]``."""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import oracle, swap
from .config import load_config
from .errors import FreqSwapError, InputError, NumericalError
from .fitting import Interferogram, fit_fringes, read_interferogram_csv
from .spectral import (
    FilterFunction,
    ingest_jsi_csv,
    marginals,
    params_from_marginals,
    reduced_density_matrix,
    schmidt_decompose,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3
OUTPUT_DIR_ENV = "FREQSWAP_OUTPUT_DIR"


def _fmt(x):
    return format(float(x), ".17g")


class _Output:
    """Collects one artifact and writes it to ``--out`` or stdout."""

    def __init__(self, args):
        self.args = args
        self.buf = io.StringIO()

    def comment(self, text):
        for line in str(text).splitlines():
            self.buf.write(f"# {line}\n")

    def row(self, values):
        self.buf.write(",".join(v if isinstance(v, str) else _fmt(v) for v in values) + "\n")

    def json(self, obj):
        self.buf.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def close(self):
        text = self.buf.getvalue()
        if self.args.out is None:
            sys.stdout.write(text)
            return None
        path = Path(self.args.out)
        base = os.environ.get(OUTPUT_DIR_ENV)
        if base and not path.is_absolute():
            path = Path(base) / path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _tau_axis(lo, hi, n, what):
    if n < 2 or not hi > lo:
        raise InputError(f"empty {what} range [{lo}, {hi}] with {n} samples")
    return np.linspace(lo, hi, int(n))


def _config(args, **extra):
    return load_config(args.config, **extra)


def _header(out, cfg, command):
    out.comment(f"freqswap {command}")
    out.comment("config " + cfg.to_json())


def _noisy(values, cfg, seed):
    rng = np.random.default_rng(seed)
    return values * (1.0 + cfg.noise_fraction * rng.standard_normal(values.shape))


def cmd_simulate_fringes(args):
    cfg = _config(args, tau_idler_fs=args.tau_idler, tau_min_fs=args.tau_min,
                  tau_max_fs=args.tau_max, n_tau=args.n_tau)
    taus = _tau_axis(cfg.tau_min_fs, cfg.tau_max_fs, cfg.n_tau, "tau")
    sources = cfg.sources()
    bsm = cfg.bsm()
    p_ideal = swap.coincidence_ideal(swap.heralded_state(sources, bsm), taus)
    p_full = swap.coincidence_full(sources, bsm, taus)
    fit = fit_fringes(Interferogram(taus, p_full), fit_phase=True)
    vis = fit.params.visibility
    out = _Output(args)
    _header(out, cfg, "simulate-fringes")
    out.comment(f"fitted_visibility {_fmt(vis)}")
    out.comment(f"fitted_phase_rad {_fmt(fit.params.phase)}")
    cols = ["tau_fs", "P_ideal", "P_full", "V_fit"]
    noisy = None
    if cfg.noise_fraction > 0:
        noisy = _noisy(p_full, cfg, args.seed)
        cols.append("P_noisy")
    out.row(cols)
    for k, t in enumerate(taus):
        vals = [t, p_ideal[k], p_full[k], vis]
        if noisy is not None:
            vals.append(noisy[k])
        out.row(vals)
    path = out.close()
    _log(args, f"tau_idler={cfg.tau_idler_fs:g} fs  V_fit={vis:.4f}" + (f"  -> {path}" if path else ""))


def cmd_heatmap(args):
    cfg = _config(args)
    ts = _tau_axis(cfg.tau_min_fs, cfg.tau_max_fs, cfg.n_tau, "tau")
    ti = _tau_axis(cfg.tau_i_min_fs, cfg.tau_i_max_fs, cfg.n_tau_i, "tau_i")
    p = swap.fringe_map(cfg.sources(), cfg.bsm(), ts, ti)
    out = _Output(args)
    _header(out, cfg, "heatmap")
    out.row(["tau_s_fs", "tau_i_fs", "P"])
    for k, b in enumerate(ti):
        for j, a in enumerate(ts):
            out.row([a, b, p[j, k]])
    path = out.close()
    _log(args, f"{p.size} points, max P {p.max():.4f}" + (f" -> {path}" if path else ""))


def cmd_schmidt(args):
    cfg = _config(args, jsi_csv=args.jsi)
    if cfg.jsi_csv:
        jsa = ingest_jsi_csv(cfg.jsi_csv)
    else:
        jsa = cfg.sources().jsa_1
    dec = schmidt_decompose(jsa)
    ps, pi = marginals(jsa)
    report = {
        "schmidt_number": dec.schmidt_number,
        "coefficients": [float(c) for c in dec.coefficients[:10]],
        "marginal_fwhm_nm": {
            "signal": ps.fwhm_nm(),
            "idler": pi.fwhm_nm(),
        },
        "source": cfg.jsi_csv or "config",
    }
    out = _Output(args)
    out.json(report)
    out.close()
    _log(args, f"K = {dec.schmidt_number:.4f}")


def cmd_oracle_check(args):
    cfg = _config(args)
    params = params_from_marginals(cfg.lambda_s0_nm, cfg.lambda_i0_nm, cfg.fwhm_s_nm,
                                   cfg.fwhm_i_nm, cfg.oracle_schmidt_number)
    setup = oracle.ideal_setup(params, int(cfg.oracle_n_bins), cfg.oracle_herald_offset_std,
                               cfg.span_std)
    report = oracle.oracle_check(*setup, n_tau=int(cfg.oracle_n_tau))
    report["weights"] = [float(w) for w in report["weights"]]
    out = _Output(args)
    out.json(report)
    out.close()
    _log(args, f"max |analytic - oracle| = {report['max_abs_deviation']:.3g}")


def cmd_fit(args):
    path = Path(args.path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    data = read_interferogram_csv(path, column=args.column)
    res = fit_fringes(data, fit_phase=args.fit_phase)
    out = _Output(args)
    report = res.to_dict()
    report["source"] = str(path)
    report["column"] = args.column
    out.json(report)
    out.close()
    p = res.params
    _log(args, f"V={p.visibility:.4f}  dw={p.delta_omega:.6g} rad/fs  phase={p.phase:.4f}")


def cmd_simulate_hom(args):
    cfg = _config(args)
    taus = _tau_axis(cfg.tau_min_fs, cfg.tau_max_fs, cfg.n_tau, "tau")
    sources = cfg.sources()
    photon = args.photon
    partner_grid = sources.grid_i if photon == "signal" else sources.grid_s
    grid = sources.grid_s if photon == "signal" else sources.grid_i
    weights = None
    if args.heralded:
        flt = FilterFunction.gaussian_nm(cfg.hom_filter_nm, cfg.hom_filter_fwhm_nm)
        weights = flt.weights(partner_grid)
    rho_1 = reduced_density_matrix(sources.jsa_1, photon, weights)
    rho_2 = reduced_density_matrix(sources.jsa_2, photon, weights)
    p = swap.hom_dip(rho_1, rho_2, taus, grid)
    vis = swap.hom_visibility(rho_1, rho_2)
    out = _Output(args)
    _header(out, cfg, "simulate-hom")
    out.comment(f"mode {'heralded' if args.heralded else 'unheralded'} {photon}")
    out.comment(f"visibility {_fmt(vis)}")
    out.row(["tau_fs", "P"])
    for t, v in zip(taus, p):
        out.row([t, v])
    out.close()
    _log(args, f"HOM visibility ({photon}, {'heralded' if args.heralded else 'unheralded'}) = {vis:.4f}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config with unit-suffixed keys")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for optional noise injection")
    common.add_argument("--quiet", action="store_true", help="no summary on stderr")

    ap = argparse.ArgumentParser(prog="freqswap", description="Frequency-bin entanglement swapping simulations")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-fringes", parents=[common], help="coincidence fringe versus signal delay")
    p.add_argument("--tau-idler", type=float, help="idler delay in fs")
    p.add_argument("--tau-min", type=float, help="first signal delay in fs")
    p.add_argument("--tau-max", type=float, help="last signal delay in fs")
    p.add_argument("--n-tau", type=int, help="number of signal delays")
    p.set_defaults(func=cmd_simulate_fringes)

    p = sub.add_parser("heatmap", parents=[common], help="coincidences over signal and idler delays")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("schmidt", parents=[common], help="Schmidt decomposition report")
    p.add_argument("--jsi", help="measured JSI CSV instead of the configured sources")
    p.set_defaults(func=cmd_schmidt)

    p = sub.add_parser("oracle-check", parents=[common], help="closed form versus Fock-space oracle")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("fit", parents=[common], help="fit an interferogram CSV")
    p.add_argument("path", help="CSV with tau_fs and value columns")
    p.add_argument("--column", help="value column name (default: second column)")
    p.add_argument("--fit-phase", action="store_true", help="fit the fringe phase too")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate-hom", parents=[common], help="HOM dip between photons of the two sources")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--heralded", dest="heralded", action="store_true", default=True,
                   help="filter the partner photon (default)")
    g.add_argument("--unheralded", dest="heralded", action="store_false", help="no partner filter")
    p.add_argument("--photon", choices=("signal", "idler"), default="signal", help="which photon interferes")
    p.set_defaults(func=cmd_simulate_hom)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        print(f"freqswap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"freqswap {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FreqSwapError as exc:
        print(f"freqswap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
