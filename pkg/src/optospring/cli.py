"""Command-line entry point ``optospring``.

Exit codes: 0 success, 2 configuration error, 3 domain or numerical error,
4 validation failure.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import force_sensing as fs
from . import langevin
from . import squeezing as sq
from . import validate as val
from .errors import ConfigError, OptospringError
from .model_params import DimensionlessModel
from .rigidity import spring_constants, stability_class
from .spectrum import default_grid

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_VALIDATION = 0, 2, 3, 4

SPECTRUM_HEADER = ("x", "omega_rad_s", "s_f", "s_a1", "s_phi1", "theta_rad", "sql")
SQUEEZE_HEADER = ("x", "s_theta", "s_min", "s_max", "theta_opt_rad", "s_db")
FIG2_RATIOS = (0.1, 20.0, 400.0)
FIG3_RATIOS = (0.2, 20.0, 2000.0)
FIG3_TUNING = (0.5, 1.5)
FIG_X0 = 0.05


def format_csv(header, columns) -> str:
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(f"{v:.12e}" for v in row))
    return "\n".join(lines) + "\n"


def write_text(text: str, out: str | os.PathLike | None) -> None:
    """Write to ``out`` atomically (temp file + rename), or to stdout."""
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def derive_report(cfg: cfgmod.RunConfig) -> str:
    model = cfgmod.build_model(cfg)
    rows = []
    if cfg.get("coupling", "mode") != "ratio":
        params = cfgmod.build_physical(cfg)
        sc = spring_constants(params)
        rows += [
            ("gamma0", params.half_bandwidth, "1/s"),
            ("xi", params.dispersive_coeff, "1/m"),
            ("eta", params.dissipative_coeff, "1/m"),
        ]
    else:
        sc = None
        rows.append(("gamma0", model.gamma0, "1/s"))
    rows += [
        ("Pm", model.p_m, "-"),
        ("Qm", model.q_m, "-"),
        ("D", model.quality, "-"),
        ("g", model.coupling_ratio, "-"),
        ("x0", model.x0, "-"),
    ]
    if sc is not None:
        rows += [
            ("kappa", sc.kappa, "N/m"),
            ("delta", sc.delta, "N s/m"),
            ("Omega0", sc.omega0_mech, "rad/s"),
        ]
    else:
        rows.append(("Omega0", model.x0 * model.gamma0, "rad/s"))
    # + 0.0 turns -0.0 into 0.0
    lines = [f"{name:<8s} = {value + 0.0:.12e} {unit}" for name, value, unit in rows]
    lines.append(f"{'class':<8s} = {stability_class(model).value}")
    return "\n".join(lines) + "\n"


def spectrum_csv(cfg: cfgmod.RunConfig) -> str:
    model = cfgmod.build_model(cfg)
    grid = cfgmod.build_grid(cfg, model)
    res = fs.force_spectrum(model, grid, cfgmod.build_homodyne(cfg))
    return format_csv(SPECTRUM_HEADER, (
        grid, res.omega, res["s_f"], res["s_a1"], res["s_phi1"], res["theta_used"],
        np.ones_like(grid),
    ))


def _squeeze_angle(cfg: cfgmod.RunConfig, model: DimensionlessModel) -> float:
    setting = cfgmod.build_homodyne(cfg)
    if setting.mode is fs.HomodyneMode.FIXED:
        return setting.theta
    if setting.mode is fs.HomodyneMode.OPTIMAL:
        return sq.optimal_angle_at(setting.x_c or model.x0, model)
    return float(fs.resolve_angle(setting, np.array([model.x0]), model)[0])


def squeeze_csv(cfg: cfgmod.RunConfig) -> str:
    model = cfgmod.build_model(cfg)
    grid = cfgmod.build_grid(cfg, model)
    theta = _squeeze_angle(cfg, model)
    s_theta = sq.output_quadrature_psd(grid, theta, model)
    s_min, s_max, _ = sq.squeeze_minmax(grid, model)
    return format_csv(SQUEEZE_HEADER, (
        grid, s_theta, s_min, s_max, sq.per_frequency_optimal_angle(grid, model), sq.to_db(s_theta),
    ))


def simulate_csv(cfg: cfgmod.RunConfig, trace_path=None) -> str:
    """Ensemble PSDs of both output quadratures and of the detected one."""
    model = cfgmod.build_model(cfg)
    oracle = cfgmod.build_oracle(cfg)
    theta = cfg.get("homodyne", "theta_rad")
    traces = langevin.simulate_ensemble(model, oracle)
    est = {name: langevin.estimate_output_psd(traces, ang, gamma0=model.gamma0)
           for name, ang in (("a1a", 0.0), ("a1phi", math.pi / 2), ("theta", theta))}
    x = est["theta"].grid
    damping = langevin.damping_of(model, oracle)
    gain_a, gain_phi, _ = fs.quadrature_transfer(x, theta, model, damping=damping, exact=True)
    analytic = np.abs(gain_a) ** 2 + np.abs(gain_phi) ** 2
    if trace_path is not None:
        langevin.write_trace_csv(langevin.simulate_trajectory(model, oracle), trace_path)
    header = ("x", "omega_rad_s", "s_a1a", "stderr_s_a1a", "s_a1phi", "stderr_s_a1phi",
              "s_theta", "stderr_s_theta", "s_theta_analytic", "theta_rad")
    return format_csv(header, (
        x, est["theta"].omega,
        est["a1a"]["s_theta"], est["a1a"]["stderr"],
        est["a1phi"]["s_theta"], est["a1phi"]["stderr"],
        est["theta"]["s_theta"], est["theta"]["stderr"],
        analytic, np.full(x.shape, theta),
    ))


def figure_tables() -> dict[str, str]:
    """The six golden tables: force noise for three g, squeezing for three g."""
    tables = {}
    for g in FIG2_RATIOS:
        model = DimensionlessModel.from_ratio(FIG_X0, g)
        grid = default_grid(model)
        s0 = fs.force_noise_psd(grid, 0.0, model)[0]
        s90 = fs.force_noise_psd(grid, math.pi / 2, model)[0]
        theta_opt = fs.optimal_angle(grid, model)
        s_opt = fs.force_noise_psd(grid, theta_opt, model)[0]
        tables[f"fig2_g{g:g}.csv"] = format_csv(
            ("x", "omega_rad_s", "s_f_theta0", "s_f_theta90", "s_f_optimal", "theta_opt_rad", "sql"),
            (grid, grid * model.gamma0, s0, s90, s_opt, theta_opt, np.ones_like(grid)),
        )
    for g in FIG3_RATIOS:
        model = DimensionlessModel.from_ratio(FIG_X0, g)
        grid = default_grid(model)
        cols, names = [grid, grid * model.gamma0], ["x", "omega_rad_s"]
        for frac in FIG3_TUNING:
            curve = sq.optimal_psd_curve(frac * model.x0, grid, model)
            cols += [curve["s_theta"], curve["s_db"]]
            names += [f"s_xc{frac:g}", f"s_db_xc{frac:g}"]
            env = curve["s_envelope"]
        cols.append(env)
        names.append("s_envelope")
        tables[f"fig3_g{g:g}.csv"] = format_csv(tuple(names), cols)
    return tables


def _parse_perturb(items) -> dict[str, float]:
    out = {}
    for item in items or ():
        name, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--perturb {item!r}: expected module.NAME=value")
        try:
            out[name.strip()] = float(raw)
        except ValueError:
            raise ConfigError(f"--perturb {item!r}: value is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optospring",
        description="Quantum-noise model of a cavity with dispersive and dissipative coupling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (defaults: laboratory cavity)")
    common.add_argument("--out", help="output file (directory for 'figures'); stdout if omitted")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    sub.add_parser("derive", parents=[common], help="report derived parameters")
    sub.add_parser("spectrum", parents=[common], help="force-noise spectrum CSV")
    sub.add_parser("squeeze", parents=[common], help="squeezing spectrum CSV")
    sim = sub.add_parser("simulate", parents=[common], help="time-domain ensemble PSD CSV")
    sim.add_argument("--trace", help="also dump segment 0 as a time trace CSV")
    v = sub.add_parser("validate", parents=[common], help="run the self-check suite")
    v.add_argument("--perturb", action="append", metavar="MODULE.NAME=VALUE",
                   help=argparse.SUPPRESS)
    sub.add_parser("figures", parents=[common], help="write the six figure tables")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config, args.set)
        if args.command == "derive":
            write_text(derive_report(cfg), args.out)
        elif args.command == "spectrum":
            write_text(spectrum_csv(cfg), args.out)
        elif args.command == "squeeze":
            write_text(squeeze_csv(cfg), args.out)
        elif args.command == "simulate":
            write_text(simulate_csv(cfg, args.trace), args.out)
        elif args.command == "figures":
            out_dir = Path(args.out or "figures")
            for name, text in figure_tables().items():
                write_text(text, out_dir / name)
            print(f"wrote {len(FIG2_RATIOS) + len(FIG3_RATIOS)} tables to {out_dir}")
        elif args.command == "validate":
            results = val.run_checks(_parse_perturb(args.perturb))
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'} {r.name:<24s} {r.detail} ({r.seconds:.2f} s)")
            failed = [r.name for r in results if not r.passed]
            if failed:
                print(f"failed: {', '.join(failed)}")
                return EXIT_VALIDATION
            print("all checks passed")
    except BrokenPipeError:
        # reader closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OptospringError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
