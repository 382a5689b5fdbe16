"""Command-line front end.

Subcommands: steady, trajectory, sweep, oracle, validate.
Exit codes: 0 ok, 1 usage/config error, 2 domain error, 3 validation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, moments, oracle, validation
from .errors import (
    ConfigError,
    CoolingError,
    CutoffTooSmallError,
    DimensionBudgetError,
    InvalidParameterError,
    SingularFormulaError,
    SingularSystemError,
)
from .params import EffectiveParams, RawParams, derive_effective, load_config, regime_report, resolve_params
from .sweep import PRESETS, Axis, RunManifest, SweepGrid, columns_for, run_sweep, write_rows_csv

log = logging.getLogger("cavitycool")

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VALIDATION = 0, 1, 2, 3

DEFAULTS = {"eta": 0.1, "g_eff": 1e-4, "kappa": 1.0, "nu": 0.05, "delta_eff": 0.5}
PARAM_FLAGS = {
    "eta": "eta", "g_eff": "g_eff", "kappa": "kappa", "nu": "nu", "delta_eff": "delta_eff",
    "omega": "omega", "g": "g", "delta_cap": "delta_cap", "delta": "delta", "gamma_cap": "gamma_cap",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", help="flat 'key = value' parameter file")
    c.add_argument("--out", help="output path (stdout when omitted)")
    c.add_argument("--preset", choices=sorted(PRESETS))
    g = c.add_argument_group("effective parameters")
    for flag in ("eta", "g-eff", "kappa", "nu", "delta-eff"):
        g.add_argument(f"--{flag}", type=float)
    r = c.add_argument_group("raw parameters")
    for flag in ("omega", "g", "delta-cap", "delta", "gamma-cap"):
        r.add_argument(f"--{flag}", type=float)
    c.add_argument("-v", "--verbose", action="store_true")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = _Parser(prog="cavitycool", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("steady", parents=[common], help="stationary phonon number and stability")

    t = sub.add_parser("trajectory", parents=[common], help="integrate the cooling equations")
    t.add_argument("--m0", type=float)
    t.add_argument("--t-max", type=float, help="final time in 1/kappa (default: 6/gamma)")
    t.add_argument("--n-times", type=int, default=201)
    t.add_argument("--analytic", action="store_true", help="add an m_analytic = m0*exp(-gamma t) column")

    s = sub.add_parser("sweep", parents=[common], help="(delta_eff, nu) grid of closed-form results")
    s.add_argument("--delta-eff-axis", nargs=3, type=float, metavar=("MIN", "MAX", "COUNT"))
    s.add_argument("--nu-axis", nargs=3, type=float, metavar=("MIN", "MAX", "COUNT"))
    s.add_argument("--log-delta", action="store_true")
    s.add_argument("--log-nu", action="store_true")
    s.add_argument("--numeric", action="store_true", help="also solve the moment equations per cell")

    o = sub.add_parser("oracle", parents=[common], help="density-matrix reference runs")
    o.add_argument("--model", choices=("effective", "full", "tls"), default="effective")
    o.add_argument("--m0", type=float, default=3)
    o.add_argument("--initial", choices=("fock", "thermal"), default="fock")
    o.add_argument("--nb", type=int, help="phonon cutoff")
    o.add_argument("--nc", type=int, default=4, help="photon cutoff")
    o.add_argument("--t-max", type=float, default=5.0)
    o.add_argument("--n-times", type=int, default=51)
    o.add_argument("--mode", choices=("exact", "first-order"), default="first-order")
    o.add_argument("--compare-delta-cap", type=float, nargs="+", metavar="DELTA",
                   help="full model: run each delta_cap and compare P1")
    o.add_argument("--omega-eff", type=float, default=0.05)
    o.add_argument("--gamma-tls", type=float, nargs="+", default=[1.0])
    o.add_argument("--delta-tls", default="auto", help="number, 'half-gamma', 'nu' or 'auto'")
    o.add_argument("--budget", type=int, default=oracle.DEFAULT_BUDGET)

    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--quick", action="store_true", help="criteria 1-6 only (the default)")
    v.add_argument("--extended", action="store_true", help="add criteria 7-8 (full model, two-level comparator)")
    v.add_argument("--criteria", help="comma list, e.g. 1,2,5")
    v.add_argument("--json", dest="json_path", help="write the JSON summary here ('-' for stdout)")
    v.add_argument("-v", "--verbose", action="store_true")
    return ap


# --- parameter resolution ---------------------------------------------------------

def gather_values(args) -> tuple[dict, dict]:
    """Merge preset < config file < flags, then fill defaults.

    Returns (values, preset).
    """
    preset = dict(PRESETS.get(args.preset or "", {}))
    values = {k: preset[k] for k in ("eta", "g_eff", "nu") if k in preset}
    if args.config:
        try:
            values.update(load_config(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for key, attr in PARAM_FLAGS.items():
        val = getattr(args, attr, None)
        if val is not None:
            values[key] = val
    for key in ("eta", "nu", "kappa"):
        values.setdefault(key, DEFAULTS[key])
    if "g_eff" not in values and "omega" not in values:
        values["g_eff"] = DEFAULTS["g_eff"]
    if "delta_eff" not in values and "delta" not in values:
        rule = preset.get("delta_rule")
        if rule == "half-kappa":
            values["delta_eff"] = 0.5 * values["kappa"]
        elif rule == "nu":
            values["delta_eff"] = values["nu"]
        else:
            values["delta_eff"] = DEFAULTS["delta_eff"]
    return values, preset


def resolve(args) -> tuple[EffectiveParams, RawParams | None, dict]:
    values, preset = gather_values(args)
    eff, raw = resolve_params(values)
    return eff, raw, preset


def _manifest(args, subcommand, params, outputs, warnings=None):
    def asdict_or_none(x):
        return None if x is None else {k: getattr(x, k) for k in x.__dataclass_fields__}

    m = RunManifest(
        subcommand=subcommand,
        parameters={k: asdict_or_none(v) if hasattr(v, "__dataclass_fields__") else v for k, v in params.items()},
        outputs=[str(o) for o in outputs],
        argv=list(getattr(args, "_argv", [])),
        warnings=warnings or {},
    )
    for out in outputs:
        m.write(out)
    return m


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- subcommands ------------------------------------------------------------------

def cmd_steady(args) -> int:
    p, raw, _ = resolve(args)
    closed = analytic.stationary_closed_form(p)  # raises SingularFormulaError -> exit 2
    first = analytic.m_ss_first_order(p)
    state, stab = moments.stationary_numeric(moments.build_drift(p))
    rate = analytic.cooling_rate(p)
    report = regime_report(p, raw)
    result = {
        "params": {k: getattr(p, k) for k in p.__dataclass_fields__},
        "m_ss_closed": closed.m,
        "m_ss_first_order": first,
        "m_ss_numeric": state.m,
        "mu3": closed.mu3,
        "gamma": rate.gamma,
        "gamma_regime": rate.regime,
        "optimal_delta_eff": analytic.optimal_detuning(p),
        "stability": {"max_real_eigenvalue": stab.max_real_eigenvalue, "hurwitz": stab.hurwitz,
                      "condition": stab.condition},
        "regime": report.as_dict(),
    }
    lines = [
        f"m_ss (closed form)  = {closed.m:.10g}",
        f"m_ss (first order)  = {first:.10g}",
        f"m_ss (linear solve) = {state.m:.10g}",
        f"gamma               = {rate.gamma:.10g}  [{rate.regime}]",
        f"optimal delta_eff   = {result['optimal_delta_eff']:.10g}",
        f"max Re(eig A)       = {stab.max_real_eigenvalue:.6g}  hurwitz={stab.hurwitz}  cond={stab.condition:.3g}",
        f"confinement={report.confinement.value}  timescale_ok={report.timescale_ok} "
        f"(ratio {report.timescale_ratio:.4g})  lamb_dicke_ok={report.lamb_dicke_ok}",
    ]
    print("\n".join(lines))
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2, sort_keys=True, default=str) + "\n")
        _manifest(args, "steady", {"effective": p, "raw": raw}, [args.out])
    if not stab.hurwitz:
        print("error: drift matrix is not Hurwitz; the stationary state is not attracting", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_trajectory(args) -> int:
    p, raw, preset = resolve(args)
    m0 = args.m0 if args.m0 is not None else preset.get("m0", 2500.0)
    if m0 < 0:
        raise UsageError("--m0 must be >= 0")
    if args.n_times < 2:
        raise UsageError("--n-times must be >= 2")
    gamma = analytic.cooling_rate(p).gamma
    t_max = args.t_max
    if t_max is None:
        if gamma <= 0:
            raise UsageError("no cooling at these parameters; give --t-max explicitly")
        t_max = 6.0 / gamma
    if not t_max > 0:
        raise UsageError("--t-max must be > 0")
    sys_ = moments.build_drift(p)
    stab = moments.stability(sys_)
    if stab.max_real_eigenvalue > 0:
        print(f"error: unstable drift matrix (max Re eig {stab.max_real_eigenvalue:.3g})", file=sys.stderr)
        return EXIT_DOMAIN
    times = np.linspace(0.0, t_max, args.n_times)
    traj = moments.evolve(sys_, moments.initial_state(m0), times)
    extra = {"m_analytic": m0 * np.exp(-gamma * times)} if args.analytic else None
    if args.out:
        moments.write_trajectory_csv(args.out, traj, extra)
        _manifest(args, "trajectory", {"effective": p, "raw": raw, "m0": m0, "t_max": t_max,
                                       "n_times": args.n_times, "method": traj.method}, [args.out])
    else:
        moments.write_trajectory_csv(sys.stdout, traj, extra)
    return EXIT_OK


def cmd_sweep(args) -> int:
    values, preset = gather_values(args)
    if preset and preset.get("kind") != "sweep":
        raise UsageError(f"preset {args.preset} is a trajectory preset")
    d_ax = args.delta_eff_axis or (preset.get("delta_eff_axis") or (0.01, 2.0, 50, "log"))[:3]
    n_ax = args.nu_axis or (preset.get("nu_axis") or (0.01, 0.5, 50, "linear"))[:3]
    d_scale = "log" if args.log_delta or (not args.delta_eff_axis and preset.get("delta_eff_axis", (0, 0, 0, "log"))[3] == "log") else "linear"
    n_scale = "log" if args.log_nu or (not args.nu_axis and preset.get("nu_axis", (0, 0, 0, "linear"))[3] == "log") else "linear"
    for ax in (d_ax, n_ax):
        if ax[2] != int(ax[2]):
            raise UsageError("axis COUNT must be an integer")
    grid = SweepGrid(
        delta_eff=Axis("delta_eff", d_ax[0], d_ax[1], int(d_ax[2]), d_scale),
        nu=Axis("nu", n_ax[0], n_ax[1], int(n_ax[2]), n_scale),
        eta=values["eta"],
        g_eff=resolve_params(values)[0].g_eff,
        kappa=values["kappa"],
        numeric=args.numeric,
    )
    rows, nan_cells = run_sweep(grid)
    cols = columns_for(grid)
    if args.out:
        write_rows_csv(args.out, cols, rows)
        _manifest(args, "sweep", {"grid": grid, "preset": args.preset}, [args.out], {"nan_cells": nan_cells})
    else:
        write_rows_csv(sys.stdout, cols, rows)
    if nan_cells:
        print(f"warning: {nan_cells} singular cell(s) written as NaN", file=sys.stderr)
    return EXIT_OK


def _oracle_effective(args, p, raw):
    nb = args.nb if args.nb is not None else max(10, int(10 * args.m0 + 10))
    cfg = oracle.FockConfig(nb, args.nc, budget=args.budget)
    model = oracle.build_effective_model(p, cfg)
    rho0 = _initial(args, cfg)
    times = np.linspace(0.0, args.t_max, args.n_times)
    info = oracle.EvolutionInfo()
    rhos = oracle.evolve_density(model, rho0, times, info=info)
    got = oracle.moment_array(rhos)
    m0 = oracle.extract_moments(rho0).m
    ref = moments.evolve(moments.build_drift(p), moments.initial_state(m0), times)
    dev = float(np.max(np.abs(got - ref.states)))
    otraj = moments.Trajectory(times, got, p, method="lindblad")
    print(f"max |moment deviation| = {dev:.3e}   (trace drift {info.max_trace_drift:.1e})")
    if args.out:
        out = Path(args.out)
        side = out.with_name(out.stem + "_moments" + out.suffix)
        moments.write_trajectory_csv(out, otraj)
        moments.write_trajectory_csv(side, ref)
        _manifest(args, "oracle", {"model": "effective", "effective": p, "cfg": cfg, "initial": args.initial,
                                   "max_deviation": dev}, [out, side])
    return EXIT_OK


def _initial(args, cfg):
    if args.initial == "thermal":
        return oracle.thermal_initial(args.m0, cfg)
    if args.m0 != int(args.m0):
        raise UsageError("Fock initial state needs an integer --m0 (or use --initial thermal)")
    return oracle.fock_initial(int(args.m0), cfg)


def _oracle_full(args, p, raw):
    if raw is None:
        raise UsageError("the full model needs the raw parameter set (--omega --g --delta-cap --delta)")
    deltas = args.compare_delta_cap or [raw.delta_cap]
    nb = args.nb if args.nb is not None else max(6, int(2 * args.m0 + 4))
    cfg = oracle.FockConfig(nb, args.nc, atom_included=True, budget=args.budget)
    times = np.linspace(0.0, args.t_max, args.n_times)
    outputs, summary = [], []
    for D in deltas:
        # keep delta_eff fixed while delta_cap varies
        r = RawParams(omega=raw.omega, g=raw.g, delta_cap=D, delta=p.delta_eff + raw.g**2 / D,
                      nu=raw.nu, eta=raw.eta, kappa=raw.kappa, gamma_cap=raw.gamma_cap)
        pe = derive_effective(r)
        rhos = oracle.evolve_density(oracle.build_full_model(r, cfg, args.mode), _initial(args, cfg), times)
        got = oracle.moment_array(rhos)
        p1 = oracle.excited_population(rhos)
        m0 = got[0, moments.IDX["m"]]
        m_eff = moments.evolve(moments.build_drift(pe), moments.initial_state(m0), times).m
        dev = float(np.max(np.abs(got[:, moments.IDX["m"]] - m_eff)))
        summary.append((D, float(p1.mean()), dev))
        print(f"delta_cap = {D:g}: mean P1 = {p1.mean():.6e}, max |m_full - m_eff| = {dev:.3e}")
        if args.out:
            out = Path(args.out)
            path = out if len(deltas) == 1 else out.with_name(f"{out.stem}_D{D:g}{out.suffix}")
            moments.write_trajectory_csv(path, moments.Trajectory(times, got, pe, method="lindblad"), {"p1": p1})
            outputs.append(path)
    if len(summary) > 1:
        x = np.log([s[0] for s in summary])
        print(f"log-log slope of mean P1 vs delta_cap: {np.polyfit(x, np.log([s[1] for s in summary]), 1)[0]:.4f}")
        print(f"P1 ratio first/last: {summary[0][1] / summary[-1][1]:.4f}")
        print(f"log-log slope of m deviation: {np.polyfit(x, np.log([s[2] for s in summary]), 1)[0]:.4f}")
    if outputs:
        _manifest(args, "oracle", {"model": "full", "raw": raw, "cfg": cfg, "mode": args.mode,
                                   "delta_caps": deltas}, outputs)
    return EXIT_OK


def _oracle_tls(args, p, raw):
    nu = p.nu
    rows = []
    for G in args.gamma_tls:
        if args.delta_tls == "auto":
            d = nu if nu > G else G / 2
        elif args.delta_tls == "half-gamma":
            d = G / 2
        elif args.delta_tls == "nu":
            d = nu
        else:
            try:
                d = float(args.delta_tls)
            except ValueError:
                raise UsageError(f"bad --delta-tls {args.delta_tls!r}") from None
        nb = args.nb if args.nb is not None else validation.tls_cutoff(G, nu, d)
        cfg = oracle.FockConfig(nb, None, atom_included=True, budget=args.budget)
        cfg.check_budget()
        m = validation.tls_stationary_m(G, nu, d, omega_eff=args.omega_eff, eta=p.eta, nb=nb)
        rows.append({"gamma_tls": G, "nu": nu, "delta_tls": d, "phonon_cutoff": nb, "m_ss": m,
                     "gamma_over_nu": G / nu})
        print(f"Gamma = {G:g}, nu = {nu:g}, delta = {d:g}: stationary m = {m:.6e} (cutoff {nb})")
    if len(rows) > 1:
        slope = np.polyfit(np.log([r["gamma_over_nu"] for r in rows]), np.log([r["m_ss"] for r in rows]), 1)[0]
        print(f"log-log slope of m_ss vs Gamma/nu: {slope:.4f}")
    if args.out:
        cols = ("gamma_tls", "nu", "delta_tls", "phonon_cutoff", "m_ss", "gamma_over_nu")
        write_rows_csv(args.out, cols, rows)
        _manifest(args, "oracle", {"model": "tls", "omega_eff": args.omega_eff, "eta": p.eta}, [args.out])
    return EXIT_OK


def cmd_oracle(args) -> int:
    p, raw, _ = resolve(args)
    if args.t_max <= 0 or args.n_times < 1:
        raise UsageError("--t-max must be > 0 and --n-times >= 1")
    return {"effective": _oracle_effective, "full": _oracle_full, "tls": _oracle_tls}[args.model](args, p, raw)


def cmd_validate(args) -> int:
    if args.criteria:
        try:
            ids = validation.select(args.criteria)
        except KeyError as exc:
            raise UsageError(str(exc)) from None
    else:
        ids = list(validation.CORE) + (list(validation.EXTENDED) if args.extended else [])
    results = validation.run(ids)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    summary = {"passed": ok, "version": __version__, "criteria": [r.as_dict() for r in results]}
    failing = [r.id for r in results if not r.passed]
    if failing:
        print(f"failing: {', '.join(failing)}")
    if args.json_path == "-":
        print(json.dumps(summary, indent=2, default=str))
    elif args.json_path:
        Path(args.json_path).write_text(json.dumps(summary, indent=2, default=str) + "\n")
    return EXIT_OK if ok else EXIT_VALIDATION


COMMANDS = {
    "steady": cmd_steady,
    "trajectory": cmd_trajectory,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    args._argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularFormulaError, SingularSystemError) as exc:
        print(f"error: singular: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (DimensionBudgetError, CutoffTooSmallError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except CoolingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    raise SystemExit(main())
