"""
Damped Wave Spectral Lab command line

Entry point for the `dwsl` command. Each subcommand wraps one numerical
module and writes CSV or report text; see `dwsl --help`.
"""
import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

import app_config
from app_config import (geometry_from_settings, load_settings, parse_data_spec, parse_float_list,
                        parse_int_list, profile_from_settings, render_settings)
from core import Boundary, Domain, Geometry, Parity
from errors import FitUnstable, LabError, UsageError
from results_manager import (BRANCH_COLUMNS, EIGEN_COLUMNS, QUASIMODE_COLUMNS, RESOLVENT_COLUMNS,
                             ResultsManager)

# flag dest -> (section, key)
FLAG_MAP = {
    "log_level": ("general", "log_level"),
    "log_file": ("general", "log_file"),
    "threads": ("general", "threads"),
    "output": ("general", "output"),
    "profile": ("profile", "kind"),
    "Btilde": ("profile", "Btilde"),
    "sigma": ("profile", "sigma"),
    "alpha": ("profile", "alpha"),
    "amplitude": ("profile", "amplitude"),
    "c": ("profile", "c"),
    "samples": ("profile", "samples"),
    "domain": ("geometry", "domain"),
    "boundary": ("geometry", "boundary"),
    "parity": ("branch", "parity"),
    "m": ("branch", "m"),
    "vertical_n": ("branch", "n"),
    "h": ("branch", "h"),
    "half_integer_n": ("branch", "half_integer_n"),
    "re_lo": ("spectrum", "re_lo"),
    "re_hi": ("spectrum", "re_hi"),
    "im_lo": ("spectrum", "im_lo"),
    "im_hi": ("spectrum", "im_hi"),
    "modes": ("spectrum", "n"),
    "mode_dump": ("spectrum", "mode_dump"),
    "n": ("quasimode", "n"),
    "margin": ("quasimode", "margin"),
    "sigma_support": ("quasimode", "sigma_support"),
    "cutoff_kind": ("quasimode", "cutoff"),
    "s_lo": ("resolvent", "s_lo"),
    "s_hi": ("resolvent", "s_hi"),
    "count": ("resolvent", "count"),
    "grid_N": ("resolvent", "grid_N"),
    "n_max": ("resolvent", "n_max"),
    "window": ("resolvent", "window"),
    "eps": ("resolvent", "eps"),
    "data": ("simulate", "data"),
    "T": ("simulate", "T"),
    "dt": ("simulate", "dt"),
    "sim_grid_N": ("simulate", "grid_N"),
    "trace_samples": ("simulate", "samples"),
    "per_mode": ("simulate", "per_mode"),
    "fit_model": ("simulate", "fit_model"),
    "freq_cutoff": ("semigroup", "cutoff"),
    "s_list": ("semigroup", "s_list"),
    "gap_alpha": ("semigroup", "alpha"),
    "z_count": ("semigroup", "z_count"),
    "seed": ("semigroup", "seed"),
    "quick": ("verify", "quick"),
}


@dataclass
class RunConfig:
    command: str
    settings: Dict[str, Dict[str, object]]
    profile: object
    geometry: Geometry
    output: str = "-"
    threads: Optional[int] = None


class _Parser(argparse.ArgumentParser):
    """argparse that exits with status 2 and the usage text on any error"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def setup_logging(level="INFO", log_file=None):
    """Configure logging for the application"""
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("general")
    g.add_argument("--config", help="INI or JSON settings file")
    g.add_argument("--log-level", dest="log_level")
    g.add_argument("--log-file", dest="log_file")
    g.add_argument("--threads", type=int, help="worker threads, overrides DWSL_THREADS")
    g.add_argument("--output", "-o", help="output path, '-' for stdout")
    p = common.add_argument_group("damping profile and geometry")
    p.add_argument("--profile", choices=["strip", "smoothexp", "constant", "sampled"])
    p.add_argument("--Btilde", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--samples", help="comma-separated values for the sampled profile")
    p.add_argument("--domain", choices=[d.value for d in Domain])
    p.add_argument("--boundary", choices=[b.value for b in Boundary])

    parser = _Parser(prog="dwsl", description="Damped wave spectral lab")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("branch", parents=[common], help="strip eigenvalue branches")
    sp.add_argument("--parity", choices=[p.value for p in Parity])
    sp.add_argument("--m", type=int)
    sp.add_argument("--n", dest="vertical_n", help="fixed vertical index (default: nearest to 1/(2 pi h))")
    sp.add_argument("--h", help="comma-separated h values")
    sp.add_argument("--half-integer-n", dest="half_integer_n", action="store_const", const=True)

    sp = sub.add_parser("spectrum-box", parents=[common], help="eigenvalues in a rectangle")
    sp.add_argument("--re-lo", dest="re_lo", type=float)
    sp.add_argument("--re-hi", dest="re_hi", type=float)
    sp.add_argument("--im-lo", dest="im_lo", type=float)
    sp.add_argument("--im-hi", dest="im_hi", type=float)
    sp.add_argument("--n", dest="modes", help="vertical indices, e.g. 0..8 or 1,3")
    sp.add_argument("--mode-dump", dest="mode_dump", help="write the first mode as x,re_v,im_v")

    sp = sub.add_parser("quasimode", parents=[common], help="quasimode ratios and lower bound")
    sp.add_argument("--n", dest="n", help="indices, e.g. 1..100")
    sp.add_argument("--margin", type=float)
    sp.add_argument("--sigma-support", dest="sigma_support")
    sp.add_argument("--cutoff", dest="cutoff_kind", choices=["bump", "cos2"])

    sp = sub.add_parser("resolvent-scan", parents=[common], help="resolvent norms along iR")
    sp.add_argument("--s-lo", dest="s_lo", type=float)
    sp.add_argument("--s-hi", dest="s_hi", type=float)
    sp.add_argument("--count", type=int)
    sp.add_argument("--grid-N", dest="grid_N", type=int)
    sp.add_argument("--n-max", dest="n_max")
    sp.add_argument("--window", help="s_lo,s_hi for the fit")
    sp.add_argument("--eps", help="gradient exponent for the indicative bound")

    sp = sub.add_parser("simulate", parents=[common], help="time-domain energy decay")
    sp.add_argument("--data", help="n:m:amplitude,...")
    sp.add_argument("--T", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--grid-N", dest="sim_grid_N", type=int)
    sp.add_argument("--trace-samples", dest="trace_samples", type=int)
    sp.add_argument("--per-mode", dest="per_mode", action="store_const", const=True)
    sp.add_argument("--fit-model", dest="fit_model", choices=["exponential", "polynomial"])

    sp = sub.add_parser("semigroup-verify", parents=[common], help="truncated semigroup identities")
    sp.add_argument("--cutoff", dest="freq_cutoff", type=int)
    sp.add_argument("--s-list", dest="s_list")
    sp.add_argument("--alpha-gap", dest="gap_alpha", type=float)
    sp.add_argument("--z-count", dest="z_count", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("verify-all", parents=[common], help="run the acceptance battery")
    sp.add_argument("--quick", action="store_const", const=True)

    sub.add_parser("export-config", parents=[common], help="write the merged configuration")
    return parser


def parse_args_and_config(argv=None):
    """CLI flags override the config file, which overrides DEFAULT_SETTINGS

    Raises:
        UsageError: bad config values or an inconsistent geometry
        SystemExit: with status 2 for argparse errors or a missing command
    """
    args = build_parser().parse_args(argv)
    settings = load_settings(args.config)
    overrides: Dict[str, Dict[str, object]] = {}
    for dest, (section, key) in FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    settings = app_config.merge_settings(overrides, settings)
    general = settings["general"]
    return RunConfig(
        command=args.command,
        settings=settings,
        profile=profile_from_settings(settings["profile"]),
        geometry=geometry_from_settings(settings["geometry"]),
        output=str(general["output"]),
        threads=int(general["threads"]) or None,
    )


def _optional_float(text):
    return float(text) if str(text).strip() else None


def _optional_int(text):
    return int(text) if str(text).strip() else None


def _sidecar(config, suffix):
    return None if config.output in ("-", "") else config.output + suffix


def cmd_branch(config):
    from strip_spectrum import BranchParams, asymptotic_im_zeta, branch, square_spectrum

    s = config.settings["branch"]
    prof = config.settings["profile"]
    if prof["kind"] != "strip":
        raise UsageError("branch needs --profile strip")
    params = BranchParams(float(prof["Btilde"]), float(prof["sigma"]), Parity(s["parity"]), int(s["m"]),
                          _optional_float(s["n"]))
    hs = sorted(parse_float_list(s["h"], "branch.h"), reverse=True)
    if not hs:
        raise UsageError("branch needs at least one h")
    if config.geometry.domain is Domain.SQUARE:
        roots = [square_spectrum(params, h, config.geometry.boundary) for h in hs]
    elif s["half_integer_n"]:
        from strip_spectrum import solve_branch_at_h
        roots = [solve_branch_at_h(params, h, half_integer_n=True) for h in hs]
    else:
        roots = branch(params, hs)
    rows = ResultsManager.branch_rows(roots, lambda r: asymptotic_im_zeta(params, r.h))
    ResultsManager.write_csv(config.output, BRANCH_COLUMNS, rows)
    return 0


def cmd_spectrum_box(config):
    from monodromy import Box, spectrum_in_box
    from resolvent import worker_count

    s = config.settings["spectrum"]
    box = Box(float(s["re_lo"]), float(s["re_hi"]), float(s["im_lo"]), float(s["im_hi"]))
    text = str(s["n"])
    # half-integer indices are only meaningful on the square
    n_range = parse_int_list(text, "spectrum.n") if ".." in text else parse_float_list(text, "spectrum.n")
    solutions = spectrum_in_box(box, n_range, config.profile, config.geometry,
                                workers=worker_count(config.threads))
    ResultsManager.write_csv(config.output, EIGEN_COLUMNS, ResultsManager.eigen_rows(solutions))
    if s["mode_dump"] and solutions:
        ResultsManager.write_text(s["mode_dump"], ResultsManager.mode_dump(solutions[0].x, solutions[0].mode))
    return 0


def cmd_quasimode(config):
    from quasimode import build_cutoff, cos_squared_cutoff, quasimode_table

    s = config.settings["quasimode"]
    support = _optional_float(s["sigma_support"])
    if s["cutoff"] == "cos2":
        if support is None:
            raise UsageError("the cos2 cutoff needs --sigma-support")
        cutoff = cos_squared_cutoff(support, int(s["samples"]))
    else:
        cutoff = build_cutoff(config.profile, float(s["margin"]), int(s["samples"]), support)
    rows = quasimode_table(parse_int_list(s["n"], "quasimode.n"), cutoff, config.profile)
    ResultsManager.write_csv(config.output, QUASIMODE_COLUMNS, [list(r) for r in rows])
    return 0


def cmd_resolvent_scan(config):
    from resolvent import offset_grid, scan_and_fit

    s = config.settings["resolvent"]
    grid = offset_grid(float(s["s_lo"]), float(s["s_hi"]), int(s["count"]))
    window = parse_float_list(s["window"], "resolvent.window") or None
    scan = scan_and_fit(config.profile, grid, n_max=_optional_int(s["n_max"]), grid_N=int(s["grid_N"]),
                        window=window, workers=config.threads, eps=_optional_float(s["eps"]))
    rows = [[sv, nv, an, scan.grid_N] for sv, nv, an in zip(scan.s_grid, scan.norms, scan.argmax_n)]
    ResultsManager.write_csv(config.output, RESOLVENT_COLUMNS, rows)
    summary = {"exponent": scan.fitted_exponent, "window": list(scan.fit_window),
               "residual": scan.fit_residual, "indicative_exponent": scan.indicative_exponent}
    logging.info("fit summary: %s", summary)
    sidecar = _sidecar(config, ".fit.json")
    if sidecar:
        ResultsManager.export_to_json(sidecar, summary)
    return 0


def cmd_simulate(config):
    from energy_sim import DecayModel, fit_decay, run

    s = config.settings["simulate"]
    trace = run(config.profile, parse_data_spec(s["data"]), float(s["T"]), float(s["dt"]),
                grid_N=int(s["grid_N"]), samples=int(s["samples"]), record_modes=bool(s["per_mode"]))
    header, rows = ResultsManager.trace_rows(trace, per_mode=bool(s["per_mode"]))
    ResultsManager.write_csv(config.output, header, rows)
    summary = {"identity_residual": trace.identity_residual,
               "trapezoid_residual": trace.trapezoid_residual,
               "E0": trace.energies[0], "E_final": trace.energies[-1]}
    if trace.energies[0] > 0:
        try:
            fit = fit_decay(trace, DecayModel(s["fit_model"]))
            summary.update({"model": fit.model.value, "rate_or_exponent": fit.rate_or_exponent, "r2": fit.r2})
        except FitUnstable as e:
            logging.warning("no decay fit: %s", e)
    logging.info("simulation summary: %s", summary)
    sidecar = _sidecar(config, ".fit.json")
    if sidecar:
        ResultsManager.export_to_json(sidecar, summary)
    return 0


def cmd_semigroup_verify(config):
    from semigroup_lab import (build_system, check_gap_region, check_observability_ingredient,
                               check_resolvent_identity, check_sandwich, check_spectrum_localization)

    s = config.settings["semigroup"]
    system = build_system(config.profile, int(s["cutoff"]))
    checks = []
    loc = check_spectrum_localization(system, strict=False)
    checks.append(("spectrum localization", loc.passed,
                   f"{loc.eigenvalue_count} eigenvalues, max violation {loc.max_violation:.2e}"))
    checks.append(("kernel of generator", loc.kernel.holds,
                   f"dim {loc.kernel.dim_ker_generator} vs dim ker A {loc.kernel.dim_ker_A}"))
    checks.append(("damping norm", None, f"||B*||={loc.norm_Bstar:.17g}, sup sqrt(b)={loc.sup_sqrt_b:.17g}, "
                                         f"truncated bound binding: {loc.truncated_bound_binding}"))
    if config.profile.is_even():
        checks.append(("conjugate symmetry", loc.conjugate_symmetric, "spectrum closed under conjugation"))
    rng = np.random.default_rng(int(s["seed"]))
    count = int(s["z_count"])
    zs = rng.uniform(-0.4, -0.01, count) + 1j * rng.uniform(1.0, 50.0, count)
    worst = max((check_resolvent_identity(system, z) for z in zs), default=0.0)
    checks.append(("resolvent block identity", worst <= 1e-10, f"max relative residual {worst:.3e}"))
    s_list = parse_float_list(s["s_list"], "semigroup.s_list")
    sandwich = check_sandwich(system, s_list, workers=config.threads)
    checks.append(("sandwich constant", math.isfinite(sandwich.constant), f"C = {sandwich.constant:.17g}"))
    gap = check_gap_region(system, float(s["alpha"]))
    checks.append(("gap region", None, f"min |Re z| |Im z|^{gap.exponent:.4f} = {gap.min_product:.6g} "
                                       f"at {gap.argmin}"))
    obs = check_observability_ingredient(system, s_list)
    checks.append(("observability constant", None, ", ".join(f"s={a:g}: {b:.6g}" for a, b in zip(s_list, obs))))
    ResultsManager.write_text(config.output, ResultsManager.render_report("semigroup-verify", checks))
    sidecar = _sidecar(config, ".csv")
    if sidecar:
        rows = [[sv, rn, pn, ob] for sv, rn, pn, ob in
                zip(sandwich.s_list, sandwich.semigroup_norms, sandwich.scaled_P_norms, obs)]
        ResultsManager.write_csv(sidecar, ["s", "semigroup_resolvent", "s_times_P_inverse", "observability_C"],
                                 rows)
    return 0 if all(p is not False for _, p, _ in checks) else 1


def cmd_verify_all(config):
    from acceptance import run_battery

    results = run_battery(quick=bool(config.settings["verify"]["quick"]))
    ResultsManager.write_text(config.output, ResultsManager.render_report("verify-all", results))
    return 0 if all(p is not False for _, p, _ in results) else 1


def cmd_export_config(config):
    text = render_settings(config.settings, as_json=config.output.endswith(".json"))
    ResultsManager.write_text(config.output, text)
    return 0


HANDLERS = {
    "branch": cmd_branch,
    "spectrum-box": cmd_spectrum_box,
    "resolvent-scan": cmd_resolvent_scan,
    "quasimode": cmd_quasimode,
    "simulate": cmd_simulate,
    "semigroup-verify": cmd_semigroup_verify,
    "verify-all": cmd_verify_all,
    "export-config": cmd_export_config,
}


def run(config):
    """Dispatch the command; returns the process exit code"""
    if config.threads:
        os.environ["DWSL_THREADS"] = str(config.threads)
    try:
        return HANDLERS[config.command](config)
    except UsageError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except LabError as e:
        logging.error(f"{config.command} failed: {e}", exc_info=True)
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logging.error(f"Unexpected error in {config.command}: {e}", exc_info=True)
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


def main(argv=None):
    """Main entry point for the application"""
    try:
        config = parse_args_and_config(argv)
    except UsageError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    general = config.settings["general"]
    setup_logging(general["log_level"], general["log_file"] or None)
    logging.info("dwsl %s", config.command)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
