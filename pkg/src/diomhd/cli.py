"""Command-line entry point: scenarios, config handling and artifact emission.

Exit codes: 0 success, 2 configuration error, 3 run failure (positivity,
CFL or non-finite state), 4 failed assertion.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import diophantine as dio
from .checkpoint import write_checkpoint
from .config import Config, ConfigError, load_config
from .diagnostics import (
    CSV_COLUMNS,
    EnergyMonitor,
    IdentityMonitor,
    decay_fit,
)
from .linear import band_spectrum_scan
from .report import read_csv, write_csv, write_report
from .solver import (
    PositivityError,
    RunResult,
    SolverConfig,
    prepare_initial_data,
    random_initial_data,
    run,
)
from .spectral import Grid3
from .state import PerturbationState

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN = 3
EXIT_ASSERT = 4

IDENTITY_TOL = 1e-4


@dataclass
class ScenarioResult:
    """Artifacts written and the exit status of a scenario."""

    status: int
    artifacts: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Shared pieces
# --------------------------------------------------------------------------


def initial_state(cfg: Config, solver_cfg: SolverConfig) -> PerturbationState:
    grid = Grid3(solver_cfg.n)
    kind = cfg["init.kind"]
    amp = cfg["init.amplitude"]
    window = solver_cfg.positivity_window
    if kind == "zero":
        return PerturbationState.zeros(grid)
    if kind == "h_mode":
        # h = amp cos(2 pi x_2) e_1, divergence free
        _, y, _ = grid.points()
        h = np.zeros((3,) + grid.shape)
        h[0] = amp * np.cos(2 * np.pi * y)
        return prepare_initial_data(grid, None, None, h, window)
    return random_initial_data(grid, amp, cfg["init.seed"], cfg["init.k_max"], window)


def _run_section(result: RunResult):
    items = [
        ("completed", result.completed),
        ("steps", result.steps),
        ("dt", result.dt),
        ("last_valid_time", result.last_valid_time),
        ("failure_reason", result.reason or "none"),
        ("failure_message", result.message or "none"),
    ]
    if result.failure_rho is not None:
        items.append(("failure_rho_extrema", result.failure_rho))
    if result.failure_stage:
        items.append(("failure_stage", result.failure_stage))
    return ("run", items)


def _config_section(cfg: Config):
    return ("config", [(line.split(" = ", 1)[0], line.split(" = ", 1)[1]) for line in cfg.lines()])


def simulate(cfg: Config, out: Path, tag: str = "") -> tuple[RunResult, EnergyMonitor, list[Path]]:
    """Run the configured simulation with full monitoring; writes the time series."""
    scfg = cfg.solver_config()
    orders = cfg.orders()
    state = initial_state(cfg, scfg)
    monitor = EnergyMonitor(scfg.pressure, scfg.w, orders, cadence=cfg["output.cadence"],
                            weights=cfg["diag.weights"])
    result = run(scfg, state, [monitor])
    try:
        delta = monitor.auto_delta(cfg["diag.delta_start"])
    except RuntimeError:
        delta = 0.0
    reports = monitor.with_delta(delta)
    name = f"timeseries{tag}.csv"
    paths = [write_csv(out / name, CSV_COLUMNS, [r.row() for r in reports])]
    if cfg["output.checkpoint"]:
        paths.append(write_checkpoint(out / f"final{tag}.mhdt", result.final_state))
    monitor.delta_star = delta
    return result, monitor, paths


# --------------------------------------------------------------------------
# Scenarios
# --------------------------------------------------------------------------


def scenario_simulate(cfg: Config, out: Path) -> ScenarioResult:
    result, monitor, paths = simulate(cfg, out)
    paths.append(write_report(out / "run_report.txt", "simulation", [
        _config_section(cfg), _run_section(result), ("diagnostics", [("delta_star", monitor.delta_star),
                                                                     ("samples", len(monitor.reports))]),
    ]))
    return ScenarioResult(EXIT_OK if result.completed else EXIT_RUN, paths, {"completed": result.completed})


def scenario_decay_run(cfg: Config, out: Path) -> ScenarioResult:
    result, monitor, paths = simulate(cfg, out)
    t = monitor.series("t")
    E = monitor.series("E_phys")
    fit_items: list[tuple[str, object]]
    try:
        fit = decay_fit(t, E)
        fit_items = [("C", fit.C), ("alpha", fit.alpha), ("p", fit.p), ("residual", fit.residual),
                     ("window", fit.window), ("degenerate", fit.degenerate), ("converged", fit.converged)]
    except ValueError as err:
        fit = None
        fit_items = [("error", str(err))]
    monotone = bool(np.all(np.diff(E) <= 1e-13 * max(E[0], 1e-300))) if len(E) > 1 else True
    paths.append(write_report(out / "decay_fit.txt", "decay fit of E_phys(t) = C (1 + alpha t)^-p", [
        _config_section(cfg), _run_section(result), ("fit", fit_items),
        ("energy", [("E_phys_monotone", monotone), ("E_phys_initial", E[0]), ("E_phys_final", E[-1]),
                    ("delta_star", monitor.delta_star)]),
    ]))
    status = EXIT_OK if result.completed else EXIT_RUN
    return ScenarioResult(status, paths, {"fit": fit, "monotone": monotone})


def scenario_decay_fit_file(path: Path, out: Path, column: str = "E_phys") -> ScenarioResult:
    header, data = read_csv(path)
    if "t" not in header or column not in header:
        raise ConfigError(f"{path} lacks the columns t and {column}")
    fit = decay_fit(data[:, header.index("t")], data[:, header.index(column)])
    p = write_report(out / "decay_fit.txt", f"decay fit of {column}", [
        ("input", [("path", str(path)), ("column", column)]),
        ("fit", [("C", fit.C), ("alpha", fit.alpha), ("p", fit.p), ("residual", fit.residual),
                 ("window", fit.window), ("degenerate", fit.degenerate), ("converged", fit.converged)]),
    ])
    return ScenarioResult(EXIT_OK, [p], {"fit": fit})


def scenario_identity_check(cfg: Config, out: Path) -> ScenarioResult:
    scfg = cfg.solver_config()
    state = initial_state(cfg, scfg)
    mon = IdentityMonitor(scfg.pressure)
    result = run(scfg, state, [mon])
    rep = mon.identity(cfg["diag.identity_order"])
    rows = zip(rep.times, rep.energy, rep.dissipation, rep.dEdt, rep.residual, rep.relative)
    paths = [write_csv(out / "identity.csv", ("t", "E_phys", "dissipation", "dEdt", "residual", "relative"), rows)]
    ok = rep.max_relative <= IDENTITY_TOL
    paths.append(write_report(out / "identity_report.txt", "energy identity check", [
        _config_section(cfg), _run_section(result),
        ("identity", [("max_relative_residual", rep.max_relative), ("tolerance", IDENTITY_TOL), ("passed", ok)]),
    ]))
    status = EXIT_RUN if not result.completed else (EXIT_OK if ok else EXIT_ASSERT)
    return ScenarioResult(status, paths, {"max_relative": rep.max_relative})


def scenario_euler_compare(cfg: Config, out: Path) -> ScenarioResult:
    magnetised = cfg
    plain = cfg.with_overrides(["physics.w=0 0 0"])
    res_w, mon_w, paths = simulate(magnetised, out, "_magnetised")
    res_0, mon_0, p0 = simulate(plain, out, "_unmagnetised")
    paths += p0

    def fluid_energy(mon):
        # E_phys minus the magnetic part 1/2 |h|^2
        return mon.series("E_phys") - np.array([r.h_energy for r in mon.reports])

    rows = []
    for label, res, mon in (("magnetised", res_w, mon_w), ("unmagnetised", res_0, mon_0)):
        fe = fluid_energy(mon)
        rows.append((label, res.completed, res.last_valid_time, res.reason or "none", mon.series("E_phys")[0],
                     mon.series("E_phys")[-1], fe[0], fe[-1], fe[-1] / fe[0] if fe[0] > 0 else float("nan")))
    cols = ("run", "completed", "last_valid_time", "failure", "E_phys_initial", "E_phys_final", "fluid_energy_initial",
            "fluid_energy_final", "fluid_energy_ratio")
    paths.append(write_csv(out / "euler_compare.csv", cols, rows))
    status = EXIT_OK if res_w.completed else EXIT_RUN
    return ScenarioResult(status, paths, {"rows": rows})


def scenario_check_diophantine(cfg: Config, out: Path) -> ScenarioResult:
    w, r, K = cfg["physics.w"], cfg["physics.r"], cfg["dio.K"]
    rep = dio.margin_report(w, r, K)
    table = dio.margin_table(w, r, K)
    tilde = dio.tilde_inequality_check(w, K)
    paths = [write_csv(out / "margins.csv", ("k1", "k2", "k3", "abs_k", "dot_value", "cross_value"), table)]
    status_text = "Diophantine in band" if rep.diophantine_in_band else "not Diophantine in band"
    paths.append(write_report(out / "diophantine_report.txt", "Diophantine band certification", [
        _config_section(cfg),
        ("margins", [("w", w), ("r", r), ("K", K), ("status", status_text), ("dot_margin", rep.dot_margin),
                     ("dot_argmin", rep.dot_argmin), ("cross_margin", rep.cross_margin),
                     ("cross_argmin", rep.cross_argmin)]),
        ("tilde", [("checked", tilde.checked), ("violations", len(tilde.violations)), ("passed", tilde.passed)]),
    ]))
    return ScenarioResult(EXIT_OK, paths, {"report": rep, "status": status_text})


def scenario_inequality_cert(cfg: Config, out: Path) -> ScenarioResult:
    res = scenario_check_diophantine(cfg, out)
    w, r, K, s = cfg["physics.w"], cfg["physics.r"], cfg["dio.K"], cfg["dio.s"]
    consts = dio.empirical_constants(w, s, r, K)
    items = [("status", consts.status), ("s", s), ("r", r), ("K", K), ("K1_emp", consts.K1_emp),
             ("K2_emp", consts.K2_emp), ("K3_emp", consts.K3_emp), ("worst_k1", consts.worst_k1),
             ("worst_k2", consts.worst_k2), ("worst_k3_dot", consts.worst_k3_dot)]
    sections = [_config_section(cfg), ("constants", items)]
    ok = True
    if consts.diophantine_in_band:
        cert = dio.certify_constants(w, s, r, K=min(K, 8), samples=cfg["dio.samples"], seed=cfg["init.seed"])
        ok = cert.holds()
        sections.append(("certification", [("K", min(K, 8)), ("samples", cert.samples),
                                           ("max_K1_ratio", cert.max_observed("K1")),
                                           ("max_K2_ratio", cert.max_observed("K2")),
                                           ("max_K3_ratio", cert.max_observed("K3_dot")),
                                           ("holds", ok)]))
    harness = dio.ratio_harness(samples=min(cfg["dio.samples"], 20), seed=cfg["init.seed"])
    sections.append(("harness", [(h.name, h.max_ratio) for h in harness]))
    res.artifacts.append(write_report(out / "inequality_report.txt", "empirical inequality constants", sections))
    res.summary["constants"] = consts
    res.status = EXIT_OK if ok else EXIT_ASSERT
    return res


def scenario_linear_sweep(cfg: Config, out: Path) -> ScenarioResult:
    w = cfg["physics.w"]
    scan = band_spectrum_scan(w, cfg["linear.beta"], cfg["physics.nu"], cfg["linear.K"])
    cols = ("k1", "k2", "k3", "max_real_part", "imag_at_max", "neutral_count")
    paths = [write_csv(out / "spectrum.csv", cols, scan.rows)]
    paths.append(write_report(out / "spectrum_report.txt", "linear spectrum sweep", [
        _config_section(cfg),
        ("spectrum", [("K", scan.K), ("max_abscissa", scan.max_abscissa), ("argmax", scan.argmax),
                      ("neutral_modes", len(scan.neutral_modes))]),
    ]))
    return ScenarioResult(EXIT_OK, paths, {"scan": scan})


SCENARIOS: dict[str, Callable[[Config, Path], ScenarioResult]] = {
    "decay-run": scenario_decay_run,
    "euler-compare": scenario_euler_compare,
    "inequality-cert": scenario_inequality_cert,
    "linear-sweep": scenario_linear_sweep,
    "identity-check": scenario_identity_check,
}

SUBCOMMANDS = {
    "check-diophantine": scenario_check_diophantine,
    "verify-inequalities": scenario_inequality_cert,
    "linear-spectrum": scenario_linear_sweep,
    "simulate": scenario_simulate,
    "decay-fit": scenario_decay_run,
    "identity-check": scenario_identity_check,
    "euler-compare": scenario_euler_compare,
}


def run_scenario(name: str, cfg: Config, out) -> ScenarioResult:
    """Run a named scenario, writing artifacts into ``out``."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return SCENARIOS[name](cfg, out)


# --------------------------------------------------------------------------
# argparse front end
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diomhd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--out", type=Path, help="output directory (default: output.dir)")
        p.add_argument("--seed", type=int, help="seed for random initial data")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        if name == "decay-fit":
            p.add_argument("--input", type=Path, help="fit an existing time-series CSV instead of running")
            p.add_argument("--column", default="E_phys", help="column to fit with --input")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else Config.defaults()
        overrides = list(args.override)
        if args.seed is not None:
            overrides.append(f"init.seed={args.seed}")
        cfg = cfg.with_overrides(overrides)
        out = Path(args.out) if args.out else Path(cfg["output.dir"])
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        if args.command == "decay-fit" and args.input is not None:
            result = scenario_decay_fit_file(args.input, out, args.column)
        else:
            result = SUBCOMMANDS[args.command](cfg, out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except PositivityError as err:
        print(f"run failure: {err}", file=sys.stderr)
        return EXIT_RUN
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    logger.info("%s finished in %.1f s", args.command, time.perf_counter() - start)
    for path in result.artifacts:
        print(path)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
