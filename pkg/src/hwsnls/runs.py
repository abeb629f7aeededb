"""Subcommand orchestration: build inputs from a RunConfig, run, and persist artifacts.

Every run directory holds ``config.json`` (the validated configuration and
the schema version), ``report.json`` and ``series.csv``, plus snapshots and
figures where they apply.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import experiments as ex
from . import inequalities as iq
from .config import SCHEMA_VERSION, RunConfig
from .evolution import Status, StepperConfig, evolve
from .functionals import REPORT_COLUMNS, Equation, ModelSpec, VirialCutoff
from .groundstate import (
    ConstraintError,
    GroundStateResult,
    load_ground_state,
    minimize_local_ball,
    minimize_nehari,
    minimize_sphere,
    suggest_local_ball_grid,
    verify_ground_state,
)
from .snapshot import load_snapshot
from .spectral import ComplexField, Grid, lp_max_index

OUTPUT_ENV = "HWSNLS_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONTRACT = 2


@dataclass
class RunOutcome:
    """What a subcommand produced before it is written to disk."""

    contract: bool
    report: dict
    columns: tuple[str, ...] = ()
    rows: list = field(default_factory=list)
    writers: list[Callable[[Path], None]] = field(default_factory=list)
    reason: str = ""


def output_root(cfg: RunConfig, override: str | Path | None = None) -> Path:
    """CLI flag, then the config's output_dir, then $HWSNLS_OUTPUT_ROOT, then ./runs."""
    for cand in (override, cfg.data.get("output_dir"), os.environ.get(OUTPUT_ENV)):
        if cand:
            return Path(cand)
    return Path("runs")


# ---------------------------------------------------------------------------
# inputs


def config_grid(cfg: RunConfig) -> Grid:
    g = cfg.section("grid")
    return Grid(int(cfg.data["n"]), int(g["N"]), float(g["L"]))


def initial_field(cfg: RunConfig, grid: Grid | None = None) -> ComplexField:
    """Initial datum from the ``initial`` section."""
    ini = cfg.section("initial")
    if ini["preset"] == "snapshot":
        u, _ = load_snapshot(Path(ini["path"]))
        return u
    grid = grid or config_grid(cfg)
    a = float(ini["amplitude"])
    if ini["preset"] == "plane_wave":
        k = 2.0 * math.pi * int(ini["mode"]) / grid.length
        return ComplexField.from_function(grid, lambda *xs: a * np.exp(1j * k * xs[0]) + 0 * sum(xs),
                                          filter_nyquist=False)
    w = float(ini["width"])
    v = float(ini["velocity"])
    return ComplexField.from_function(
        grid, lambda *xs: a * np.exp(-sum(x**2 for x in xs) / (2 * w**2)) * np.exp(1j * v * xs[0])
    )


def solve_ground_state(cfg: RunConfig, model: ModelSpec | None = None) -> GroundStateResult:
    """Pick the constrained problem matching the model and solve it on the configured grid.

    L2-subcritical powers minimize on the mass sphere; in the supercritical
    window sNLS minimizes locally inside the H^{1/2} ball and HW on the
    Pohozaev manifold.  With ``grid.auto`` the one-dimensional ball problem
    sizes its box from the small-mass soliton width and keeps ``grid.N``.
    """
    model = model or cfg.model
    c = cfg.section("constraint")
    r = float(c["r"])
    gs = cfg.section("experiment").get("ground_state")
    if gs:
        stem = Path(gs)
        if stem.is_dir():
            stem = stem / "ground_state"
        return load_ground_state(stem)
    grid = config_grid(cfg)
    if model.is_subcritical:
        return minimize_sphere(r, model, grid)
    if model.equation is Equation.SNLS:
        rho = c["rho_max"] if c["rho_max"] is not None else 1.0
        if cfg.section("grid")["auto"] and model.n == 1:
            grid = suggest_local_ball_grid(r, model, int(cfg.section("grid")["N"]))
        return minimize_local_ball(r, model, grid, rho_max=rho)
    return minimize_nehari(r, model, grid)


def _stepper(cfg: RunConfig, t_end: float | None = None) -> StepperConfig:
    st = cfg.section("stepper")
    return StepperConfig(float(st["dt"]), float(t_end if t_end is not None else st["t_end"]),
                         observe_every=int(st["observe_every"]), snapshot_stride=int(st["snapshot_stride"]),
                         resolution_tol=st["resolution_tol"])


# ---------------------------------------------------------------------------
# subcommands


def run_simulate(cfg: RunConfig) -> RunOutcome:
    model = cfg.model
    f = initial_field(cfg)
    traj = evolve(f, model, _stepper(cfg))
    m = traj.series("mass")
    e = traj.series("E")
    report = {
        "status": traj.status,
        "message": traj.message,
        "steps": traj.steps_taken,
        "last_valid_t": traj.last_valid_t,
        "mass_drift": float(np.max(np.abs(m - m[0])) / m[0]) if m[0] else 0.0,
        "energy_drift": float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1e-300)),
    }
    rows = [rec.csv_values() for rec in traj.records]
    writers = [lambda d: traj.write_snapshots(d / "snapshots")] if traj.snapshots else []
    return RunOutcome(traj.completed, report, REPORT_COLUMNS, rows, writers,
                      "" if traj.completed else traj.message)


def run_groundstate(cfg: RunConfig) -> RunOutcome:
    res = solve_ground_state(cfg)
    ver = verify_ground_state(res)
    report = res.ledger()
    report["verification"] = {k: {"value": v, "tolerance": t, "passed": ok} for k, (v, t, ok) in ver.checks.items()}
    report["verification_passed"] = ver.passed
    rows = [tuple(row) for row in res.log]
    return RunOutcome(res.converged, report, ("iteration", "objective", "stationarity"), rows,
                      [lambda d: res.save(d / "ground_state")], "" if res.converged else res.status)


def run_stability(cfg: RunConfig) -> RunOutcome:
    ex_ = cfg.section("experiment")
    st = cfg.section("stepper")
    res = solve_ground_state(cfg)
    try:
        rep = ex.stability_run(res, float(ex_["delta"]), float(ex_["horizon"]), float(st["dt"]),
                               observe_every=int(st["observe_every"]), perturbation=ex_["perturbation"],
                               seed=int(cfg.section("seeds")["perturbation"]),
                               bound_factor=float(ex_["bound_factor"]), resolution_tol=st["resolution_tol"])
    except ValueError as exc:
        return RunOutcome(False, {"refused": str(exc), "ground_state": res.ledger()}, reason=str(exc))
    report = rep.summary()
    report["ground_state"] = res.ledger()
    cols, rows = rep.series()
    return RunOutcome(rep.verdict == "stable", report, cols, rows,
                      reason="" if rep.verdict == "stable" else f"verdict {rep.verdict}")


INFLATION_MASS_TOL = 1e-9


def run_instability(cfg: RunConfig) -> RunOutcome:
    ex_ = cfg.section("experiment")
    st = cfg.section("stepper")
    res = solve_ground_state(cfg)
    try:
        rep = ex.instability_run(res, float(ex_["lambda"]), float(ex_["horizon"]), float(st["dt"]),
                                 observe_every=int(st["observe_every"]), override=bool(ex_["override"]),
                                 resolution_tol=st["resolution_tol"])
    except ex.HypothesisError as exc:
        report = {"refused": str(exc), "failed": exc.failed, "hypotheses": exc.details,
                  "ground_state": res.ledger()}
        return RunOutcome(False, report, reason=str(exc))
    except ValueError as exc:
        return RunOutcome(False, {"refused": str(exc), "ground_state": res.ledger()}, reason=str(exc))
    report = rep.summary()
    report["ground_state"] = res.ledger()
    ok = rep.status in ("inflated", "guard-tripped") and rep.P_ceiling < 0 and rep.mass_drift <= INFLATION_MASS_TOL
    cols, rows = rep.series()
    reason = "" if ok else f"status {rep.status}, max P {rep.P_ceiling:.4g}, mass drift {rep.mass_drift:.3g}"
    return RunOutcome(ok, report, cols, rows, reason=reason)


def run_virial_check(cfg: RunConfig) -> RunOutcome:
    """Closure of the quadratic virial and the calibrated localized bound.

    The constant of the localized bound is calibrated per radius on a
    reference run started from the same profile at rest, and checked on the
    configured datum.
    """
    model = cfg.model
    st = cfg.section("stepper")
    ex_ = cfg.section("experiment")
    dt, t_end, every = float(st["dt"]), float(st["t_end"]), int(st["observe_every"])
    f = initial_field(cfg)
    samples, traj = ex.record_samples(f, model, dt, t_end, every, st["resolution_tol"])
    closure = ex.virial_closure_check(samples, model, float(ex_["rel_tol"]))
    ref_cfg = RunConfig({**cfg.data, "initial": {**cfg.section("initial"), "velocity": 0.0}})
    ref_samples, _ = ex.record_samples(initial_field(ref_cfg), model, dt, t_end, every, st["resolution_tol"])
    localized = []
    for R in ex_["R_virial"]:
        C = ex.calibrate_virial_constant(ref_samples, model, float(R))
        localized.append(ex.localized_virial_check(samples, model, float(R), C))
    ok = closure.passed and all(c.passed for c in localized) and traj.status == Status.OK
    report = {
        "closure": closure.summary(),
        "localized": [c.summary() for c in localized],
        "evolution_status": traj.status,
        "exponent_beta": ex.virial_exponent(model),
    }
    cols, rows = closure.series()
    reason = "" if ok else "virial closure or localized bound violated"
    return RunOutcome(ok, report, cols, rows, reason=reason)


def run_inequalities(cfg: RunConfig) -> RunOutcome:
    """Strauss, log-refined Strauss and weighted L^{p+1} probes for the configured (n, p).

    The log-refined sweeps are two-dimensional; in three dimensions only
    the Strauss and weighted probes run.
    """
    model = cfg.model
    n = model.n
    probes: list[iq.Probe] = []
    grid = Grid(n, 256 if n == 2 else 64, 15.0)
    g = iq.radial_field(grid, lambda r: np.exp(-r**2 / 2))
    a = 0.5 * (n - 1)
    exact = a ** (a / 2) * math.exp(-a / 2)
    lhs = iq.strauss_lhs(g)
    probes.append(iq.Probe("strauss_gaussian", 0.0, lhs, iq.sobolev_norm(g, 1.0)))
    block_grid = Grid(n, 512, 12.5) if n == 2 else Grid(n, 64, 12.5)
    top = min(6, lp_max_index(block_grid))
    blocks = iq.strauss_block_sweep(iq.radial_field(block_grid, lambda r: (1 + r**2) ** -1.5), range(top + 1))
    probes += blocks
    gauss = lac = None
    if n == 2:
        gauss = iq.bg_gaussian_sweep(dim=n)
        lac = iq.bg_lacunary_sweep(dim=n)
        probes += gauss.rows() + lac.rows()
    rub_grid = Grid(n, 256 if n == 2 else 64, 24.0)
    rubins = []
    for shift in (0.0, 0.5, 1.0, 2.0):
        rep = iq.rubin_check(iq.shifted_bump(rub_grid, shift), model.p)
        rubins.append({"shift": shift, "ratio": rep.ratio, "decay_ratios": rep.decay_ratios,
                       "non_increasing": iq.non_increasing(rep.decay_ratios, abs_tol=DECAY_RATIO_FLOOR)})
        probes += rep.rows(f"rubin_shift_{shift:g}")
    block_ratios = [b.ratio for b in blocks]

    def sweep(sw):
        return None if sw is None else {"parameters": sw.parameters, "bg": sw.bg, "naive": sw.naive,
                                        "naive_growth": sw.naive_growth, "saturates": bg_saturates(sw)}

    report = {
        "strauss": {"lhs": lhs, "closed_form": exact, "error": abs(lhs - exact)},
        "strauss_blocks": {"ratios": block_ratios, "max": max(block_ratios), "min": min(block_ratios)},
        "bg_gaussian": sweep(gauss),
        "bg_lacunary": sweep(lac),
        "rubin": {"exponents": iq.rubin_exponents(n, model.p), "decay_exponent": iq.decay_exponent(n, model.p),
                  "bumps": rubins},
    }
    ok = abs(lhs - exact) <= 1e-6 and all(r["non_increasing"] for r in rubins)
    if lac is not None:
        ok = ok and bg_saturates(lac) and lac.naive_growth >= BG_NAIVE_GROWTH
    return RunOutcome(ok, report, iq.SWEEP_COLUMNS, probes, reason="" if ok else "an inequality probe failed")


BG_NAIVE_GROWTH = 1.5
# exterior integrals below this are quadrature rounding, not decay
DECAY_RATIO_FLOOR = 1e-12


def bg_saturates(sweep: iq.BGSweep, bound: float = 1.0) -> bool:
    """Log-corrected ratios stay below ``bound`` and their increments shrink along the sweep."""
    inc = np.diff(sweep.bg)
    return bool(max(sweep.bg) <= bound and np.all(np.diff(inc) < 0))


LANDSCAPE_LAMBDAS = np.geomspace(1e-2, 1e11, 105)


def run_landscape(cfg: RunConfig) -> RunOutcome:
    """Witness scan, sphere-slice probe and the two energy curves along dilations of the minimizer.

    Both curves dilate the sNLS local minimizer of mass r and plot energy
    against the homogeneous H^{1/2} seminorm: curve 0 evaluates E_s, curve 1
    evaluates E_hw at the same (n, p).  The minimizer is computed on the
    automatically sized grid (``grid.auto``) in one dimension.
    """
    model = cfg.model
    r = float(cfg.section("constraint")["r"])
    rep = ex.landscape_probe(r, model, probe_count=int(cfg.section("experiment")["probe_count"]),
                             seed=int(cfg.section("seeds")["probe"]))
    report = rep.summary()
    cols, rows = rep.series()
    curves = None
    try:
        gs = solve_ground_state(RunConfig({**cfg.data, "grid": {**cfg.section("grid"), "auto": True}}), model)
    except ConstraintError as exc:
        report["curves"] = f"not computed: {exc}"
    else:
        report["ground_state"] = gs.ledger()
        curves = {
            "snls": ex.dilation_landscape(model, r, LANDSCAPE_LAMBDAS, profile=gs.field, homogeneous=True),
            "hw": ex.dilation_landscape(ModelSpec(Equation.HW, model.p, model.n), r, LANDSCAPE_LAMBDAS,
                                        profile=gs.field, homogeneous=True),
        }
        report["curves"] = {name: {"min_excess": float(min(c["excess"])),
                                   "max_excess": float(max(c["excess"]))} for name, c in curves.items()}
    ok = rep.witness_found and rep.probe_passed

    def write_curves(d: Path) -> None:
        if curves is None:
            return
        crow = []
        for code, name in enumerate(("snls", "hw")):
            c = curves[name]
            crow += [(code, lam, k, e, x) for lam, k, e, x in
                     zip(c["lambda"], c["kinetic_norm"], c["energy"], c["excess"])]
        ex.write_series_csv(d / "curves.csv", CURVE_COLUMNS, crow)

    return RunOutcome(ok, report, cols, rows, [write_curves],
                      reason="" if ok else "witness or probe condition not met")


CURVE_COLUMNS = ("curve", "lambda", "kinetic_norm", "energy", "excess")


H32_HORIZON_STRIDE = 200


def run_modified_energy(cfg: RunConfig) -> RunOutcome:
    model = cfg.model
    st = cfg.section("stepper")
    ex_ = cfg.section("experiment")
    f = initial_field(cfg)
    rep = ex.modified_energy_monitor(f, float(st["dt"]), float(st["t_end"]), int(st["observe_every"]),
                                     float(ex_["rel_tol"]), model)
    times, h32, status = ex.sobolev_growth_run(f, model, float(st["dt"]), float(ex_["horizon"]),
                                               H32_HORIZON_STRIDE)
    report = rep.summary()
    report["horizon"] = float(ex_["horizon"])
    report["h32_horizon_max"] = float(np.max(h32))
    report["h32_horizon_finite"] = bool(np.all(np.isfinite(h32))) and status == Status.OK
    ok = rep.passed and rep.h32_finite and report["h32_horizon_finite"]
    cols, rows = rep.series()

    def write_growth(d: Path) -> None:
        ex.write_series_csv(d / "h32.csv", ("t", "H32"), list(zip(times, h32)))

    return RunOutcome(ok, report, cols, rows, [write_growth],
                      reason="" if ok else f"mismatch {rep.mismatch:.3g} or H^3/2 growth")


RUNNERS: dict[str, Callable[[RunConfig], RunOutcome]] = {
    "simulate": run_simulate,
    "groundstate": run_groundstate,
    "stability": run_stability,
    "instability": run_instability,
    "virial-check": run_virial_check,
    "inequalities": run_inequalities,
    "landscape": run_landscape,
    "modified-energy": run_modified_energy,
}


def write_run(run_dir: Path, cfg: RunConfig, outcome: RunOutcome) -> int:
    run_dir.mkdir(parents=True, exist_ok=True)
    exit_code = EXIT_OK if outcome.contract else EXIT_CONTRACT
    ex.write_report_json(run_dir / "config.json", {"schema_version": SCHEMA_VERSION, "config_hash": cfg.hash,
                                                  "config": cfg.as_dict()})
    report = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": cfg.subcommand,
        "config_hash": cfg.hash,
        "contract_satisfied": outcome.contract,
        "exit_code": exit_code,
        "reason": outcome.reason,
        **outcome.report,
    }
    ex.write_report_json(run_dir / "report.json", report)
    if cfg.subcommand == "inequalities":
        iq.write_sweep_csv(run_dir / "series.csv", outcome.rows)
    else:
        ex.write_series_csv(run_dir / "series.csv", outcome.columns, outcome.rows)
    for w in outcome.writers:
        w(run_dir)
    return exit_code


def run(cfg: RunConfig, root: str | Path | None = None, plots: bool = True) -> tuple[int, Path]:
    """Execute the configured subcommand and write its run directory.

    Returns:
        The exit status (0 contract satisfied, 2 contract violated) and the run directory.
    """
    run_dir = output_root(cfg, root) / cfg.run_name()
    try:
        outcome = RUNNERS[cfg.subcommand](cfg)
    except (ConstraintError,) as exc:
        outcome = RunOutcome(False, {"refused": str(exc)}, reason=str(exc))
    code = write_run(run_dir, cfg, outcome)
    if plots:
        from .plotting import emit_plot_data

        emit_plot_data(run_dir)
    return code, run_dir
