"""Strang splitting with exact linear and nonlinear subflows."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .functionals import (
    REPORT_COLUMNS,
    FunctionalReport,
    ModelSpec,
    VirialCutoff,
    functional_report,
)
from .snapshot import save_snapshot
from .spectral import GAP, HALF_WAVE, ComplexField, Grid

TimeSeriesRecord = FunctionalReport

OVERFLOW_GUARD = 1e12
RESOLUTION_FRACTION = 2.0 / 3.0
# the resolution guard also tolerates this multiple of the initial high-frequency share
RESOLUTION_GROWTH = 10.0


class Status:
    OK = "ok"
    NAN = "nan-abort"
    OVERFLOW = "guard-tripped"
    RESOLUTION = "resolution-guard"

    BLOWUP_SUSPECTED = (OVERFLOW, RESOLUTION)


@dataclass(frozen=True)
class StepperConfig:
    """Fixed-step integration settings.

    Args:
        dt: time step.
        t_end: final time; it must be reachable within one step by an integer count.
        observe_every: steps between recorded observations.
        snapshot_stride: observations between stored snapshots, 0 for none.
        resolution_tol: spectral mass fraction beyond 2/3 of the Nyquist
            wavenumber that stops the run, raised to RESOLUTION_GROWTH times
            the initial fraction when the data already exceed it; None
            disables the check.
    """

    dt: float
    t_end: float
    observe_every: int = 1
    snapshot_stride: int = 0
    resolution_tol: float | None = 1e-4

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.observe_every < 1:
            raise ValueError("observe_every must be at least 1")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be nonnegative")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))


@dataclass
class Trajectory:
    model: ModelSpec
    grid: Grid
    records: list[FunctionalReport] = field(default_factory=list)
    snapshots: list[tuple[float, ComplexField]] = field(default_factory=list)
    status: str = Status.OK
    message: str = ""
    last_valid_t: float = 0.0
    steps_taken: int = 0
    final: ComplexField | None = None

    @property
    def completed(self) -> bool:
        return self.status == Status.OK

    @property
    def blowup_suspected(self) -> bool:
        return self.status in Status.BLOWUP_SUSPECTED

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.series("t")

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for rec in self.records:
                w.writerow(["" if v is None else repr(float(v)) for v in rec.csv_values()])
        return path

    def write_snapshots(self, directory: str | Path) -> list[Path]:
        out = []
        for i, (t, u) in enumerate(self.snapshots):
            j, _ = save_snapshot(Path(directory) / f"snap_{i:05d}", u, t,
                                 self.model.equation.value, self.model.p)
            out.append(j)
        return out


def dispersion(grid: Grid, model: ModelSpec) -> np.ndarray:
    return model.symbol.table(grid)


def nonlinear_flow(u: ComplexField, dt: float, model: ModelSpec) -> ComplexField:
    """Exact flow of i u_t = -c u|u|^(p-1): a pointwise phase rotation."""
    return ComplexField(u.grid, _nonlinear(u.values, dt, model))


def _nonlinear(v: np.ndarray, dt: float, model: ModelSpec) -> np.ndarray:
    if model.coupling == 0.0 or dt == 0.0:
        return v
    return v * np.exp(1j * dt * model.coupling * np.abs(v) ** (model.p - 1))


def linear_propagator(grid: Grid, model: ModelSpec, dt: float, split: bool = False) -> np.ndarray:
    """Table of exp(-i dt a(xi)); ``split`` composes the sNLS symbol as |xi| + gap."""
    if split and model.equation.value == "snls":
        return np.exp(-1j * dt * HALF_WAVE.table(grid)) * np.exp(-1j * dt * GAP.table(grid))
    return np.exp(-1j * dt * dispersion(grid, model))


def linear_flow(u: ComplexField, dt: float, model: ModelSpec, split: bool = False) -> ComplexField:
    """Exact flow of i u_t = A u, diagonal in Fourier space."""
    if dt == 0.0:
        return ComplexField(u.grid, u.values.copy(), hat=u.hat)
    return ComplexField.from_spectral(u.grid, u.hat * linear_propagator(u.grid, model, dt, split))


def strang_step(u: ComplexField, dt: float, model: ModelSpec, split: bool = False) -> ComplexField:
    """Half linear step, full nonlinear step, half linear step."""
    half = linear_propagator(u.grid, model, 0.5 * dt, split)
    v = sfft.ifftn(sfft.fftn(u.values) * half)
    v = _nonlinear(v, dt, model)
    return ComplexField(u.grid, sfft.ifftn(sfft.fftn(v) * half))


def time_reverse(u: ComplexField) -> ComplexField:
    """Complex conjugation, which maps solutions to solutions run backwards in time."""
    return ComplexField(u.grid, np.conj(u.values))


def high_frequency_fraction(u_hat_raw: np.ndarray, grid: Grid) -> float:
    """Share of the spectral mass with some |xi_i| above 2/3 of the Nyquist wavenumber."""
    power = np.abs(u_hat_raw) ** 2
    total = power.sum()
    if total == 0:
        return 0.0
    return float(power[_high_mask(grid)].sum() / total)


_HIGH_MASKS: dict[Grid, np.ndarray] = {}


def _high_mask(grid: Grid) -> np.ndarray:
    mask = _HIGH_MASKS.get(grid)
    if mask is None:
        cut = RESOLUTION_FRACTION * grid.k_nyquist
        mask = np.zeros(grid.shape, dtype=bool)
        for kk in grid.wavevector:
            mask |= np.abs(kk) > cut
        _HIGH_MASKS[grid] = mask
    return mask


Observer = Callable[[float, ComplexField], None]


def evolve(
    f: ComplexField,
    model: ModelSpec,
    cfg: StepperConfig,
    observers: Sequence[Observer] = (),
    cutoff: VirialCutoff | None = None,
    record: bool = True,
    split: bool = False,
) -> Trajectory:
    """Advance ``f`` with Strang steps, observing every ``cfg.observe_every`` steps.

    Consecutive half linear steps are fused between observations, so each
    step costs one forward and one inverse FFT.

    Args:
        f: initial field.
        model: equation, power and dimension.
        cfg: step size, horizon and observation strides.
        observers: callables ``obs(t, u)`` invoked at every observation.
        cutoff: virial weight for the recorded M_virial column.
        record: compute a FunctionalReport at every observation.
        split: build the sNLS propagator as |xi| plus the gap symbol.
    """
    if not f.is_finite():
        raise ValueError("initial field has non-finite samples")
    if f.grid.dim != model.n:
        raise ValueError(f"field dimension {f.grid.dim} differs from model dimension {model.n}")
    grid = f.grid
    dt = cfg.dt
    half = linear_propagator(grid, model, 0.5 * dt, split)
    full = half * half if not split else linear_propagator(grid, model, dt, split)
    traj = Trajectory(model=model, grid=grid)
    cutoff = cutoff or VirialCutoff(grid, quadratic_mode=True)
    kabs = grid.kabs

    def observe(t: float, u: ComplexField, obs_index: int) -> None:
        if record:
            traj.records.append(functional_report(u, model, t, cutoff))
        for ob in observers:
            ob(t, u)
        if cfg.snapshot_stride and obs_index % cfg.snapshot_stride == 0:
            traj.snapshots.append((t, u.copy()))

    u = f.values.copy()
    last = ComplexField(grid, u)
    observe(0.0, last, 0)
    n_steps = cfg.n_steps
    step = 0
    obs_index = 0
    hat = sfft.fftn(u)
    res_limit = None
    if cfg.resolution_tol is not None:
        res_limit = max(cfg.resolution_tol, RESOLUTION_GROWTH * high_frequency_fraction(hat, grid))
    hat *= half
    while step < n_steps:
        chunk = min(cfg.observe_every, n_steps - step)
        for i in range(chunk):
            v = _nonlinear(sfft.ifftn(hat), dt, model)
            hat = sfft.fftn(v)
            hat *= full if i < chunk - 1 else half
        step += chunk
        t = step * dt
        u = sfft.ifftn(hat)
        if not np.all(np.isfinite(u)):
            traj.status = Status.NAN
            traj.message = f"non-finite values after step {step}"
            break
        # Parseval on the raw FFT: sum |xi| |fft|^2 * h^n / N^n = hom. H^{1/2} squared
        hom = math.sqrt(float(np.sum(kabs * np.abs(hat) ** 2)) * grid.cell_volume / u.size)
        if hom > OVERFLOW_GUARD:
            traj.status = Status.OVERFLOW
            traj.message = f"homogeneous H^1/2 norm {hom:.3e} exceeded {OVERFLOW_GUARD:.0e} at t={t:.6g}"
            break
        if res_limit is not None:
            frac = high_frequency_fraction(hat, grid)
            if frac > res_limit:
                traj.status = Status.RESOLUTION
                traj.message = (
                    f"spectral mass fraction {frac:.3e} beyond 2/3 Nyquist exceeded "
                    f"{res_limit:.1e} at t={t:.6g}; the grid no longer resolves the solution"
                )
                break
        obs_index += 1
        last = ComplexField(grid, u)
        observe(t, last, obs_index)
        traj.last_valid_t = t
        traj.steps_taken = step
        hat = hat * half
    if traj.status != Status.OK:
        traj.message += f" (last valid t={traj.last_valid_t:.6g})"
    traj.final = last
    return traj


def run_steps(u: ComplexField, model: ModelSpec, dt: float, n_steps: int, split: bool = False) -> ComplexField:
    """Plain fused Strang integration without observation."""
    if n_steps <= 0:
        return u.copy()
    half = linear_propagator(u.grid, model, 0.5 * dt, split)
    full = half * half if not split else linear_propagator(u.grid, model, dt, split)
    hat = sfft.fftn(u.values) * half
    for i in range(n_steps):
        v = _nonlinear(sfft.ifftn(hat), dt, model)
        hat = sfft.fftn(v)
        hat *= full if i < n_steps - 1 else half
    return ComplexField(u.grid, sfft.ifftn(hat))
