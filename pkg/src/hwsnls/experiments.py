"""Dynamical experiments: orbital stability, norm inflation, virial and modified-energy monitors."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy.optimize import brentq

from .evolution import Status, StepperConfig, Trajectory, evolve
from .functionals import (
    Equation,
    ModelSpec,
    VirialCutoff,
    energy,
    energy_excess,
    hom_half_sq,
    mass,
    modified_energy_1d,
    modified_energy_rate,
    pohozaev_P,
    potential_term,
    virial,
    h_scaling,
    g_scaling,
)
from .groundstate import GroundStateResult, project_mass, verify_ground_state
from .spectral import ComplexField, Grid, dilate, sobolev_norm

# ---------------------------------------------------------------------------
# distance modulo phase and translation


def _h_half_weight(grid: Grid) -> np.ndarray:
    return np.sqrt(1.0 + grid.kabs**2)


def _shift_phase(grid: Grid, tau: Sequence[float]) -> np.ndarray:
    """Fourier factor exp(-i xi . tau), which translates a field by tau."""
    arg = sum(k * t for k, t in zip(grid.wavevector, tau))
    return np.exp(-1j * arg)


def _parabolic_offset(fm: float, f0: float, fp: float) -> float:
    denom = fm - 2.0 * f0 + fp
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (fm - fp) / denom, -0.5, 0.5))


def orbit_alignment(u: ComplexField, v: ComplexField) -> tuple[np.ndarray, float, float]:
    """Translation tau and phase theta minimizing ||u - e^{i theta} v(. - tau)||_{H^1/2}.

    The H^{1/2} cross-correlation is evaluated on all grid shifts with one
    inverse FFT, its modulus is refined by per-axis parabolic interpolation,
    and the phase follows in closed form as the argument of the correlation.

    Returns:
        (tau, theta, distance).
    """
    if u.grid != v.grid:
        raise ValueError("orbit distance needs fields on the same grid")
    grid = u.grid
    w = _h_half_weight(grid)
    G = w * np.conj(v.hat) * u.hat
    corr = sfft.ifftn(G) * G.size * grid.dxi
    mod = np.abs(corr)
    idx = np.unravel_index(int(np.argmax(mod)), mod.shape)
    n = grid.n_points
    tau = []
    for axis, i in enumerate(idx):
        im = list(idx)
        ip = list(idx)
        im[axis] = (i - 1) % n
        ip[axis] = (i + 1) % n
        off = _parabolic_offset(mod[tuple(im)], mod[idx], mod[tuple(ip)])
        tau.append((grid.index[i] + off) * grid.h)
    candidates = [np.array(tau), np.array([grid.index[i] * grid.h for i in idx])]
    best = None
    for cand in candidates:
        vt = v.hat * _shift_phase(grid, cand)
        c = complex(np.sum(w * np.conj(vt) * u.hat)) * grid.dxi
        theta = float(np.angle(c)) if c != 0 else 0.0
        diff = u.hat - np.exp(1j * theta) * vt
        d = math.sqrt(max(grid.spectral_sum(w * np.abs(diff) ** 2), 0.0))
        if best is None or d < best[2]:
            best = (cand, theta, d)
    return best


def orbit_distance(u: ComplexField, v: ComplexField) -> float:
    """H^{1/2} distance from u to the phase and translation orbit of v."""
    return orbit_alignment(u, v)[2]


# ---------------------------------------------------------------------------
# perturbations


def _profile_scales(v: ComplexField) -> tuple[np.ndarray, float, float]:
    """Centre, rms radius and rms wavenumber of a field."""
    grid = v.grid
    dens = np.abs(v.values) ** 2
    m = float(dens.sum())
    centre = np.array([float((x * dens).sum()) / m for x in grid.coords])
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, centre))
    radius = math.sqrt(float((r2 * dens).sum()) / m)
    spec = np.abs(v.hat) ** 2
    kappa = math.sqrt(float((grid.kabs**2 * spec).sum()) / float(spec.sum()))
    return centre, radius, kappa


def smooth_perturbation(v: ComplexField, rng: np.random.Generator, kind: str = "generic",
                        n_bumps: int = 4) -> ComplexField:
    """Random smooth field on the length scale of v, normalized in H^{1/2}.

    ``kind="radial"`` draws a sum of centred Gaussians with random complex
    weights and widths, so the perturbation is radial in every draw.
    ``kind="generic"`` also draws random centres and modulations.
    """
    if kind not in ("radial", "generic"):
        raise ValueError("perturbation kind must be 'radial' or 'generic'")
    grid = v.grid
    centre, radius, kappa = _profile_scales(v)
    radius = max(radius, 4.0 * grid.h)
    coords = grid.coords
    w = np.zeros(grid.shape, dtype=complex)
    for _ in range(n_bumps):
        amp = complex(rng.normal(), rng.normal())
        width = radius * rng.uniform(0.5, 2.0)
        if kind == "radial":
            shift = np.zeros(grid.dim)
            mod = np.zeros(grid.dim)
        else:
            shift = rng.normal(scale=radius, size=grid.dim)
            mod = rng.normal(scale=kappa, size=grid.dim)
        c = centre + shift
        r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
        phase = sum(k * x for k, x in zip(mod, coords))
        w += amp * np.exp(-r2 / (2.0 * width**2)) * np.exp(1j * phase)
    field_ = ComplexField(grid, w).without_nyquist()
    norm = sobolev_norm(field_, 0.5)
    if norm == 0:
        raise ValueError("degenerate perturbation draw")
    return field_ * (1.0 / norm)


# ---------------------------------------------------------------------------
# orbital stability


@dataclass
class StabilityReport:
    initial_distance: float
    sup_distance: float
    horizon: float
    verdict: str
    delta: float
    perturbation: str
    seed: int
    bound_factor: float
    status: str
    message: str = ""
    times: list[float] = field(default_factory=list)
    distances: list[float] = field(default_factory=list)
    mass_drift: float = 0.0

    @property
    def ratio(self) -> float:
        return self.sup_distance / self.initial_distance if self.initial_distance > 0 else math.inf

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("times")
        d.pop("distances")
        return d

    def series(self) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
        return ("t", "orbit_distance"), list(zip(self.times, self.distances))


STABILITY_FLOOR = 1e-4


def stability_run(result: GroundStateResult, delta: float, horizon: float, dt: float,
                  observe_every: int = 10, perturbation: str = "generic", seed: int = 0,
                  bound_factor: float = 5.0, check_ground_state: bool = True,
                  resolution_tol: float | None = 1e-4) -> StabilityReport:
    """Evolve the minimizer plus a perturbation of H^{1/2} size delta and track the orbit distance.

    The verdict is "stable" when the largest distance stays within
    ``bound_factor`` times max(initial distance, STABILITY_FLOOR),
    "drifted" otherwise, and "unstable-like" when a guard stopped the run.

    Args:
        result: converged sNLS minimizer.
        delta: perturbation size in H^{1/2}.
        horizon: final time T.
        dt: Strang step.
        observe_every: steps between distance evaluations.
        perturbation: "generic" or "radial".
        seed: seed of the perturbation draw.
    """
    if check_ground_state:
        ver = verify_ground_state(result)
        if not ver.passed:
            raise ValueError(f"the minimizer fails verification: {ver.failures()}")
    v = result.field
    model = result.model
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    rng = np.random.default_rng(seed)
    u0 = v
    if delta > 0:
        u0 = v + smooth_perturbation(v, rng, perturbation) * delta
    times: list[float] = []
    dists: list[float] = []

    def observer(t: float, u: ComplexField) -> None:
        times.append(t)
        dists.append(orbit_distance(u, v))

    cfg = StepperConfig(dt, horizon, observe_every=observe_every, resolution_tol=resolution_tol)
    traj = evolve(u0, model, cfg, observers=[observer], record=False)
    d0 = dists[0]
    sup = max(dists)
    drift = abs(mass(traj.final) - mass(u0)) / mass(u0)
    if traj.status != Status.OK:
        verdict = "unstable-like"
    elif sup <= bound_factor * max(d0, STABILITY_FLOOR):
        verdict = "stable"
    else:
        verdict = "drifted"
    return StabilityReport(
        initial_distance=d0, sup_distance=sup, horizon=horizon, verdict=verdict, delta=delta,
        perturbation=perturbation, seed=seed, bound_factor=bound_factor, status=traj.status,
        message=traj.message, times=times, distances=dists, mass_drift=drift,
    )


# ---------------------------------------------------------------------------
# norm inflation


class HypothesisError(ValueError):
    """The initial datum does not meet the hypotheses of the inflation alternative."""

    def __init__(self, failed: list[str], details: dict):
        self.failed = failed
        self.details = details
        super().__init__("hypotheses not met: " + "; ".join(failed))


def dilation_scan(v: ComplexField, model: ModelSpec, lambdas: Sequence[float]) -> dict:
    """h(lambda) = P and g(lambda) = E_hw of the mass-preserving dilations, from the norms of v."""
    hom = hom_half_sq(v)
    pot = potential_term(v, model.p)
    lam = np.asarray(lambdas, dtype=float)
    return {
        "lambda": lam.tolist(),
        "h": np.atleast_1d(h_scaling(lam, hom, pot, model)).tolist(),
        "g": np.atleast_1d(g_scaling(lam, hom, mass(v), pot, model)).tolist(),
        "g1": float(g_scaling(1.0, hom, mass(v), pot, model)),
    }


HYPOTHESIS_MARGIN = 1e-10


def inflation_hypotheses(f: ComplexField, model: ModelSpec, level: float,
                         margin: float = HYPOTHESIS_MARGIN) -> tuple[list[str], dict]:
    """Failed hypotheses among E_hw(f) < level and P(f) < 0, with the measured values.

    Both inequalities must hold by a relative ``margin``, so that a datum
    sitting on the manifold up to roundoff is not accepted.
    """
    e = energy(f, model)
    p = pohozaev_P(f, model)
    failed = []
    if not e < level - margin * abs(level):
        failed.append(f"E_hw(f) = {e:.12g} is not below the ground-state level {level:.12g}")
    if not p < -margin * hom_half_sq(f):
        failed.append(f"P(f) = {p:.6g} is not negative")
    return failed, {"E_hw": e, "P": p, "level": level, "margin": margin}


@dataclass
class InflationReport:
    lam: float
    horizon: float
    status: str
    rate: float
    intercept: float
    fit_residual: float
    fit_window: tuple[float, float]
    P_ceiling: float
    mass_drift: float
    virial_alpha: float
    hypotheses: dict
    scan: dict
    tags: list[str] = field(default_factory=list)
    message: str = ""
    evolution_status: str = Status.OK
    last_valid_t: float = 0.0
    times: list[float] = field(default_factory=list)
    hom_norm: list[float] = field(default_factory=list)
    P: list[float] = field(default_factory=list)
    virial: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        d = asdict(self)
        for k in ("times", "hom_norm", "P", "virial", "mass"):
            d.pop(k)
        d["fit_window"] = list(self.fit_window)
        return d

    def series(self) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
        return ("t", "H_half_hom", "P", "M_virial", "mass"), list(
            zip(self.times, self.hom_norm, self.P, self.virial, self.mass)
        )


def fit_log_linear(t: np.ndarray, y: np.ndarray, window: tuple[float, float]) -> tuple[float, float, float]:
    """Least-squares fit ln y = a t + b on the window; returns (a, b, rms residual)."""
    sel = (t >= window[0]) & (t <= window[1]) & (y > 0)
    if sel.sum() < 3:
        return math.nan, math.nan, math.nan
    a, b = np.polyfit(t[sel], np.log(y[sel]), 1)
    resid = np.log(y[sel]) - (a * t[sel] + b)
    return float(a), float(b), float(np.sqrt(np.mean(resid**2)))


FIT_WINDOW = (0.2, 0.8)
FIT_RESIDUAL_MAX = 0.1


def instability_run(result: GroundStateResult, lam: float, horizon: float, dt: float,
                    observe_every: int = 10, override: bool = False,
                    fit_window: tuple[float, float] = FIT_WINDOW,
                    scan_lambdas: Sequence[float] | None = None,
                    dilation_tail_tol: float = 1e-2,
                    resolution_tol: float | None = 1e-4,
                    R_virial: float | None = None) -> InflationReport:
    """Evolve the dilated Nehari minimizer and fit the growth of its H^{1/2} seminorm.

    Before evolving, the dilation fiber is scanned on (1, 1.5] and the
    datum f = dilate(v, lam) is checked for E_hw(f) below the minimizer's
    energy and P(f) < 0.  A failed check raises HypothesisError unless
    ``override`` is set, in which case the report carries an override tag.

    The status is "guard-tripped" when a guard stopped the run (the blow-up
    branch), "inflated" when the log-linear fit on the window gives a > 0
    with rms residual below FIT_RESIDUAL_MAX and P stayed negative, and
    "inconclusive" otherwise.  ``virial_alpha`` is the largest alpha with
    dM/dt <= -alpha ||u||^2_{H^1/2 hom} over the interior observations of
    the quadratic virial.
    """
    model = result.model
    if model.equation is not Equation.HW:
        raise ValueError("the inflation experiment is posed for HW")
    v = result.field
    level = result.energy
    tags = []
    if model.n < 2:
        tags.append("outside the inflation dimension range: n = 1")
    if scan_lambdas is None:
        scan_lambdas = np.linspace(1.0, 1.5, 11)[1:]
    scan = dilation_scan(v, model, scan_lambdas)
    scan["h_negative"] = bool(all(h < 0 for h in scan["h"]))
    scan["g_below_level"] = bool(all(g < scan["g1"] for g in scan["g"]))
    f = project_mass(dilate(v, lam, tail_tol=dilation_tail_tol), result.constraint.r)
    failed, details = inflation_hypotheses(f, model, level)
    if failed:
        if not override:
            raise HypothesisError(failed, details)
        tags.append("override: hypotheses not met")
    cutoff = VirialCutoff(v.grid, R=R_virial) if R_virial else VirialCutoff(v.grid, quadratic_mode=True)
    cfg = StepperConfig(dt, horizon, observe_every=observe_every, resolution_tol=resolution_tol)
    traj = evolve(f, model, cfg, cutoff=cutoff)
    t = traj.times
    hom = traj.series("H_half_hom")
    P = traj.series("P")
    m = traj.series("mass")
    t_last = float(t[-1])
    window = (fit_window[0] * t_last, fit_window[1] * t_last)
    a, b, resid = fit_log_linear(t, hom, window)
    ceiling = float(P.max())
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    M = traj.series("M_virial")
    if len(t) >= 3:
        _, dM = central_difference(t, M)
        alpha = float(np.min(-dM / hom[1:-1] ** 2))
    else:
        alpha = math.nan
    msgs = []
    if traj.status in Status.BLOWUP_SUSPECTED:
        status = "guard-tripped"
        msgs.append(f"blow-up branch observed by the guard: {traj.message}")
    elif traj.status != Status.OK:
        status = "inconclusive"
        msgs.append(traj.message)
    elif a > 0 and resid < FIT_RESIDUAL_MAX and ceiling < 0:
        status = "inflated"
    else:
        status = "inconclusive"
        msgs.append(f"fit a={a:.4g}, residual={resid:.3g}, max P={ceiling:.4g}")
    if ceiling >= 0:
        msgs.append(f"P reached {ceiling:.4g} >= 0 along the run")
    details["failed"] = failed
    return InflationReport(
        lam=lam, horizon=horizon, status=status, rate=a, intercept=b, fit_residual=resid,
        fit_window=window, P_ceiling=ceiling, mass_drift=drift, virial_alpha=alpha, hypotheses=details, scan=scan,
        tags=tags, message="; ".join(msgs), evolution_status=traj.status,
        last_valid_t=traj.last_valid_t, times=t.tolist(), hom_norm=hom.tolist(), P=P.tolist(),
        virial=traj.series("M_virial").tolist(), mass=m.tolist(),
    )


# ---------------------------------------------------------------------------
# virial monitor


def virial_exponent(model: ModelSpec) -> float:
    """Exponent (p(1 - 2n) + 2n + 1)/4 of R in the localized virial remainder."""
    n, p = model.n, model.p
    return (p * (-2 * n + 1) + 2 * n + 1) / 4.0


def virial_remainder_bracket(u: ComplexField, model: ModelSpec, R: float) -> float:
    """R^-1 + R^beta ||u||_2^((p+1)/2) ||u||_{H^1/2 hom}^((p+1)/2)."""
    e = 0.5 * (model.p + 1)
    return 1.0 / R + R ** virial_exponent(model) * mass(u) ** (0.5 * e) * hom_half_sq(u) ** (0.5 * e)


@dataclass
class VirialSeries:
    times: np.ndarray
    M: np.ndarray
    P: np.ndarray
    bracket: np.ndarray
    hom_sq: np.ndarray
    R: float | None


def sample_virial(samples: Sequence[tuple[float, ComplexField]], model: ModelSpec,
                  cutoff: VirialCutoff) -> VirialSeries:
    """M_phi, P and the remainder bracket on a list of (t, u) samples."""
    t = np.array([s[0] for s in samples])
    M = np.array([virial(u, cutoff) for _, u in samples])
    P = np.array([pohozaev_P(u, model) for _, u in samples])
    hom = np.array([hom_half_sq(u) for _, u in samples])
    R = None if cutoff.quadratic_mode else cutoff.R
    br = np.array([virial_remainder_bracket(u, model, R) if R else 0.0 for _, u in samples])
    return VirialSeries(t, M, P, br, hom, R)


def central_difference(t: np.ndarray, y: np.ndarray, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Central differences (y[i+s] - y[i-s]) / (t[i+s] - t[i-s]) at the interior samples."""
    s = stride
    if len(t) < 2 * s + 1:
        raise ValueError("too few samples for the requested finite-difference stride")
    d = (y[2 * s:] - y[: -2 * s]) / (t[2 * s:] - t[: -2 * s])
    return t[s:-s], d


def fd_error_estimate(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Richardson estimate of the central-difference error on the interior samples.

    Compares strides 1 and 2; the estimate is |D_1 - D_2| / 3 at the points
    where both exist.
    """
    _, d1 = central_difference(t, y, 1)
    _, d2 = central_difference(t, y, 2)
    return np.abs(d1[1:-1] - d2) / 3.0


@dataclass
class VirialCheck:
    mode: str
    R: float | None
    times: list[float]
    dMdt: list[float]
    four_P: list[float]
    bound: list[float]
    max_violation: float
    tolerance: float
    passed: bool
    fd_error: float
    fd_ok: bool
    C_hat: float | None = None
    message: str = ""

    def summary(self) -> dict:
        d = asdict(self)
        for k in ("times", "dMdt", "four_P", "bound"):
            d.pop(k)
        return d

    def series(self) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
        return ("t", "dMdt", "four_P", "bound"), list(zip(self.times, self.dMdt, self.four_P, self.bound))


def virial_closure_check(samples: Sequence[tuple[float, ComplexField]], model: ModelSpec,
                         rel_tol: float = 1e-3) -> VirialCheck:
    """Quadratic weight: |dM/dt - 4P| <= rel_tol * max(1, |4P|) along the samples."""
    grid = samples[0][1].grid
    ser = sample_virial(samples, model, VirialCutoff(grid, quadratic_mode=True))
    tc, d = central_difference(ser.times, ser.M)
    fourP = 4.0 * ser.P[1:-1]
    scale = np.maximum(1.0, np.abs(fourP))
    viol = np.abs(d - fourP) / scale
    fd = fd_error_estimate(ser.times, ser.M) if len(tc) >= 3 else np.array([np.inf])
    fd_rel = float(np.max(fd / scale[1:-1])) if len(tc) >= 3 else math.inf
    fd_ok = fd_rel <= 0.1 * max(float(np.max(np.abs(d))) / float(np.max(scale)), rel_tol)
    msg = "" if fd_ok else f"finite-difference error estimate {fd_rel:.3g} is large: sample more densely"
    return VirialCheck(
        mode="quadratic", R=None, times=tc.tolist(), dMdt=d.tolist(), four_P=fourP.tolist(),
        bound=(fourP + rel_tol * scale).tolist(), max_violation=float(viol.max()), tolerance=rel_tol,
        passed=bool(viol.max() <= rel_tol), fd_error=fd_rel, fd_ok=fd_ok, message=msg,
    )


def calibrate_virial_constant(samples: Sequence[tuple[float, ComplexField]], model: ModelSpec,
                              R: float, safety: float = 2.0) -> float:
    """Smallest C with dM/dt <= 4P + C * bracket on a reference run, times ``safety``."""
    grid = samples[0][1].grid
    ser = sample_virial(samples, model, VirialCutoff(grid, R=R))
    tc, d = central_difference(ser.times, ser.M)
    excess = (d - 4.0 * ser.P[1:-1]) / ser.bracket[1:-1]
    return safety * max(0.0, float(excess.max()))


def localized_virial_check(samples: Sequence[tuple[float, ComplexField]], model: ModelSpec,
                           R: float, C_hat: float) -> VirialCheck:
    """Localized weight: dM/dt <= 4P + C_hat (R^-1 + R^beta norms) along the samples."""
    grid = samples[0][1].grid
    ser = sample_virial(samples, model, VirialCutoff(grid, R=R))
    tc, d = central_difference(ser.times, ser.M)
    fourP = 4.0 * ser.P[1:-1]
    bound = fourP + C_hat * ser.bracket[1:-1]
    viol = float(np.max(d - bound))
    fd = fd_error_estimate(ser.times, ser.M) if len(tc) >= 3 else np.array([np.inf])
    fd_max = float(fd.max())
    signal = float(np.max(np.abs(d))) or 1.0
    fd_ok = fd_max <= 0.1 * signal
    msg = "" if fd_ok else f"finite-difference error estimate {fd_max:.3g} exceeds 10% of the signal"
    return VirialCheck(
        mode="localized", R=R, times=tc.tolist(), dMdt=d.tolist(), four_P=fourP.tolist(),
        bound=bound.tolist(), max_violation=viol, tolerance=0.0, passed=bool(viol <= 0.0),
        fd_error=fd_max, fd_ok=fd_ok, C_hat=C_hat, message=msg,
    )


def virial_monitor(samples: Sequence[tuple[float, ComplexField]], model: ModelSpec,
                   cutoff: VirialCutoff, C_hat: float | None = None,
                   rel_tol: float = 1e-3) -> VirialCheck:
    """Dispatch to the closure check (quadratic weight) or the localized bound."""
    if cutoff.quadratic_mode:
        return virial_closure_check(samples, model, rel_tol)
    if C_hat is None:
        raise ValueError("the localized check needs a calibrated constant C_hat")
    return localized_virial_check(samples, model, cutoff.R, C_hat)


def inflation_virial_rate(samples: Sequence[tuple[float, ComplexField]], model: ModelSpec,
                          cutoff: VirialCutoff) -> float:
    """Largest alpha with dM/dt <= -alpha ||u||^2_{H^1/2 hom} on all interior samples."""
    ser = sample_virial(samples, model, cutoff)
    _, d = central_difference(ser.times, ser.M)
    return float(np.min(-d / ser.hom_sq[1:-1]))


def record_samples(f: ComplexField, model: ModelSpec, dt: float, t_end: float,
                   sample_every: int, resolution_tol: float | None = 1e-4
                   ) -> tuple[list[tuple[float, ComplexField]], Trajectory]:
    """Evolve f and keep every ``sample_every``-th step as a (t, u) sample."""
    samples: list[tuple[float, ComplexField]] = []
    cfg = StepperConfig(dt, t_end, observe_every=sample_every, resolution_tol=resolution_tol)
    traj = evolve(f, model, cfg, observers=[lambda t, u: samples.append((t, u))], record=False)
    return samples, traj


# ---------------------------------------------------------------------------
# modified energy


@dataclass
class ModifiedEnergyReport:
    times: list[float]
    E_mod: list[float]
    fd_rate: list[float]
    rhs_rate: list[float]
    h32: list[float]
    mismatch: float
    tolerance: float
    passed: bool
    fd_error: float
    fd_ok: bool
    h32_max: float
    h32_finite: bool
    status: str
    message: str = ""

    def summary(self) -> dict:
        d = asdict(self)
        for k in ("times", "E_mod", "fd_rate", "rhs_rate", "h32"):
            d.pop(k)
        return d

    def series(self) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
        n = len(self.times)
        fd = [math.nan] + self.fd_rate + [math.nan] if n >= 3 else [math.nan] * n
        rhs = [math.nan] + self.rhs_rate + [math.nan] if n >= 3 else [math.nan] * n
        return ("t", "E_mod", "dEdt_fd", "dEdt_rhs", "H32"), list(zip(self.times, self.E_mod, fd, rhs, self.h32))


def modified_energy_monitor(f: ComplexField, dt: float, t_end: float, sample_every: int = 4,
                            rel_tol: float = 1e-3, model: ModelSpec | None = None) -> ModifiedEnergyReport:
    """Compare finite differences of the modified energy with its computed rate.

    The run uses the one-dimensional quartic sNLS.  The mismatch is the
    largest |FD - rate| divided by the largest |rate| over the interior
    samples; the H^{3/2} norm is recorded at every sample.
    """
    model = model or ModelSpec(Equation.SNLS, 4.0, 1)
    times, E, rates, h32 = [], [], [], []

    def observer(t: float, u: ComplexField) -> None:
        times.append(t)
        E.append(modified_energy_1d(u, model))
        rates.append(modified_energy_rate(u, model))
        h32.append(sobolev_norm(u, 1.5))

    cfg = StepperConfig(dt, t_end, observe_every=sample_every)
    traj = evolve(f, model, cfg, observers=[observer], record=False)
    t = np.array(times)
    e = np.array(E)
    if len(t) < 5:
        raise ValueError("too few samples for the finite-difference check")
    tc, d = central_difference(t, e)
    rhs = np.array(rates[1:-1])
    scale = float(np.max(np.abs(rhs)))
    if scale == 0.0:
        mismatch = float(np.max(np.abs(d)))
    else:
        mismatch = float(np.max(np.abs(d - rhs))) / scale
    fd = fd_error_estimate(t, e)
    fd_rel = float(fd.max()) / scale if scale > 0 else float(fd.max())
    fd_ok = fd_rel <= 0.1
    h = np.array(h32)
    return ModifiedEnergyReport(
        times=times, E_mod=E, fd_rate=d.tolist(), rhs_rate=rhs.tolist(), h32=h32,
        mismatch=mismatch, tolerance=rel_tol, passed=bool(mismatch <= rel_tol), fd_error=fd_rel,
        fd_ok=fd_ok, h32_max=float(h.max()), h32_finite=bool(np.all(np.isfinite(h))),
        status=traj.status, message=traj.message if traj.status != Status.OK else "",
    )


def sobolev_growth_run(f: ComplexField, model: ModelSpec, dt: float, t_end: float,
                       observe_every: int = 100, s: float = 1.5) -> tuple[list[float], list[float], str]:
    """H^s norm of the solution sampled along a run; returns (times, norms, status)."""
    times: list[float] = []
    norms: list[float] = []

    def observer(t: float, u: ComplexField) -> None:
        times.append(t)
        norms.append(sobolev_norm(u, s))

    traj = evolve(f, model, StepperConfig(dt, t_end, observe_every=observe_every), observers=[observer],
                  record=False)
    return times, norms, traj.status


# ---------------------------------------------------------------------------
# variational landscape


def witness_field(grid: Grid, r: float, lam: float) -> ComplexField:
    """Band-limited witness with spectrum proportional to exp(-1/(1 - |lam xi|^2)) on |lam xi| < 1, mass r."""
    s = lam * grid.kabs
    hat = np.zeros(grid.shape)
    inside = s < 1.0
    hat[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    u = ComplexField.from_spectral(grid, hat.astype(complex))
    return project_mass(u, r)


def witness_grid(dim: int, lam: float, n_points: int = 1024, box: float = 64.0) -> Grid:
    """Grid whose box scales with the witness width lam; Nyquist stays far above the band 1/lam."""
    return Grid(dim, n_points, box * lam)


@dataclass
class LandscapeReport:
    r: float
    p: float
    n: int
    lambdas: list[float]
    witness_h_half: list[float]
    witness_energy: list[float]
    witness_excess: list[float]
    witness_found: bool
    witness_lambda: float | None
    probe_count: int
    probe_min_energy: float
    probe_threshold: float
    probe_passed: bool
    h_half_sq_limit_gap: float

    def summary(self) -> dict:
        d = asdict(self)
        for k in ("lambdas", "witness_h_half", "witness_energy", "witness_excess"):
            d.pop(k)
        return d

    def series(self) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
        return ("lambda", "H_half", "E_s", "E_s_minus_half_mass"), list(
            zip(self.lambdas, self.witness_h_half, self.witness_energy, self.witness_excess)
        )


def _probe_field(grid: Grid, params: list[tuple], s: float, r: float) -> ComplexField:
    coords = grid.coords
    w = np.zeros(grid.shape, dtype=complex)
    for amp, centre, width, mod in params:
        r2 = sum((x - c / s) ** 2 for x, c in zip(coords, centre))
        phase = sum(k * s * x for k, x in zip(mod, coords))
        w += amp * np.exp(-r2 * s * s / (2.0 * width**2)) * np.exp(1j * phase)
    return project_mass(ComplexField(grid, w).without_nyquist(), r)


def sphere_slice_probe(grid: Grid, model: ModelSpec, r: float, count: int, seed: int = 0,
                       n_bumps: int = 3) -> np.ndarray:
    """E_s on random fields of mass r rescaled to ||u||_{H^1/2} = 1.

    Each probe is a random sum of modulated Gaussians; a common concentration
    parameter s (widths / s, modulations * s) is solved for so that the
    inhomogeneous H^{1/2} norm equals one.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        params = []
        for _ in range(n_bumps):
            params.append((
                complex(rng.normal(), rng.normal()),
                rng.uniform(-2.0, 2.0, size=grid.dim),
                rng.uniform(0.5, 2.0),
                rng.normal(scale=1.0, size=grid.dim),
            ))

        def gap(s: float) -> float:
            return sobolev_norm(_probe_field(grid, params, s, r), 0.5) ** 2 - 1.0

        lo, hi = 1e-2, 1.0
        while gap(hi) < 0:
            hi *= 2.0
            if hi > 1e4:
                break
        while gap(lo) > 0 and lo > 1e-6:
            lo /= 2.0
        if gap(hi) < 0 or gap(lo) > 0:
            continue
        s = brentq(gap, lo, hi, xtol=1e-12, rtol=1e-12)
        out.append(energy(_probe_field(grid, params, s, r), model))
    return np.array(out)


def landscape_probe(r: float, model: ModelSpec, lambdas: Sequence[float] | None = None,
                    probe_count: int = 1000, probe_grid: Grid | None = None, seed: int = 0,
                    n_points: int = 1024) -> LandscapeReport:
    """Witness scan and randomized sphere-slice probe for the sNLS local-minimum structure."""
    if model.equation is not Equation.SNLS:
        raise ValueError("the landscape probe targets sNLS")
    if lambdas is None:
        lambdas = np.geomspace(1.0, 1e6, 49)
    hs, es, xs = [], [], []
    witness = None
    for lam in lambdas:
        grid = witness_grid(model.n, float(lam), n_points)
        u = witness_field(grid, r, float(lam))
        h = sobolev_norm(u, 0.5)
        e = energy(u, model)
        # E_s - r/2 without cancellation; decides the sign test for flat witnesses
        x = energy_excess(u, model)
        hs.append(h)
        es.append(e)
        xs.append(x)
        if witness is None and h < 2.0 * math.sqrt(r) and x < 0.0:
            witness = float(lam)
    probe_grid = probe_grid or Grid(model.n, 256 if model.n == 1 else 64, 16.0)
    probes = sphere_slice_probe(probe_grid, model, r, probe_count, seed)
    pmin = float(probes.min()) if probes.size else math.nan
    return LandscapeReport(
        r=r, p=model.p, n=model.n, lambdas=[float(x) for x in lambdas], witness_h_half=hs,
        witness_energy=es, witness_excess=xs, witness_found=witness is not None, witness_lambda=witness,
        probe_count=int(probes.size), probe_min_energy=pmin, probe_threshold=0.25,
        probe_passed=bool(probes.size and pmin > 0.25), h_half_sq_limit_gap=float(hs[-1] ** 2 - r),
    )


def dilation_landscape(model: ModelSpec, r: float, lambdas: Sequence[float], n_points: int | None = None,
                       box: float = 40.0, profile: ComplexField | None = None,
                       homogeneous: bool | None = None) -> dict:
    """Energy along mass-preserving dilations lam^(n/2) u(lam x) of a profile of mass r.

    With ``profile`` given, each member reuses its samples on the box shrunk
    by lam, which is the exact dilation with no resampling.  Without it the
    profile is a Gaussian of width 1/lam sampled on a box of ``box`` widths.
    The kinetic norm defaults to the one in the energy (H^{1/2} for sNLS,
    the homogeneous seminorm for HW); ``homogeneous`` overrides it.
    """
    if homogeneous is None:
        homogeneous = model.equation is Equation.HW
    if profile is not None:
        profile = project_mass(profile, r)
        n_points = profile.grid.n_points
    else:
        n_points = n_points or (1024 if model.n == 1 else 128)
    kin, es, xs = [], [], []
    for lam in lambdas:
        lam = float(lam)
        if profile is not None:
            grid = Grid(model.n, n_points, profile.grid.length / lam)
            u = ComplexField(grid, profile.values * lam ** (0.5 * model.n))
        else:
            width = 1.0 / lam
            grid = Grid(model.n, n_points, box * width)
            u = ComplexField.from_function(grid, lambda *c: np.exp(-sum(x**2 for x in c) / (2 * width**2)))
            u = project_mass(u, r)
        kin.append(sobolev_norm(u, 0.5, homogeneous=homogeneous))
        es.append(energy(u, model))
        xs.append(energy_excess(u, model))
    return {"lambda": [float(x) for x in lambdas], "kinetic_norm": kin, "energy": es, "excess": xs}


# ---------------------------------------------------------------------------
# artifacts


def write_series_csv(path: str | Path, columns: Sequence[str], rows: Sequence[Sequence[float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if x is None else repr(float(x)) for x in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_report_json(path: str | Path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return path
