"""Ratio probes of weighted radial inequalities: Strauss, log-refined Strauss and Stein-Weiss.

Every probe reports LHS / RHS with the constant set to one.  Boundedness of
a ratio along a sweep is the testable stand-in for the existence of a
constant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .functionals import ModelSpec, mass
from .spectral import ComplexField, Grid, littlewood_paley_block, lp_max_index, sobolev_norm

# ---------------------------------------------------------------------------
# radial fields


def radial_field(grid: Grid, profile: Callable[[np.ndarray], np.ndarray] | tuple[np.ndarray, np.ndarray],
                 filter_nyquist: bool = True) -> ComplexField:
    """Field u(x) = f(|x|) on the Cartesian grid.

    Args:
        grid: target grid.
        profile: callable f(r), or a table (r, f) interpolated by a cubic spline
            and extended by zero beyond its last radius.
    """
    r = grid.radius
    if callable(profile):
        vals = profile(r)
    else:
        rs, fs = (np.asarray(a) for a in profile)
        spline = CubicSpline(rs, fs)
        vals = np.where(r <= rs[-1], spline(np.clip(r, rs[0], rs[-1])), 0.0)
    return ComplexField.from_function(grid, lambda *xs: vals, filter_nyquist=filter_nyquist)


def trig_interpolate(u: ComplexField, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of u at arbitrary points (shape (m, dim)).

    The unpaired Nyquist modes are split symmetrically, so the interpolant is
    real whenever the samples are real.
    """
    grid = u.grid
    n = grid.n_points
    c = np.fft.fftn(u.values) / u.values.size
    pts = np.atleast_2d(points)
    out = np.zeros(len(pts), dtype=complex)
    ks = []
    weights = []
    for _ in range(grid.dim):
        k = 2.0 * np.pi * grid.index / grid.length
        wt = np.ones(n)
        wt[n // 2] = 0.5
        ks.append(k)
        weights.append(wt)
    x0 = grid.x[0]
    for i, p in enumerate(pts):
        acc = c
        for axis in range(grid.dim):
            k = ks[axis]
            d = p[axis] - x0
            # the Nyquist coefficient contributes cos(k_nyq d) once split over +/- k_nyq
            phase = np.exp(1j * k * d) * weights[axis]
            phase[n // 2] = math.cos(abs(k[n // 2]) * d)
            acc = np.tensordot(phase, acc, axes=([0], [0]))
        out[i] = acc
    return out


def weighted_sup(u: ComplexField, power: float, refine: bool = True) -> tuple[float, np.ndarray]:
    """max |x|^power |u(x)|: grid maximum, refined along the ray through the maximizing point.

    Returns:
        The maximum and the point where it is attained.
    """
    grid = u.grid
    r = grid.radius
    vals = r**power * np.abs(u.values)
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    best = float(vals[idx])
    point = np.array([np.broadcast_to(c, grid.shape)[idx] for c in grid.coords])
    rad = float(np.linalg.norm(point))
    if not refine or rad == 0.0:
        return best, point
    direction = point / rad

    def neg(s: float) -> float:
        return -float(s**power * abs(trig_interpolate(u, (s * direction)[None, :])[0]))

    res = minimize_scalar(neg, bounds=(max(rad - grid.h, 0.0), rad + grid.h), method="bounded",
                          options={"xatol": 1e-12})
    if -res.fun > best:
        return float(-res.fun), res.x * direction
    return best, point


# ---------------------------------------------------------------------------
# Strauss


@dataclass
class Probe:
    family: str
    parameter: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def _require_multid(u: ComplexField) -> None:
    if u.grid.dim < 2:
        raise ValueError("the radial inequalities are stated for n >= 2")


def strauss_lhs(u: ComplexField, refine: bool = True) -> float:
    _require_multid(u)
    return weighted_sup(u, 0.5 * (u.grid.dim - 1), refine)[0]


def strauss_ratio(u: ComplexField, s: float, refine: bool = True) -> float:
    """||x|^((n-1)/2) u|_inf / ||u||_{H^s}."""
    return strauss_lhs(u, refine) / sobolev_norm(u, s)


def strauss_block_sweep(u: ComplexField, blocks: Sequence[int] = range(7)) -> list[Probe]:
    """Strauss ratios of single dyadic blocks against their H^{1/2} norms."""
    _require_multid(u)
    jmax = lp_max_index(u.grid)
    if max(blocks) > jmax:
        raise ValueError(f"blocks up to {max(blocks)} need a finer grid (j_max = {jmax})")
    out = []
    for j in blocks:
        uj = littlewood_paley_block(u, j)
        out.append(Probe("lp_block", float(j), strauss_lhs(uj), sobolev_norm(uj, 0.5)))
    return out


# ---------------------------------------------------------------------------
# log-refined Strauss


def bg_log_factor(u: ComplexField, s: float) -> float:
    """sqrt(ln(2 + ||u||_{H^s} / ||u||_{H^1/2}))."""
    return math.sqrt(math.log(2.0 + sobolev_norm(u, s) / sobolev_norm(u, 0.5)))


def bg_ratio(u: ComplexField, s: float) -> float:
    """||x|^((n-1)/2) u|_inf / (||u||_{H^1/2} sqrt(ln(2 + ||u||_{H^s}/||u||_{H^1/2})))."""
    return strauss_lhs(u) / (sobolev_norm(u, 0.5) * bg_log_factor(u, s))


def naive_ratio(u: ComplexField) -> float:
    """||x|^((n-1)/2) u|_inf / ||u||_{H^1/2}, the inequality without the log factor."""
    return strauss_lhs(u) / sobolev_norm(u, 0.5)


@dataclass
class BGSweep:
    family: str
    parameters: list[float]
    lhs: list[float]
    h_half: list[float]
    log_factor: list[float]
    bg: list[float]
    naive: list[float]

    @property
    def naive_growth(self) -> float:
        return self.naive[-1] / self.naive[0]

    @property
    def bg_max(self) -> float:
        return max(self.bg)

    def rows(self) -> list[Probe]:
        return [Probe(self.family, p, l, l / b) for p, l, b in zip(self.parameters, self.lhs, self.bg)]


def _bg_sweep(family: str, fields_: Sequence[tuple[float, ComplexField]], s: float) -> BGSweep:
    params, lhs, hh, lf, bg, nv = [], [], [], [], [], []
    for par, u in fields_:
        l = strauss_lhs(u)
        h = sobolev_norm(u, 0.5)
        f = bg_log_factor(u, s)
        params.append(float(par))
        lhs.append(l)
        hh.append(h)
        lf.append(f)
        bg.append(l / (h * f))
        nv.append(l / h)
    return BGSweep(family, params, lhs, hh, lf, bg, nv)


def gaussian_family(dim: int, lam: float, n_points: int = 256, box: float = 16.0) -> ComplexField:
    """Mass-preserving dilation lam^(n/2) exp(-|lam x|^2 / 2), sampled on a grid of box / lam."""
    grid = Grid(dim, n_points, box / lam)
    return radial_field(grid, lambda r: lam ** (dim / 2.0) * np.exp(-((lam * r) ** 2) / 2.0))


def bg_gaussian_sweep(lambdas: Sequence[float] = (1, 4, 16, 64), dim: int = 2, s: float = 1.0,
                      n_points: int = 256) -> BGSweep:
    """Dilated Gaussians; every member is sampled exactly on its own rescaled grid."""
    return _bg_sweep("dilated_gaussian", [(lam, gaussian_family(dim, lam, n_points)) for lam in lambdas], s)


SHELL_RADIUS = 1.0
SHELL_CARRIER = 3.0


def shell_packet(r: np.ndarray, j: int) -> np.ndarray:
    """Radial wave packet of thickness 2^-j at |x| = 1 with unit peak value."""
    t = 2.0**j * (r - SHELL_RADIUS)
    return np.exp(-0.5 * t**2) * np.cos(SHELL_CARRIER * t)


def lacunary_shell_field(grid: Grid, levels: int) -> ComplexField:
    """Sum of shell packets j = 1..levels, all peaking on the unit sphere.

    Each packet has H^{1/2} norm of order one and value one on the unit
    sphere, and the packets sit in nearly disjoint dyadic bands, so the
    weighted sup grows like the number of levels while the H^{1/2} norm
    grows like its square root.
    """
    return radial_field(grid, lambda r: sum(shell_packet(r, j) for j in range(1, levels + 1)))


def bg_lacunary_sweep(levels: Sequence[int] = (1, 2, 3, 4, 5), dim: int = 2, s: float = 1.0,
                      grid: Grid | None = None) -> BGSweep:
    """Concentrating lacunary family on a fixed grid fine enough for the thinnest shell."""
    grid = grid or Grid(dim, 512, 4.0)
    return _bg_sweep("lacunary_shells", [(J, lacunary_shell_field(grid, J)) for J in levels], s)


# ---------------------------------------------------------------------------
# Stein-Weiss for radial functions


class ExponentConditionError(ValueError):
    """The exponents violate a condition of the radial Stein-Weiss inequality."""


def rubin_exponents(n: int, p: float, s: float = 0.25) -> dict:
    """Exponents of the specialization r = p + 1, s = 1/4 and the conditions they must meet."""
    r = p + 1.0
    beta = (p * (-2 * n + 1) + 2 * n + 1) / (4.0 * (p + 1.0))
    return {
        "r": r,
        "s": s,
        "beta": beta,
        "weight_exponent": beta * r,  # the weight is |x|^(-beta r)
        "lower": -(n - 1) * (0.5 - 1.0 / r),
        "upper": n / r,
        "scaling_gap": 1.0 / r - (0.5 + (beta - s) / n),
    }


def check_rubin_conditions(n: int, p: float) -> dict:
    """Verify n >= 2, r >= 2, 0 < s < n, the beta window and the scaling relation.

    Raises:
        ExponentConditionError naming the first failed condition.
    """
    e = rubin_exponents(n, p)
    if n < 2:
        raise ExponentConditionError("dimension condition n >= 2 fails")
    if not 0.0 < e["s"] < n:
        raise ExponentConditionError("order condition 0 < s < n fails")
    if e["r"] < 2.0:
        raise ExponentConditionError(f"integrability condition r = p + 1 >= 2 fails (r = {e['r']})")
    if not e["lower"] <= e["beta"] < e["upper"]:
        raise ExponentConditionError(
            f"window condition -(n-1)(1/2 - 1/r) <= beta < n/r fails: "
            f"{e['lower']:.6g} <= {e['beta']:.6g} < {e['upper']:.6g}"
        )
    if abs(e["scaling_gap"]) > 1e-12:
        raise ExponentConditionError(
            f"scaling condition 1/r = 1/2 + (beta - s)/n fails by {e['scaling_gap']:.3e}"
        )
    return e


def decay_exponent(n: int, p: float) -> float:
    """(p(1 - 2n) + 2n + 1)/4, the power of R in the exterior decay bound."""
    return (p * (-2 * n + 1) + 2 * n + 1) / 4.0


@dataclass
class RubinReport:
    exponents: dict
    lhs: float
    rhs: float
    ratio: float
    origin_excluded: bool
    origin_contribution: float
    decay_exponent: float
    radii: list[float] = field(default_factory=list)
    decay_lhs: list[float] = field(default_factory=list)
    decay_rhs: list[float] = field(default_factory=list)
    decay_ratios: list[float] = field(default_factory=list)

    def rows(self, family: str = "rubin") -> list[Probe]:
        out = [Probe(family, 0.0, self.lhs, self.rhs)]
        out += [Probe(family + "_decay", R, l, r) for R, l, r in zip(self.radii, self.decay_lhs, self.decay_rhs)]
        return out


def rubin_check(u: ComplexField, p: float, radii: Sequence[float] = (2.0, 4.0, 8.0)) -> RubinReport:
    """Weighted L^{p+1} norm against ||u||_{H^1/4 hom}, plus the exterior decay ratios.

    When the weight power is negative the origin cell is excluded and its
    would-be contribution (weight at |x| = h/2) is reported.
    """
    grid = u.grid
    n = grid.dim
    e = check_rubin_conditions(n, p)
    power = -e["weight_exponent"]
    r = grid.radius
    dens = np.abs(u.values) ** (p + 1)
    excluded = power < 0
    origin = 0.0
    if excluded:
        at0 = r == 0
        origin = float(dens[at0].sum() * (0.5 * grid.h) ** power * grid.cell_volume)
        weight = np.where(at0, 0.0, np.where(at0, 1.0, r) ** power)
    else:
        weight = r**power
    lhs = grid.integrate(dens * weight) ** (1.0 / (p + 1))
    rhs = sobolev_norm(u, 0.25, homogeneous=True)
    de = decay_exponent(n, p)
    half = 0.5 * (p + 1)
    norms = mass(u) ** (0.5 * half) * sobolev_norm(u, 0.5, homogeneous=True) ** half
    dl, dr, drat = [], [], []
    for R in radii:
        ext = grid.integrate(np.where(r >= R, dens, 0.0))
        bound = R**de * norms
        dl.append(ext)
        dr.append(bound)
        drat.append(ext / bound)
    return RubinReport(
        exponents=e, lhs=lhs, rhs=rhs, ratio=lhs / rhs, origin_excluded=excluded,
        origin_contribution=origin, decay_exponent=de, radii=[float(x) for x in radii],
        decay_lhs=dl, decay_rhs=dr, decay_ratios=drat,
    )


def shifted_bump(grid: Grid, shift: float, width: float = 0.5) -> ComplexField:
    """Radial bump exp(-(|x| - shift)^2 / (2 width^2))."""
    return radial_field(grid, lambda r: np.exp(-((r - shift) ** 2) / (2.0 * width**2)))


def non_increasing(values: Sequence[float], rel_tol: float = 1e-9, abs_tol: float = 0.0) -> bool:
    """True when each value is at most its predecessor, up to rel_tol and an absolute floor.

    The floor absorbs exterior integrals that have already decayed to the
    rounding level of the quadrature, where successive values are noise.
    """
    return all(b <= a * (1.0 + rel_tol) + abs_tol + 1e-300 for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# block almost-orthogonality


def random_bandlimited_field(grid: Grid, rng: np.random.Generator, kmax: float | None = None) -> ComplexField:
    """Random complex Fourier coefficients on |xi| <= kmax (default: 2/3 of Nyquist)."""
    kmax = kmax if kmax is not None else (2.0 / 3.0) * grid.k_nyquist
    hat = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    hat[grid.kabs > kmax] = 0.0
    return ComplexField.from_spectral(grid, hat)


def block_energy_ratio(u: ComplexField) -> float:
    """sum_j ||u_j||^2_{H^1/2} / ||u||^2_{H^1/2} over all dyadic blocks of the grid."""
    total = sum(sobolev_norm(littlewood_paley_block(u, j), 0.5) ** 2 for j in range(lp_max_index(u.grid) + 1))
    return total / sobolev_norm(u, 0.5) ** 2


# ---------------------------------------------------------------------------
# sweep output

SWEEP_COLUMNS = ("family", "parameter", "LHS", "RHS", "ratio")


def write_sweep_csv(path: str | Path, probes: Sequence[Probe]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for pr in probes:
            w.writerow([pr.family, repr(float(pr.parameter)), repr(float(pr.lhs)), repr(float(pr.rhs)),
                        repr(float(pr.ratio))])
    return path


def model_window_check(model: ModelSpec) -> None:
    """The Stein-Weiss specialization needs n >= 2 and p in the supercritical window."""
    if model.n < 2 or not model.is_supercritical_window:
        raise ExponentConditionError(f"{model.classification()}; the decay estimate needs n >= 2 and the window")
