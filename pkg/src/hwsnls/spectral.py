"""Periodic-box spectral substrate.

Fields live on the box [-L/2, L/2)^dim sampled at N points per axis.  The
spectral view uses the unitary convention

    u_hat(xi) = (2 pi)^(-dim/2) * integral u(x) exp(-i xi.x) dx,

approximated by the FFT with quadrature weight h^dim, so that Plancherel
holds with the spectral weight (2 pi / L)^dim and no extra constants.
"""

from __future__ import annotations

import enum
import math
import threading
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.signal import czt


class DilationError(ValueError):
    """Raised when a dilation would resample wrapped periodic copies."""

    def __init__(self, message: str, tail_mass: float):
        super().__init__(message)
        self.tail_mass = tail_mass


class Grid:
    """Uniform periodic grid on [-L/2, L/2)^dim.

    Args:
        dim: spatial dimension, 1, 2 or 3.
        n_points: points per axis, a power of two and at least 16.
        length: box side L.
    """

    def __init__(self, dim: int, n_points: int, length: float):
        if dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
        if n_points < 16 or n_points & (n_points - 1):
            raise ValueError(f"n_points must be a power of two >= 16, got {n_points}")
        if not (length > 0 and math.isfinite(length)):
            raise ValueError(f"box length must be positive, got {length}")
        self.dim = int(dim)
        self.n_points = int(n_points)
        self.length = float(length)
        self.h = self.length / self.n_points
        n = self.n_points
        self.x = (np.arange(n) - n // 2) * self.h
        # fft ordering; the index table holds the signed mode numbers
        self.index = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        self.k = 2.0 * np.pi * self.index / self.length

    def __repr__(self) -> str:
        return f"Grid(dim={self.dim}, n_points={self.n_points}, length={self.length!r})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Grid)
            and (self.dim, self.n_points, self.length)
            == (other.dim, other.n_points, other.length)
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.n_points, self.length))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_points,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def dxi(self) -> float:
        return (2.0 * np.pi / self.length) ** self.dim

    @property
    def k_nyquist(self) -> float:
        return np.pi / self.h

    def _axis(self, arr: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * self.dim
        shape[axis] = self.n_points
        return arr.reshape(shape)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        return tuple(self._axis(self.x, a) for a in range(self.dim))

    @cached_property
    def wavevector(self) -> tuple[np.ndarray, ...]:
        return tuple(self._axis(self.k, a) for a in range(self.dim))

    @cached_property
    def radius(self) -> np.ndarray:
        r2 = np.zeros(self.shape)
        for c in self.coords:
            r2 = r2 + c**2
        return np.sqrt(r2)

    @cached_property
    def kabs(self) -> np.ndarray:
        k2 = np.zeros(self.shape)
        for c in self.wavevector:
            k2 = k2 + c**2
        return np.sqrt(k2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        nyq = -self.n_points // 2
        for a in range(self.dim):
            mask |= self._axis(self.index == nyq, a)
        return mask

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i xi x0) with x0 = -L/2 reduces to (-1)^m per axis
        sign = np.where(self.index % 2 == 0, 1.0, -1.0)
        out = np.ones(self.shape)
        for a in range(self.dim):
            out = out * self._axis(sign, a)
        return out

    @property
    def _scale(self) -> float:
        return self.cell_volume / (2.0 * np.pi) ** (self.dim / 2.0)

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return sfft.fftn(values) * (self._scale * self._phase)

    def from_spectral(self, hat: np.ndarray) -> np.ndarray:
        return sfft.ifftn(hat * (self._phase / self._scale))

    def integrate(self, density: np.ndarray) -> float:
        return float(np.sum(density) * self.cell_volume)

    def spectral_sum(self, density: np.ndarray) -> float:
        return float(np.sum(density) * self.dxi)


class ComplexField:
    """Complex scalar field on a Grid with a lazily cached spectral view.

    The physical values are treated as immutable once the field exists;
    arithmetic returns new fields.
    """

    __slots__ = ("grid", "values", "_hat", "_lock")

    def __init__(self, grid: Grid, values, hat: np.ndarray | None = None):
        arr = np.asarray(values, dtype=np.complex128)
        if arr.shape != grid.shape:
            arr = arr.reshape(grid.shape)
        self.grid = grid
        self.values = arr
        self._hat = hat
        self._lock = threading.Lock()

    @classmethod
    def from_spectral(cls, grid: Grid, hat: np.ndarray) -> "ComplexField":
        hat = np.asarray(hat, dtype=np.complex128)
        return cls(grid, grid.from_spectral(hat), hat=hat)

    @classmethod
    def from_function(
        cls, grid: Grid, func: Callable[..., np.ndarray], filter_nyquist: bool = True
    ) -> "ComplexField":
        """Sample ``func(*coords)`` on the grid, zeroing the unpaired Nyquist modes."""
        values = np.broadcast_to(func(*grid.coords), grid.shape)
        field = cls(grid, np.array(values, dtype=np.complex128))
        return field.without_nyquist() if filter_nyquist else field

    @property
    def hat(self) -> np.ndarray:
        if self._hat is None:
            with self._lock:
                if self._hat is None:
                    self._hat = self.grid.to_spectral(self.values)
        return self._hat

    def without_nyquist(self) -> "ComplexField":
        hat = self.hat.copy()
        hat[self.grid.nyquist_mask] = 0.0
        return ComplexField.from_spectral(self.grid, hat)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy())

    def inner(self, other: "ComplexField") -> complex:
        """Quadrature inner product, conjugate-linear in ``self``."""
        _check_same_grid(self, other)
        return complex(np.vdot(self.values, other.values) * self.grid.cell_volume)

    def _wrap(self, values) -> "ComplexField":
        return ComplexField(self.grid, values)

    def __add__(self, other: "ComplexField") -> "ComplexField":
        _check_same_grid(self, other)
        return self._wrap(self.values + other.values)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        _check_same_grid(self, other)
        return self._wrap(self.values - other.values)

    def __mul__(self, scalar) -> "ComplexField":
        return self._wrap(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "ComplexField":
        return self._wrap(self.values / scalar)

    def __neg__(self) -> "ComplexField":
        return self._wrap(-self.values)

    def __repr__(self) -> str:
        return f"ComplexField({self.grid!r})"


def _check_same_grid(a: ComplexField, b: ComplexField) -> None:
    if a.grid != b.grid:
        raise ValueError(f"fields live on different grids: {a.grid} vs {b.grid}")


class SymbolKind(str, enum.Enum):
    HALF_WAVE = "half_wave"  # |xi|
    SEMI_REL = "semi_rel"  # sqrt(1 + |xi|^2)
    INHOM_BESSEL = "inhom_bessel"  # (1 + |xi|^2)^(s/2)
    HOM_RIESZ = "hom_riesz"  # |xi|^s
    GAP = "gap"  # 1 / (sqrt(1 + |xi|^2) + |xi|)
    RESOLVENT = "resolvent"  # 1 / (|xi|^2 + m)
    HSYM = "hsym"  # |xi|^2 / (1 + sqrt(1 + |xi|^2))
    QSYM = "qsym"  # |xi|^2 / sqrt(1 + |xi|^2)


_NEEDS_ORDER = {SymbolKind.INHOM_BESSEL, SymbolKind.HOM_RIESZ, SymbolKind.RESOLVENT}


@dataclass(frozen=True)
class MultiplierSymbol:
    """A real, nonnegative, radial Fourier multiplier."""

    kind: SymbolKind
    order: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SymbolKind(self.kind))
        if self.kind in _NEEDS_ORDER and self.order is None:
            raise ValueError(f"{self.kind.value} needs an order parameter")
        if self.kind is SymbolKind.RESOLVENT and not self.order > 0:
            raise ValueError("resolvent shift m must be positive")

    def __call__(self, xi) -> np.ndarray:
        xi = np.abs(np.asarray(xi, dtype=float))
        kind = self.kind
        if kind is SymbolKind.HALF_WAVE:
            return xi
        if kind is SymbolKind.SEMI_REL:
            return np.sqrt(1.0 + xi**2)
        if kind is SymbolKind.INHOM_BESSEL:
            return (1.0 + xi**2) ** (self.order / 2.0)
        if kind is SymbolKind.HOM_RIESZ:
            if self.order >= 0:
                return xi**self.order
            # the zero mode of a negative-order Riesz potential is dropped
            out = np.zeros_like(xi)
            nz = xi > 0
            out[nz] = xi[nz] ** self.order
            return out
        if kind is SymbolKind.GAP:
            return 1.0 / (np.sqrt(1.0 + xi**2) + xi)
        if kind is SymbolKind.RESOLVENT:
            return 1.0 / (xi**2 + self.order)
        if kind is SymbolKind.HSYM:
            return xi**2 / (1.0 + np.sqrt(1.0 + xi**2))
        if kind is SymbolKind.QSYM:
            return xi**2 / np.sqrt(1.0 + xi**2)
        raise AssertionError(kind)

    def table(self, grid: Grid) -> np.ndarray:
        return self(grid.kabs)


HALF_WAVE = MultiplierSymbol(SymbolKind.HALF_WAVE)
SEMI_REL = MultiplierSymbol(SymbolKind.SEMI_REL)
GAP = MultiplierSymbol(SymbolKind.GAP)
HSYM = MultiplierSymbol(SymbolKind.HSYM)
QSYM = MultiplierSymbol(SymbolKind.QSYM)


def bessel(s: float) -> MultiplierSymbol:
    return MultiplierSymbol(SymbolKind.INHOM_BESSEL, s)


def riesz(s: float) -> MultiplierSymbol:
    return MultiplierSymbol(SymbolKind.HOM_RIESZ, s)


def resolvent(m: float) -> MultiplierSymbol:
    return MultiplierSymbol(SymbolKind.RESOLVENT, m)


def apply_multiplier(u: ComplexField, sym: MultiplierSymbol | np.ndarray) -> ComplexField:
    """Return the field with spectral coefficients ``u_hat * sym``.

    ``sym`` may also be a precomputed table on the grid's wavenumbers.
    """
    if not u.is_finite():
        bad = int(np.count_nonzero(~np.isfinite(u.values)))
        raise ValueError(f"apply_multiplier: {bad} non-finite samples in input field")
    table = sym.table(u.grid) if isinstance(sym, MultiplierSymbol) else sym
    return ComplexField.from_spectral(u.grid, u.hat * table)


def gradient(u: ComplexField) -> list[np.ndarray]:
    """Spectral partial derivatives; the odd Nyquist modes are dropped."""
    grid = u.grid
    keep = ~grid.nyquist_mask
    return [grid.from_spectral(1j * kk * u.hat * keep) for kk in grid.wavevector]


def sobolev_weight(grid: Grid, s: float, homogeneous: bool) -> np.ndarray:
    if homogeneous:
        return riesz(2.0 * s).table(grid)
    return bessel(2.0 * s).table(grid)


def sobolev_norm(u: ComplexField, s: float, homogeneous: bool = False) -> float:
    """H^s (or homogeneous H^s) norm via Plancherel.

    Orders outside [-2, 2] are computed but unsupported.  For negative
    homogeneous orders the zero mode is excluded.
    """
    if not -2.0 <= s <= 2.0:
        warnings.warn(f"sobolev_norm: order s={s} outside the supported range [-2, 2]")
    w = sobolev_weight(u.grid, s, homogeneous)
    return math.sqrt(u.grid.spectral_sum(w * np.abs(u.hat) ** 2))


def lp_norm(u: ComplexField, p: float) -> float:
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError(f"lp_norm needs finite p >= 1, got {p}")
    return u.grid.integrate(np.abs(u.values) ** p) ** (1.0 / p)


def tail_mass(u: ComplexField, radius: float) -> float:
    """Fraction of the L^2 mass outside the Euclidean ball of given radius."""
    density = np.abs(u.values) ** 2
    total = density.sum()
    if total == 0:
        return 0.0
    return float(density[u.grid.radius > radius].sum() / total)


def _interp_axis(values: np.ndarray, axis: int, grid: Grid, lam: float) -> np.ndarray:
    """Trigonometric interpolant along one axis, sampled at lam * x_j."""
    n = grid.n_points
    c = np.fft.fft(values, axis=axis) / n
    c = np.moveaxis(c, axis, -1)
    # signed modes -N/2 .. N/2 with the Nyquist coefficient split evenly
    coeff = np.concatenate([c[..., n // 2 :], c[..., : n // 2], c[..., n // 2 : n // 2 + 1]], axis=-1)
    coeff[..., 0] *= 0.5
    coeff[..., -1] *= 0.5
    m = np.arange(-n // 2, n // 2 + 1)
    x0 = grid.x[0]
    coeff = coeff * np.exp(1j * (2.0 * np.pi * m / grid.length) * (lam - 1.0) * x0)
    out = czt(coeff, m=n, w=np.exp(2j * np.pi * lam / n), axis=-1)
    out = out * np.exp(-1j * np.pi * lam * np.arange(n))
    if lam > 1.0:
        # samples that land outside the box see the zero extension, not a periodic copy
        out[..., np.abs(lam * grid.x) >= grid.length / 2.0] = 0.0
    return np.moveaxis(out, -1, axis)


def dilate(u: ComplexField, lam: float, tail_tol: float = 1e-8) -> ComplexField:
    """Mass-preserving dilation ``lam^(dim/2) u(lam x)``.

    The trigonometric interpolant of ``u`` is resampled at ``lam * x``.
    Refuses when more than ``tail_tol`` of the mass sits outside the
    radius where the resampling would see wrapped periodic copies.
    """
    if not 0.25 <= lam <= 4.0:
        raise ValueError(f"dilation factor must lie in [1/4, 4], got {lam}")
    grid = u.grid
    radius = grid.length / (2.0 * max(lam, 1.0 / lam))
    tail = tail_mass(u, radius)
    if tail > tail_tol:
        raise DilationError(
            f"dilate(lam={lam:.6g}): tail mass {tail:.3e} beyond |x|={radius:.6g} "
            f"exceeds {tail_tol:.1e}; enlarge the box",
            tail,
        )
    if lam == 1.0:
        return ComplexField(grid, u.values.copy())
    out = u.values
    for axis in range(grid.dim):
        out = _interp_axis(out, axis, grid, lam)
    return ComplexField(grid, out * lam ** (grid.dim / 2.0))


def lp_cutoff(t) -> np.ndarray:
    """Smooth psi with psi = 1 on [0, 1] and psi = 0 on [2, inf)."""
    t = np.asarray(t, dtype=float)

    def bump(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a = bump(2.0 - t)
    b = bump(t - 1.0)
    return a / (a + b)


def lp_symbol(t, j: int) -> np.ndarray:
    if j == 0:
        return lp_cutoff(t)
    return lp_cutoff(np.asarray(t) / 2.0**j) - lp_cutoff(np.asarray(t) / 2.0 ** (j - 1))


def lp_max_index(grid: Grid) -> int:
    return int(math.ceil(math.log2(grid.k_nyquist))) + 1


def littlewood_paley_block(u: ComplexField, j: int) -> ComplexField:
    """Dyadic frequency block phi_j(sqrt(-Delta)) u."""
    if j < 0:
        raise ValueError("block index must be nonnegative")
    jmax = lp_max_index(u.grid)
    if j > jmax:
        warnings.warn(f"block {j} lies beyond j_max={jmax} for this grid; returning zero")
        return ComplexField(u.grid, np.zeros(u.grid.shape))
    return apply_multiplier(u, lp_symbol(u.grid.kabs, j))


def littlewood_paley_blocks(u: ComplexField) -> list[ComplexField]:
    return [littlewood_paley_block(u, j) for j in range(lp_max_index(u.grid) + 1)]


def gaussian(grid: Grid, width: float = 1.0, center: Sequence[float] | None = None,
             amplitude: complex = 1.0) -> ComplexField:
    center = center or (0.0,) * grid.dim

    def f(*xs):
        r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
        return amplitude * np.exp(-r2 / (2.0 * width**2))

    return ComplexField.from_function(grid, f)
