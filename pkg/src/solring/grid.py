"""Periodic 1D grids and complex fields.

Everything in the package works in natural units hbar = m = 1; on the ring
the radius R enters through the box length L = 2*pi*R, and the angular
coordinate is xi = theta*R in [-pi*R, pi*R).  Fields carry units of
1/sqrt(length), so sum(|psi|^2)*dx is a (dimensionless) particle number.

Wavenumbers are stored in FFT ordering, k_j = 2*pi*j/L with
j = 0, 1, ..., n/2-1, -n/2, ..., -1 (numpy convention).  On the ring the
integer mode index q = k*R is the angular-momentum quantum number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [offset, offset + length)."""

    n_points: int
    length: float
    coordinate_offset: float = 0.0

    def __post_init__(self):
        if self.n_points <= 0:
            raise ValueError("n_points must be positive")
        if self.length <= 0:
            raise ValueError("length must be positive")

    @classmethod
    def ring(cls, n_points: int = 512, radius: float = 1.0) -> "Grid1D":
        """Ring of radius R: domain [-pi*R, pi*R), length 2*pi*R."""
        return cls(n_points, TWO_PI * radius, -np.pi * radius)

    @classmethod
    def line(cls, n_points: int, length: float, center: float = 0.0) -> "Grid1D":
        """Periodic box of the given length centered on `center`."""
        return cls(n_points, float(length), center - 0.5 * length)

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def radius(self) -> float:
        """Ring radius implied by the box length."""
        return self.length / TWO_PI

    @property
    def xi(self) -> np.ndarray:
        return self.coordinate_offset + self.spacing * np.arange(self.n_points)

    @property
    def wavenumbers(self) -> np.ndarray:
        """k_j = 2*pi*j/length in FFT ordering."""
        return TWO_PI * np.fft.fftfreq(self.n_points, d=self.spacing)

    @property
    def mode_numbers(self) -> np.ndarray:
        """Integer FFT mode indices j = k_j * length / (2*pi)."""
        return np.rint(np.fft.fftfreq(self.n_points) * self.n_points).astype(int)


@dataclass
class ComplexField:
    """Complex amplitudes psi(xi_i) on a grid; units length^{-1/2}."""

    grid: Grid1D
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.grid.n_points,):
            raise ValueError(
                f"amplitudes shape {amps.shape} does not match grid "
                f"({self.grid.n_points} points)"
            )
        self.amplitudes = amps

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.amplitudes.copy())


@dataclass
class TwoComponentField:
    """Internal states |+> and |-> sharing one grid."""

    plus: ComplexField
    minus: ComplexField

    def __post_init__(self):
        if self.plus.grid != self.minus.grid:
            raise GridMismatchError("components must share one grid")

    @property
    def grid(self) -> Grid1D:
        return self.plus.grid

    def copy(self) -> "TwoComponentField":
        return TwoComponentField(self.plus.copy(), self.minus.copy())


def _require_same_grid(a: ComplexField, b: ComplexField) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


def overlap(a: ComplexField, b: ComplexField) -> complex:
    """Discretized inner product integral(a* b) dxi = sum a*(xi_i) b(xi_i) dx."""
    _require_same_grid(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.spacing)


def norm_particles(f: ComplexField) -> float:
    """Particle-number functional sum |f(xi_i)|^2 dx."""
    amps = f.amplitudes
    return float(np.sum(amps.real**2 + amps.imag**2) * f.grid.spacing)


def density(f: ComplexField) -> np.ndarray:
    """|psi(xi_i)|^2."""
    return f.amplitudes.real**2 + f.amplitudes.imag**2


def normalized(f: ComplexField) -> ComplexField:
    """Rescale to unit particle number."""
    n = norm_particles(f)
    if n == 0.0:
        raise ValueError("cannot normalize a vacuum field")
    return ComplexField(f.grid, f.amplitudes / np.sqrt(n))


def spectral_amplitudes(f: ComplexField) -> np.ndarray:
    """Mode amplitudes f~(k_j), FFT-ordered, with sum|f~|^2 = sum|f|^2 dx."""
    scale = np.sqrt(f.grid.spacing / f.grid.n_points)
    return np.fft.fft(f.amplitudes) * scale


def mean_position(f: ComplexField) -> float:
    """First moment integral(xi |psi|^2) dxi / norm."""
    rho = density(f)
    w = np.sum(rho)
    return float(np.sum(f.grid.xi * rho) / w)


def plane_wave(grid: Grid1D, q: int, amplitude: complex = 1.0) -> ComplexField:
    """Unit-norm plane wave e^{i q xi / R} (integer ring mode q)."""
    k = q / grid.radius
    amps = np.exp(1j * k * grid.xi) / np.sqrt(grid.length)
    return ComplexField(grid, amplitude * amps)


# ---------------------------------------------------------------------------
# Field dump format: CSV rows (xi, Re psi, Im psi) preceded by '#' header
# lines recording n_points, length, coordinate_offset and the unit/ordering
# conventions, so dumps are portable.
# ---------------------------------------------------------------------------

_DUMP_HEADER = (
    "# solring field dump\n"
    "# units: hbar = m = 1; field units length^(-1/2)\n"
    "# wavenumber convention: FFT ordering k_j = 2*pi*j/length, "
    "j = 0..n/2-1, -n/2..-1\n"
)


def dump_field(f: ComplexField, path) -> None:
    """Write a field as CSV (xi, Re psi, Im psi) with a self-describing header."""
    with open(path, "w") as fh:
        fh.write(_DUMP_HEADER)
        fh.write(f"# n_points = {f.grid.n_points!r}\n")
        fh.write(f"# length = {f.grid.length!r}\n")
        fh.write(f"# coordinate_offset = {f.grid.coordinate_offset!r}\n")
        fh.write("xi,re_psi,im_psi\n")
        for x, a in zip(f.grid.xi, f.amplitudes):
            fh.write(f"{float(x)!r},{float(a.real)!r},{float(a.imag)!r}\n")


def load_field(path) -> ComplexField:
    """Read a field written by :func:`dump_field`."""
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    key, _, value = line.lstrip("# ").partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if line.startswith("xi,"):
                continue
            rows.append([float(tok) for tok in line.split(",")])
    grid = Grid1D(
        n_points=int(meta["n_points"]),
        length=float(meta["length"]),
        coordinate_offset=float(meta["coordinate_offset"]),
    )
    data = np.asarray(rows)
    if data.shape != (grid.n_points, 3):
        raise ValueError(f"dump has {data.shape[0]} rows, expected {grid.n_points}")
    return ComplexField(grid, data[:, 1] + 1j * data[:, 2])
