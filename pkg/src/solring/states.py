"""Initial-state constructors: packets, solitons, superpositions, Wigner noise.

The truncated-Wigner initial condition is a Glauber coherent state per
component: psi(xi,0) = sqrt(N_s) Psi(xi) + eta(xi) with independent complex
Gaussian noise of covariance  E[eta*(xi_i) eta(xi_j)] = delta_ij / (2 dx),
E[eta eta] = 0 (half a quantum per grid mode).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrthogonalityError, ResolutionError, TopologyError
from .grid import ComplexField, Grid1D, TwoComponentField, norm_particles, overlap


@dataclass(frozen=True)
class SolitonParams:
    """Bright-soliton parameters for one component.

    n_atoms is the mean occupation N_s of the mode, g0 <= 0 the 1D coupling
    (units hbar^2/(m R)), k0 the carrier wavenumber (= n/R, integer n on the
    ring).  The chemical potential follows as mu = -N_s^2 g0^2 m / (8 hbar^2)
    and the sech width is hbar / sqrt(2 m |mu|).
    """

    n_atoms: float
    g0: float
    k0: float

    def __post_init__(self):
        if self.n_atoms <= 0:
            raise ValueError("n_atoms must be positive")
        if self.g0 > 0:
            raise ValueError("bright solitons need g0 <= 0")

    @property
    def mu(self) -> float:
        return -(self.n_atoms**2) * self.g0**2 / 8.0

    @property
    def width(self) -> float:
        """Sech width 1/sqrt(2|mu|) (= 2/(N_s |g0|))."""
        if self.g0 == 0.0:
            return np.inf
        return 1.0 / np.sqrt(2.0 * abs(self.mu))


def _wrapped_distance(grid: Grid1D, x0: float) -> np.ndarray:
    """Signed minimal-image distance xi - x0 on the periodic box."""
    d = grid.xi - x0
    return (d + 0.5 * grid.length) % grid.length - 0.5 * grid.length


def gaussian_packet(
    grid: Grid1D, x0: float, sigma: float, k: float, phase: float = 0.0
) -> ComplexField:
    """Normalized B exp(-(x-x0)^2/sigma^2) e^{ikx} e^{i phase}.

    sigma must exceed 3 grid spacings and the packet must fit in the box.
    """
    if sigma <= 3.0 * grid.spacing:
        raise ResolutionError(
            f"sigma = {sigma:.4g} <= 3 dx = {3 * grid.spacing:.4g}: unresolvable"
        )
    if 8.0 * sigma > grid.length:
        raise ResolutionError(
            f"packet support 8*sigma = {8 * sigma:.4g} exceeds box {grid.length:.4g}"
        )
    d = _wrapped_distance(grid, x0)
    amps = np.exp(-(d**2) / sigma**2) * np.exp(1j * (k * grid.xi + phase))
    f = ComplexField(grid, amps)
    return ComplexField(grid, f.amplitudes / np.sqrt(norm_particles(f)))


def sech_packet(
    grid: Grid1D, x0: float, width: float, k: float, phase: float = 0.0
) -> ComplexField:
    """Normalized B sech((x-x0)/width) e^{ikx} e^{i phase}."""
    if width <= 3.0 * grid.spacing:
        raise ResolutionError(
            f"width = {width:.4g} <= 3 dx = {3 * grid.spacing:.4g}: unresolvable"
        )
    if width >= grid.length / 8.0:
        raise ResolutionError(
            f"width = {width:.4g} >= length/8 = {grid.length / 8:.4g}: "
            "not well contained in the box"
        )
    d = _wrapped_distance(grid, x0)
    amps = (1.0 / np.cosh(d / width)) * np.exp(1j * (k * grid.xi + phase))
    f = ComplexField(grid, amps)
    return ComplexField(grid, f.amplitudes / np.sqrt(norm_particles(f)))


def sech_soliton(
    grid: Grid1D, params: SolitonParams, sign: int, x0: float = 0.0
) -> ComplexField:
    """Unit-norm bright soliton B sech(sqrt(2|mu|) (xi-x0)) e^{i sign k0 xi}.

    The infinite-line profile is truncated to the box and renormalized
    (the width is far below the circumference for all parameters of
    interest).  sign selects the carrier direction.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    winding = params.k0 * grid.radius
    if abs(winding - round(winding)) > 1e-9:
        raise TopologyError(
            f"k0*R = {winding:.6g} is not an integer: carrier not single-valued"
        )
    return sech_packet(grid, x0, params.width, sign * params.k0)


def superposition_pair(
    left: ComplexField, right: ComplexField, phi: float
) -> ComplexField:
    """(Psi_L + e^{i phi} Psi_R)/sqrt(2), renormalized to unit norm.

    The inputs must be near-orthogonal (|overlap| < 1e-3); the error reports
    the measured overlap otherwise.
    """
    ov = overlap(left, right)
    if abs(ov) >= 1e-3:
        raise OrthogonalityError(ov, 1e-3)
    amps = (left.amplitudes + np.exp(1j * phi) * right.amplitudes) / np.sqrt(2.0)
    f = ComplexField(left.grid, amps)
    return ComplexField(left.grid, f.amplitudes / np.sqrt(norm_particles(f)))


def vacuum_noise(grid: Grid1D, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian noise with E[eta* eta] = 1/(2 dx) per grid point."""
    scale = 0.5 / np.sqrt(grid.spacing)
    xy = rng.standard_normal((2, grid.n_points))
    return scale * (xy[0] + 1j * xy[1])


def sample_wigner_coherent(
    mean_field: ComplexField, rng_stream: np.random.Generator
) -> ComplexField:
    """One Wigner sample of a coherent state: mean_field + vacuum noise.

    The caller supplies the sqrt(N_s)-scaled mean field and an independent,
    seeded stream; identical streams reproduce bit-identical samples.
    """
    eta = vacuum_noise(mean_field.grid, rng_stream)
    return ComplexField(mean_field.grid, mean_field.amplitudes + eta)


def sample_wigner_pair(
    mean: TwoComponentField, rng_stream: np.random.Generator
) -> TwoComponentField:
    """Wigner-sample both components with one stream (plus drawn first)."""
    return TwoComponentField(
        sample_wigner_coherent(mean.plus, rng_stream),
        sample_wigner_coherent(mean.minus, rng_stream),
    )


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Deterministic per-trajectory stream, a pure function of (seed, index)."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    )
