"""Ring-gyroscope sequences: beamsplitters, schemes, rotation sensitivity.

The full pipeline for one scheme is: Wigner-sample an ensemble around the
initial solitons/packets (the first beamsplitter is forgone; both components
start occupied), evolve one ring period T = 2 pi R^2 / n per loop, apply the
final 50/50 Raman splitter, and read the number difference N_d.  The
sensitivity Delta-Omega = sqrt(Var N_d)/|d<N_d>/dOmega| uses a central
difference at Omega = +-dOmega with common random numbers.

Beamsplitter conventions (pointwise unitary, exact particle conservation):
  first:    psi_pm -> (psi_pm -+ psi_mp e^{+-2 i k0 xi}) / sqrt(2)
  final:    psi_pm -> (psi_pm - i psi_mp e^{+-2 i k0 xi}) / sqrt(2)
  variable: psi_pm -> psi_pm cos(t) - i psi_mp sin(t) e^{+-2 i k0 xi}
The variable splitter with field angle t realizes the two-mode rotation
rotate(2t) about Jx, so a requested spin angle theta maps to t = theta/2
(`theta_meaning="spin"`, the default; "field" passes theta through).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .ensemble import (
    TrajectoryEnsemble,
    evolve_ensemble,
    halves_difference,
    number_difference,
    sample_ensemble,
)
from .errors import BarrierTuneError, TopologyError
from .grid import ComplexField, Grid1D, TwoComponentField, density, norm_particles
from .propagate import EvolutionSpec, GaussianBarrier, check_phase_guard, evolve
from .states import SolitonParams, gaussian_packet, sech_packet
from .stats import SensitivityEstimate, sensitivity_from_trajectories
from .twomode import TwoModeParams, chi_from_g0, theta_chi, two_mode_sensitivity


# ---------------------------------------------------------------------------
# Beamsplitters
# ---------------------------------------------------------------------------


def _splitter_phases(grid: Grid1D, k0: float):
    winding = 2.0 * k0 * grid.radius
    if abs(winding - round(winding)) > 1e-9:
        raise TopologyError(
            f"2 k0 R = {winding:.6g} must be an integer for a single-valued splitter"
        )
    up = np.exp(2j * k0 * grid.xi)
    return up, np.conj(up)


def _apply_splitter(amps: np.ndarray, grid: Grid1D, k0: float, convention: str,
                    theta: float = 0.25 * math.pi) -> None:
    """In-place splitter on (..., 2, n) amplitudes."""
    up, down = _splitter_phases(grid, k0)
    p = amps[..., 0, :]
    m = amps[..., 1, :]
    if convention == "first":
        p_new = (p - m * up) / math.sqrt(2.0)
        m_new = (m + p * down) / math.sqrt(2.0)
    elif convention in ("final", "variable"):
        c = math.cos(theta) if convention == "variable" else 1.0 / math.sqrt(2.0)
        s = math.sin(theta) if convention == "variable" else 1.0 / math.sqrt(2.0)
        p_new = c * p - 1j * s * m * up
        m_new = c * m - 1j * s * p * down
    else:
        raise ValueError(f"unknown convention {convention!r}")
    amps[..., 0, :] = p_new
    amps[..., 1, :] = m_new


def _split_field(field: TwoComponentField, k0, convention, theta=0.25 * math.pi):
    amps = np.stack([field.plus.amplitudes, field.minus.amplitudes])[np.newaxis]
    _apply_splitter(amps, field.grid, k0, convention, theta)
    return TwoComponentField(
        ComplexField(field.grid, amps[0, 0]), ComplexField(field.grid, amps[0, 1])
    )


def beamsplitter_5050(
    field: TwoComponentField, k0: float, convention: str = "final"
) -> TwoComponentField:
    """50/50 Raman splitter; convention 'first' or 'final' (see module doc)."""
    if convention not in ("first", "final"):
        raise ValueError("convention must be 'first' or 'final'")
    return _split_field(field, k0, convention)


def beamsplitter_variable(
    field: TwoComponentField, k0: float, theta: float
) -> TwoComponentField:
    """Variable-angle splitter; theta = pi/4 reproduces the final 50/50."""
    return _split_field(field, k0, "variable", theta)


def field_splitter_angle(theta: float, theta_meaning: str = "spin") -> float:
    """Map a requested rotation angle to the field splitter mixing angle."""
    if theta_meaning == "spin":
        return 0.5 * theta
    if theta_meaning == "field":
        return theta
    raise ValueError("theta_meaning must be 'spin' or 'field'")


# ---------------------------------------------------------------------------
# Configuration and records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingConfig:
    """Parameters of one ring-gyroscope simulation.

    shape: 'auto' (soliton for g0 < 0, gaussian otherwise), 'soliton',
    'gaussian' or 'sech' (the latter two use `sigma` as width, any g0).
    d_omega defaults to a Sagnac phase of 0.05 rad per loop.
    steps_per_loop is the Strang step count for one ring period (free
    evolution is exact regardless).  The barrier fields only matter for the
    single-component scheme.
    """

    n_total: float = 1.0e4
    winding: int = 80
    radius: float = 1.0
    g0: float = 0.0
    n_points: int = 512
    n_traj: int = 200
    master_seed: int = 0
    steps_per_loop: int = 20000
    d_omega: Optional[float] = None
    shape: str = "auto"
    sigma: float = 0.3
    theta_meaning: str = "spin"
    tw_correction: bool = True
    workers: int = 1
    barrier_v0: Optional[float] = None
    barrier_w: float = 1e-2
    barrier_bias_phase: float = 0.5 * math.pi

    @property
    def k0(self) -> float:
        return self.winding / self.radius

    @property
    def loop_time(self) -> float:
        """T = 2 pi R^2 / n: one full traversal at carrier n/R."""
        return 2.0 * math.pi * self.radius**2 / self.winding

    @property
    def d_omega_value(self) -> float:
        if self.d_omega is not None:
            return self.d_omega
        return 0.05 / (4.0 * math.pi * self.radius**2)

    @property
    def n_per_mode(self) -> float:
        return 0.5 * self.n_total

    @property
    def chi_t(self) -> float:
        """Twisting parameter chi*T implied by (g0, N_s, T)."""
        return chi_from_g0(self.g0, self.n_per_mode) * self.loop_time

    def grid(self) -> Grid1D:
        return Grid1D.ring(self.n_points, self.radius)

    def two_mode_params(self) -> TwoModeParams:
        return TwoModeParams(self.n_total, self.chi_t)

    def evolution_spec(self, omega: float, potential=None) -> EvolutionSpec:
        return EvolutionSpec(
            dt=self.loop_time / self.steps_per_loop,
            g0=self.g0,
            omega=omega,
            potential=potential,
            tw_correction=self.tw_correction,
        )


@dataclass(frozen=True)
class SensitivityRecord:
    """One point of a sensitivity sweep."""

    g0: float
    scheme: str
    theta: Optional[float]
    delta_omega: float
    delta_omega_stderr: float
    n_traj: int
    d_omega: float
    master_seed: int
    flags: tuple[str, ...] = ()

    @classmethod
    def from_estimate(
        cls, config: RingConfig, scheme: str, theta, est: SensitivityEstimate,
        extra_flags: tuple[str, ...] = ()
    ) -> "SensitivityRecord":
        return cls(
            g0=config.g0,
            scheme=scheme,
            theta=theta,
            delta_omega=est.delta_omega,
            delta_omega_stderr=est.delta_omega_stderr,
            n_traj=est.count,
            d_omega=est.d_omega,
            master_seed=config.master_seed,
            flags=est.flags + extra_flags,
        )


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------


def _shape_kind(config: RingConfig) -> str:
    if config.shape != "auto":
        return config.shape
    return "soliton" if config.g0 < 0 else "gaussian"


def initial_mean_pair(config: RingConfig) -> TwoComponentField:
    """sqrt(N_s)-scaled counter-propagating pair, both centered at xi = 0."""
    grid = config.grid()
    kind = _shape_kind(config)
    if kind == "soliton":
        params = SolitonParams(config.n_per_mode, config.g0, config.k0)
        width = params.width
        plus = sech_packet(grid, 0.0, width, +config.k0)
        minus = sech_packet(grid, 0.0, width, -config.k0)
    elif kind == "sech":
        plus = sech_packet(grid, 0.0, config.sigma, +config.k0)
        minus = sech_packet(grid, 0.0, config.sigma, -config.k0)
    elif kind == "gaussian":
        plus = gaussian_packet(grid, 0.0, config.sigma, +config.k0)
        minus = gaussian_packet(grid, 0.0, config.sigma, -config.k0)
    else:
        raise ValueError(f"unknown shape {kind!r}")
    root_n = math.sqrt(config.n_per_mode)
    return TwoComponentField(
        ComplexField(grid, root_n * plus.amplitudes),
        ComplexField(grid, root_n * minus.amplitudes),
    )


# ---------------------------------------------------------------------------
# Two-component schemes
# ---------------------------------------------------------------------------


def _two_component_nd(
    config: RingConfig,
    omega: float,
    *,
    pretwist_theta_field: Optional[float] = None,
) -> np.ndarray:
    """Per-trajectory N_d for one rotation rate (single or double loop)."""
    mean = initial_mean_pair(config)
    spec = config.evolution_spec(omega)
    mean_rows = np.stack([mean.plus.amplitudes, mean.minus.amplitudes])
    check_phase_guard(mean_rows, mean.grid, spec)

    ens = sample_ensemble(mean, config.n_traj, config.master_seed)
    ens = evolve_ensemble(ens, spec, config.loop_time, workers=config.workers)
    if pretwist_theta_field is not None:
        _apply_splitter(
            ens.amplitudes, ens.grid, config.k0, "variable", pretwist_theta_field
        )
        ens = evolve_ensemble(ens, spec, config.loop_time, workers=config.workers)
    _apply_splitter(ens.amplitudes, ens.grid, config.k0, "final")
    return number_difference(ens)


def run_single_loop(config: RingConfig) -> SensitivityRecord:
    """Single-loop scheme: sample, evolve T, final 50/50, N_d statistics."""
    d = config.d_omega_value
    nd0 = _two_component_nd(config, 0.0)
    ndp = _two_component_nd(config, +d)
    ndm = _two_component_nd(config, -d)
    est = sensitivity_from_trajectories(nd0, ndp, ndm, d)
    return SensitivityRecord.from_estimate(config, "single_loop", None, est)


def run_pretwist_loop(
    config: RingConfig, theta: float, theta_meaning: Optional[str] = None
) -> SensitivityRecord:
    """Pre-twist scheme: evolve T, variable splitter, evolve T, final 50/50.

    theta is a spin rotation angle by default (field angle theta/2); pass
    theta_meaning="field" to feed the splitter directly.
    """
    meaning = theta_meaning if theta_meaning is not None else config.theta_meaning
    t_field = field_splitter_angle(theta, meaning)
    d = config.d_omega_value
    nd0 = _two_component_nd(config, 0.0, pretwist_theta_field=t_field)
    ndp = _two_component_nd(config, +d, pretwist_theta_field=t_field)
    ndm = _two_component_nd(config, -d, pretwist_theta_field=t_field)
    est = sensitivity_from_trajectories(nd0, ndp, ndm, d)
    return SensitivityRecord.from_estimate(config, "pretwist", theta, est)


# ---------------------------------------------------------------------------
# Theta optimization
# ---------------------------------------------------------------------------

_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


def optimize_theta(
    config: RingConfig,
    theta_grid: Sequence[float],
    evaluator: Optional[Callable[[float], SensitivityRecord]] = None,
    tolerance: float = 1e-3,
) -> tuple[float, SensitivityRecord]:
    """Minimize Delta-Omega over the pre-twist angle.

    Evaluates the grid (plus theta_chi, so the optimum can never be worse
    than it) with shared seeds, then refines around the best point by
    golden-section to `tolerance` radians.  A non-unimodal grid landscape
    yields the refined global grid minimum plus a multimodality warning.

    The default evaluator is the two-mode analog of run_pretwist_loop
    (same N_t, chi*T, d_omega and master seed); pass
    ``evaluator=lambda t: run_pretwist_loop(config, t)`` for the multi-mode
    version.
    """
    grid_list = sorted(float(t) for t in theta_grid)
    if len(grid_list) < 3:
        raise ValueError("theta_grid needs at least 3 points")
    if config.chi_t != 0.0:
        t_chi = theta_chi(config.two_mode_params())
        if not any(abs(t_chi - t) < 1e-12 for t in grid_list):
            grid_list = sorted(grid_list + [t_chi])

    if evaluator is None:
        params = config.two_mode_params()

        def evaluator(theta: float) -> SensitivityRecord:
            est = two_mode_sensitivity(
                params,
                loops=2,
                theta=theta,
                d_omega=config.d_omega_value,
                n_traj=max(2000, config.n_traj),
                master_seed=config.master_seed,
                radius=config.radius,
            )
            return SensitivityRecord.from_estimate(config, "pretwist_two_mode", theta, est)

    records = {t: evaluator(t) for t in grid_list}
    values = [records[t].delta_omega for t in grid_list]

    minima = sum(
        1
        for i in range(1, len(values) - 1)
        if values[i] <= values[i - 1] and values[i] <= values[i + 1]
    )
    flags: tuple[str, ...] = ()
    if minima > 1:
        warnings.warn(
            f"Delta-Omega(theta) grid has {minima} local minima; returning the "
            "refined global minimum",
            RuntimeWarning,
        )
        flags = ("multimodal_theta_landscape",)

    i_best = int(np.argmin(values))
    lo = grid_list[max(0, i_best - 1)]
    hi = grid_list[min(len(grid_list) - 1, i_best + 1)]

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = evaluator(x1).delta_omega
    f2 = evaluator(x2).delta_omega
    while hi - lo > tolerance:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = evaluator(x1).delta_omega
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = evaluator(x2).delta_omega

    candidates = dict(records)
    theta_mid = 0.5 * (lo + hi)
    candidates[theta_mid] = evaluator(theta_mid)
    theta_opt = min(candidates, key=lambda t: candidates[t].delta_omega)
    best = candidates[theta_opt]
    best = replace(best, flags=best.flags + flags)
    return theta_opt, best


# ---------------------------------------------------------------------------
# Barrier tuning and the single-component scheme
# ---------------------------------------------------------------------------


def _reflected_fraction(
    v0: float, k: float, w: float, grid: Grid1D, sigma: float, x0: float,
    t_final: float, dt: float
) -> float:
    packet = gaussian_packet(grid, x0, sigma, k)
    spec = EvolutionSpec(dt=dt, potential=GaussianBarrier(v0, w))
    out = evolve(packet, spec, t_final)[0]
    return float(np.sum(density(out)[grid.xi < 0]) * grid.spacing)


def tune_barrier(
    k: float,
    w: float,
    *,
    sigma: float = 1.0,
    box_length: float = 20.0,
    n_points: Optional[int] = None,
    dt: Optional[float] = None,
    band: tuple[float, float] = (0.495, 0.505),
    v0_hint: Optional[float] = None,
) -> float:
    """Bisection on V0 until a noninteracting packet at carrier k reflects
    50% (within `band`) off the width-w barrier.

    Geometry: periodic box, packet launched at -box/5 toward the barrier at
    the center, measured after a there-and-back transit.  The probe is
    quasi-monochromatic (sigma*k >> 1) so the result tracks the plane-wave
    reflection at k; dt resolves the barrier transit time w/k.
    """
    if n_points is None:
        n_points = 1 << max(10, math.ceil(math.log2(3.0 * box_length / w)))
    grid = Grid1D.line(n_points, box_length)
    x0 = -box_length / 5.0
    t_final = 2.0 * abs(x0) / k
    if dt is None:
        dt = 0.1 * w / k

    lo = 0.0
    hi = v0_hint if v0_hint is not None else k / math.sqrt(math.pi)
    r_hi = _reflected_fraction(hi, k, w, grid, sigma, x0, t_final, dt)
    grow = 0
    while r_hi < 0.5:
        hi *= 2.0
        grow += 1
        if grow > 8:
            raise BarrierTuneError("could not bracket the 50% reflection point")
        r_hi = _reflected_fraction(hi, k, w, grid, sigma, x0, t_final, dt)

    for _ in range(60):
        mid = 0.5 * (lo + hi)
        r = _reflected_fraction(mid, k, w, grid, sigma, x0, t_final, dt)
        if band[0] <= r <= band[1]:
            return mid
        if r < 0.5:
            lo = mid
        else:
            hi = mid
    raise BarrierTuneError("bisection failed to reach the target band")


def initial_mean_single(config: RingConfig, launch_offset: float) -> ComplexField:
    """sqrt(N_t)-scaled single-component packet launched next to the barrier.

    For g0 < 0 the sech width matches an N_t/2-atom soliton (the population
    of each traversing half after the splitter).
    """
    grid = config.grid()
    if config.g0 < 0 and _shape_kind(config) == "soliton":
        params = SolitonParams(0.5 * config.n_total, config.g0, config.k0)
        packet = sech_packet(grid, launch_offset, params.width, config.k0)
    elif _shape_kind(config) == "sech":
        packet = sech_packet(grid, launch_offset, config.sigma, config.k0)
    else:
        packet = gaussian_packet(grid, launch_offset, config.sigma, config.k0)
    return ComplexField(grid, math.sqrt(config.n_total) * packet.amplitudes)


def _packet_width(config: RingConfig) -> float:
    if config.g0 < 0 and _shape_kind(config) == "soliton":
        return SolitonParams(0.5 * config.n_total, config.g0, config.k0).width
    return config.sigma


def run_single_component_barrier_loop(config: RingConfig) -> SensitivityRecord:
    """Single-component scheme: barrier beamsplitting on the ring.

    The packet starts a few widths before the barrier, splits on arrival,
    the halves counter-propagate a full circuit and recombine at the
    barrier; left/right populations after a symmetric separation interval
    are the signal.  Requires barrier_v0 (pre-tuned to 50% reflection at k0,
    see tune_barrier); auto-tunes when it is None.

    For a symmetric barrier arg(r) - arg(t) = pi/2 exactly, so the
    recombined port populations go as cos(phi_Omega): the fringe has an
    extremum at Omega = 0 and the finite-difference slope vanishes there by
    symmetry (the sensitivity itself stays ~ Delta-Omega_S because the
    dark-port noise vanishes equally fast).  The estimator therefore
    operates at a small Sagnac bias (barrier_bias_phase, radians), with the
    variance taken at the bias point and the derivative centered on it.
    """
    v0 = config.barrier_v0
    if v0 is None:
        v0 = tune_barrier(config.k0, config.barrier_w)
    barrier = GaussianBarrier(v0, config.barrier_w, center=0.0)

    width = _packet_width(config)
    gap = 4.0 * width
    t_meas = config.loop_time + 2.0 * gap / config.k0
    mean = initial_mean_single(config, -gap)
    d = config.d_omega_value
    omega_bias = config.barrier_bias_phase / (4.0 * math.pi * config.radius**2)

    def run(omega: float) -> tuple[np.ndarray, TrajectoryEnsemble]:
        spec = config.evolution_spec(omega, potential=barrier)
        check_phase_guard(mean.amplitudes[np.newaxis], mean.grid, spec)
        ens = sample_ensemble(mean, config.n_traj, config.master_seed)
        ens = evolve_ensemble(ens, spec, t_meas, workers=config.workers)
        return halves_difference(ens, barrier.center), ens

    nd0, ens0 = run(omega_bias)
    ndp, _ = run(omega_bias + d)
    ndm, _ = run(omega_bias - d)
    est = sensitivity_from_trajectories(nd0, ndp, ndm, d)

    flags: tuple[str, ...] = ()
    grid = mean.grid
    mean_dens = (
        np.mean(ens0.amplitudes.real**2 + ens0.amplitudes.imag**2, axis=0)[0]
        - 0.5 / grid.spacing
    )
    # distinguishable left/right counting needs the density to vanish at
    # both partition boundaries (the barrier and its antipode)
    peak = float(mean_dens.max())
    idx_barrier = int(np.argmin(np.abs(grid.xi - barrier.center)))
    antipode = barrier.center + 0.5 * grid.length
    wrapped = (grid.xi - antipode + 0.5 * grid.length) % grid.length - 0.5 * grid.length
    idx_anti = int(np.argmin(np.abs(wrapped)))
    boundary = max(mean_dens[idx_barrier], mean_dens[idx_anti])
    if peak <= 0.0 or boundary > 0.1 * peak:
        warnings.warn(
            "density at the partition boundaries is "
            f"{boundary / max(peak, 1e-300):.2f} of the peak; wave-packets "
            "not well separated at measurement time",
            RuntimeWarning,
        )
        flags = ("packets_not_separated",)

    return SensitivityRecord.from_estimate(
        config, "single_component_barrier", None, est, extra_flags=flags
    )
