"""Truncated-Wigner trajectory ensembles: sampling, batched evolution, stats.

Trajectories are independent; their initial noise comes from per-trajectory
streams that are a pure function of (master_seed, index), so ensembles for
different rotation rates reuse identical realizations (common random
numbers) by construction.  Evolution runs over fixed-size trajectory chunks
(CHUNK, independent of the worker count) and every reduction uses the
index-ordered compensated summation from :mod:`solring.stats`, which makes
results bit-identical for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import ComplexField, Grid1D, TwoComponentField
from .propagate import EvolutionSpec, evolve_array
from .stats import EnsembleStats, ensemble_stats
from .states import trajectory_rng

CHUNK = 64


@dataclass
class TrajectoryEnsemble:
    """A batch of TW trajectories sharing one grid and evolution spec.

    amplitudes has shape (count, n_components, n_points); component 0 is
    |+> (or the only component), component 1 is |->.
    """

    grid: Grid1D
    amplitudes: np.ndarray = field(repr=False)
    master_seed: int = 0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 3 or amps.shape[2] != self.grid.n_points:
            raise ValueError("amplitudes must be (count, components, n_points)")
        self.amplitudes = amps

    @property
    def count(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_components(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def seeds(self) -> tuple[int, ...]:
        """Per-trajectory spawn keys (pure function of master_seed, index)."""
        return tuple(range(self.count))

    def trajectory(self, i: int):
        if self.n_components == 2:
            return TwoComponentField(
                ComplexField(self.grid, self.amplitudes[i, 0].copy()),
                ComplexField(self.grid, self.amplitudes[i, 1].copy()),
            )
        return ComplexField(self.grid, self.amplitudes[i, 0].copy())

    def copy(self) -> "TrajectoryEnsemble":
        return TrajectoryEnsemble(self.grid, self.amplitudes.copy(), self.master_seed)


def sample_ensemble(
    mean, n_traj: int, master_seed: int
) -> TrajectoryEnsemble:
    """Wigner-sample n_traj trajectories around a mean field.

    mean is a ComplexField (single component) or TwoComponentField; the mean
    must already carry its sqrt(N_s) scaling.  Per trajectory and component
    the noise is complex Gaussian with E[eta* eta] = 1/(2 dx) per point.
    """
    if isinstance(mean, TwoComponentField):
        grid = mean.grid
        mean_rows = np.stack([mean.plus.amplitudes, mean.minus.amplitudes])
    else:
        grid = mean.grid
        mean_rows = mean.amplitudes[np.newaxis, :]
    n_comp = mean_rows.shape[0]
    n = grid.n_points
    scale = 0.5 / np.sqrt(grid.spacing)

    amps = np.empty((n_traj, n_comp, n), dtype=np.complex128)
    for i in range(n_traj):
        rng = trajectory_rng(master_seed, i)
        xy = rng.standard_normal((n_comp, 2, n))
        amps[i] = mean_rows + scale * (xy[:, 0] + 1j * xy[:, 1])
    return TrajectoryEnsemble(grid, amps, master_seed)


def evolve_ensemble(
    ens: TrajectoryEnsemble,
    spec: EvolutionSpec,
    duration: float,
    *,
    workers: int = 1,
    force_strang: bool = False,
) -> TrajectoryEnsemble:
    """Evolve every trajectory for `duration`; returns a new ensemble.

    The caller is responsible for the kinetic-phase guard (checked once on
    the deterministic mean field, not per trajectory: vacuum-noise modes
    carry exact wrapped phases).
    """
    out = ens.copy()
    flat = out.amplitudes.reshape(ens.count * ens.n_components, ens.grid.n_points)
    spans = [
        (i, min(i + CHUNK, ens.count)) for i in range(0, ens.count, CHUNK)
    ]

    def work(span):
        lo, hi = span
        block = flat[lo * ens.n_components : hi * ens.n_components]
        evolve_array(
            block, ens.grid, spec, duration, force_strang=force_strang, workers=1
        )

    if workers <= 1 or len(spans) == 1:
        for span in spans:
            work(span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, spans))
    return out


def component_numbers(ens: TrajectoryEnsemble) -> np.ndarray:
    """Symmetric-ordering-corrected atom numbers, shape (count, n_components).

    Per trajectory and component: sum |psi|^2 dx - M/2, removing the M
    half-quanta of Wigner vacuum occupation (M = modes per component).
    """
    dens = ens.amplitudes.real**2 + ens.amplitudes.imag**2
    raw = dens.sum(axis=2) * ens.grid.spacing
    return raw - 0.5 * ens.grid.n_points


def number_difference(ens: TrajectoryEnsemble) -> np.ndarray:
    """Per-trajectory N_d = n_+ - n_- (vacuum offsets cancel)."""
    if ens.n_components != 2:
        raise ValueError("number_difference needs a two-component ensemble")
    n = component_numbers(ens)
    return n[:, 0] - n[:, 1]


def number_difference_stats(ens: TrajectoryEnsemble) -> EnsembleStats:
    """Ensemble mean and unbiased variance of N_d, with standard errors."""
    return ensemble_stats(number_difference(ens))


def halves_difference(
    ens: TrajectoryEnsemble, partition_center: float
) -> np.ndarray:
    """Per-trajectory n_right - n_left about a partition plane (1 component).

    Counts use the vacuum-corrected estimator restricted to each half
    (M/4 per half for the M/2 points on each side).
    """
    if ens.n_components != 1:
        raise ValueError("halves_difference expects a single-component ensemble")
    grid = ens.grid
    d = grid.xi - partition_center
    d = (d + 0.5 * grid.length) % grid.length - 0.5 * grid.length
    right = d >= 0.0
    dens = ens.amplitudes.real**2 + ens.amplitudes.imag**2
    n_right = dens[:, 0, right].sum(axis=1) * grid.spacing - 0.25 * grid.n_points
    n_left = dens[:, 0, ~right].sum(axis=1) * grid.spacing - 0.25 * grid.n_points
    return n_right - n_left
