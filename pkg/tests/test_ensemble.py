import math

import numpy as np
import pytest

from solring.ensemble import (
    TrajectoryEnsemble,
    component_numbers,
    evolve_ensemble,
    halves_difference,
    number_difference,
    number_difference_stats,
    sample_ensemble,
)
from solring.errors import InsufficientTrajectoriesError
from solring.grid import ComplexField, Grid1D, TwoComponentField, plane_wave
from solring.propagate import EvolutionSpec
from solring.states import gaussian_packet

T_RING = 2.0 * math.pi / 80.0


def _mean_pair(grid, n_s=100.0, k0=80.0, sigma=0.3):
    root = math.sqrt(n_s)
    p = gaussian_packet(grid, 0.0, sigma, +k0)
    m = gaussian_packet(grid, 0.0, sigma, -k0)
    return TwoComponentField(
        ComplexField(grid, root * p.amplitudes),
        ComplexField(grid, root * m.amplitudes),
    )


def test_sample_ensemble_shapes_and_determinism(ring512):
    mean = _mean_pair(ring512)
    a = sample_ensemble(mean, 5, master_seed=3)
    b = sample_ensemble(mean, 5, master_seed=3)
    assert a.amplitudes.shape == (5, 2, 512)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    c = sample_ensemble(mean, 5, master_seed=4)
    assert not np.array_equal(a.amplitudes, c.amplitudes)


def test_sample_ensemble_prefix_stable(ring512):
    # trajectory i depends only on (master_seed, i): growing the ensemble
    # appends without perturbing earlier trajectories (CRN contract)
    mean = _mean_pair(ring512)
    small = sample_ensemble(mean, 3, master_seed=9)
    big = sample_ensemble(mean, 6, master_seed=9)
    assert np.array_equal(big.amplitudes[:3], small.amplitudes)


def test_seeds_distinct(ring512):
    mean = _mean_pair(ring512)
    ens = sample_ensemble(mean, 8, master_seed=0)
    assert len(set(ens.seeds)) == ens.count


def test_component_numbers_corrected_mean(ring512):
    n_s = 100.0
    mean = _mean_pair(ring512, n_s=n_s)
    ens = sample_ensemble(mean, 3000, master_seed=5)
    nums = component_numbers(ens)
    # vacuum-corrected estimator is unbiased: mean -> N_s per component
    stderr = math.sqrt(n_s + ring512.n_points / 4) / math.sqrt(3000)
    assert abs(nums[:, 0].mean() - n_s) < 4 * stderr
    assert abs(nums[:, 1].mean() - n_s) < 4 * stderr


def test_number_difference_stats_no_evolution(ring512):
    # balanced components, no evolution: mean 0, Var = N_t + M/2
    n_s = 5000.0
    mean = _mean_pair(ring512, n_s=n_s)
    ens = sample_ensemble(mean, 2000, master_seed=1)
    stats = number_difference_stats(ens)
    n_t = 2 * n_s
    expected_var = n_t + ring512.n_points / 2
    assert abs(stats.mean) < 4 * stats.mean_stderr
    assert abs(stats.var - expected_var) < 4 * stats.var_stderr


def test_number_difference_needs_two_components(ring512):
    single = ComplexField(ring512, math.sqrt(9.0) * plane_wave(ring512, 80).amplitudes)
    ens = sample_ensemble(single, 4, master_seed=0)
    with pytest.raises(ValueError):
        number_difference(ens)


def test_degenerate_ensemble_zero_variance(ring512):
    mean = _mean_pair(ring512)
    amps = np.repeat(
        np.stack([mean.plus.amplitudes, mean.minus.amplitudes])[np.newaxis], 4, axis=0
    )
    ens = TrajectoryEnsemble(ring512, amps, 0)
    stats = number_difference_stats(ens)
    assert stats.var < 1e-18


def test_stats_insufficient_count(ring512):
    mean = _mean_pair(ring512)
    ens = sample_ensemble(mean, 1, master_seed=0)
    with pytest.raises(InsufficientTrajectoriesError):
        number_difference_stats(ens)


def test_evolve_ensemble_worker_invariance(ring512):
    mean = _mean_pair(ring512, n_s=50.0)
    ens = sample_ensemble(mean, 130, master_seed=7)  # spans 3 chunks
    spec = EvolutionSpec(dt=T_RING / 400, g0=-2e-3, tw_correction=True)
    out1 = evolve_ensemble(ens, spec, 0.1 * T_RING, workers=1)
    out3 = evolve_ensemble(ens, spec, 0.1 * T_RING, workers=3)
    assert np.array_equal(out1.amplitudes, out3.amplitudes)


def test_evolve_ensemble_matches_single_trajectory(ring512):
    from solring.propagate import evolve

    mean = _mean_pair(ring512, n_s=50.0)
    ens = sample_ensemble(mean, 3, master_seed=2)
    spec = EvolutionSpec(dt=T_RING / 500, g0=-2e-3, tw_correction=True)
    out = evolve_ensemble(ens, spec, 0.2 * T_RING)
    one = evolve(ens.trajectory(1), spec, 0.2 * T_RING, enforce_phase_guard=False)[0]
    assert np.abs(out.amplitudes[1, 0] - one.plus.amplitudes).max() < 1e-12
    assert np.abs(out.amplitudes[1, 1] - one.minus.amplitudes).max() < 1e-12


def test_evolve_ensemble_preserves_particles(ring512):
    mean = _mean_pair(ring512, n_s=50.0)
    ens = sample_ensemble(mean, 10, master_seed=2)
    spec = EvolutionSpec(dt=T_RING / 400, g0=-2e-3, tw_correction=True)
    before = component_numbers(ens).sum(axis=1)
    out = evolve_ensemble(ens, spec, T_RING)
    after = component_numbers(out).sum(axis=1)
    assert np.abs(after - before).max() < 1e-9 * np.abs(before).max()


def test_halves_difference_balanced_vacuum(ring512):
    # vacuum ensemble: corrected half-counts average to zero
    vac = ComplexField(ring512, np.zeros(512, complex))
    ens = sample_ensemble(vac, 3000, master_seed=11)
    nd = halves_difference(ens, 0.0)
    stderr = math.sqrt(ring512.n_points / 2) / math.sqrt(3000)
    assert abs(nd.mean()) < 5 * stderr
