import math

import numpy as np
import pytest

from solring.errors import (
    DegenerateProbabilityError,
    DerivativeError,
    GridMismatchError,
    NormalizationError,
)
from solring.fisher import (
    BarrierScenario,
    PhiDerivativeBundle,
    cfi_density,
    cfi_two_outcome,
    fisher_time_series,
    left_probability,
    qfi_single_particle,
    richardson_ratio,
)
from solring.grid import ComplexField, Grid1D, norm_particles
from solring.propagate import EvolutionSpec, evolve
from solring.states import gaussian_packet, superposition_pair

D_PHI = 1e-3


@pytest.fixture(scope="module")
def packets():
    grid = Grid1D.line(1 << 12, 40.0)
    left = gaussian_packet(grid, -5.0, 0.5, 10.0)
    right = gaussian_packet(grid, +5.0, 0.5, -10.0)
    return grid, left, right


def _superposition_factory(left, right):
    def psi(phi):
        return superposition_pair(left, right, phi)

    return psi


def _bundle(factory, phi, d_phi=D_PHI):
    return PhiDerivativeBundle(
        factory(phi), factory(phi + d_phi), factory(phi - d_phi), d_phi
    )


# ---------------------------------------------------------------------------
# QFI
# ---------------------------------------------------------------------------


def test_qfi_superposition_is_one(packets):
    _, left, right = packets
    bundle = _bundle(_superposition_factory(left, right), 0.7)
    assert abs(qfi_single_particle(bundle) - 1.0) < 1e-6


def test_qfi_global_phase_zero(packets):
    grid, left, _ = packets

    def psi(phi):
        return ComplexField(grid, np.exp(1j * phi) * left.amplitudes)

    assert abs(qfi_single_particle(_bundle(psi, 0.4))) < 1e-8


def test_qfi_invariant_under_free_evolution(packets):
    grid, left, right = packets
    factory = _superposition_factory(left, right)
    bundle = _bundle(factory, 1.1)
    before = qfi_single_particle(bundle)
    spec = EvolutionSpec(dt=5e-4)
    evolved = [
        evolve(f, spec, 0.5)[0]
        for f in (bundle.center, bundle.plus, bundle.minus)
    ]
    after = qfi_single_particle(PhiDerivativeBundle(*evolved, D_PHI))
    assert abs(after - before) < 1e-4


def test_qfi_rejects_unnormalized(packets):
    grid, left, right = packets
    factory = _superposition_factory(left, right)
    bundle = _bundle(factory, 0.3)
    bad = PhiDerivativeBundle(
        ComplexField(grid, 1.2 * bundle.center.amplitudes),
        bundle.plus,
        bundle.minus,
        D_PHI,
    )
    with pytest.raises(NormalizationError):
        qfi_single_particle(bad)


def test_bundle_grid_mismatch(packets):
    grid, left, right = packets
    other = Grid1D.line(1 << 11, 40.0)
    with pytest.raises(GridMismatchError):
        PhiDerivativeBundle(
            left, gaussian_packet(other, -5.0, 0.5, 10.0), right, D_PHI
        )


# ---------------------------------------------------------------------------
# two-outcome CFI
# ---------------------------------------------------------------------------


def test_cfi_sinusoid_is_one():
    # oracle: d/dphi of (1+sin phi)/2 gives cos^2/(1-sin^2) = 1 at any phi
    d = 3e-4
    for phi in (0.0, 0.5, 1.2, -0.8):
        p = lambda x: 0.5 * (1.0 + math.sin(x))
        val = cfi_two_outcome(p(phi + d), p(phi - d), p(phi), d)
        assert abs(val - 1.0) < 1e-6


def test_cfi_constant_probability_zero():
    assert cfi_two_outcome(0.4, 0.4, 0.4, 1e-3) == 0.0


def test_cfi_degenerate_outcome():
    with pytest.raises(DegenerateProbabilityError):
        cfi_two_outcome(1.0, 1.0 - 1e-9, 1.0 - 5e-7, 1e-3)


# ---------------------------------------------------------------------------
# density CFI
# ---------------------------------------------------------------------------


def test_cfi_density_global_phase_zero(packets):
    grid, left, _ = packets

    def psi(phi):
        return ComplexField(grid, np.exp(1j * phi) * left.amplitudes)

    assert cfi_density(_bundle(psi, 0.2)) < 1e-12


def test_cfi_density_dominates_two_outcome(packets):
    # data-processing: the two-outcome coarse-graining can never beat the
    # full density measurement (oracle: direct evaluation on sampled states)
    grid, left, right = packets
    factory = _superposition_factory(left, right)
    spec = EvolutionSpec(dt=5e-4)

    def evolved(phi):
        return evolve(factory(phi), spec, 0.35)[0]

    for phi in (0.9, 2.1):
        bundle = _bundle(evolved, phi)
        p_c = left_probability(bundle.center)
        p_p = left_probability(bundle.plus)
        p_m = left_probability(bundle.minus)
        f_c = cfi_two_outcome(p_p, p_m, p_c, D_PHI)
        f_cx = cfi_density(bundle)
        assert f_cx >= f_c - 1e-9


def test_cfi_density_floor_validation(packets):
    grid, left, right = packets
    bundle = _bundle(_superposition_factory(left, right), 0.1)
    with pytest.raises(ValueError):
        cfi_density(bundle, floor=-1.0)


def test_richardson_ratio_converged(packets):
    _, left, right = packets
    factory = _superposition_factory(left, right)
    full, half, change = richardson_ratio(factory, 0.8, D_PHI)
    assert change < 0.01


# ---------------------------------------------------------------------------
# the barrier scenario plumbing (full Fig.-1 physics runs in acceptance)
# ---------------------------------------------------------------------------


def test_scenario_initial_state_balanced():
    sc = BarrierScenario(v0=5.29, n_points=1 << 12, box_length=24.0)
    psi = sc.initial_state(0.3)
    assert abs(norm_particles(psi) - 1.0) < 1e-10
    assert abs(left_probability(psi) - 0.5) < 1e-6


def test_scenario_collision_time():
    sc = BarrierScenario(v0=5.0)
    assert abs(sc.collision_time - 0.5) < 1e-12


def test_series_csv_roundtrip(tmp_path):
    from solring.fisher import FisherSeries

    ser = FisherSeries(
        times=np.array([0.0, 1.0]),
        f_q=np.array([1.0, 1.0]),
        f_c=np.array([0.5, 0.9]),
        f_c_x=np.array([0.6, 0.95]),
        p_left=np.array([0.5, 0.5]),
        phi=0.1,
        d_phi=1e-3,
    )
    path = tmp_path / "series.csv"
    ser.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,f_q,f_c,f_c_x"
    assert len(lines) == 3
    assert not ser.qcrb_violated.any()
