"""Bright-soliton matterwave interferometry on a ring.

Truncated-Wigner and GPE propagation, Fisher-information diagnostics, the
closed-form two-mode phase-diffusion model with its Fock-basis oracle, and
rotation-sensitivity experiments (single-loop, pre-twisting, barrier
beamsplitting).  Natural units hbar = m = 1 throughout; the ring radius R
enters via the box length 2*pi*R.
"""

from .grid import (
    ComplexField,
    Grid1D,
    TwoComponentField,
    density,
    dump_field,
    load_field,
    norm_particles,
    normalized,
    overlap,
    plane_wave,
    spectral_amplitudes,
)
from .propagate import (
    EvolutionSpec,
    GaussianBarrier,
    evolve,
    free_mode_phase,
    step,
)
from .states import (
    SolitonParams,
    gaussian_packet,
    sample_wigner_coherent,
    sample_wigner_pair,
    sech_packet,
    sech_soliton,
    superposition_pair,
    trajectory_rng,
)

__version__ = "0.1.0"
