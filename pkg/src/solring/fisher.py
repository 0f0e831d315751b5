"""Fisher-information estimators over phi-parametrized wavefunctions.

All derivatives in the phase parameter phi are controlled central
differences over a (psi(phi-d), psi(phi), psi(phi+d)) bundle:

  F_Q   = 4 [ <d_phi psi | d_phi psi> - |<psi | d_phi psi>|^2 ]
  F_C   = (d_phi P_L)^2 / P_L + (d_phi P_R)^2 / P_R          (two outcomes)
  F_C^x = integral (d_phi |psi|^2)^2 / |psi|^2 dx             (full density)

For exact quantum evolution F_C <= F_C^x <= F_Q and F_Q is constant in
time; under attractive GPE dynamics both properties fail, which is exactly
the diagnostic here - violations are flagged, never "fixed".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateProbabilityError,
    DerivativeError,
    GridMismatchError,
    NormalizationError,
)
from .grid import ComplexField, Grid1D, density, norm_particles, overlap
from .propagate import EvolutionSpec, GaussianBarrier, evolve_array
from .states import gaussian_packet, sech_packet, superposition_pair


@dataclass(frozen=True)
class PhiDerivativeBundle:
    """psi at phi and phi +- d_phi, for second-order central differences."""

    center: ComplexField
    plus: ComplexField
    minus: ComplexField
    d_phi: float

    def __post_init__(self):
        if self.d_phi <= 0:
            raise ValueError("d_phi must be positive")
        if not (self.center.grid == self.plus.grid == self.minus.grid):
            raise GridMismatchError("bundle members must share a grid")

    def derivative(self) -> np.ndarray:
        return (self.plus.amplitudes - self.minus.amplitudes) / (2.0 * self.d_phi)


def qfi_single_particle(bundle: PhiDerivativeBundle) -> float:
    """Single-particle QFI; the N-particle value is N times this."""
    dx = bundle.center.grid.spacing
    for f in (bundle.center, bundle.plus, bundle.minus):
        n = norm_particles(f)
        if abs(n - 1.0) > 1e-6:
            raise NormalizationError(f"bundle member norm {n:.8f} differs from 1")
    dpsi = bundle.derivative()
    term1 = float(np.sum(dpsi.real**2 + dpsi.imag**2) * dx)
    term2 = complex(np.vdot(bundle.center.amplitudes, dpsi) * dx)
    fq = 4.0 * (term1 - abs(term2) ** 2)
    if fq < -1e-8:
        raise DerivativeError(f"QFI estimate {fq:.3e} negative beyond tolerance")
    return fq


def cfi_two_outcome(
    p_left_plus: float, p_left_minus: float, p_left: float, d_phi: float
) -> float:
    """Two-outcome CFI from P_L at phi and phi +- d_phi (P_R = 1 - P_L)."""
    if not 1e-6 < p_left < 1.0 - 1e-6:
        raise DegenerateProbabilityError(
            f"P_L = {p_left:.3e} too close to 0 or 1 for a stable CFI"
        )
    dp = (p_left_plus - p_left_minus) / (2.0 * d_phi)
    return dp * dp / (p_left * (1.0 - p_left))


def cfi_density(bundle: PhiDerivativeBundle, floor: Optional[float] = None) -> float:
    """Density-resolving CFI, integrating only where |psi|^2 > floor.

    floor defaults to 1e-12 of the peak density (the integrand is singular
    where the density vanishes).
    """
    rho = density(bundle.center)
    if floor is None:
        floor = 1e-12 * float(rho.max())
    if floor <= 0:
        raise ValueError("floor must be positive")
    drho = (density(bundle.plus) - density(bundle.minus)) / (2.0 * bundle.d_phi)
    mask = rho > floor
    dx = bundle.center.grid.spacing
    return float(np.sum(drho[mask] ** 2 / rho[mask]) * dx)


def richardson_ratio(
    psi_of_phi: Callable[[float], ComplexField],
    phi: float,
    d_phi: float,
    estimator: Callable[[PhiDerivativeBundle], float] = qfi_single_particle,
) -> tuple[float, float, float]:
    """Estimator at step d_phi and d_phi/2, plus their relative change.

    A converged central difference changes by O(d_phi^2) under halving; the
    bundle invariant requires the relative change to be small.
    """
    center = psi_of_phi(phi)

    def run(d):
        return estimator(
            PhiDerivativeBundle(center, psi_of_phi(phi + d), psi_of_phi(phi - d), d)
        )

    full = run(d_phi)
    half = run(0.5 * d_phi)
    denom = max(abs(half), 1e-300)
    return full, half, abs(full - half) / denom


# ---------------------------------------------------------------------------
# Barrier-collision scenario (two packets interfering on a narrow barrier)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierScenario:
    """Two counter-propagating packets colliding on a narrow barrier.

    The initial state is (Psi_L e^{ikx} + e^{i phi} Psi_R e^{-ikx})/sqrt(2)
    with packets at -+x0.  kind 'gaussian' (width sigma) or 'soliton'
    (sech of width soliton_width); g0n is the mean-field nonlinear strength
    g0*N acting on the unit-normalized wavefunction (0 for case 1, < 0 for
    case 2).
    """

    v0: float
    w: float = 1e-2
    x0: float = 5.0
    sigma: float = 0.5
    k: float = 10.0
    g0n: float = 0.0
    kind: str = "gaussian"
    soliton_width: float = 0.5
    box_length: float = 40.0
    n_points: int = 1 << 14
    dt: float = 2e-4

    def grid(self) -> Grid1D:
        return Grid1D.line(self.n_points, self.box_length)

    def packets(self) -> tuple[ComplexField, ComplexField]:
        grid = self.grid()
        if self.kind == "gaussian":
            left = gaussian_packet(grid, -self.x0, self.sigma, +self.k)
            right = gaussian_packet(grid, +self.x0, self.sigma, -self.k)
        elif self.kind == "soliton":
            left = sech_packet(grid, -self.x0, self.soliton_width, +self.k)
            right = sech_packet(grid, +self.x0, self.soliton_width, -self.k)
        else:
            raise ValueError(f"unknown packet kind {self.kind!r}")
        return left, right

    def initial_state(self, phi: float) -> ComplexField:
        left, right = self.packets()
        return superposition_pair(left, right, phi)

    def evolution_spec(self) -> EvolutionSpec:
        return EvolutionSpec(
            dt=self.dt,
            g0=self.g0n,
            n_atoms=1.0,
            potential=GaussianBarrier(self.v0, self.w),
        )

    @property
    def collision_time(self) -> float:
        return self.x0 / self.k


def left_probability(field: ComplexField, center: float = 0.0) -> float:
    """P_L = integral over x < center of |psi|^2."""
    rho = density(field)
    mask = field.grid.xi < center
    return float(np.sum(rho[mask]) * field.grid.spacing)


@dataclass(frozen=True)
class FisherSeries:
    """Time series of the three Fisher estimators at one operating phi."""

    times: np.ndarray
    f_q: np.ndarray
    f_c: np.ndarray
    f_c_x: np.ndarray
    p_left: np.ndarray
    phi: float
    d_phi: float

    @property
    def qcrb_violated(self) -> np.ndarray:
        """Informational flag per sample: F_C exceeds the true QFI.

        The physical QFI is conserved by exact dynamics, so the t = 0 value
        is the bound; under GPE dynamics F_Q(t) itself drifts (that drift is
        the other half of the diagnostic).
        """
        return self.f_c > self.f_q[0]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,f_q,f_c,f_c_x\n")
            for row in zip(self.times, self.f_q, self.f_c, self.f_c_x):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _evolve_batch(
    scenario: BarrierScenario, fields: Sequence[ComplexField], times: Sequence[float]
) -> list[np.ndarray]:
    """Evolve several fields jointly; returns stacked amplitudes per time."""
    grid = scenario.grid()
    rows = np.stack([f.amplitudes for f in fields])
    spec = scenario.evolution_spec()
    out = []
    t_now = 0.0
    for t in times:
        evolve_array(rows, grid, spec, t - t_now)
        t_now = t
        out.append(rows.copy())
    return out


def fisher_time_series(
    scenario: BarrierScenario,
    phi: float,
    t_final: float,
    n_samples: int = 40,
    d_phi: float = 1e-3,
) -> FisherSeries:
    """Evolve the (phi, phi+-d_phi) bundle and record F_Q, F_C, F_C^x(t)."""
    grid = scenario.grid()
    times = np.linspace(0.0, t_final, n_samples + 1)
    fields = [
        scenario.initial_state(phi),
        scenario.initial_state(phi + d_phi),
        scenario.initial_state(phi - d_phi),
    ]
    snapshots = _evolve_batch(scenario, fields, times)

    f_q, f_c, f_cx, p_l = [], [], [], []
    for rows in snapshots:
        bundle = PhiDerivativeBundle(
            ComplexField(grid, rows[0]),
            ComplexField(grid, rows[1]),
            ComplexField(grid, rows[2]),
            d_phi,
        )
        f_q.append(qfi_single_particle(bundle))
        f_cx.append(cfi_density(bundle))
        pl_c = left_probability(bundle.center)
        pl_p = left_probability(bundle.plus)
        pl_m = left_probability(bundle.minus)
        p_l.append(pl_c)
        if 1e-6 < pl_c < 1.0 - 1e-6:
            f_c.append(cfi_two_outcome(pl_p, pl_m, pl_c, d_phi))
        else:
            f_c.append(0.0)
    return FisherSeries(
        times=times,
        f_q=np.asarray(f_q),
        f_c=np.asarray(f_c),
        f_c_x=np.asarray(f_cx),
        p_left=np.asarray(p_l),
        phi=phi,
        d_phi=d_phi,
    )


def find_balanced_phase(
    scenario: BarrierScenario,
    t_final: float,
    n_scan: int = 24,
    tolerance: float = 0.02,
) -> float:
    """Operating phase phi* at the steepest P_L(phi*, t_final) = 1/2 crossing.

    The nonlinear fringe generally has several 1/2-crossings with very
    different slopes; the optimum point is the steep one.  The phi grid is
    evolved in one batch; the best bracket is then bisected until
    |P_L - 1/2| < tolerance.  For g0n = 0 the evolution is linear in the
    initial packets, so P_L(phi) is evaluated exactly from two evolutions.
    """
    grid = scenario.grid()

    if scenario.g0n == 0.0:
        left, right = scenario.packets()
        half = 1.0 / math.sqrt(2.0)
        rows = _evolve_batch(
            scenario,
            [
                ComplexField(grid, half * left.amplitudes),
                ComplexField(grid, half * right.amplitudes),
            ],
            [t_final],
        )[0]
        mask = grid.xi < 0.0
        dx = grid.spacing
        a = float(np.sum(np.abs(rows[0][mask]) ** 2) * dx)
        b = float(np.sum(np.abs(rows[1][mask]) ** 2) * dx)
        cross = complex(np.sum(np.conj(rows[0][mask]) * rows[1][mask]) * dx)
        # P_L(phi) = a + b + 2 Re(e^{i phi} cross): steepest 1/2-crossing
        amp = abs(cross)
        if amp < 1e-12 or abs(a + b - 0.5) > 2.0 * amp:
            raise DegenerateProbabilityError("P_L(phi) never crosses 1/2")
        # crossing where cos(phi + arg) = (0.5 - a - b)/(2 amp); slope
        # magnitude maximal at the root with |sin| largest
        target = (0.5 - a - b) / (2.0 * amp)
        base = math.acos(max(-1.0, min(1.0, target)))
        cands = [(-np.angle(cross) + s * base) % (2.0 * math.pi) for s in (+1, -1)]
        return float(cands[0])

    phis = np.linspace(0.0, 2.0 * math.pi, n_scan, endpoint=False)
    fields = [scenario.initial_state(p) for p in phis]
    rows = _evolve_batch(scenario, fields, [t_final])[0]
    p_l = np.array([left_probability(ComplexField(grid, r)) for r in rows])
    resid = p_l - 0.5

    brackets = []
    for i in range(n_scan):
        j = (i + 1) % n_scan
        if resid[i] == 0.0:
            brackets.append((phis[i], phis[i], 0.0, abs(resid[j] - resid[i])))
        elif resid[i] * resid[j] < 0.0:
            span = 2.0 * math.pi / n_scan
            brackets.append((phis[i], phis[i] + span, resid[i], abs(resid[j] - resid[i])))
    if not brackets:
        raise DegenerateProbabilityError("P_L(phi) never crosses 1/2")

    lo, hi, r_lo, _ = max(brackets, key=lambda b: b[3])
    if lo == hi:
        return float(lo % (2.0 * math.pi))

    def eval_pl(phi: float) -> float:
        out = _evolve_batch(scenario, [scenario.initial_state(phi)], [t_final])[0]
        return left_probability(ComplexField(grid, out[0]))

    for _ in range(12):
        mid = 0.5 * (lo + hi)
        p_mid = eval_pl(mid)
        if abs(p_mid - 0.5) <= tolerance:
            return float(mid % (2.0 * math.pi))
        if (p_mid - 0.5) * r_lo < 0.0:
            hi = mid
        else:
            lo, r_lo = mid, p_mid - 0.5
    raise DegenerateProbabilityError(
        f"bisection stalled; last P_L = {p_mid:.4f} outside 1/2 +- {tolerance}"
    )
