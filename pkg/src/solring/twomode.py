"""Closed-form two-mode phase-diffusion model and its brute-force oracles.

Number fluctuations of the two counter-propagating modes turn the attractive
interaction into one-axis-twisting phase diffusion: after one loop the state
carries phases exp(-i Phi(n1,n2)) on the coherent double-Poisson amplitudes,
Phi = (chi*T/2)[n1(n1-1) + n2(n2-1)], with chi = -g0^2 m N_s / (4 hbar^3).

Provided here:
  - closed forms: Var(Jy), <Jx>, the two-mode Delta-Omega, the pre-twist
    angle theta_chi = -acos(-gamma), and the coherent-state moment table;
  - an exact Fock-basis oracle (FockState2) with twisting, e^{i theta Jx}
    rotation (block-diagonal in total number) and moment evaluation;
  - a two-mode truncated-Wigner sampler: quasi-probability clouds and
    finite-difference rotation sensitivity;
  - the exact noninteracting mode map (splitter / free phases / splitter).

Rotation convention: "rotate(theta)" is the rotation about Jx whose
Heisenberg action is Jz -> Jz cos(theta) + Jy sin(theta) (the map used to
derive theta_chi).  With Jy = (i/2)(a b^dag - a^dag b) this is the matrix
exponential e^{-i theta Jx} on kets, and mode amplitudes transform by
exp(-i theta sigma_x / 2): a -> a cos(theta/2) - i b sin(theta/2).  The
printed field beamsplitter with mixing angle theta_f realizes exactly
rotate(2 theta_f), so theta_field = theta_spin / 2; the final 50/50
splitter is rotate(+pi/2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import FockCutoffError, InsufficientTrajectoriesError, UndefinedAngleError
from .stats import SensitivityEstimate, sensitivity_from_trajectories


@dataclass(frozen=True)
class TwoModeParams:
    """Total atom number N_t and dimensionless twisting parameter chi*T."""

    n_total: float
    chi_t: float

    def __post_init__(self):
        if self.n_total <= 0:
            raise ValueError("n_total must be positive")

    @property
    def alpha(self) -> float:
        """Coherent amplitude per mode, alpha^2 = N_t/2."""
        return math.sqrt(0.5 * self.n_total)


def chi_from_g0(g0: float, n_atoms: float) -> float:
    """Twisting rate chi = -g0^2 N_s / 4 (hbar = m = 1), i.e. d^2E/dN^2."""
    return -(g0**2) * n_atoms / 4.0


def soliton_energy(
    n: float, k0: float, omega: float, g0: float, sign: int = +1, radius: float = 1.0
) -> float:
    """Bright-soliton energy E_N = (k0^2/2 - sign*Omega*k0*R) N - g0^2 N^3/24.

    sign selects the carrier direction.  The mode-independent offset
    E_0 = k0^2/2 + g0^2 N^2/8 (see e0_common) is a common phase and is kept
    out of all dynamics.
    """
    return (0.5 * k0**2 - sign * omega * k0 * radius) * n - g0**2 * n**3 / 24.0


def e0_common(k0: float, g0: float, n_atoms: float) -> float:
    """Mode-independent energy offset (inconsequential common phase)."""
    return 0.5 * k0**2 + g0**2 * n_atoms**2 / 8.0


def var_jy_analytic(params: TwoModeParams) -> float:
    """Var(Jy) = N_t/4 + (N_t^2/8)(1 - exp[-2 N_t sin^2(chi T)])."""
    n = params.n_total
    s = math.sin(params.chi_t) ** 2
    return n / 4.0 + n**2 / 8.0 * (1.0 - math.exp(-2.0 * n * s))


def mean_jx_analytic(params: TwoModeParams) -> float:
    """<Jx> = (N_t/2) exp[N_t (cos(chi T) - 1)]."""
    n = params.n_total
    return 0.5 * n * math.exp(n * (math.cos(params.chi_t) - 1.0))


def benchmark_sensitivity(n_total: float, radius: float = 1.0) -> float:
    """Shot-noise benchmark Delta-Omega_S = 1/(4 pi R^2 sqrt(N_t))."""
    return 1.0 / (4.0 * math.pi * radius**2 * math.sqrt(n_total))


def delta_omega_two_mode(params: TwoModeParams, radius: float = 1.0) -> float:
    """Closed-form sensitivity (1/(4 pi R^2)) sqrt(Var(Jy)) / <Jx>.

    Evaluated in log space; when the contrast <Jx> collapses the result is
    +inf with a warning flag rather than an overflow.
    """
    n = params.n_total
    log_jx = math.log(0.5 * n) + n * (math.cos(params.chi_t) - 1.0)
    log_dw = (
        0.5 * math.log(var_jy_analytic(params))
        - log_jx
        - math.log(4.0 * math.pi * radius**2)
    )
    if log_dw > 700.0:
        warnings.warn("contrast <Jx> collapsed; Delta-Omega diverges", RuntimeWarning)
        return math.inf
    return math.exp(log_dw)


def gamma_factor(params: TwoModeParams) -> float:
    """gamma in [0, 1), with s = sin^2(chi T):

    gamma = (e^{2sN}-1) / sqrt((e^{2sN}-1)^2 + 16 s e^{2N(cos chiT - cos 2chiT)}).
    """
    n = params.n_total
    s = math.sin(params.chi_t) ** 2
    a = math.expm1(2.0 * s * n)
    b = 16.0 * s * math.exp(
        2.0 * n * (math.cos(params.chi_t) - math.cos(2.0 * params.chi_t))
    )
    if a == 0.0:
        return 0.0
    return a / math.sqrt(a**2 + b)


def theta_chi(params: TwoModeParams) -> float:
    """Pre-twist rotation angle -acos(-gamma), in (-pi, -pi/2].

    Rotating the post-twist state by theta_chi about Jx returns Var(Jz) to
    N_t/4 (for chi_t < 0), so a second twisting period approximately revives
    the initial state.  Undefined at chi_t = 0.
    """
    if params.chi_t == 0.0:
        raise UndefinedAngleError("theta_chi is undefined at chi_t = 0")
    return -math.acos(-gamma_factor(params))


def theta_roots(params: TwoModeParams) -> tuple[float, float, float, float]:
    """The four roots (+acos(g), +acos(-g), -acos(g), -acos(-g)).

    They solve the squared restoration condition; the pair with
    tan(theta) = {Jz,Jy}/(Jz^2 - Jy^2) restores Var(Jz) for the given sign
    of chi_t ({acos(g), -acos(-g)} when chi_t < 0, the other two otherwise).
    """
    g = gamma_factor(params)
    return (math.acos(g), math.acos(-g), -math.acos(g), -math.acos(-g))


# ---------------------------------------------------------------------------
# Spin moments: closed-form table and assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinMoments:
    """Pseudo-spin moment set used by the pre-twist analysis."""

    jx_mean: float
    jz2: float
    jy2: float
    jzjy_sym: float
    jz_var: float
    jy_var: float
    jz_mean: float = 0.0
    jy_mean: float = 0.0


@dataclass(frozen=True)
class CoherentMoments:
    """The five appendix moments of the twisted two-mode coherent state.

    number      = <a^dag a>           = N_t/2
    pair        = <a^dag a^dag a a>   = N_t^2/4
    cross_pair  = <a^dag a^dag b b>   = (N_t^2/4) e^{N_t(cos 2chiT - 1)}
    three_one   = <a^dag a^dag a b>   = (N_t^2/4) e^{i chiT} e^{N_t(cos chiT - 1)}
    three_one_c = <a^dag a a b^dag>   = conj(three_one)
    jx_mean     = Re <a^dag b>        = (N_t/2) e^{N_t(cos chiT - 1)}
    """

    number: float
    pair: float
    cross_pair: complex
    three_one: complex
    three_one_conj: complex
    jx_mean: float

    def spin_moments(self) -> SpinMoments:
        """Assemble Jz^2, Jy^2 and {Jz,Jy} per the operator expansions.

        Uses <n_a n_b> = <n_a><n_b> (exact for the product state; number
        moments are untouched by twisting).
        """
        n = self.number
        nanb = n * n
        jz2 = 0.25 * (2.0 * self.pair + 2.0 * n - 2.0 * nanb)
        jy2 = 0.25 * (2.0 * nanb + 2.0 * n - 2.0 * self.cross_pair.real)
        jzjy = (1j * (self.three_one_conj - self.three_one)).real
        return SpinMoments(
            jx_mean=self.jx_mean,
            jz2=jz2,
            jy2=jy2,
            jzjy_sym=jzjy,
            jz_var=jz2,
            jy_var=jy2,
        )


def coherent_moments(params: TwoModeParams) -> CoherentMoments:
    """Closed-form appendix moment table."""
    n = params.n_total
    ct = params.chi_t
    e1 = math.exp(n * (math.cos(ct) - 1.0))
    e2 = math.exp(n * (math.cos(2.0 * ct) - 1.0))
    q = 0.25 * n**2
    return CoherentMoments(
        number=0.5 * n,
        pair=q,
        cross_pair=q * e2,
        three_one=q * complex(math.cos(ct), math.sin(ct)) * e1,
        three_one_conj=q * complex(math.cos(ct), -math.sin(ct)) * e1,
        jx_mean=0.5 * n * e1,
    )


def rotated_jz2(moments: SpinMoments, theta: float) -> float:
    """<Jz^2> after e^{i theta Jx}: c^2 Jz2 + s^2 Jy2 + c s {Jz,Jy}."""
    c, s = math.cos(theta), math.sin(theta)
    return c * c * moments.jz2 + s * s * moments.jy2 + c * s * moments.jzjy_sym


# ---------------------------------------------------------------------------
# Fock-basis oracle
# ---------------------------------------------------------------------------


def default_cutoff(alpha_sq: float) -> int:
    """ceil(alpha^2 + 12 sqrt(alpha^2)) + 10: audited Poisson tail < 1e-10.

    The +10 pad keeps the last-5-row tail below 1e-10 for small alpha too,
    where the relative Poisson tail decays only factorially.
    """
    return max(24, math.ceil(alpha_sq + 12.0 * math.sqrt(alpha_sq)) + 10)


def _log_factorial(n_max: int) -> np.ndarray:
    out = np.zeros(n_max + 1)
    if n_max >= 1:
        out[1:] = np.cumsum(np.log(np.arange(1, n_max + 1)))
    return out


def _twisted_coherent_coeffs(alpha: float, chi_t: float, cutoff: int) -> np.ndarray:
    """c_n = e^{-a^2/2} a^n / sqrt(n!) * e^{-i chi_t n(n-1)/2}."""
    n = np.arange(cutoff + 1)
    log_mag = -0.5 * alpha**2 + n * math.log(alpha) - 0.5 * _log_factorial(cutoff)
    phase = -0.5 * chi_t * n * (n - 1.0)
    return np.exp(log_mag) * np.exp(1j * phase)


def _ladder_moment(c: np.ndarray, p: int, r: int) -> complex:
    """<a^dag^p a^r> for a single-mode state with coefficients c_n."""
    n_max = c.size - 1
    terms = []
    for n in range(r, n_max + 1):
        m = n - r + p
        if m > n_max:
            continue
        w = 1.0
        for j in range(r):
            w *= n - j
        for j in range(p):
            w *= n - r + 1 + j
        terms.append(np.conj(c[m]) * c[n] * math.sqrt(w))
    return complex(math.fsum(t.real for t in terms)) + 1j * math.fsum(
        t.imag for t in terms
    )


class FockState2:
    """Two-mode state on the truncated grid |n1, n2>, n_i <= cutoff."""

    def __init__(self, cutoff: int, amplitudes: np.ndarray):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (cutoff + 1, cutoff + 1):
            raise ValueError("amplitudes must have shape (cutoff+1, cutoff+1)")
        self.cutoff = cutoff
        self.amplitudes = amplitudes
        self._audit()

    def _audit(self):
        norm = self.norm()
        if abs(norm - 1.0) > 1e-8:
            raise FockCutoffError(f"state norm {norm:.12f} differs from 1")
        band = min(5, self.cutoff)
        edge = self.cutoff + 1 - band
        tail = float(
            np.sum(np.abs(self.amplitudes[edge:, :]) ** 2)
            + np.sum(np.abs(self.amplitudes[:edge, edge:]) ** 2)
        )
        if tail > 1e-10:
            raise FockCutoffError(
                f"truncation tail {tail:.3e} above 1e-10; raise the cutoff"
            )

    @classmethod
    def twisted_coherent(
        cls, params: TwoModeParams, cutoff: Optional[int] = None
    ) -> "FockState2":
        """|Psi(T)>: double-Poisson amplitudes with phases e^{-i Phi(n1,n2)}.

        The default cutoff covers the *total*-number Poisson tail
        (N_t + 12 sqrt(N_t) + 10), because Jx rotations mix amplitudes
        within blocks of fixed n1+n2 and a block is exact only when the
        grid holds its whole index range.
        """
        alpha = params.alpha
        if cutoff is None:
            cutoff = max(
                default_cutoff(alpha**2),
                math.ceil(params.n_total + 12.0 * math.sqrt(params.n_total)) + 10,
            )
        if cutoff < alpha**2 + 10.0 * math.sqrt(alpha**2):
            raise FockCutoffError(
                "cutoff below alpha^2 + 10 sqrt(alpha^2): Poisson tail not negligible"
            )
        c = _twisted_coherent_coeffs(alpha, params.chi_t, cutoff)
        return cls(cutoff, np.outer(c, c))

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    # ladder actions on the joint grid (corner clipping touches only the
    # audited < 1e-10 tail)

    def _apply_ab_dag(self) -> np.ndarray:
        """(a b^dag)|psi>: amplitude sqrt(n1 (n2+1)) onto |n1-1, n2+1>."""
        c = self.amplitudes
        out = np.zeros_like(c)
        n1 = np.arange(1, self.cutoff + 1)[:, None]
        n2 = np.arange(0, self.cutoff)[None, :]
        out[:-1, 1:] = np.sqrt(n1 * (n2 + 1.0)) * c[1:, :-1]
        return out

    def _apply_adag_b(self) -> np.ndarray:
        """(a^dag b)|psi>: amplitude sqrt((n1+1) n2) onto |n1+1, n2-1>."""
        c = self.amplitudes
        out = np.zeros_like(c)
        n1 = np.arange(0, self.cutoff)[:, None]
        n2 = np.arange(1, self.cutoff + 1)[None, :]
        out[1:, :-1] = np.sqrt((n1 + 1.0) * n2) * c[:-1, 1:]
        return out

    def spin_moments(self) -> SpinMoments:
        """Exact spin moments of the truncated state."""
        c = self.amplitudes
        ab_dag = self._apply_ab_dag()
        adag_b = self._apply_adag_b()
        jx_psi = 0.5 * (ab_dag + adag_b)
        jy_psi = 0.5j * (ab_dag - adag_b)
        n1 = np.arange(self.cutoff + 1)[:, None]
        n2 = np.arange(self.cutoff + 1)[None, :]
        jz_psi = 0.5 * (n1 - n2) * c

        def inner(u, v):
            return complex(np.sum(np.conj(u) * v))

        jx_mean = inner(c, jx_psi).real
        jy_mean = inner(c, jy_psi).real
        jz_mean = inner(c, jz_psi).real
        jz2 = inner(jz_psi, jz_psi).real
        jy2 = inner(jy_psi, jy_psi).real
        jzjy = 2.0 * inner(jz_psi, jy_psi).real
        return SpinMoments(
            jx_mean=jx_mean,
            jz2=jz2,
            jy2=jy2,
            jzjy_sym=jzjy,
            jz_var=jz2 - jz_mean**2,
            jy_var=jy2 - jy_mean**2,
            jz_mean=jz_mean,
            jy_mean=jy_mean,
        )

    def number_difference_variance(self) -> float:
        """Var(N_d) = 4 Var(Jz) of the truncated state."""
        m = self.spin_moments()
        return 4.0 * m.jz_var

    def twisted(self, chi_t: float) -> "FockState2":
        """Apply U_chi: phases e^{-i chi_t [n(n-1)]/2} per mode."""
        n = np.arange(self.cutoff + 1)
        ph = np.exp(-0.5j * chi_t * n * (n - 1.0))
        return FockState2(self.cutoff, self.amplitudes * np.outer(ph, ph))

    def rotated_jx(self, theta: float) -> "FockState2":
        """Rotate by theta about Jx, block-diagonal in total number N = n1+n2.

        Convention: the Heisenberg map is Jz -> Jz cos(theta) + Jy sin(theta)
        (matrix exponential e^{-i theta Jx} on kets), matching the map used
        to derive theta_chi.
        """
        cut = self.cutoff
        out = np.zeros_like(self.amplitudes)
        for n_tot in range(0, 2 * cut + 1):
            lo = max(0, n_tot - cut)
            hi = min(n_tot, cut)
            idx = np.arange(lo, hi + 1)
            block = self.amplitudes[idx, n_tot - idx]
            if block.size == 1:
                out[idx, n_tot - idx] = block
                continue
            n1 = idx[:-1].astype(float)
            off = 0.5 * np.sqrt((n1 + 1.0) * (n_tot - n1))
            w, v = eigh_tridiagonal(np.zeros(block.size), off)
            out[idx, n_tot - idx] = v @ (np.exp(-1j * theta * w) * (v.T @ block))
        return FockState2(cut, out)

    def relative_phase(self, phi: float) -> "FockState2":
        """Rotation about Jz: phases e^{i phi (n1 - n2)/2}."""
        n = np.arange(self.cutoff + 1)
        pa = np.exp(0.5j * phi * n)
        return FockState2(self.cutoff, self.amplitudes * np.outer(pa, np.conj(pa)))


def fock_oracle_moments(
    params: TwoModeParams, cutoff: Optional[int] = None
) -> CoherentMoments:
    """Brute-force ladder-summation moments of the twisted coherent pair.

    The state is an exact product of two identical single-mode twisted
    coherent states, so joint moments factor into single-mode ladder sums;
    this keeps ~1e-11 relative accuracy even where the closed forms are
    exponentially small.  Completely independent of the closed forms above.
    """
    alpha = params.alpha
    if cutoff is None:
        cutoff = default_cutoff(alpha**2)
    if cutoff < alpha**2 + 10.0 * math.sqrt(alpha**2):
        raise FockCutoffError("cutoff below alpha^2 + 10 sqrt(alpha^2)")
    c = _twisted_coherent_coeffs(alpha, params.chi_t, cutoff)
    tail = float(np.sum(np.abs(c[-5:]) ** 2))
    if tail > 1e-10:
        raise FockCutoffError(f"single-mode tail {tail:.3e} above 1e-10")

    m_a = _ladder_moment(c, 0, 1)  # <a>
    m_aa = _ladder_moment(c, 0, 2)  # <a a>
    m_n = _ladder_moment(c, 1, 1)  # <a^dag a>
    m_pair = _ladder_moment(c, 2, 2)  # <a^dag a^dag a a>
    m_dd_a = _ladder_moment(c, 2, 1)  # <a^dag a^dag a>
    m_d_aa = _ladder_moment(c, 1, 2)  # <a^dag a a>

    return CoherentMoments(
        number=m_n.real,
        pair=m_pair.real,
        cross_pair=complex(np.conj(m_aa) * m_aa),  # <a^dag a^dag><b b>
        three_one=complex(m_dd_a * m_a),  # <a^dag a^dag a><b>
        three_one_conj=complex(m_d_aa * np.conj(m_a)),  # <a^dag a a><b^dag>
        jx_mean=float(np.real(np.conj(m_a) * m_a)),  # Re <a^dag><b>
    )


# ---------------------------------------------------------------------------
# Two-mode truncated Wigner
# ---------------------------------------------------------------------------

# A sequence stage is a tuple: ("twist", chi_t) | ("rotate", theta_spin) |
# ("phase", phi).  "rotate" transforms Jz -> Jz cos + Jy sin (amplitude map
# exp(-i theta sigma_x/2)); "phase" applies a relative phase phi between the
# modes (rotation about Jz); the final 50/50 splitter equals rotate(+pi/2).

FINAL_SPLITTER_SPIN_ANGLE = 0.5 * math.pi


@dataclass(frozen=True)
class StageCloud:
    """Per-trajectory pseudo-spin points after one stage."""

    label: str
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray

    def moments(self) -> SpinMoments:
        """Ensemble moments with symmetric-ordering corrections.

        TW averages estimate symmetric ordering; <Jz^2>_W and <Jy^2>_W each
        exceed the quantum moment by 1/8 (two half-quantum modes), the cross
        term and <Jx> need no correction.
        """
        jx_mean = float(np.mean(self.jx))
        jy_mean = float(np.mean(self.jy))
        jz_mean = float(np.mean(self.jz))
        jz2 = float(np.mean(self.jz**2)) - 0.125
        jy2 = float(np.mean(self.jy**2)) - 0.125
        jzjy = float(np.mean(2.0 * self.jz * self.jy))
        return SpinMoments(
            jx_mean=jx_mean,
            jz2=jz2,
            jy2=jy2,
            jzjy_sym=jzjy,
            jz_var=jz2 - jz_mean**2,
            jy_var=jy2 - jy_mean**2,
            jz_mean=jz_mean,
            jy_mean=jy_mean,
        )


@dataclass(frozen=True)
class TwoModeTWResult:
    stages: tuple[StageCloud, ...]

    def stage(self, label: str) -> StageCloud:
        for s in self.stages:
            if s.label == label:
                return s
        raise KeyError(label)


def _sample_pair(params: TwoModeParams, n_traj: int, seed: int):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    noise = rng.standard_normal((2, 2, n_traj))
    a = params.alpha + 0.5 * (noise[0, 0] + 1j * noise[0, 1])
    b = params.alpha + 0.5 * (noise[1, 0] + 1j * noise[1, 1])
    return a.astype(np.complex128), b.astype(np.complex128)


def _apply_stage(a, b, stage):
    kind = stage[0]
    if kind == "twist":
        chi_t = stage[1]
        a = a * np.exp(-1j * chi_t * (np.abs(a) ** 2 - 1.0))
        b = b * np.exp(-1j * chi_t * (np.abs(b) ** 2 - 1.0))
    elif kind == "rotate":
        half = 0.5 * stage[1]
        c, s = math.cos(half), math.sin(half)
        a, b = c * a - 1j * s * b, c * b - 1j * s * a
    elif kind == "phase":
        half = 0.5 * stage[1]
        a = a * np.exp(1j * half)
        b = b * np.exp(-1j * half)
    else:
        raise ValueError(f"unknown stage kind {kind!r}")
    return a, b


def _cloud(label, a, b) -> StageCloud:
    z = np.conj(a) * b
    return StageCloud(
        label=label,
        jx=z.real.copy(),
        jy=z.imag.copy(),
        jz=0.5 * (np.abs(a) ** 2 - np.abs(b) ** 2),
    )


def two_mode_tw(
    params: TwoModeParams,
    sequence: Sequence[tuple],
    n_traj: int,
    seed: int,
) -> TwoModeTWResult:
    """Run a staged two-mode TW simulation; returns clouds per stage.

    Initial samples are coherent means sqrt(N_t/2) plus half-quantum complex
    Gaussian noise per mode.  The twist stage applies the Wigner-consistent
    nonlinear phase a -> a exp(-i chi_t (|a|^2 - 1)) (one whole quantum of
    symmetric-ordering shift, the two-mode image of the 1/dx correction).
    Stage 0 ("initial") is always included.
    """
    if n_traj < 2:
        raise InsufficientTrajectoriesError("need at least 2 trajectories")
    a, b = _sample_pair(params, n_traj, seed)
    clouds = [_cloud("initial", a, b)]
    for i, stage in enumerate(sequence):
        a, b = _apply_stage(a, b, stage)
        clouds.append(_cloud(f"{i}:{stage[0]}", a, b))
    return TwoModeTWResult(stages=tuple(clouds))


def two_mode_sensitivity(
    params: TwoModeParams,
    *,
    loops: int = 1,
    theta: Optional[float] = None,
    d_omega: Optional[float] = None,
    n_traj: int = 1000,
    master_seed: int = 0,
    radius: float = 1.0,
) -> SensitivityEstimate:
    """Finite-difference Delta-Omega in the two-mode model.

    One loop: twist(chi_t) + Sagnac phase 4 pi R^2 Omega; for loops = 2 a
    rotate(theta) separates the two loops (theta defaults to theta_chi).
    The final 50/50 splitter is rotate(-pi/2); the signal is N_d = 2 Jz with
    the single-mode symmetric estimator.  Identical samples are reused for
    Omega in {0, +dOmega, -dOmega} (common random numbers).
    """
    if loops not in (1, 2):
        raise ValueError("loops must be 1 or 2")
    if d_omega is None:
        d_omega = 0.05 / (4.0 * math.pi * radius**2)
    if loops == 2 and theta is None:
        theta = theta_chi(params)

    a0, b0 = _sample_pair(params, n_traj, master_seed)

    def run(omega: float) -> np.ndarray:
        phi = 4.0 * math.pi * radius**2 * omega
        a, b = a0.copy(), b0.copy()
        a, b = _apply_stage(a, b, ("twist", params.chi_t))
        a, b = _apply_stage(a, b, ("phase", phi))
        if loops == 2:
            a, b = _apply_stage(a, b, ("rotate", theta))
            a, b = _apply_stage(a, b, ("twist", params.chi_t))
            a, b = _apply_stage(a, b, ("phase", phi))
        a, b = _apply_stage(a, b, ("rotate", FINAL_SPLITTER_SPIN_ANGLE))
        return np.abs(a) ** 2 - np.abs(b) ** 2  # N_d estimator (offsets cancel)

    nd0 = run(0.0)
    ndp = run(+d_omega)
    ndm = run(-d_omega)
    return sensitivity_from_trajectories(nd0, ndp, ndm, d_omega)


# ---------------------------------------------------------------------------
# Exact noninteracting mode map
# ---------------------------------------------------------------------------


def noninteracting_mode_evolution(
    amplitudes: dict,
    n: int,
    omega: float,
    t: float,
    radius: float = 1.0,
    first_convention: str = "first",
) -> dict:
    """Exact linear map of the full sequence splitter/free phases/splitter.

    `amplitudes` maps ("+"|"-", q) to a complex mode amplitude; returns the
    same mapping after: first splitter (convention "first":
    b+_q -> (b+_q - b-_{q-2n})/sqrt2, or "final" to apply the -i convention
    twice), free phases e^{-i phi_q t}, and the final splitter
    b+_q -> (b+_q - i b-_{q-2n})/sqrt2.  Used as the g0 = 0 oracle for the
    full pipeline including the first splitter.
    """
    if first_convention not in ("first", "final"):
        raise ValueError("first_convention must be 'first' or 'final'")

    def splitter(amps: dict, c_upper: complex, c_lower: complex) -> dict:
        # psi+ mixes with psi- e^{+2in theta} (mode q-2n of "-"); psi- with
        # psi+ e^{-2in theta} (mode q+2n of "+")
        keys = set(amps)
        for comp, q in list(keys):
            # (+, q) feeds (-, q-2n); (-, q) feeds (+, q+2n)
            if comp == "+":
                keys.add(("-", q - 2 * n))
            else:
                keys.add(("+", q + 2 * n))
        out = {}
        inv = 1.0 / math.sqrt(2.0)
        for comp, q in keys:
            own = amps.get((comp, q), 0.0)
            if comp == "+":
                other = amps.get(("-", q - 2 * n), 0.0)
                out[(comp, q)] = inv * (own + c_upper * other)
            else:
                other = amps.get(("+", q + 2 * n), 0.0)
                out[(comp, q)] = inv * (own + c_lower * other)
        return out

    if first_convention == "first":
        state = splitter(dict(amplitudes), -1.0, +1.0)
    else:
        state = splitter(dict(amplitudes), -1j, -1j)
    state = {
        key: amp * np.exp(-1j * free_phase(key[1], omega, t, radius))
        for key, amp in state.items()
    }
    return splitter(state, -1j, -1j)


def free_phase(q: int, omega: float, t: float, radius: float = 1.0) -> float:
    """phi_q = (q^2/(2R^2) - Omega q) t (duplicated here to stay standalone)."""
    return (q**2 / (2.0 * radius**2) - omega * q) * t
