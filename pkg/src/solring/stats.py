"""Ensemble statistics with a fixed, compensated reduction order.

All reductions use math.fsum over index-ordered per-trajectory values, so
results are bit-stable under any worker scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InsufficientTrajectoriesError


@dataclass(frozen=True)
class EnsembleStats:
    """Mean and unbiased variance of one scalar observable, with errors."""

    mean: float
    var: float
    mean_stderr: float
    var_stderr: float
    count: int


def ensemble_stats(values: Sequence[float]) -> EnsembleStats:
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 2:
        raise InsufficientTrajectoriesError("need at least 2 trajectories")
    mean = math.fsum(x) / n
    var = math.fsum((x - mean) ** 2) / (n - 1)
    # Gaussian-ensemble error of the sample variance: s^2 sqrt(2/(n-1)).
    return EnsembleStats(
        mean=mean,
        var=var,
        mean_stderr=math.sqrt(var / n),
        var_stderr=var * math.sqrt(2.0 / (n - 1)),
        count=n,
    )


@dataclass(frozen=True)
class SensitivityEstimate:
    """Finite-difference Delta-Omega with propagated standard error."""

    delta_omega: float
    delta_omega_stderr: float
    var_nd: float
    var_nd_stderr: float
    slope: float
    slope_stderr: float
    d_omega: float
    count: int
    flags: tuple[str, ...] = field(default=())


def sensitivity_from_trajectories(
    nd_zero: Sequence[float],
    nd_plus: Sequence[float],
    nd_minus: Sequence[float],
    d_omega: float,
) -> SensitivityEstimate:
    """Delta-Omega = sqrt(Var(N_d)|_0) / |d<N_d>/dOmega| via central difference.

    The +/- runs must reuse the Omega=0 noise realizations (common random
    numbers); the derivative error is then the stderr of the per-trajectory
    paired differences, which is what makes the estimate usable at all.
    """
    if d_omega <= 0:
        raise ValueError("d_omega must be positive")
    s0 = ensemble_stats(nd_zero)
    paired = np.asarray(nd_plus, dtype=float) - np.asarray(nd_minus, dtype=float)
    if paired.size != s0.count:
        raise ValueError("ensembles must have matching trajectory counts")
    sd = ensemble_stats(paired)
    slope = sd.mean / (2.0 * d_omega)
    slope_err = sd.mean_stderr / (2.0 * d_omega)

    flags: tuple[str, ...] = ()
    if abs(slope) <= 2.0 * slope_err:
        flags = ("infinite_sensitivity",)
        return SensitivityEstimate(
            delta_omega=math.inf,
            delta_omega_stderr=math.inf,
            var_nd=s0.var,
            var_nd_stderr=s0.var_stderr,
            slope=slope,
            slope_stderr=slope_err,
            d_omega=d_omega,
            count=s0.count,
            flags=flags,
        )

    dw = math.sqrt(s0.var) / abs(slope)
    rel = math.sqrt(
        (0.5 * s0.var_stderr / s0.var) ** 2 + (slope_err / slope) ** 2
    )
    return SensitivityEstimate(
        delta_omega=dw,
        delta_omega_stderr=dw * rel,
        var_nd=s0.var,
        var_nd_stderr=s0.var_stderr,
        slope=slope,
        slope_stderr=slope_err,
        d_omega=d_omega,
        count=s0.count,
        flags=flags,
    )
