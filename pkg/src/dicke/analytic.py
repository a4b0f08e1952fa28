"""
Closed-form dynamics and success probabilities of the eliminated model.

After the excited state is adiabatically eliminated, the m -> m+1 ladder step
is a two-level system between |n,m>|L> and |n,m+1>|R> with

    a = α²/Δ_L,  b = β²/Δ_L - (Δ_L - Δ_R),  c = αβ/Δ_L

where α = √(n-m)·g_L and β = √(m+1)·g_R. The amplitudes rotate at
Ω₀ = a + b and Ω₁ = √((a-b)² + 4c²), and decay at κ/2.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import integrate

from dicke.model import (
    ParameterError,
    PreconditionError,
    SystemParams,
    collective_couplings,
    optimal_detuning,
)

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-8
# Allowed mismatch between delta_R and its optimal value, relative to the
# Raman coupling scale (α² + β²)/|Δ_L|
RESONANCE_TOLERANCE = 1e-9


class DegenerateLimitError(ArithmeticError):
    """The general solution is 0/0 here; use its limit form instead."""


@dataclass(frozen=True)
class RabiPair:
    omega0: float
    omega1: float


def raman_coefficients(
    params: SystemParams, step: int = 0
) -> Tuple[float, float, float]:
    """(a, b, c) of the eliminated two-level generator."""
    alpha, beta = collective_couplings(params, step)
    delta = params.delta_L
    if delta == 0:
        raise PreconditionError("delta_L = 0: adiabatic elimination is singular.")
    a = alpha**2 / delta
    b = beta**2 / delta - (params.delta_L - params.delta_R)
    c = alpha * beta / delta
    return a, b, c


def rabi_frequencies(params: SystemParams, step: int = 0) -> RabiPair:
    a, b, c = raman_coefficients(params, step)
    return RabiPair(omega0=a + b, omega1=math.hypot(a - b, 2 * c))


def amplitudes_general(params: SystemParams, t, step: int = 0):
    """
    λ₀(t), λ₁(t) for any Δ_R, starting from λ₀ = 1.

    `t` may be a scalar or an array. Needs kappa_L == kappa_R.
    """
    a, b, c = raman_coefficients(params, step)
    kappa = params.kappa
    omega = rabi_frequencies(params, step)
    if omega.omega1 == 0:
        raise DegenerateLimitError(
            "Ω₁ = 0: the general amplitudes reduce to λ₀ = envelope, λ₁ = 0."
        )
    t = np.asarray(t, dtype=float)
    envelope = np.exp(-kappa * t / 2 + 0.5j * omega.omega0 * t)
    half = omega.omega1 * t / 2
    lambda0 = envelope * (np.cos(half) + 1j * (a - b) / omega.omega1 * np.sin(half))
    lambda1 = envelope * 1j * (2 * c / omega.omega1) * np.sin(half)
    return _unwrap(lambda0), _unwrap(lambda1)


def amplitudes_resonant(params: SystemParams, t, step: int = 0):
    """
    The amplitudes on two-photon resonance (Δ_R from `optimal_detuning`):

    λ₀ = e^(-κt/2)·e^(iΩ₀t/2)·cos(Ω₁t/2)
    λ₁ = i·e^(-κt/2)·e^(iΩ₀t/2)·sin(Ω₁t/2)
    """
    a, b, c = raman_coefficients(params, step)
    alpha, beta = collective_couplings(params, step)
    scale = (alpha**2 + beta**2) / abs(params.delta_L) or abs(params.delta_L)
    if abs(a - b) > RESONANCE_TOLERANCE * scale:
        raise PreconditionError(
            f"delta_R = {params.delta_R} is off the two-photon resonance "
            f"{optimal_detuning(params, step)}."
        )
    kappa = params.kappa
    omega = rabi_frequencies(params, step)
    t = np.asarray(t, dtype=float)
    envelope = np.exp(-kappa * t / 2 + 0.5j * omega.omega0 * t)
    half = omega.omega1 * t / 2
    # Negative Δ_L makes c negative; sign(c) keeps the phase of λ₁ consistent
    # with the general solution
    lambda0 = envelope * np.cos(half)
    lambda1 = envelope * 1j * np.sign(c) * np.sin(half)
    return _unwrap(lambda0), _unwrap(lambda1)


def _unwrap(value: np.ndarray):
    if value.ndim == 0:
        return complex(value)
    return value


def click_probability(
    params: SystemParams, t0: float, t1: float, step: int = 0
) -> float:
    """
    Probability that D1 clicks in [t0, t1]: ∫ κ_R·η·|λ₁(t)|² dt.

    Integrated with scipy's adaptive quadrature to QUAD_EPSABS.
    """
    if t1 < t0:
        raise ParameterError(f"Empty interval [{t0}, {t1}].")
    if t1 == t0:
        return 0.0
    omega1 = rabi_frequencies(params, step).omega1
    if omega1 == 0:
        return 0.0

    def density(t: float) -> float:
        _, lambda1 = amplitudes_general(params, t, step)
        return params.kappa_R * abs(lambda1) ** 2

    # Enough subintervals to resolve every half period of sin²(Ω₁t/2)
    periods = omega1 * (t1 - t0) / math.pi
    limit = max(50, 4 * int(periods) + 50)
    value, _ = integrate.quad(density, t0, t1, epsabs=QUAD_EPSABS, limit=limit)
    return params.detector_efficiency * value


def success_probability_integral(
    params: SystemParams, wait_time: float | None = None, step: int = 0
) -> float:
    """D1 click probability within the waiting time T (params.wait_time by default)."""
    T = params.wait_time if wait_time is None else wait_time
    if T < 0:
        raise ParameterError(f"Waiting time must be >= 0, got {T}.")
    return click_probability(params, 0.0, T, step)


def success_probability_general(params: SystemParams, step: int = 0) -> float:
    """
    Infinite-time D1 probability for any Δ_R: 2c²/(κ² + Ω₁²), times η.
    """
    _, _, c = raman_coefficients(params, step)
    if c == 0:
        return 0.0
    omega1 = rabi_frequencies(params, step).omega1
    kappa = params.kappa
    return params.detector_efficiency * 2 * c**2 / (kappa**2 + omega1**2)


def success_probability_closed(params: SystemParams, step: int = 0) -> float:
    """
    p_suc = 2c²/(κ² + 4c²), times η, at the optimal detuning.

    For the first step with equal couplings this is 2ng⁴/(Δ_L²κ² + 4ng⁴).
    Δ_R in params is not used.
    """
    _, _, c = raman_coefficients(params, step)
    if c == 0:
        return 0.0
    kappa = params.kappa
    return params.detector_efficiency * 2 * c**2 / (kappa**2 + 4 * c**2)


def cumulative_success(p_single: float, trials: int) -> float:
    """1 - (1-p)^trials"""
    if not 0.0 <= p_single <= 1.0:
        raise ParameterError(f"Probability must lie in [0, 1], got {p_single}.")
    if trials < 0:
        raise ParameterError(f"Number of trials must be >= 0, got {trials}.")
    return 1.0 - (1.0 - p_single) ** trials


def trials_for_confidence(p_single: float, target: float = 0.99) -> int:
    """The fewest trials whose cumulative success reaches `target`."""
    if not 0.0 <= target < 1.0:
        raise ParameterError(f"Target must lie in [0, 1), got {target}.")
    if target == 0.0:
        return 0
    if not 0.0 < p_single <= 1.0:
        raise ParameterError(
            f"Target {target} is unreachable with single-trial probability "
            f"{p_single}."
        )
    if p_single == 1.0:
        return 1
    trials = max(1, math.ceil(math.log1p(-target) / math.log1p(-p_single)))
    # Correct for rounding in the logarithms
    while trials > 1 and cumulative_success(p_single, trials - 1) >= target:
        trials -= 1
    while cumulative_success(p_single, trials) < target:
        trials += 1
    return trials


def excited_population_bound(params: SystemParams, step: int = 0) -> float:
    """
    ((α + β)/Δ_L)², from the elimination relation
    λ₂ ≈ -(αλ₀ + βλ₁)/Δ_L.
    """
    alpha, beta = collective_couplings(params, step)
    if params.delta_L == 0:
        raise PreconditionError("delta_L = 0: adiabatic elimination is singular.")
    return ((alpha + beta) / params.delta_L) ** 2
