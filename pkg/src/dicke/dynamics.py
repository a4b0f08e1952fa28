"""
Conditional (no-click) evolution i·dψ/dt = H_eff·ψ.

Everything runs in the slowly varying frame of `EffectiveHamiltonian.frame_matrix`,
where the L-photon state carries no phase. Two ways to evolve are provided:
`integrate_conditional` uses scipy's adaptive Runge-Kutta with dense output,
`ConditionalPropagator` diagonalizes the constant generator once and is exact.
Both expose the same `DenseEvolution` interface.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from scipy import integrate, linalg

from dicke.analytic import raman_coefficients
from dicke.model import (
    BasisError,
    EffectiveHamiltonian,
    IndexedBasis,
    ParameterError,
    PreconditionError,
    StateVector,
    SymmetricLadder,
    SystemParams,
    build_basis,
    build_hamiltonian,
)

logger = logging.getLogger(__name__)

# Eigenvector matrices worse conditioned than this (near an exceptional
# point) switch the propagator to expm
MAX_EIGENVECTOR_CONDITION = 1e8


class IntegrationError(RuntimeError):
    """The ODE solver failed, e.g. the step size underflowed."""


@dataclass(frozen=True)
class IntegratorControls:
    rtol: float = 1e-9
    atol: float = 1e-12
    method: str = "RK45"
    max_step: float = math.inf
    first_step: float | None = None


class DenseEvolution(ABC):
    """Amplitudes available at any time in [0, t_end]."""

    basis: IndexedBasis | None

    @abstractmethod
    def amplitudes(self, t) -> np.ndarray:
        """Shape (dim,) for scalar t, (len(t), dim) for an array of times."""

    def norm_sq(self, t) -> np.ndarray:
        amplitudes = self.amplitudes(t)
        return (amplitudes.real**2 + amplitudes.imag**2).sum(axis=-1)

    def state_at(self, t: float) -> StateVector:
        if self.basis is None:
            raise BasisError("This evolution has no basis attached.")
        return StateVector(self.basis, self.amplitudes(float(t)))

    def sample(self, times) -> "ConditionalTrajectory":
        times = np.asarray(times, dtype=float)
        return ConditionalTrajectory(self.basis, times, self.amplitudes(times), self)


@dataclass(frozen=True, eq=False)
class ConditionalTrajectory:
    """Amplitudes sampled at `times`, plus the dense evolution they came from."""

    basis: IndexedBasis | None
    times: np.ndarray
    samples: np.ndarray
    dense: DenseEvolution

    @property
    def norm_sq(self) -> np.ndarray:
        return (np.abs(self.samples) ** 2).sum(axis=1)

    def states(self) -> List[StateVector]:
        if self.basis is None:
            raise BasisError("This trajectory has no basis attached.")
        return [StateVector(self.basis, row) for row in self.samples]


class ConditionalPropagator(DenseEvolution):
    """
    Exact evolution under a constant generator G: ψ(t) = V·e^(-iwt)·V⁻¹·ψ₀.

    Falls back to scipy.linalg.expm per time when G is close to defective.
    """

    def __init__(
        self,
        generator: np.ndarray,
        psi0: np.ndarray,
        basis: IndexedBasis | None = None,
    ):
        self.generator = np.asarray(generator, dtype=complex)
        self.psi0 = np.asarray(psi0, dtype=complex)
        self.basis = basis
        eigenvalues, eigenvectors = linalg.eig(self.generator)
        condition = np.linalg.cond(eigenvectors)
        self.exact_eig = bool(np.isfinite(condition)) and (
            condition < MAX_EIGENVECTOR_CONDITION
        )
        if self.exact_eig:
            self.eigenvalues = eigenvalues
            self.eigenvectors = eigenvectors
            self.coefficients = linalg.solve(eigenvectors, self.psi0)
        else:
            logger.debug("Generator is near-defective; propagating with expm")

    @classmethod
    def from_hamiltonian(
        cls, hamiltonian: EffectiveHamiltonian, psi0: StateVector
    ) -> "ConditionalPropagator":
        _check_initial_state(hamiltonian, psi0)
        return cls(hamiltonian.frame_matrix, psi0.amplitudes, hamiltonian.basis)

    def amplitudes(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not self.exact_eig:
            flat = [
                linalg.expm(-1j * self.generator * s) @ self.psi0 for s in t.ravel()
            ]
            return np.array(flat).reshape(t.shape + self.psi0.shape)
        weights = np.exp(-1j * np.multiply.outer(t, self.eigenvalues))
        weights = weights * self.coefficients
        # Elementwise products and a row sum keep each time's result
        # independent of how many times are evaluated together
        return (self.eigenvectors * weights[..., np.newaxis, :]).sum(axis=-1)


class OdeEvolution(DenseEvolution):
    """Dense output of a solve_ivp run."""

    def __init__(self, solution, t_end: float, basis: IndexedBasis | None):
        self.solution = solution
        self.t_end = t_end
        self.basis = basis

    def amplitudes(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_end):
            raise ParameterError(
                f"Time outside the integrated range [0, {self.t_end}]."
            )
        values = self.solution(t.ravel())
        return values.T.reshape(t.shape + values.shape[:1])


def _check_initial_state(hamiltonian: EffectiveHamiltonian, psi0: StateVector) -> None:
    if psi0.basis != hamiltonian.basis:
        raise BasisError("Initial state and Hamiltonian use different bases.")
    psi0.check_normalized()


def integrate_conditional(
    hamiltonian: EffectiveHamiltonian,
    psi0: StateVector,
    t_end: float,
    controls: IntegratorControls | None = None,
    t_eval=None,
    samples: int = 201,
) -> ConditionalTrajectory:
    """
    Integrate the no-click evolution from psi0 up to t_end.

    Returns the amplitudes at `t_eval` (default: `samples` evenly spaced
    times including 0 and t_end) with the solver's dense output attached.
    """
    controls = controls if controls is not None else IntegratorControls()
    _check_initial_state(hamiltonian, psi0)
    if not t_end > 0:
        raise ParameterError(f"t_end must be > 0, got {t_end}.")
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, samples)
    t_eval = np.asarray(t_eval, dtype=float)

    generator = hamiltonian.frame_matrix

    def rhs(t: float, psi: np.ndarray) -> np.ndarray:
        return -1j * (generator @ psi)

    options = {}
    if controls.first_step is not None:
        options["first_step"] = controls.first_step
    solution = integrate.solve_ivp(
        rhs,
        (0.0, t_end),
        np.array(psi0.amplitudes),
        method=controls.method,
        t_eval=t_eval,
        dense_output=True,
        rtol=controls.rtol,
        atol=controls.atol,
        max_step=controls.max_step,
        **options,
    )
    if not solution.success:
        raise IntegrationError(solution.message)
    logger.debug(
        "Integrated %d states to t = %g in %d evaluations",
        hamiltonian.dimension,
        t_end,
        solution.nfev,
    )
    dense = OdeEvolution(solution.sol, t_end, hamiltonian.basis)
    return ConditionalTrajectory(hamiltonian.basis, solution.t, solution.y.T, dense)


def first_passage(
    norm_sq: Callable[[np.ndarray], np.ndarray],
    thresholds,
    t_max: float,
    tolerance: float = 1e-9,
) -> np.ndarray:
    """
    For each threshold u, the time at which the no-click probability falls to u.

    `norm_sq` must be vectorized and non-increasing. Thresholds never reached
    by t_max give inf. Bisection stops at tolerance·t_max.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    times = np.full(thresholds.shape, np.inf)
    passed = norm_sq(np.full(thresholds.shape, t_max)) <= thresholds
    if not passed.any():
        return times

    targets = thresholds[passed]
    lo = np.zeros(targets.shape)
    hi = np.full(targets.shape, float(t_max))
    iterations = math.ceil(math.log2(1.0 / tolerance))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        above = norm_sq(mid) > targets
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    times[passed] = hi
    return times


def transformed_generator(params: SystemParams, step: int = 0) -> np.ndarray:
    """
    M with dλ/dt = M·λ for the eliminated pair (λ₀, λ₁).

    [[i·a - κ_L/2, i·c], [i·c, i·b - κ_R/2]]
    """
    a, b, c = raman_coefficients(params, step)
    return np.array(
        [
            [1j * a - params.kappa_L / 2, 1j * c],
            [1j * c, 1j * b - params.kappa_R / 2],
        ]
    )


@dataclass(frozen=True)
class EliminationReport:
    max_deviation: float
    max_excited_population: float
    times: np.ndarray
    deviation: np.ndarray
    excited_population: np.ndarray


def elimination_error(
    params: SystemParams,
    t_end: float | None = None,
    step: int = 0,
    samples: int = 2001,
    controls: IntegratorControls | None = None,
) -> EliminationReport:
    """
    Compare the three-level ladder step with its eliminated two-level form.

    Both start in |n,m>|L>. The sampling grid is refined to at least 16 points
    per period of the fast e^(-iΔ_L t) oscillation of the excited amplitude.
    """
    t_end = params.wait_time if t_end is None else t_end
    if not t_end > 0:
        raise ParameterError(f"t_end must be > 0, got {t_end}.")
    if params.delta_L == 0:
        raise PreconditionError("delta_L = 0: adiabatic elimination is singular.")
    fast = abs(params.delta_L) + abs(params.delta_L - params.delta_R)
    samples = max(samples, math.ceil(16 * t_end * fast / (2 * math.pi)) + 1)
    times = np.linspace(0.0, t_end, samples)

    basis = build_basis(SymmetricLadder(params.n_atoms, step))
    hamiltonian = build_hamiltonian(params, basis)
    psi0 = StateVector.basis_state(basis, basis.labels[0])
    full = integrate_conditional(hamiltonian, psi0, t_end, controls, t_eval=times)

    reduced = ConditionalPropagator(
        1j * transformed_generator(params, step), np.array([1.0, 0.0])
    ).amplitudes(times)

    deviation = np.abs(full.samples[:, :2] - reduced).max(axis=1)
    excited = np.abs(full.samples[:, 2]) ** 2
    report = EliminationReport(
        max_deviation=float(deviation.max()),
        max_excited_population=float(excited.max()),
        times=times,
        deviation=deviation,
        excited_population=excited,
    )
    logger.info(
        "Elimination error over %g s: deviation %.3g, max excited %.3g",
        t_end,
        report.max_deviation,
        report.max_excited_population,
    )
    return report
