"""
Reference Dicke states, fidelities and the full tensor-product oracle.

The oracle builds its Hamiltonian over product labels only, one atom at a
time, so it shares no symmetric-subspace algebra with the reduced bases it
checks.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List

import numpy as np
from scipy import stats

from dicke import analytic
from dicke.dynamics import (
    ConditionalPropagator,
    IntegratorControls,
    integrate_conditional,
)
from dicke.model import (
    DEFAULT_FULL_TENSOR_CAP,
    BasisDescriptor,
    BasisError,
    CouplingProfile,
    FullTensor,
    IndexedBasis,
    ParameterError,
    ProductLabel,
    StateVector,
    SymmetricLabel,
    SystemParams,
    build_basis,
    build_hamiltonian,
)

logger = logging.getLogger(__name__)

# Minimum expected count per histogram bin for the chi-square test
MIN_EXPECTED_COUNT = 5.0


def _check_dicke(n: int, m: int) -> None:
    if n < 1:
        raise ParameterError(f"A Dicke state needs n >= 1 atoms, got {n}.")
    if not 0 <= m <= n:
        raise ParameterError(f"Dicke excitation m = {m} outside 0..{n}.")


def dicke_amplitudes(n: int, m: int) -> Dict[str, float]:
    """|n,m> by enumeration: 1/√C(n,m) on every n-bit string of weight m."""
    _check_dicke(n, m)
    amplitude = 1.0 / math.sqrt(math.comb(n, m))
    return {
        "".join("1" if i in ones else "0" for i in range(n)): amplitude
        for ones in combinations(range(n), m)
    }


def dicke_amplitudes_collective(n: int, m: int) -> Dict[str, float]:
    """
    |n,m> = C(n,m)·s₁^m·s₀^(n-m)·|e…e>, with s_k = Σ_j |k><e|_j and
    C(n,m) = 1/√(n!·m!·(n-m)!).
    """
    _check_dicke(n, m)
    state: Dict[str, float] = {"e" * n: 1.0}
    for _ in range(n - m):
        state = _lower(state, "0")
    for _ in range(m):
        state = _lower(state, "1")
    norm = 1.0 / math.sqrt(
        math.factorial(n) * math.factorial(m) * math.factorial(n - m)
    )
    return {atoms: norm * amplitude for atoms, amplitude in sorted(state.items())}


def _lower(state: Dict[str, float], level: str) -> Dict[str, float]:
    lowered: Dict[str, float] = {}
    for atoms, amplitude in state.items():
        for i, atom in enumerate(atoms):
            if atom == "e":
                key = atoms[:i] + level + atoms[i + 1 :]
                lowered[key] = lowered.get(key, 0.0) + amplitude
    return lowered


def collective_map(amplitudes: Dict[str, float]) -> Dict[str, float]:
    """Apply the collective raising map Σ_j |1><0|_j to an atomic state."""
    raised: Dict[str, float] = {}
    for atoms, amplitude in amplitudes.items():
        for i, atom in enumerate(atoms):
            if atom == "0":
                key = atoms[:i] + "1" + atoms[i + 1 :]
                raised[key] = raised.get(key, 0.0) + amplitude
    return raised


def dicke_state(
    n: int, m: int, basis: IndexedBasis, n_L: int = 0, n_R: int = 0
) -> StateVector:
    """
    |n,m> times the cavity Fock state (n_L, n_R), expressed in `basis`.

    Symmetric bases hold |n,m> as a single label; product bases get the
    enumerated amplitudes.
    """
    _check_dicke(n, m)
    if basis.n != n:
        raise BasisError(f"Basis is for {basis.n} atoms, not {n}.")
    if basis.is_symmetric:
        return StateVector.basis_state(basis, SymmetricLabel(n, m, 0, n_L, n_R))
    amplitudes = {
        ProductLabel(atoms, n_L, n_R): amplitude
        for atoms, amplitude in dicke_amplitudes(n, m).items()
    }
    return StateVector.from_mapping(basis, amplitudes)


def fidelity(psi: StateVector, phi: StateVector) -> float:
    """|<phi|psi>|², insensitive to global phase."""
    if psi.basis != phi.basis:
        raise BasisError("Fidelity needs both states in the same basis.")
    overlap = np.vdot(phi.amplitudes, psi.amplitudes)
    return float(min(1.0, abs(overlap) ** 2))


def embedding(basis: IndexedBasis, full: IndexedBasis) -> np.ndarray:
    """Columns are the basis labels expanded over the product labels of `full`."""
    matrix = np.zeros((full.dimension, basis.dimension))
    for j, label in enumerate(basis):
        for product, amplitude in label.expand().items():
            matrix[full.index(product), j] = amplitude
    return matrix


def embed(psi: StateVector, full: IndexedBasis) -> StateVector:
    return StateVector(full, embedding(psi.basis, full) @ psi.amplitudes)


@dataclass(frozen=True)
class OracleReport:
    max_deviation: float
    times: np.ndarray
    deviation: np.ndarray
    reduced_dimension: int
    full_dimension: int


def oracle_compare(
    params: SystemParams,
    descriptor: BasisDescriptor,
    t_grid,
    profile: CouplingProfile | None = None,
    controls: IntegratorControls | None = None,
    cap: int | None = None,
) -> OracleReport:
    """
    Evolve a reduced basis and the full tensor space from the same state.

    The reduced sector starts in its first label (the L-photon state); the
    full space is seeded with that state's product expansion. Deviation at
    each time is max |ψ_full - E·ψ_reduced| with E the embedding of the
    reduced labels. Exact propagation is used unless integrator controls are
    given.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    reduced_basis = build_basis(descriptor)
    seed = reduced_basis.labels[0]
    cap = DEFAULT_FULL_TENSOR_CAP if cap is None else cap
    full_descriptor = FullTensor(params.n_atoms, cap)
    full_basis = build_basis(full_descriptor, initial_hint=seed)

    reduced_h = build_hamiltonian(params, reduced_basis, profile)
    full_h = build_hamiltonian(params, full_basis, profile)
    psi_reduced = StateVector.basis_state(reduced_basis, seed)
    psi_full = embed(psi_reduced, full_basis)

    reduced = _evolve(reduced_h, psi_reduced, t_grid, controls)
    full = _evolve(full_h, psi_full, t_grid, controls)
    projected = reduced @ embedding(reduced_basis, full_basis).T
    deviation = np.abs(full - projected).max(axis=1)
    report = OracleReport(
        max_deviation=float(deviation.max()) if deviation.size else 0.0,
        times=t_grid,
        deviation=deviation,
        reduced_dimension=reduced_basis.dimension,
        full_dimension=full_basis.dimension,
    )
    logger.info(
        "Oracle %s (dim %d) vs full tensor (dim %d): max deviation %.3g",
        descriptor,
        report.reduced_dimension,
        report.full_dimension,
        report.max_deviation,
    )
    return report


def _evolve(hamiltonian, psi0: StateVector, times: np.ndarray, controls):
    if controls is None:
        return ConditionalPropagator.from_hamiltonian(hamiltonian, psi0).amplitudes(
            times
        )
    t_end = float(times.max())
    if t_end == 0.0:
        return np.tile(psi0.amplitudes, (times.size, 1))
    return integrate_conditional(
        hamiltonian, psi0, t_end, controls, t_eval=times
    ).samples


@dataclass(frozen=True)
class GoodnessOfFit:
    statistic: float
    p_value: float
    degrees_of_freedom: int
    observed: np.ndarray
    expected: np.ndarray
    edges: np.ndarray

    def passes(self, significance: float = 0.01) -> bool:
        return self.p_value >= significance


def click_time_gof(
    counts,
    edges,
    params: SystemParams,
    step: int = 0,
    min_expected: float = MIN_EXPECTED_COUNT,
) -> GoodnessOfFit:
    """
    Chi-square test of a D1 click-time histogram against κ_R·η·|λ₁(t)|².

    Only the shape is tested: expected counts are scaled to the observed
    total. Adjacent bins are merged until each expects at least
    `min_expected` clicks.
    """
    counts = np.asarray(counts, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if counts.size + 1 != edges.size:
        raise ParameterError("Histogram needs one more edge than counts.")
    if counts.sum() == 0:
        raise ParameterError("No clicks to test.")
    probabilities = np.array(
        [
            analytic.click_probability(params, lo, hi, step)
            for lo, hi in zip(edges[:-1], edges[1:], strict=True)
        ]
    )
    if probabilities.sum() <= 0:
        raise ParameterError("The model predicts no clicks in the histogram range.")
    expected = probabilities * counts.sum() / probabilities.sum()

    observed_bins, expected_bins, merged_edges = _merge_bins(
        counts, expected, edges, min_expected
    )
    if len(observed_bins) < 2:
        raise ParameterError("Too few clicks for a goodness-of-fit test.")
    # Renormalize after merging so the totals match to rounding
    expected_bins = expected_bins * observed_bins.sum() / expected_bins.sum()
    result = stats.chisquare(observed_bins, expected_bins)
    return GoodnessOfFit(
        statistic=float(result.statistic),
        p_value=float(result.pvalue),
        degrees_of_freedom=len(observed_bins) - 1,
        observed=observed_bins,
        expected=expected_bins,
        edges=merged_edges,
    )


def _merge_bins(
    observed: np.ndarray,
    expected: np.ndarray,
    edges: np.ndarray,
    min_expected: float,
):
    merged_observed: List[float] = []
    merged_expected: List[float] = []
    merged_edges: List[float] = [float(edges[0])]
    observed_sum = expected_sum = 0.0
    for i in range(observed.size):
        observed_sum += observed[i]
        expected_sum += expected[i]
        if expected_sum >= min_expected:
            merged_observed.append(observed_sum)
            merged_expected.append(expected_sum)
            merged_edges.append(float(edges[i + 1]))
            observed_sum = expected_sum = 0.0
    # A short tail joins the last full bin
    if expected_sum > 0 or observed_sum > 0:
        if merged_observed:
            merged_observed[-1] += observed_sum
            merged_expected[-1] += expected_sum
            merged_edges[-1] = float(edges[-1])
        else:
            merged_observed.append(observed_sum)
            merged_expected.append(expected_sum)
            merged_edges.append(float(edges[-1]))
    return (
        np.array(merged_observed),
        np.array(merged_expected),
        np.array(merged_edges),
    )
