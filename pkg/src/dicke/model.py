"""
Physical parameters, Hilbert-space sectors and the conditional Hamiltonian.

Every basis state is a label: `ProductLabel` names one configuration of the
atoms and cavity photons, `SymmetricLabel` names a normalized
permutation-symmetric combination of product labels. An `IndexedBasis` is an
ordered tuple of labels; matrices and state vectors are indexed by position in
that tuple.

Matrices are written in the interaction picture with the cavity photons as
the reference: an L photon sits at energy -delta_L, an R photon at -delta_R
and an excited atom at 0. Decay rates enter through jump channels.
"""

import dataclasses
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, auto, unique
from itertools import combinations
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# 2π×1 MHz in rad/s
TWO_PI_MHZ = 2.0 * math.pi * 1e6

# Below this |detuning|/g the adiabatic elimination is questionable
STRONG_DETUNING_RATIO = 10.0

DEFAULT_FULL_TENSOR_CAP = 4


class ParameterError(ValueError):
    """A physical parameter is out of range or inconsistent."""


class BasisError(ValueError):
    """A basis is invalid or does not fit the requested operation."""


class BasisSizeError(BasisError):
    """The full tensor basis was requested for more atoms than its cap."""


class PreconditionError(ValueError):
    """A formula was evaluated outside of the conditions it holds under."""


class StateError(ValueError):
    """A state vector has the wrong shape or norm."""


@unique
class Detector(Enum):
    # D0 sees L photons leaking out of the cavity, D1 sees R photons
    D0 = auto()
    D1 = auto()


@unique
class Mode(Enum):
    L = auto()
    R = auto()


@dataclass(frozen=True)
class SystemParams:
    """
    All rates are angular frequencies in rad/s, times are in seconds.

    delta_L and delta_R are the one-photon detunings of the L and R
    transitions. gamma_s is the atomic spontaneous emission rate, which only
    removes norm from excited states.
    """

    g_L: float
    g_R: float
    kappa_L: float
    kappa_R: float
    delta_L: float
    delta_R: float
    n_atoms: int
    wait_time: float
    gamma_s: float = 0.0
    detector_efficiency: float = 1.0

    def __post_init__(self) -> None:
        for name in ("g_L", "g_R", "kappa_L", "kappa_R", "gamma_s", "wait_time"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {value}.")
        for name in ("delta_L", "delta_R"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite.")
        if isinstance(self.n_atoms, bool) or int(self.n_atoms) != self.n_atoms:
            raise ParameterError(f"n_atoms must be an integer, got {self.n_atoms}.")
        if self.n_atoms < 1:
            raise ParameterError(f"n_atoms must be >= 1, got {self.n_atoms}.")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise ParameterError(
                f"detector_efficiency must lie in [0, 1], "
                f"got {self.detector_efficiency}."
            )
        if not self.strong_detuning:
            logger.warning(
                "Weak detuning: |delta|/g = %.3g is below %g; adiabatic "
                "elimination results are unreliable.",
                self.detuning_ratio,
                STRONG_DETUNING_RATIO,
            )

    @classmethod
    def uniform(
        cls,
        g: float,
        kappa: float,
        delta_L: float,
        n_atoms: int,
        wait_time: float,
        delta_R: float | None = None,
        gamma_s: float = 0.0,
        detector_efficiency: float = 1.0,
        step: int = 0,
    ) -> "SystemParams":
        """
        Equal couplings and decay rates for both modes.

        With delta_R left out, it is tuned with `optimal_detuning` for the
        given ladder step.
        """
        if delta_R is None:
            delta_R = _optimal_delta_R(g, g, delta_L, n_atoms, step)
        return cls(
            g_L=g,
            g_R=g,
            kappa_L=kappa,
            kappa_R=kappa,
            delta_L=delta_L,
            delta_R=delta_R,
            n_atoms=n_atoms,
            wait_time=wait_time,
            gamma_s=gamma_s,
            detector_efficiency=detector_efficiency,
        )

    @classmethod
    def practical(cls, n_atoms: int = 3) -> "SystemParams":
        """g = 2π×16 MHz, κ = 2π×1.4 MHz, T = 0.5 µs, Δ_L = 20g, tuned Δ_R."""
        g = 16 * TWO_PI_MHZ
        return cls.uniform(
            g=g,
            kappa=1.4 * TWO_PI_MHZ,
            delta_L=20 * g,
            n_atoms=n_atoms,
            wait_time=0.5e-6,
        )

    @property
    def g(self) -> float:
        """The common coupling; only defined when g_L == g_R."""
        if self.g_L != self.g_R:
            raise ParameterError("g_L and g_R differ; no single coupling g.")
        return self.g_L

    @property
    def kappa(self) -> float:
        """The common cavity decay rate; only defined when kappa_L == kappa_R."""
        if self.kappa_L != self.kappa_R:
            raise ParameterError(
                "kappa_L and kappa_R differ; the closed forms need equal decay."
            )
        return self.kappa_L

    @property
    def detuning_ratio(self) -> float:
        g = max(self.g_L, self.g_R)
        if g == 0.0:
            return math.inf
        return min(abs(self.delta_L), abs(self.delta_R)) / g

    @property
    def strong_detuning(self) -> bool:
        return self.detuning_ratio >= STRONG_DETUNING_RATIO

    @property
    def timeout_horizon(self) -> float:
        """T_max = max(T, 10/κ) over the open cavity channels."""
        open_rates = [k for k in (self.kappa_L, self.kappa_R) if k > 0]
        if not open_rates:
            return self.wait_time
        return max(self.wait_time, 10.0 / min(open_rates))

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def with_optimal_detuning(self, step: int = 0) -> "SystemParams":
        return self.replace(delta_R=optimal_detuning(self, step))


@dataclass(frozen=True)
class CouplingProfile:
    """A Gaussian standing-wave cavity mode and the atom positions in it."""

    g0: float
    w0: float
    wave_number: float
    positions: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if not math.isfinite(self.g0) or self.g0 < 0:
            raise ParameterError(f"g0 must be finite and >= 0, got {self.g0}.")
        if not self.w0 > 0:
            raise ParameterError(f"w0 must be > 0, got {self.w0}.")
        if not math.isfinite(self.wave_number):
            raise ParameterError("wave_number must be finite.")
        positions = tuple(tuple(float(c) for c in p) for p in self.positions)
        for position in positions:
            if len(position) != 3:
                raise ParameterError(f"Position {position} is not (x, y, z).")
        if not positions:
            raise ParameterError("A coupling profile needs at least one atom.")
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_wavelength(
        cls,
        g0: float,
        w0: float,
        wavelength: float,
        positions: Iterable[Sequence[float]],
    ) -> "CouplingProfile":
        if not wavelength > 0:
            raise ParameterError(f"wavelength must be > 0, got {wavelength}.")
        return cls(g0, w0, 2 * math.pi / wavelength, tuple(map(tuple, positions)))

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    def couplings(self) -> np.ndarray:
        return np.array([mode_coupling(self, i) for i in range(self.n_atoms)])

    def select(self, indices: Iterable[int]) -> "CouplingProfile":
        """Keep the atoms at the given indices, in the given order."""
        indices = list(indices)
        for i in indices:
            if not 0 <= i < self.n_atoms:
                raise ParameterError(f"Atom index {i} out of range.")
        if len(set(indices)) != len(indices):
            raise ParameterError("Atom indices must be distinct.")
        return dataclasses.replace(
            self, positions=tuple(self.positions[i] for i in indices)
        )


def mode_coupling(profile: CouplingProfile, atom_index: int) -> float:
    """
    g0·|sin(kz)|·exp(-(x²+y²)/w0²) for one atom.

    The sign of sin(kz) is dropped: both cavity modes share the mode function,
    so it only enters the heralded state through g_L·g_R, where it cancels.
    """
    if not 0 <= atom_index < profile.n_atoms:
        raise ParameterError(f"Atom index {atom_index} out of range.")
    x, y, z = profile.positions[atom_index]
    radial = math.exp(-(x * x + y * y) / (profile.w0 * profile.w0))
    return profile.g0 * abs(math.sin(profile.wave_number * z)) * radial


def collective_couplings(params: SystemParams, step: int = 0) -> Tuple[float, float]:
    """√(n-m)·g_L and √(m+1)·g_R for the m -> m+1 ladder step."""
    _check_step(params.n_atoms, step)
    n = params.n_atoms
    return math.sqrt(n - step) * params.g_L, math.sqrt(step + 1) * params.g_R


def optimal_detuning(params: SystemParams, step: int = 0) -> float:
    """
    The Δ_R that puts the m -> m+1 Raman transition on two-photon resonance.

    Δ_L - Δ_R = ((m+1)·g_R² - (n-m)·g_L²)/Δ_L
    """
    return _optimal_delta_R(
        params.g_L, params.g_R, params.delta_L, params.n_atoms, step
    )


def _optimal_delta_R(
    g_L: float, g_R: float, delta_L: float, n_atoms: int, step: int
) -> float:
    _check_step(n_atoms, step)
    if delta_L == 0:
        raise PreconditionError("delta_L = 0: the optimal detuning is singular.")
    shift = ((step + 1) * g_R**2 - (n_atoms - step) * g_L**2) / delta_L
    return delta_L - shift


def _check_step(n_atoms: int, step: int) -> None:
    if not 0 <= step < n_atoms:
        raise ParameterError(
            f"Ladder step m = {step} is outside 0..{n_atoms - 1} for n = {n_atoms}."
        )


# Labels


@dataclass(frozen=True)
class Transition:
    """One absorption of a cavity photon by the atoms."""

    target: "Label"
    mode: Mode
    # None for collective (symmetric) transitions
    atom: int | None
    weight: float


@dataclass(frozen=True, order=True)
class ProductLabel:
    """
    Per-atom states ('0', '1' or 'e', atom 1 first) and photon numbers.

    Ordering is lexicographic over (atoms, n_L, n_R); '0' < '1' < 'e'.
    """

    atoms: str
    n_L: int = 0
    n_R: int = 0

    def __post_init__(self) -> None:
        if not self.atoms or set(self.atoms) - set("01e"):
            raise BasisError(f"Invalid atomic string {self.atoms!r}.")
        if self.n_L < 0 or self.n_R < 0:
            raise BasisError("Photon numbers must be >= 0.")

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def excitations(self) -> int:
        return self.atoms.count("e") + self.n_L + self.n_R

    def expand(self) -> Dict["ProductLabel", float]:
        return {self: 1.0}

    def with_photons(self, n_L: int, n_R: int) -> "ProductLabel":
        return dataclasses.replace(self, n_L=n_L, n_R=n_R)

    def absorptions(self) -> List[Transition]:
        transitions = []
        for i, atom in enumerate(self.atoms):
            if atom == "0" and self.n_L > 0:
                target = ProductLabel(_set(self.atoms, i, "e"), self.n_L - 1, self.n_R)
                transitions.append(Transition(target, Mode.L, i, math.sqrt(self.n_L)))
            elif atom == "1" and self.n_R > 0:
                target = ProductLabel(_set(self.atoms, i, "e"), self.n_L, self.n_R - 1)
                transitions.append(Transition(target, Mode.R, i, math.sqrt(self.n_R)))
        return transitions

    def emissions(self) -> List["ProductLabel"]:
        """Labels reached when an excited atom emits; photon numbers capped at 1."""
        labels = []
        for i, atom in enumerate(self.atoms):
            if atom != "e":
                continue
            if self.n_L == 0:
                labels.append(ProductLabel(_set(self.atoms, i, "0"), 1, self.n_R))
            if self.n_R == 0:
                labels.append(ProductLabel(_set(self.atoms, i, "1"), self.n_L, 1))
        return labels

    def __str__(self) -> str:
        return f"|{self.atoms}>|{_cavity(self.n_L, self.n_R)}>"


@dataclass(frozen=True, order=True)
class SymmetricLabel:
    """
    The normalized symmetric state of n atoms with `ones` atoms in |1>,
    `excited` atoms in |e> and the rest in |0>, times a cavity Fock state.
    """

    n: int
    ones: int
    excited: int = 0
    n_L: int = 0
    n_R: int = 0

    def __post_init__(self) -> None:
        if self.ones < 0 or self.excited < 0 or self.ones + self.excited > self.n:
            raise BasisError(
                f"No symmetric state of {self.n} atoms with {self.ones} ones "
                f"and {self.excited} excited."
            )
        if self.n_L < 0 or self.n_R < 0:
            raise BasisError("Photon numbers must be >= 0.")

    @property
    def zeros(self) -> int:
        return self.n - self.ones - self.excited

    @property
    def excitations(self) -> int:
        return self.excited + self.n_L + self.n_R

    def expand(self) -> Dict[ProductLabel, float]:
        """Product-label amplitudes of this symmetric state."""
        count = math.factorial(self.n) // (
            math.factorial(self.ones)
            * math.factorial(self.excited)
            * math.factorial(self.zeros)
        )
        amplitude = 1.0 / math.sqrt(count)
        expansion = {}
        for ones in combinations(range(self.n), self.ones):
            rest = [i for i in range(self.n) if i not in ones]
            for excited in combinations(rest, self.excited):
                atoms = "".join(
                    "1" if i in ones else "e" if i in excited else "0"
                    for i in range(self.n)
                )
                expansion[ProductLabel(atoms, self.n_L, self.n_R)] = amplitude
        return expansion

    def with_photons(self, n_L: int, n_R: int) -> "SymmetricLabel":
        return dataclasses.replace(self, n_L=n_L, n_R=n_R)

    def absorptions(self) -> List[Transition]:
        # Collective matrix elements between normalized symmetric states:
        # Σ_i |e><0|_i gives √(zeros·(excited+1)), Σ_i |e><1|_i gives
        # √(ones·(excited+1))
        transitions = []
        if self.n_L > 0 and self.zeros > 0:
            target = dataclasses.replace(
                self, excited=self.excited + 1, n_L=self.n_L - 1
            )
            weight = math.sqrt(self.zeros * (self.excited + 1) * self.n_L)
            transitions.append(Transition(target, Mode.L, None, weight))
        if self.n_R > 0 and self.ones > 0:
            target = dataclasses.replace(
                self, ones=self.ones - 1, excited=self.excited + 1, n_R=self.n_R - 1
            )
            weight = math.sqrt(self.ones * (self.excited + 1) * self.n_R)
            transitions.append(Transition(target, Mode.R, None, weight))
        return transitions

    def __str__(self) -> str:
        excited = f",e{self.excited}" if self.excited else ""
        return f"|{self.n},{self.ones}{excited}>|{_cavity(self.n_L, self.n_R)}>"


Label = ProductLabel | SymmetricLabel


def _set(atoms: str, i: int, state: str) -> str:
    return atoms[:i] + state + atoms[i + 1 :]


def _cavity(n_L: int, n_R: int) -> str:
    if n_L == 0 and n_R == 0:
        return "vac"
    return "L" * n_L + "R" * n_R


# Basis descriptors


def _check_n(n: int) -> None:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise BasisError(f"A basis needs n >= 1 atoms, got {n}.")


@dataclass(frozen=True)
class ReducedSymmetric:
    """[|0…0>|L>, |n,1>|R>, |sym e>|vac>]"""

    n: int

    def __post_init__(self) -> None:
        _check_n(self.n)


@dataclass(frozen=True)
class SingleExcitation:
    """[|0…0>|L>, |e_1>…|e_n>, |1_1>|R>…|1_n>|R>]; supports per-atom couplings."""

    n: int

    def __post_init__(self) -> None:
        _check_n(self.n)


@dataclass(frozen=True)
class SymmetricLadder:
    """[|n,m>|L>, |n,m+1>|R>, |sym m ones, one e>|vac>] for the m -> m+1 step."""

    n: int
    m: int

    def __post_init__(self) -> None:
        _check_n(self.n)
        if not 0 <= self.m < self.n:
            raise BasisError(f"Ladder step m = {self.m} outside 0..{self.n - 1}.")


@dataclass(frozen=True)
class FullTensor:
    """The states reachable from a seed in (atoms {0,1,e}^n) × (n_L, n_R ≤ 1)."""

    n: int
    cap: int = DEFAULT_FULL_TENSOR_CAP

    def __post_init__(self) -> None:
        _check_n(self.n)
        if self.n > self.cap:
            raise BasisSizeError(
                f"Full tensor basis for n = {self.n} exceeds the cap of {self.cap}."
            )


@dataclass(frozen=True)
class LabelSet:
    """An explicit list of labels, used for the post-jump vacuum sectors."""

    n: int
    labels: Tuple[Label, ...]

    def __post_init__(self) -> None:
        _check_n(self.n)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise BasisError("LabelSet labels must be distinct.")
        for label in self.labels:
            if label.n != self.n:
                raise BasisError(f"Label {label} is not an {self.n}-atom state.")


BasisDescriptor = (
    ReducedSymmetric | SingleExcitation | SymmetricLadder | FullTensor | LabelSet
)


@dataclass(frozen=True)
class IndexedBasis:
    descriptor: BasisDescriptor
    labels: Tuple[Label, ...]
    _index: Dict[Label, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(self.labels))
        index = {label: i for i, label in enumerate(self.labels)}
        if len(index) != len(self.labels):
            raise BasisError("Basis labels must be distinct.")
        object.__setattr__(self, "_index", index)

    @property
    def dimension(self) -> int:
        return len(self.labels)

    @property
    def n(self) -> int:
        return self.descriptor.n

    @property
    def is_symmetric(self) -> bool:
        return isinstance(self.labels[0], SymmetricLabel)

    def index(self, label: Label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise BasisError(f"{label} is not in the basis.") from None

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[Label]:
        return iter(self.labels)


def ladder_labels(n: int, step: int) -> Tuple[SymmetricLabel, ...]:
    return (
        SymmetricLabel(n, step, 0, 1, 0),
        SymmetricLabel(n, step + 1, 0, 0, 1),
        SymmetricLabel(n, step, 1, 0, 0),
    )


def build_basis(
    descriptor: BasisDescriptor,
    initial_hint: Label | Iterable[Label] | None = None,
) -> IndexedBasis:
    """
    Enumerate the labels of a sector in their documented order.

    FullTensor needs `initial_hint`, the label(s) to seed the reachable set
    from; symmetric labels seed with every product label they expand to.
    """
    match descriptor:
        case ReducedSymmetric(n=n):
            labels = ladder_labels(n, 0)
        case SymmetricLadder(n=n, m=m):
            labels = ladder_labels(n, m)
        case SingleExcitation(n=n):
            ground = "0" * n
            labels = (
                (ProductLabel(ground, 1, 0),)
                + tuple(ProductLabel(_set(ground, i, "e")) for i in range(n))
                + tuple(ProductLabel(_set(ground, i, "1"), 0, 1) for i in range(n))
            )
        case FullTensor(n=n):
            if initial_hint is None:
                raise BasisError("FullTensor needs an initial state to seed from.")
            labels = tuple(sorted(_reachable(n, _seeds(initial_hint))))
        case LabelSet(labels=labels):
            pass
        case _:
            raise BasisError(f"Unknown basis descriptor {descriptor!r}.")
    basis = IndexedBasis(descriptor, labels)
    logger.debug("Built %s with dimension %d", descriptor, basis.dimension)
    return basis


def _seeds(hint: Label | Iterable[Label]) -> List[ProductLabel]:
    hints = [hint] if isinstance(hint, (ProductLabel, SymmetricLabel)) else hint
    seeds: List[ProductLabel] = []
    for label in hints:
        seeds.extend(label.expand())
    return seeds


def _reachable(n: int, seeds: List[ProductLabel]) -> set:
    # Breadth-first closure over absorptions and emissions
    for seed in seeds:
        if seed.n != n:
            raise BasisError(f"Seed {seed} is not an {n}-atom state.")
        if seed.n_L > 1 or seed.n_R > 1:
            raise BasisError("Cavity occupations above one photon are not modeled.")
    seen = set(seeds)
    queue = deque(seeds)
    while queue:
        label = queue.popleft()
        neighbours = [t.target for t in label.absorptions()] + label.emissions()
        for neighbour in neighbours:
            if neighbour not in seen:
                seen.add(neighbour)
                queue.append(neighbour)
    return seen


# Hamiltonian


@dataclass(frozen=True, eq=False)
class JumpChannel:
    """
    A collapse operator C (target_dim × source_dim) with its rate.

    Cavity channels carry the detector that sees their photon; atomic loss
    (gamma_s) has no detector.
    """

    name: str
    rate: float
    operator: np.ndarray
    source: IndexedBasis
    target: IndexedBasis
    detector: Detector | None = None

    def __post_init__(self) -> None:
        self.operator.setflags(write=False)

    @property
    def decay(self) -> np.ndarray:
        """rate·C†C on the source basis."""
        return self.rate * (self.operator.conj().T @ self.operator)


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """
    H_eff = H_herm - (i/2)·Σ rate·C†C in the interaction picture.

    `frame_matrix` adds delta_L on the diagonal; evolving with it gives the
    slowly varying amplitudes in which the L-photon state has no phase.
    """

    params: SystemParams
    basis: IndexedBasis
    matrix: np.ndarray
    hermitian: np.ndarray
    channels: Tuple[JumpChannel, ...]

    def __post_init__(self) -> None:
        self.matrix.setflags(write=False)
        self.hermitian.setflags(write=False)

    @property
    def anti_hermitian(self) -> np.ndarray:
        return self.matrix - self.hermitian

    @property
    def frame_shift(self) -> float:
        return self.params.delta_L

    @property
    def frame_matrix(self) -> np.ndarray:
        return self.matrix + self.frame_shift * np.eye(self.basis.dimension)

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def channel(self, detector: Detector) -> JumpChannel:
        for channel in self.channels:
            if channel.detector is detector:
                return channel
        raise BasisError(f"No jump channel feeds detector {detector.name}.")


def build_hamiltonian(
    params: SystemParams,
    basis: IndexedBasis,
    profile: CouplingProfile | None = None,
) -> EffectiveHamiltonian:
    """
    Assemble H_eff for the basis.

    Without a profile every atom couples with g_L and g_R from params. A
    profile gives each atom its own coupling, used for both modes; it needs
    a product-label basis.
    """
    n = basis.n
    if n != params.n_atoms:
        raise BasisError(
            f"Basis is for {n} atoms but params have n_atoms = {params.n_atoms}."
        )
    if profile is not None:
        if basis.is_symmetric:
            raise BasisError(
                "Per-atom couplings need a SingleExcitation or FullTensor basis."
            )
        if profile.n_atoms != n:
            raise BasisError(
                f"Profile has {profile.n_atoms} atoms, basis has {n}; "
                "select the protocol atoms first."
            )
        g_L = g_R = profile.couplings()
    else:
        g_L = np.full(n, params.g_L)
        g_R = np.full(n, params.g_R)
    couplings = {Mode.L: g_L, Mode.R: g_R}
    uniform = {Mode.L: params.g_L, Mode.R: params.g_R}

    dim = basis.dimension
    hermitian = np.zeros((dim, dim), dtype=complex)
    for j, label in enumerate(basis):
        hermitian[j, j] = -params.delta_L * label.n_L - params.delta_R * label.n_R
        for transition in label.absorptions():
            if transition.target not in basis:
                continue
            k = basis.index(transition.target)
            if transition.atom is None:
                g = uniform[transition.mode]
            else:
                g = couplings[transition.mode][transition.atom]
            hermitian[k, j] += g * transition.weight
            hermitian[j, k] += g * transition.weight

    channels = _jump_channels(params, basis)
    decay = sum((channel.decay for channel in channels), np.zeros((dim, dim)))
    matrix = hermitian - 0.5j * decay
    return EffectiveHamiltonian(params, basis, matrix, hermitian, channels)


def post_jump_basis(basis: IndexedBasis) -> IndexedBasis:
    """The cavity-vacuum labels reached by one photon leaving the cavity."""
    labels: List[Label] = []
    for label in basis:
        for n_L, n_R in ((label.n_L - 1, label.n_R), (label.n_L, label.n_R - 1)):
            if n_L < 0 or n_R < 0:
                continue
            lowered = label.with_photons(n_L, n_R)
            if lowered not in labels:
                labels.append(lowered)
    if not labels:
        raise BasisError("No state in the basis holds a cavity photon.")
    return build_basis(LabelSet(basis.n, tuple(labels)))


def _jump_channels(
    params: SystemParams, basis: IndexedBasis
) -> Tuple[JumpChannel, ...]:
    target = post_jump_basis(basis)
    a_L = np.zeros((target.dimension, basis.dimension))
    a_R = np.zeros((target.dimension, basis.dimension))
    for j, label in enumerate(basis):
        if label.n_L > 0:
            k = target.index(label.with_photons(label.n_L - 1, label.n_R))
            a_L[k, j] = math.sqrt(label.n_L)
        if label.n_R > 0:
            k = target.index(label.with_photons(label.n_L, label.n_R - 1))
            a_R[k, j] = math.sqrt(label.n_R)
    channels = [
        JumpChannel("kappa_L", params.kappa_L, a_L, basis, target, Detector.D0),
        JumpChannel("kappa_R", params.kappa_R, a_R, basis, target, Detector.D1),
    ]
    if params.gamma_s > 0:
        excited = [_excited_count(label) for label in basis]
        loss = np.diag(np.sqrt(np.array(excited, dtype=float)))
        channels.append(JumpChannel("gamma_s", params.gamma_s, loss, basis, basis))
    return tuple(channels)


def _excited_count(label: Label) -> int:
    if isinstance(label, SymmetricLabel):
        return label.excited
    return label.atoms.count("e")


# States


@dataclass(frozen=True, eq=False)
class StateVector:
    basis: IndexedBasis
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.basis.dimension,):
            raise StateError(
                f"Amplitude shape {amplitudes.shape} does not match basis "
                f"dimension {self.basis.dimension}."
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def basis_state(cls, basis: IndexedBasis, label: Label) -> "StateVector":
        amplitudes = np.zeros(basis.dimension, dtype=complex)
        amplitudes[basis.index(label)] = 1.0
        return cls(basis, amplitudes)

    @classmethod
    def from_mapping(
        cls, basis: IndexedBasis, amplitudes: Mapping[Label, complex]
    ) -> "StateVector":
        vector = np.zeros(basis.dimension, dtype=complex)
        for label, amplitude in amplitudes.items():
            vector[basis.index(label)] += amplitude
        return cls(basis, vector)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def amplitude(self, label: Label) -> complex:
        return complex(self.amplitudes[self.basis.index(label)])

    def normalized(self) -> "StateVector":
        norm_sq = self.norm_sq
        if norm_sq <= 0.0:
            raise StateError("Cannot normalize a zero vector.")
        return StateVector(self.basis, self.amplitudes / math.sqrt(norm_sq))

    def check_normalized(self, tolerance: float = 1e-9) -> None:
        if abs(self.norm_sq - 1.0) > tolerance:
            raise StateError(f"State is not normalized: norm² = {self.norm_sq}.")

    def inject_photon(self, next_basis: IndexedBasis) -> "StateVector":
        """Add one L photon to every component and express it in next_basis."""
        vector = np.zeros(next_basis.dimension, dtype=complex)
        for label, amplitude in zip(self.basis, self.amplitudes, strict=True):
            if amplitude == 0:
                continue
            injected = label.with_photons(label.n_L + 1, label.n_R)
            vector[next_basis.index(injected)] += amplitude
        return StateVector(next_basis, vector)

    def __str__(self) -> str:
        terms = [
            f"({a.real:+.4g}{a.imag:+.4g}j){label}"
            for label, a in zip(self.basis, self.amplitudes, strict=True)
            if abs(a) > 1e-12
        ]
        return " ".join(terms) if terms else "0"
