"""
Quantum-jump Monte Carlo of detector clicks and the reinjection protocol.

A trial starts from one injected L photon and ends with exactly one of: a D0
click, a D1 click, or a timeout (no click by T_max, or a photon or atomic
excitation lost without a detector firing). Each trial consumes three
uniforms from its run's generator, in order: the no-click probability the
jump happens at, the channel choice and the detector efficiency draw.

Every run owns a counter-based Philox stream keyed by (seed, stream index),
and batched estimators process runs in fixed-size chunks, so results do not
depend on the number of worker processes.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum, auto, unique
from typing import Dict, List, Sequence, Tuple

import numpy as np

from dicke.analysis import dicke_state, embed, fidelity
from dicke.dynamics import (
    ConditionalPropagator,
    DenseEvolution,
    IntegratorControls,
    first_passage,
    integrate_conditional,
)
from dicke.model import (
    DEFAULT_FULL_TENSOR_CAP,
    BasisDescriptor,
    BasisError,
    CouplingProfile,
    Detector,
    EffectiveHamiltonian,
    FullTensor,
    IndexedBasis,
    JumpChannel,
    ParameterError,
    ReducedSymmetric,
    SingleExcitation,
    StateError,
    StateVector,
    SymmetricLadder,
    SystemParams,
    build_basis,
    build_hamiltonian,
    optimal_detuning,
    post_jump_basis,
)

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
DRAWS_PER_TRIAL = 3
# Collapses with ‖Cψ‖² below this fraction of ‖ψ‖² cannot happen
ZERO_NORM = 1e-24


class JumpError(ValueError):
    """A jump channel was applied to a state it annihilates."""


@unique
class Terminal(Enum):
    D0_CLICK = auto()
    D1_CLICK = auto()
    TIMEOUT = auto()

    @property
    def label(self) -> str:
        return self.name.lower()


TERMINALS = tuple(Terminal)
_CODE = {terminal: i for i, terminal in enumerate(TERMINALS)}
_CLICK = {Detector.D0: Terminal.D0_CLICK, Detector.D1: Terminal.D1_CLICK}


def trajectory_rng(seed: int, stream: int, substream: int = 0) -> np.random.Generator:
    """The generator of run `stream`; independent of every other stream."""
    if seed < 0 or stream < 0 or substream < 0:
        raise ParameterError("Seed and stream indices must be >= 0.")
    bit_generator = np.random.Philox(key=seed, counter=[0, 0, substream, stream])
    return np.random.Generator(bit_generator)


@dataclass(frozen=True)
class DetectionEvent:
    time: float
    detector: Detector
    trial_index: int
    ladder_step: int = 0


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    terminal: Terminal
    # Click time, loss time, or T_max for a plain timeout
    time: float
    post_state: StateVector
    event: DetectionEvent | None = None
    # The channel that fired, also for unheralded losses
    channel: str | None = None


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    success: bool
    trials_used: Tuple[int, ...]
    elapsed: float
    final_state: StateVector
    rng_seed: int
    stream: int = 0
    events: Tuple[DetectionEvent, ...] = ()
    terminals: Tuple[Terminal, ...] = ()
    m_reached: int = 0
    # Fidelity of the final state with the target Dicke state
    fidelity: float | None = None
    # Per ladder step, from the full tensor oracle
    step_fidelities: Tuple[float, ...] = ()
    # Simulated time spent on each ladder step
    step_elapsed: Tuple[float, ...] = ()

    @property
    def total_trials(self) -> int:
        return sum(self.trials_used)


def apply_jump(psi: StateVector, channel: JumpChannel) -> StateVector:
    """C·ψ/‖C·ψ‖ in the channel's target basis."""
    if psi.basis != channel.source:
        raise BasisError(f"State is not in the source basis of {channel.name}.")
    collapsed = channel.operator @ psi.amplitudes
    norm_sq = float(np.vdot(collapsed, collapsed).real)
    if norm_sq == 0.0 or norm_sq <= ZERO_NORM * psi.norm_sq:
        raise JumpError(f"Channel {channel.name} cannot fire from this state.")
    return StateVector(channel.target, collapsed / math.sqrt(norm_sq))


def click_densities(
    evolution: DenseEvolution, channels: Sequence[JumpChannel], times
) -> np.ndarray:
    """rate·‖C·ψ(t)‖² per channel; shape (len(times), len(channels))."""
    amplitudes = np.atleast_2d(evolution.amplitudes(np.atleast_1d(times)))
    return np.stack(
        [_channel_weight(channel, amplitudes) for channel in channels], axis=-1
    )


def _channel_weight(channel: JumpChannel, amplitudes: np.ndarray) -> np.ndarray:
    projected = (channel.operator * amplitudes[:, np.newaxis, :]).sum(axis=-1)
    return channel.rate * (projected.real**2 + projected.imag**2).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """Terminal codes, times and channel indices (-1: none) of many trials."""

    terminals: np.ndarray
    times: np.ndarray
    channels: np.ndarray


def _sample_batch(
    hamiltonian: EffectiveHamiltonian,
    evolution: DenseEvolution,
    uniforms: np.ndarray,
    t_max: float,
) -> TrialBatch:
    # Row i of the result depends on row i of `uniforms` only
    count = uniforms.shape[0]
    jump_times = first_passage(evolution.norm_sq, uniforms[:, 0], t_max)
    jumped = np.isfinite(jump_times)

    terminals = np.full(count, _CODE[Terminal.TIMEOUT])
    times = np.where(jumped, jump_times, t_max)
    channels = np.full(count, -1)
    if not jumped.any():
        return TrialBatch(terminals, times, channels)

    weights = click_densities(evolution, hamiltonian.channels, jump_times[jumped])
    cumulative = np.cumsum(weights, axis=1)
    threshold = uniforms[jumped, 1] * cumulative[:, -1]
    chosen = (cumulative > threshold[:, np.newaxis]).argmax(axis=1)
    channels[jumped] = chosen

    efficiency = hamiltonian.params.detector_efficiency
    codes = []
    for k, u_efficiency in zip(chosen, uniforms[jumped, 2], strict=True):
        detector = hamiltonian.channels[k].detector
        # Missed photons and atomic losses leave no click
        if detector is None or u_efficiency >= efficiency:
            codes.append(_CODE[Terminal.TIMEOUT])
        else:
            codes.append(_CODE[_CLICK[detector]])
    terminals[jumped] = codes
    return TrialBatch(terminals, times, channels)


def _evolution(
    hamiltonian: EffectiveHamiltonian,
    psi0: StateVector,
    t_max: float,
    controls: IntegratorControls | None,
) -> DenseEvolution:
    if controls is None:
        return ConditionalPropagator.from_hamiltonian(hamiltonian, psi0)
    return integrate_conditional(
        hamiltonian, psi0, t_max, controls, t_eval=[0.0, t_max]
    ).dense


def sample_trial(
    hamiltonian: EffectiveHamiltonian,
    psi0: StateVector,
    t_max: float,
    rng: np.random.Generator,
    trial_index: int = 0,
    ladder_step: int = 0,
    evolution: DenseEvolution | None = None,
    controls: IntegratorControls | None = None,
) -> TrialOutcome:
    """
    One waiting-time trial from psi0.

    The jump time solves ‖ψ(t)‖² = u by bisection on the dense evolution;
    the channel is drawn with probability rate_k·‖C_k·ψ‖². Pass `evolution`
    to reuse the dense output of psi0 across trials.
    """
    if evolution is None:
        evolution = _evolution(hamiltonian, psi0, t_max, controls)
    uniforms = rng.random((1, DRAWS_PER_TRIAL))
    batch = _sample_batch(hamiltonian, evolution, uniforms, t_max)
    return _outcome(hamiltonian, evolution, batch, 0, trial_index, ladder_step)


def _outcome(
    hamiltonian: EffectiveHamiltonian,
    evolution: DenseEvolution,
    batch: TrialBatch,
    row: int,
    trial_index: int,
    ladder_step: int,
) -> TrialOutcome:
    terminal = TERMINALS[batch.terminals[row]]
    time = float(batch.times[row])
    psi = evolution.state_at(time)
    if batch.channels[row] < 0:
        return TrialOutcome(terminal, time, psi)

    channel = hamiltonian.channels[batch.channels[row]]
    if channel.detector is None:
        # Atomic loss: the conditional state at the loss time
        return TrialOutcome(terminal, time, psi, channel=channel.name)
    post_state = apply_jump(psi, channel)
    event = None
    if terminal is not Terminal.TIMEOUT:
        event = DetectionEvent(time, channel.detector, trial_index, ladder_step)
    return TrialOutcome(terminal, time, post_state, event, channel.name)


@dataclass(frozen=True, eq=False)
class _Sector:
    """A Hamiltonian, its injected initial state and their dense evolution."""

    hamiltonian: EffectiveHamiltonian
    psi0: StateVector
    evolution: DenseEvolution
    t_max: float

    @property
    def basis(self) -> IndexedBasis:
        return self.hamiltonian.basis


def injected_sector(
    params: SystemParams,
    descriptor: BasisDescriptor,
    profile: CouplingProfile | None = None,
    step: int = 0,
) -> Tuple[EffectiveHamiltonian, StateVector]:
    """
    H_eff of a sector and |n,step> with one L photon injected, in its basis.

    Symmetric and single-excitation sectors list the injected state first;
    the full tensor space is seeded with its product expansion.
    """
    if isinstance(descriptor, FullTensor):
        ladder = build_basis(SymmetricLadder(params.n_atoms, step))
        injected = StateVector.basis_state(ladder, ladder.labels[0])
        basis = build_basis(descriptor, initial_hint=ladder.labels[0])
        psi0 = embed(injected, basis)
    else:
        basis = build_basis(descriptor)
        psi0 = StateVector.basis_state(basis, basis.labels[0])
    return build_hamiltonian(params, basis, profile), psi0


def _sector(
    params: SystemParams,
    descriptor: BasisDescriptor,
    profile: CouplingProfile | None = None,
    controls: IntegratorControls | None = None,
    step: int = 0,
) -> _Sector:
    hamiltonian, psi0 = injected_sector(params, descriptor, profile, step)
    t_max = params.timeout_horizon
    evolution = _evolution(hamiltonian, psi0, t_max, controls)
    return _Sector(hamiltonian, psi0, evolution, t_max)


def _default_descriptor(
    params: SystemParams,
    profile: CouplingProfile | None,
    descriptor: BasisDescriptor | None,
    step: int = 0,
) -> BasisDescriptor:
    if descriptor is not None:
        return descriptor
    if profile is not None:
        return SingleExcitation(params.n_atoms)
    if step > 0:
        return SymmetricLadder(params.n_atoms, step)
    return ReducedSymmetric(params.n_atoms)


def _ladder_sectors(params: SystemParams, target_m: int) -> List[_Sector]:
    sectors = []
    for step in range(target_m):
        tuned = params.replace(delta_R=optimal_detuning(params, step))
        sectors.append(_sector(tuned, SymmetricLadder(params.n_atoms, step)))
    return sectors


def _chunks(total: int) -> List[Tuple[int, int]]:
    return [
        (start, min(start + CHUNK_SIZE, total))
        for start in range(0, total, CHUNK_SIZE)
    ]


def _map_chunks(function, arguments: List[tuple], jobs: int) -> list:
    # Executor.map yields in submission order, which fixes the reduction order
    if jobs <= 1 or len(arguments) <= 1:
        return [function(*args) for args in arguments]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(function, *zip(*arguments, strict=True)))


# Single runs


def run_protocol(
    params: SystemParams,
    max_trials: int = 10,
    seed: int = 0,
    stream: int = 0,
    *,
    rng: np.random.Generator | None = None,
    profile: CouplingProfile | None = None,
    descriptor: BasisDescriptor | None = None,
    controls: IntegratorControls | None = None,
) -> ProtocolResult:
    """
    Inject an L photon into |0…0> and wait for a click, up to max_trials times.

    A D1 click heralds the W state and ends the run. A D0 click returns the
    atoms to |0…0>, and a timeout is discarded; both are followed by a fresh
    injection.
    """
    if max_trials < 1:
        raise ParameterError(f"max_trials must be >= 1, got {max_trials}.")
    descriptor = _default_descriptor(params, profile, descriptor)
    sector = _sector(params, descriptor, profile, controls)
    rng = rng if rng is not None else trajectory_rng(seed, stream)

    events: List[DetectionEvent] = []
    terminals: List[Terminal] = []
    elapsed = 0.0
    outcome = None
    for trial in range(max_trials):
        outcome = sample_trial(
            sector.hamiltonian,
            sector.psi0,
            sector.t_max,
            rng,
            trial_index=trial,
            evolution=sector.evolution,
        )
        elapsed += outcome.time
        terminals.append(outcome.terminal)
        if outcome.event is not None:
            events.append(outcome.event)
        if outcome.terminal is Terminal.D1_CLICK:
            break

    success = outcome.terminal is Terminal.D1_CLICK
    final_state = outcome.post_state
    herald_fidelity = None
    if success:
        target = dicke_state(params.n_atoms, 1, final_state.basis)
        herald_fidelity = fidelity(final_state, target)
    logger.debug(
        "Protocol stream %d: %s after %d trials",
        stream,
        "success" if success else "failure",
        len(terminals),
    )
    return ProtocolResult(
        success=success,
        trials_used=(len(terminals),),
        elapsed=elapsed,
        final_state=final_state,
        rng_seed=seed,
        stream=stream,
        events=tuple(events),
        terminals=tuple(terminals),
        m_reached=1 if success else 0,
        fidelity=herald_fidelity,
        step_elapsed=(elapsed,),
    )


def run_ladder(
    params: SystemParams,
    target_m: int,
    max_trials_per_step: int = 10,
    seed: int = 0,
    stream: int = 0,
    *,
    rng: np.random.Generator | None = None,
    oracle: bool = False,
    oracle_cap: int = DEFAULT_FULL_TENSOR_CAP,
) -> ProtocolResult:
    """
    Climb |n,0> -> |n,1> -> … -> |n,target_m>, one heralded photon per step.

    Step m uses the SymmetricLadder(n, m) sector with Δ_R retuned by
    `optimal_detuning`. A D0 click leaves the atoms in |n,m>, so only the
    current step repeats; a timeout re-prepares |n,m> as well. With `oracle`
    each heralded step is replayed in the full tensor space and the fidelity
    of its post-click state with |n,m+1> is recorded.
    """
    n = params.n_atoms
    if not 1 <= target_m <= n:
        raise ParameterError(f"target_m = {target_m} outside 1..{n}.")
    if max_trials_per_step < 0:
        raise ParameterError("max_trials_per_step must be >= 0.")
    rng = rng if rng is not None else trajectory_rng(seed, stream)
    sectors = _ladder_sectors(params, target_m)

    events: List[DetectionEvent] = []
    terminals: List[Terminal] = []
    trials_used: List[int] = []
    step_fidelities: List[float] = []
    step_elapsed: List[float] = []
    elapsed = 0.0
    post_state = None
    for step, sector in enumerate(sectors):
        trials = 0
        step_time = 0.0
        heralded = None
        while trials < max_trials_per_step:
            outcome = sample_trial(
                sector.hamiltonian,
                sector.psi0,
                sector.t_max,
                rng,
                trial_index=trials,
                ladder_step=step,
                evolution=sector.evolution,
            )
            trials += 1
            elapsed += outcome.time
            step_time += outcome.time
            terminals.append(outcome.terminal)
            if outcome.event is not None:
                events.append(outcome.event)
            if outcome.terminal is Terminal.D1_CLICK:
                heralded = outcome
                break
        trials_used.append(trials)
        step_elapsed.append(step_time)

        if heralded is None:
            partial = dicke_state(n, step, post_jump_basis(sector.basis))
            logger.info("Ladder stream %d stopped at |%d,%d>", stream, n, step)
            return ProtocolResult(
                success=False,
                trials_used=tuple(trials_used),
                elapsed=elapsed,
                final_state=partial,
                rng_seed=seed,
                stream=stream,
                events=tuple(events),
                terminals=tuple(terminals),
                m_reached=step,
                step_fidelities=tuple(step_fidelities),
                step_elapsed=tuple(step_elapsed),
            )

        post_state = heralded.post_state
        if oracle:
            step_fidelities.append(
                _oracle_step_fidelity(
                    sector.hamiltonian.params, step, heralded.time, oracle_cap
                )
            )
        if step + 1 < target_m:
            _check_reinjection(post_state, sectors[step + 1])

    target = dicke_state(n, target_m, post_state.basis)
    return ProtocolResult(
        success=True,
        trials_used=tuple(trials_used),
        elapsed=elapsed,
        final_state=post_state,
        rng_seed=seed,
        stream=stream,
        events=tuple(events),
        terminals=tuple(terminals),
        m_reached=target_m,
        fidelity=fidelity(post_state, target),
        step_fidelities=tuple(step_fidelities),
        step_elapsed=tuple(step_elapsed),
    )


def _check_reinjection(post_state: StateVector, sector: _Sector) -> None:
    injected = post_state.inject_photon(sector.basis)
    if fidelity(injected, sector.psi0) < 1.0 - 1e-9:
        raise StateError("The heralded state does not seed the next ladder step.")


def _oracle_step_fidelity(
    params: SystemParams, step: int, click_time: float, cap: int
) -> float:
    """Replay one heralded ladder step in the full tensor space."""
    n = params.n_atoms
    hamiltonian, psi0 = injected_sector(params, FullTensor(n, cap), step=step)
    evolution = ConditionalPropagator.from_hamiltonian(hamiltonian, psi0)
    d1 = hamiltonian.channel(Detector.D1)
    collapsed = apply_jump(evolution.state_at(click_time), d1)
    return fidelity(collapsed, dicke_state(n, step + 1, collapsed.basis))


# Batched estimators


@dataclass(frozen=True, eq=False)
class SuccessEstimate:
    """Single-trial outcome frequencies over n_traj independent trials."""

    p_hat: float
    stderr: float
    n_traj: int
    seed: int
    t_max: float
    counts: Dict[str, int]
    # Unheralded terminations per channel: missed photons and atomic losses
    losses: Dict[str, int]
    edges: np.ndarray
    histogram: np.ndarray
    terminals: np.ndarray
    times: np.ndarray
    channels: np.ndarray
    channel_names: Tuple[str, ...]

    @property
    def click_times(self) -> np.ndarray:
        return self.times[self.terminals == _CODE[Terminal.D1_CLICK]]

    def terminal(self, index: int) -> Terminal:
        return TERMINALS[self.terminals[index]]

    def channel_name(self, index: int) -> str | None:
        k = self.channels[index]
        return None if k < 0 else self.channel_names[k]


def _success_chunk(
    params: SystemParams,
    descriptor: BasisDescriptor,
    profile: CouplingProfile | None,
    step: int,
    seed: int,
    start: int,
    stop: int,
) -> TrialBatch:
    sector = _sector(params, descriptor, profile, step=step)
    uniforms = np.array(
        [trajectory_rng(seed, i).random(DRAWS_PER_TRIAL) for i in range(start, stop)]
    )
    return _sample_batch(sector.hamiltonian, sector.evolution, uniforms, sector.t_max)


def estimate_success(
    params: SystemParams,
    n_traj: int,
    seed: int = 0,
    bins: int = 50,
    jobs: int = 1,
    *,
    profile: CouplingProfile | None = None,
    descriptor: BasisDescriptor | None = None,
    step: int = 0,
) -> SuccessEstimate:
    """
    Run n_traj single trials; trial i uses stream i of `seed`.

    Trial i is the same trial `sample_trial` gives with `trajectory_rng(seed,
    i)`. For step > 0 the SymmetricLadder(n, step) sector is used with the
    Δ_R in params as given.
    """
    if n_traj < 1:
        raise ParameterError(f"n_traj must be >= 1, got {n_traj}.")
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}.")
    descriptor = _default_descriptor(params, profile, descriptor, step)
    hamiltonian, _ = injected_sector(params, descriptor, profile, step)
    arguments = [
        (params, descriptor, profile, step, seed, start, stop)
        for start, stop in _chunks(n_traj)
    ]
    batches = _map_chunks(_success_chunk, arguments, jobs)
    terminals = np.concatenate([batch.terminals for batch in batches])
    times = np.concatenate([batch.times for batch in batches])
    channels = np.concatenate([batch.channels for batch in batches])

    counts = {t.label: int((terminals == _CODE[t]).sum()) for t in TERMINALS}
    names = tuple(channel.name for channel in hamiltonian.channels)
    lost = (terminals == _CODE[Terminal.TIMEOUT]) & (channels >= 0)
    losses = {name: int((channels[lost] == k).sum()) for k, name in enumerate(names)}
    p_hat = counts[Terminal.D1_CLICK.label] / n_traj
    t_max = params.timeout_horizon
    click_times = times[terminals == _CODE[Terminal.D1_CLICK]]
    histogram, edges = np.histogram(click_times, bins=bins, range=(0.0, t_max))
    estimate = SuccessEstimate(
        p_hat=p_hat,
        stderr=math.sqrt(p_hat * (1.0 - p_hat) / n_traj),
        n_traj=n_traj,
        seed=seed,
        t_max=t_max,
        counts=counts,
        losses=losses,
        edges=edges,
        histogram=histogram,
        terminals=terminals,
        times=times,
        channels=channels,
        channel_names=names,
    )
    logger.info(
        "%d trials: p_hat = %.5f ± %.5f (%s)",
        n_traj,
        estimate.p_hat,
        estimate.stderr,
        ", ".join(f"{label} {count}" for label, count in counts.items()),
    )
    return estimate


def _climb(
    sectors: Sequence[_Sector], budget: int, seed: int, start: int, stop: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Streams start..stop through consecutive sectors in lockstep rounds.

    Each stream draws from its own generator in trial order, so its result is
    the one the single-run functions give for the same stream.
    """
    generators = [trajectory_rng(seed, i) for i in range(start, stop)]
    count = stop - start
    trials = np.zeros((count, len(sectors)), dtype=int)
    elapsed = np.zeros(count)
    reached = np.zeros(count, dtype=int)
    active = np.arange(count)
    for step, sector in enumerate(sectors):
        waiting = active
        for _ in range(budget):
            if waiting.size == 0:
                break
            uniforms = np.array(
                [generators[i].random(DRAWS_PER_TRIAL) for i in waiting]
            )
            batch = _sample_batch(
                sector.hamiltonian, sector.evolution, uniforms, sector.t_max
            )
            trials[waiting, step] += 1
            elapsed[waiting] += batch.times
            heralded = batch.terminals == _CODE[Terminal.D1_CLICK]
            reached[waiting[heralded]] += 1
            waiting = waiting[~heralded]
        active = active[np.isin(active, waiting, invert=True)]
    return trials, elapsed, reached


def _protocol_chunk(
    params: SystemParams,
    descriptor: BasisDescriptor,
    profile: CouplingProfile | None,
    max_trials: int,
    seed: int,
    start: int,
    stop: int,
):
    sector = _sector(params, descriptor, profile)
    return _climb([sector], max_trials, seed, start, stop)


def _ladder_chunk(
    params: SystemParams, target_m: int, budget: int, seed: int, start: int, stop: int
):
    return _climb(_ladder_sectors(params, target_m), budget, seed, start, stop)


def _gather(pieces: list) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    trials = np.concatenate([piece[0] for piece in pieces])
    elapsed = np.concatenate([piece[1] for piece in pieces])
    reached = np.concatenate([piece[2] for piece in pieces])
    return trials, elapsed, reached


@dataclass(frozen=True, eq=False)
class ProtocolEstimate:
    n_runs: int
    max_trials: int
    seed: int
    successes: np.ndarray
    trials_used: np.ndarray
    elapsed: np.ndarray

    @property
    def success_rate(self) -> float:
        return float(self.successes.mean())

    @property
    def stderr(self) -> float:
        p = self.success_rate
        return math.sqrt(p * (1.0 - p) / self.n_runs)

    @property
    def trial_histogram(self) -> np.ndarray:
        """Runs heralded at trial k, for k = 1..max_trials."""
        heralded_at = self.trials_used[self.successes]
        return np.bincount(heralded_at, minlength=self.max_trials + 1)[1:]

    @property
    def mean_trials(self) -> float:
        if not self.successes.any():
            return math.nan
        return float(self.trials_used[self.successes].mean())


def estimate_protocol(
    params: SystemParams,
    n_runs: int,
    max_trials: int = 10,
    seed: int = 0,
    jobs: int = 1,
    *,
    profile: CouplingProfile | None = None,
    descriptor: BasisDescriptor | None = None,
) -> ProtocolEstimate:
    """Run i is `run_protocol(params, max_trials, seed, stream=i)`."""
    if n_runs < 1:
        raise ParameterError(f"n_runs must be >= 1, got {n_runs}.")
    if max_trials < 1:
        raise ParameterError(f"max_trials must be >= 1, got {max_trials}.")
    descriptor = _default_descriptor(params, profile, descriptor)
    arguments = [
        (params, descriptor, profile, max_trials, seed, start, stop)
        for start, stop in _chunks(n_runs)
    ]
    trials, elapsed, reached = _gather(_map_chunks(_protocol_chunk, arguments, jobs))
    estimate = ProtocolEstimate(
        n_runs=n_runs,
        max_trials=max_trials,
        seed=seed,
        successes=reached == 1,
        trials_used=trials[:, 0],
        elapsed=elapsed,
    )
    logger.info(
        "%d protocol runs of up to %d trials: success rate %.5f ± %.5f",
        n_runs,
        max_trials,
        estimate.success_rate,
        estimate.stderr,
    )
    return estimate


@dataclass(frozen=True, eq=False)
class LadderEstimate:
    target_m: int
    n_runs: int
    max_trials_per_step: int
    seed: int
    # Trials spent per run and step; shape (n_runs, target_m)
    trials: np.ndarray
    # Ladder steps heralded per run
    reached: np.ndarray
    elapsed: np.ndarray

    @property
    def success_rate(self) -> float:
        return float((self.reached == self.target_m).mean())

    @property
    def attempts(self) -> np.ndarray:
        return self.trials.sum(axis=0)

    @property
    def heralds(self) -> np.ndarray:
        return np.array([(self.reached > m).sum() for m in range(self.target_m)])

    @property
    def step_probabilities(self) -> np.ndarray:
        """D1 clicks per trial at each step; nan where no run got there."""
        attempts = self.attempts.astype(float)
        return np.divide(
            self.heralds,
            attempts,
            out=np.full(self.target_m, np.nan),
            where=attempts > 0,
        )

    @property
    def step_stderr(self) -> np.ndarray:
        p = self.step_probabilities
        attempts = self.attempts.astype(float)
        return np.divide(
            np.sqrt(p * (1.0 - p)),
            np.sqrt(attempts),
            out=np.full(self.target_m, np.nan),
            where=attempts > 0,
        )


def estimate_ladder(
    params: SystemParams,
    target_m: int,
    max_trials_per_step: int = 10,
    n_runs: int = 1000,
    seed: int = 0,
    jobs: int = 1,
) -> LadderEstimate:
    """Run i is `run_ladder(params, target_m, max_trials_per_step, seed, i)`."""
    n = params.n_atoms
    if not 1 <= target_m <= n:
        raise ParameterError(f"target_m = {target_m} outside 1..{n}.")
    if max_trials_per_step < 0:
        raise ParameterError("max_trials_per_step must be >= 0.")
    if n_runs < 1:
        raise ParameterError(f"n_runs must be >= 1, got {n_runs}.")
    arguments = [
        (params, target_m, max_trials_per_step, seed, start, stop)
        for start, stop in _chunks(n_runs)
    ]
    trials, elapsed, reached = _gather(_map_chunks(_ladder_chunk, arguments, jobs))
    estimate = LadderEstimate(
        target_m=target_m,
        n_runs=n_runs,
        max_trials_per_step=max_trials_per_step,
        seed=seed,
        trials=trials,
        reached=reached,
        elapsed=elapsed,
    )
    logger.info(
        "%d ladder runs to |%d,%d>: success rate %.5f",
        n_runs,
        n,
        target_m,
        estimate.success_rate,
    )
    return estimate
