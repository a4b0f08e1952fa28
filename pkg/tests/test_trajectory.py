import math

import numpy as np
import pytest
from scipy import integrate

from dicke.analysis import click_time_gof
from dicke.analytic import success_probability_closed
from dicke.dynamics import ConditionalPropagator, IntegratorControls
from dicke.model import (
    TWO_PI_MHZ,
    BasisError,
    CouplingProfile,
    Detector,
    FullTensor,
    ParameterError,
    ReducedSymmetric,
    SingleExcitation,
    SymmetricLabel,
    SystemParams,
)
from dicke.trajectory import (
    CHUNK_SIZE,
    JumpError,
    Terminal,
    apply_jump,
    click_densities,
    estimate_ladder,
    estimate_protocol,
    estimate_success,
    injected_sector,
    run_ladder,
    run_protocol,
    sample_trial,
    trajectory_rng,
)

P_CLOSED = 0.3983


@pytest.fixture
def practical() -> SystemParams:
    return SystemParams.practical(3)


def within(value: float, expected: float, stderr: float, sigmas: float = 3.0) -> bool:
    return abs(value - expected) <= sigmas * stderr


class TestPrimitives:
    def test_rng_streams(self) -> None:
        a = trajectory_rng(1, 0).random(5)
        assert np.array_equal(a, trajectory_rng(1, 0).random(5))
        assert not np.array_equal(a, trajectory_rng(1, 1).random(5))
        assert not np.array_equal(a, trajectory_rng(2, 0).random(5))
        assert not np.array_equal(a, trajectory_rng(1, 0, substream=1).random(5))

    def test_rng_rejects_negative_indices(self) -> None:
        with pytest.raises(ParameterError):
            trajectory_rng(-1, 0)
        with pytest.raises(ParameterError):
            trajectory_rng(0, -1)

    def test_terminal_labels(self) -> None:
        assert [t.label for t in Terminal] == ["d0_click", "d1_click", "timeout"]

    def test_apply_jump(self, practical: SystemParams) -> None:
        hamiltonian, psi0 = injected_sector(practical, ReducedSymmetric(3))
        d0 = hamiltonian.channel(Detector.D0)
        after = apply_jump(psi0, d0)
        assert after.amplitude(SymmetricLabel(3, 0)) == pytest.approx(1.0)
        with pytest.raises(JumpError):
            apply_jump(psi0, hamiltonian.channel(Detector.D1))

    def test_apply_jump_checks_basis(self, practical: SystemParams) -> None:
        hamiltonian, _ = injected_sector(practical, ReducedSymmetric(3))
        _, other = injected_sector(practical, SingleExcitation(3))
        with pytest.raises(BasisError):
            apply_jump(other, hamiltonian.channel(Detector.D0))

    def test_click_densities(self, practical: SystemParams) -> None:
        hamiltonian, psi0 = injected_sector(practical, ReducedSymmetric(3))
        evolution = ConditionalPropagator.from_hamiltonian(hamiltonian, psi0)
        densities = click_densities(evolution, hamiltonian.channels, [0.0, 1e-7])
        assert densities.shape == (2, 2)
        # All of the injected photon sits in L at t = 0
        assert densities[0, 0] == pytest.approx(practical.kappa_L)
        assert densities[0, 1] == pytest.approx(0.0)
        assert densities[1, 1] > 0.0

    @pytest.mark.parametrize("gamma_s", [0.0, 6 * TWO_PI_MHZ])
    @pytest.mark.parametrize("t_end", [0.5e-6, 3e-6])
    def test_norm_loss_is_click_flux(
        self, practical: SystemParams, gamma_s: float, t_end: float
    ) -> None:
        params = practical.replace(gamma_s=gamma_s)
        hamiltonian, psi0 = injected_sector(params, ReducedSymmetric(3))
        evolution = ConditionalPropagator.from_hamiltonian(hamiltonian, psi0)

        def flux(t: float) -> float:
            return float(click_densities(evolution, hamiltonian.channels, t).sum())

        emitted, _ = integrate.quad(flux, 0.0, t_end, limit=1000, epsabs=1e-10)
        assert float(evolution.norm_sq(t_end)) + emitted == pytest.approx(
            1.0, abs=1e-6
        )

    def test_injected_sector_seeds_later_steps(self, practical: SystemParams) -> None:
        _, psi0 = injected_sector(practical, FullTensor(3), step=1)
        psi0.check_normalized()
        assert psi0.basis.n == 3
        for label, amplitude in zip(psi0.basis, psi0.amplitudes, strict=True):
            if abs(amplitude) > 0:
                assert label.n_L == 1
                assert label.atoms.count("1") == 1


class TestSampleTrial:
    def test_outcomes(self, practical: SystemParams) -> None:
        hamiltonian, psi0 = injected_sector(practical, ReducedSymmetric(3))
        t_max = practical.timeout_horizon
        seen = set()
        for stream in range(200):
            outcome = sample_trial(
                hamiltonian, psi0, t_max, trajectory_rng(3, stream), trial_index=stream
            )
            seen.add(outcome.terminal)
            assert 0.0 <= outcome.time <= t_max
            if outcome.terminal is Terminal.D1_CLICK:
                assert outcome.event is not None
                assert outcome.event.detector is Detector.D1
                assert outcome.event.trial_index == stream
                assert outcome.channel == "kappa_R"
                post = outcome.post_state
                assert abs(post.amplitude(SymmetricLabel(3, 1))) == pytest.approx(1.0)
            elif outcome.terminal is Terminal.D0_CLICK:
                assert outcome.channel == "kappa_L"
                post = outcome.post_state
                assert abs(post.amplitude(SymmetricLabel(3, 0))) == pytest.approx(1.0)
            else:
                assert outcome.event is None
        assert {Terminal.D0_CLICK, Terminal.D1_CLICK} <= seen

    def test_closed_cavity_times_out(self, practical: SystemParams) -> None:
        params = practical.replace(kappa_L=0.0, kappa_R=0.0)
        hamiltonian, psi0 = injected_sector(params, ReducedSymmetric(3))
        outcome = sample_trial(hamiltonian, psi0, 1e-6, trajectory_rng(0, 0))
        assert outcome.terminal is Terminal.TIMEOUT
        assert outcome.time == 1e-6
        assert outcome.channel is None
        assert outcome.post_state.norm_sq == pytest.approx(1.0)

    def test_integrator_agrees_with_propagator(self, practical: SystemParams) -> None:
        hamiltonian, psi0 = injected_sector(practical, ReducedSymmetric(3))
        t_max = practical.timeout_horizon
        for stream in range(5):
            exact = sample_trial(hamiltonian, psi0, t_max, trajectory_rng(9, stream))
            solved = sample_trial(
                hamiltonian,
                psi0,
                t_max,
                trajectory_rng(9, stream),
                controls=IntegratorControls(),
            )
            assert solved.terminal is exact.terminal
            assert solved.time == pytest.approx(exact.time, rel=1e-5)


class TestEstimateSuccess:
    def test_practical_success(self, practical: SystemParams) -> None:
        estimate = estimate_success(practical, 20000, seed=1)
        assert within(estimate.p_hat, P_CLOSED, estimate.stderr)
        assert sum(estimate.counts.values()) == 20000
        assert estimate.histogram.sum() == estimate.counts["d1_click"]
        assert estimate.edges[-1] == pytest.approx(estimate.t_max)
        assert estimate.losses == {"kappa_L": 0, "kappa_R": 0}
        assert estimate.click_times.size == estimate.counts["d1_click"]

    def test_click_times_follow_the_model(self, practical: SystemParams) -> None:
        estimate = estimate_success(practical, 5000, seed=2, bins=25)
        gof = click_time_gof(estimate.histogram, estimate.edges, practical)
        assert gof.passes(0.01)

    def test_detector_efficiency(self, practical: SystemParams) -> None:
        params = practical.replace(detector_efficiency=0.5)
        estimate = estimate_success(params, 10000, seed=3)
        assert within(estimate.p_hat, P_CLOSED / 2, estimate.stderr)
        assert estimate.losses["kappa_L"] > 0
        assert estimate.losses["kappa_R"] > 0

    def test_closed_right_mode_never_clicks_d1(self, practical: SystemParams) -> None:
        estimate = estimate_success(practical.replace(kappa_R=0.0), 2000)
        assert estimate.counts["d1_click"] == 0
        assert estimate.p_hat == 0.0
        assert estimate.stderr == 0.0

    def test_spontaneous_emission_losses(self, practical: SystemParams) -> None:
        params = practical.replace(gamma_s=6 * TWO_PI_MHZ)
        estimate = estimate_success(params, 2000, seed=4)
        assert estimate.losses["gamma_s"] > 0
        lost = [i for i in range(2000) if estimate.channel_name(i) == "gamma_s"]
        assert all(estimate.terminal(i) is Terminal.TIMEOUT for i in lost)

    def test_trial_i_is_stream_i(self, practical: SystemParams) -> None:
        estimate = estimate_success(practical, 50, seed=5)
        hamiltonian, psi0 = injected_sector(practical, ReducedSymmetric(3))
        for i in range(50):
            outcome = sample_trial(
                hamiltonian,
                psi0,
                practical.timeout_horizon,
                trajectory_rng(5, i),
            )
            assert outcome.terminal is estimate.terminal(i)
            assert outcome.time == pytest.approx(estimate.times[i], rel=1e-12)
            assert outcome.channel == estimate.channel_name(i)

    def test_independent_of_worker_count(self, practical: SystemParams) -> None:
        n_traj = CHUNK_SIZE + 904
        serial = estimate_success(practical, n_traj, seed=6, jobs=1)
        parallel = estimate_success(practical, n_traj, seed=6, jobs=2)
        np.testing.assert_array_equal(serial.terminals, parallel.terminals)
        np.testing.assert_array_equal(serial.times, parallel.times)
        np.testing.assert_array_equal(serial.channels, parallel.channels)
        assert serial.p_hat == parallel.p_hat

    def test_coupling_profile(self, practical: SystemParams) -> None:
        wavelength = 780e-9
        profile = CouplingProfile.from_wavelength(
            16 * TWO_PI_MHZ,
            20e-6,
            wavelength,
            [(0.0, 0.0, wavelength / 4 + i * wavelength / 2) for i in range(3)],
        )
        estimate = estimate_success(practical, 5000, seed=7, profile=profile)
        assert within(estimate.p_hat, P_CLOSED, estimate.stderr)

    def test_later_step(self, practical: SystemParams) -> None:
        params = practical.with_optimal_detuning(1)
        estimate = estimate_success(params, 5000, seed=8, step=1)
        expected = success_probability_closed(params, step=1)
        assert within(estimate.p_hat, expected, estimate.stderr)

    def test_rejects_bad_counts(self, practical: SystemParams) -> None:
        with pytest.raises(ParameterError):
            estimate_success(practical, 0)
        with pytest.raises(ParameterError):
            estimate_success(practical, 10, bins=0)


class TestProtocol:
    def test_run_protocol(self, practical: SystemParams) -> None:
        result = run_protocol(practical, max_trials=50, seed=11)
        assert result.success
        assert result.m_reached == 1
        assert result.terminals[-1] is Terminal.D1_CLICK
        assert result.total_trials == len(result.terminals)
        assert result.fidelity == pytest.approx(1.0, abs=1e-12)
        assert result.events[-1].detector is Detector.D1
        assert result.step_elapsed == (result.elapsed,)

    def test_single_excitation_heralds_w_state(self, practical: SystemParams) -> None:
        result = run_protocol(
            practical, max_trials=50, seed=12, descriptor=SingleExcitation(3)
        )
        assert result.success
        assert result.fidelity == pytest.approx(1.0, abs=1e-9)

    def test_failed_run(self, practical: SystemParams) -> None:
        params = practical.replace(kappa_R=0.0)
        result = run_protocol(params, max_trials=3, seed=13)
        assert not result.success
        assert result.trials_used == (3,)
        assert result.fidelity is None
        assert result.m_reached == 0

    def test_rejects_zero_budget(self, practical: SystemParams) -> None:
        with pytest.raises(ParameterError):
            run_protocol(practical, max_trials=0)

    def test_estimate_matches_single_runs(self, practical: SystemParams) -> None:
        estimate = estimate_protocol(practical, 40, max_trials=4, seed=14)
        for i in range(40):
            run = run_protocol(practical, max_trials=4, seed=14, stream=i)
            assert run.success == bool(estimate.successes[i])
            assert run.trials_used[0] == estimate.trials_used[i]
            assert run.elapsed == pytest.approx(estimate.elapsed[i], rel=1e-12)

    def test_repetition_reaches_cumulative_success(
        self, practical: SystemParams
    ) -> None:
        estimate = estimate_protocol(practical, 2000, max_trials=10, seed=15)
        assert estimate.success_rate > 0.98
        assert estimate.trial_histogram.sum() == estimate.successes.sum()
        assert estimate.trial_histogram.size == 10
        # Heralds thin out geometrically with the trial number
        assert estimate.trial_histogram[0] > estimate.trial_histogram[3]
        assert 2.0 < estimate.mean_trials < 3.0

    def test_mean_trials_without_successes(self, practical: SystemParams) -> None:
        params = practical.replace(kappa_R=0.0)
        estimate = estimate_protocol(params, 10, max_trials=2)
        assert estimate.success_rate == 0.0
        assert math.isnan(estimate.mean_trials)


class TestLadder:
    @pytest.mark.parametrize("n", [2, 3])
    def test_full_ladder_with_oracle(self, n: int) -> None:
        params = SystemParams.practical(n)
        result = run_ladder(params, n, max_trials_per_step=50, seed=21, oracle=True)
        assert result.success
        assert result.m_reached == n
        assert len(result.trials_used) == n
        assert len(result.step_elapsed) == n
        assert sum(result.step_elapsed) == pytest.approx(result.elapsed)
        assert result.fidelity == pytest.approx(1.0, abs=1e-9)
        assert len(result.step_fidelities) == n
        for step_fidelity in result.step_fidelities:
            assert step_fidelity == pytest.approx(1.0, abs=1e-9)
        assert [e.ladder_step for e in result.events if e.detector is Detector.D1] == (
            list(range(n))
        )

    def test_zero_budget_fails_immediately(self, practical: SystemParams) -> None:
        result = run_ladder(practical, 2, max_trials_per_step=0)
        assert not result.success
        assert result.m_reached == 0
        assert result.trials_used == (0,)
        assert result.elapsed == 0.0
        assert result.final_state.amplitude(SymmetricLabel(3, 0)) == 1.0

    @pytest.mark.parametrize("target_m", [0, 4])
    def test_target_out_of_range(self, practical: SystemParams, target_m) -> None:
        with pytest.raises(ParameterError):
            run_ladder(practical, target_m)
        with pytest.raises(ParameterError):
            estimate_ladder(practical, target_m)

    def test_estimate_matches_single_runs(self, practical: SystemParams) -> None:
        estimate = estimate_ladder(
            practical, 3, max_trials_per_step=2, n_runs=30, seed=22
        )
        for i in range(30):
            run = run_ladder(practical, 3, max_trials_per_step=2, seed=22, stream=i)
            assert run.m_reached == estimate.reached[i]
            steps = len(run.trials_used)
            assert tuple(estimate.trials[i, :steps]) == run.trials_used
            assert not estimate.trials[i, steps:].any()
            assert run.elapsed == pytest.approx(estimate.elapsed[i], rel=1e-12)

    def test_step_probabilities(self, practical: SystemParams) -> None:
        estimate = estimate_ladder(
            practical, 3, max_trials_per_step=20, n_runs=600, seed=23
        )
        expected = [
            success_probability_closed(practical.with_optimal_detuning(m), m)
            for m in range(3)
        ]
        for p, stderr, p_closed in zip(
            estimate.step_probabilities, estimate.step_stderr, expected, strict=True
        ):
            assert within(p, p_closed, stderr)
        assert estimate.heralds[0] >= estimate.heralds[1] >= estimate.heralds[2]
        assert estimate.success_rate > 0.99

    def test_unreached_steps_are_nan(self, practical: SystemParams) -> None:
        estimate = estimate_ladder(practical, 2, max_trials_per_step=0, n_runs=5)
        assert estimate.success_rate == 0.0
        assert np.isnan(estimate.step_probabilities).all()
        assert np.isnan(estimate.step_stderr).all()


def test_reduced_and_single_excitation_sectors_agree(practical: SystemParams) -> None:
    # The symmetric sector is exact for uniform couplings, so both bases give
    # the same no-click probability at every time
    reduced, psi_reduced = injected_sector(practical, ReducedSymmetric(3))
    single, psi_single = injected_sector(practical, SingleExcitation(3))
    times = np.linspace(0.0, 2e-6, 101)
    np.testing.assert_allclose(
        ConditionalPropagator.from_hamiltonian(reduced, psi_reduced).norm_sq(times),
        ConditionalPropagator.from_hamiltonian(single, psi_single).norm_sq(times),
        atol=1e-9,
    )
