import math
from pathlib import Path
from typing import List

import pytest

from dicke import __version__
from dicke.config import RunConfig, load_config, read_config
from dicke.diagnostics import ConfigError
from dicke.model import (
    TWO_PI_MHZ,
    FullTensor,
    ReducedSymmetric,
    SingleExcitation,
    SymmetricLadder,
    SystemParams,
    optimal_detuning,
)

PRACTICAL = """\
# practical parameter set
g = 2pi*16
kappa = 2pi*1.4
delta_L = 20*g
delta_R = auto
n = 3
m = 1
T = 0.5*us
"""


def diagnostics(source: str) -> List[str]:
    with pytest.raises(ConfigError) as excinfo:
        load_config(source)
    return [str(d) for d in excinfo.value.diagnostics]


class TestDefaults:
    def test_empty_file_is_the_practical_set(self) -> None:
        assert load_config("") == RunConfig()

    def test_explicit_practical_set_matches_defaults(self) -> None:
        assert load_config(PRACTICAL) == RunConfig()

    def test_system_params_match_the_practical_constructor(self) -> None:
        params = RunConfig().system_params()
        practical = SystemParams.practical(3)
        assert params.g_L == pytest.approx(practical.g_L)
        assert params.kappa_L == pytest.approx(practical.kappa_L)
        assert params.delta_L == pytest.approx(practical.delta_L)
        assert params.delta_R == pytest.approx(practical.delta_R)
        assert params.wait_time == pytest.approx(0.5e-6)

    def test_per_mode_values_follow_the_common_ones(self) -> None:
        config = load_config("g = 2pi*10\nkappa = 2pi*2\n")
        assert config.g_L == config.g_R == pytest.approx(10 * TWO_PI_MHZ)
        assert config.kappa_R == pytest.approx(2 * TWO_PI_MHZ)
        assert config.delta_L == pytest.approx(200 * TWO_PI_MHZ)

    def test_t_end_follows_T(self) -> None:
        assert load_config("T = 2*us\n").t_end == pytest.approx(2e-6)

    def test_oracle_default_depends_on_n(self) -> None:
        assert load_config("n = 4\n").oracle is True
        assert load_config("n = 5\n").oracle is False
        assert load_config("n = 5\noracle = true\n").oracle is True
        assert load_config("n = 3\noracle = auto\n").oracle is True


class TestValues:
    def test_auto_detuning_is_tuned_per_step(self) -> None:
        config = load_config("n = 3\nm = 2\n")
        assert config.delta_R is None
        params = config.system_params()
        assert params.delta_R == pytest.approx(optimal_detuning(params, 1))
        step0 = config.system_params(step=0)
        assert step0.delta_R == pytest.approx(optimal_detuning(step0, 0))

    def test_explicit_detuning(self) -> None:
        config = load_config("delta_R = 19.9*g\n")
        assert config.system_params().delta_R == pytest.approx(
            19.9 * 16 * TWO_PI_MHZ
        )

    def test_grid(self) -> None:
        config = load_config("grid.g_over_kappa = 1, 50, 25\ngrid.n = 1, 2, 3\n")
        assert config.grid_g_over_kappa == (1.0, 50.0, 25)
        assert isinstance(config.grid_g_over_kappa[2], int)
        assert config.grid_n == (1, 2, 3)

    def test_integer_keys_become_ints(self) -> None:
        config = load_config("n_traj = 2e4\nseed = 42\n")
        assert config.n_traj == 20000
        assert isinstance(config.n_traj, int)
        assert config.seed == 42

    @pytest.mark.parametrize(
        "source, seed",
        [
            ("9007199254740993", 2**53 + 1),
            ("18446744073709551615", 2**64 - 1),
            ("2^63 + 1", 2**63 + 1),
            ("3 * 1e3", 3000),
        ],
    )
    def test_large_seeds_are_exact(self, source: str, seed: int) -> None:
        config = load_config(f"seed = {source}\n")
        assert config.seed == seed
        metadata = config.metadata()
        assert metadata["config"]["seed"] == seed
        assert metadata["sources"]["seed"] == source

    def test_neighbouring_seeds_differ(self) -> None:
        first = load_config("seed = 9007199254740992\n")
        second = load_config("seed = 9007199254740993\n")
        assert first.seed != second.seed

    def test_sources_keep_the_written_expressions(self) -> None:
        config = load_config(PRACTICAL)
        assert config.sources["delta_L"] == "20 * g"
        assert config.sources["T"] == "0.5 * us"

    @pytest.mark.parametrize(
        "basis, descriptor",
        [
            ("reduced", ReducedSymmetric(3)),
            ("single", SingleExcitation(3)),
            ("full", FullTensor(3)),
            ("ladder", SymmetricLadder(3, 0)),
        ],
    )
    def test_descriptor(self, basis: str, descriptor) -> None:
        assert load_config(f"basis = {basis}\n").descriptor() == descriptor

    def test_reduced_basis_climbs_the_ladder(self) -> None:
        config = load_config("n = 3\nm = 3\n")
        assert config.descriptor() == SymmetricLadder(3, 2)
        assert config.descriptor(step=0) == ReducedSymmetric(3)

    def test_metadata(self) -> None:
        metadata = load_config(PRACTICAL).metadata()
        assert metadata["version"] == __version__
        assert metadata["config"]["delta_R"] == "auto"
        assert metadata["config"]["grid.n"] == [1, 2, 3, 4, 5, 6]
        assert metadata["sources"]["g"] == "2pi * 16"
        assert "profile" not in metadata["config"]

    def test_read_config(self, tmp_path: Path) -> None:
        path = tmp_path / "practical.cfg"
        path.write_text(PRACTICAL, encoding="utf-8")
        assert read_config(path) == RunConfig()

    def test_read_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(OSError):
            read_config(tmp_path / "missing.cfg")


class TestProfile:
    SOURCE = """\
n = 3
profile.w0 = 20*um
profile.wavelength = 780*nm
profile.z = 195*nm, 585*nm, 975*nm, 100*nm
profile.atoms = 0, 1, 2
"""

    def test_profile(self) -> None:
        config = load_config(self.SOURCE)
        assert config.basis == "single"
        assert config.profile is not None
        assert config.profile.n_atoms == 3
        # z = λ/4, 3λ/4 and 5λ/4 sit on antinodes
        assert config.profile.couplings() == pytest.approx(
            [16 * TWO_PI_MHZ] * 3, rel=1e-9
        )
        assert "profile" in config.metadata()["config"]

    def test_profile_rejects_a_symmetric_basis(self) -> None:
        assert diagnostics(self.SOURCE + "basis = reduced\n") == [
            "[line 6] Error in key 'basis': "
            "Per-atom couplings need basis = single or full."
        ]

    def test_profile_needs_matching_atom_count(self) -> None:
        source = self.SOURCE.replace("profile.atoms = 0, 1, 2\n", "")
        assert diagnostics(source) == [
            "[line 4] Error in key 'profile.z': Profile holds 4 atoms but n = 3; "
            "choose them with profile.atoms."
        ]

    def test_profile_needs_its_geometry(self) -> None:
        assert diagnostics("profile.w0 = 20*um\n") == [
            "[line 1] Error in key 'profile.w0': "
            "Coupling profile needs profile.wavelength, profile.z."
        ]

    def test_bad_atom_index(self) -> None:
        source = self.SOURCE.replace("0, 1, 2", "0, 1, 7")
        assert diagnostics(source) == [
            "[line 5] Error in key 'profile.atoms': Atom index 7 out of range."
        ]


class TestErrors:
    @pytest.mark.parametrize(
        "source, message",
        [
            ("gee = 1\n", "[line 1] Error in key 'gee': Unknown key."),
            ("n = 2.5\n", "[line 1] Error in key 'n': Expected an integer, got 2.5."),
            ("n = 0\n", "[line 1] Error in key 'n': Value must be >= 1, got 0."),
            (
                "kappa = -1\n",
                "[line 1] Error in key 'kappa': Value must be >= 0, got -1.",
            ),
            (
                "eta = 1.5\n",
                "[line 1] Error in key 'eta': Value must lie in [0, 1], got 1.5.",
            ),
            ("t_end = 0\n", "[line 1] Error in key 't_end': Value must be > 0, got 0."),
            (
                "samples = 1\n",
                "[line 1] Error in key 'samples': Value must be >= 2, got 1.",
            ),
            (
                "seed = -1\n",
                "[line 1] Error in key 'seed': Value must be >= 0, got -1.",
            ),
            (
                "seed = 2^64\n",
                "[line 1] Error in key 'seed': Value must be below 1.84467e+19.",
            ),
            (
                "g = true\n",
                "[line 1] Error in key 'g': Expected a number, got true.",
            ),
            (
                'g = "fast"\n',
                "[line 1] Error in key 'g': Expected a number, got \"fast\".",
            ),
            (
                "n = 1, 2\n",
                "[line 1] Error in key 'n': Expected a single value, got 2.",
            ),
            (
                "grid.g_over_kappa = 1, 100\n",
                "[line 1] Error in key 'grid.g_over_kappa': Expected 3 values, got 2.",
            ),
            (
                "grid.g_over_kappa = 1, 100, 2.5\n",
                "[line 1] Error in key 'grid.g_over_kappa': "
                "Steps must be a positive integer.",
            ),
            (
                "grid.g_over_kappa = 10, 1, 5\n",
                "[line 1] Error in key 'grid.g_over_kappa': "
                "Grid maximum is below its minimum.",
            ),
            (
                "delta_R = manual\n",
                "[line 1] Error in key 'delta_R': Expected a number or 'auto', "
                "got 'manual'.",
            ),
            (
                "basis = sparse\n",
                "[line 1] Error in key 'basis': "
                "Expected one of reduced, single, ladder, full.",
            ),
            (
                "oracle = 1\n",
                "[line 1] Error in key 'oracle': "
                "Expected true, false or auto, got int.",
            ),
            (
                "n = 2\nm = 3\n",
                "[line 2] Error in key 'm': Target m = 3 exceeds n = 2.",
            ),
            (
                "basis = single\nm = 2\n",
                "[line 1] Error in key 'basis': "
                "basis = single only holds the first step (m = 1).",
            ),
        ],
    )
    def test_messages(self, source: str, message: str) -> None:
        assert diagnostics(source) == [message]

    def test_m_above_default_n_reports_at_m(self) -> None:
        assert diagnostics("m = 4\n") == [
            "[line 1] Error in key 'm': Target m = 4 exceeds n = 3."
        ]

    def test_every_stage_reports_together(self) -> None:
        source = "n = @3\ng = (1\nkappa = 1/0\nmystery = 2\neta = 2\n"
        messages = diagnostics(source)
        assert [m.split("]")[0] + "]" for m in messages] == [
            "[line 1]",
            "[line 2]",
            "[line 3]",
            "[line 4]",
            "[line 5]",
        ]

    def test_config_error_message_lists_everything(self) -> None:
        with pytest.raises(ConfigError) as excinfo:
            load_config("n = 0\neta = 2\n")
        assert str(excinfo.value).count("\n") == 1

    def test_non_finite_value(self) -> None:
        (message,) = diagnostics("g = exp(700)*exp(700)\n")
        assert message == "[line 1] Error in key 'g': Value must be finite."
        assert math.isinf(math.exp(700) * math.exp(700))
