"""
Loads `key = value` config files into a RunConfig.

Loading scans, parses and evaluates the file, then resolves every entry
against the key table below: its kind, its range and its default. Problems
from all stages are collected by one Reporter and raised together as a
ConfigError, so a single run lists everything wrong with a file.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Tuple

from dicke import __version__
from dicke.diagnostics import Reporter
from dicke.evaluator import Binding, Evaluator, Word
from dicke.model import (
    TWO_PI_MHZ,
    BasisDescriptor,
    CouplingProfile,
    FullTensor,
    ParameterError,
    ReducedSymmetric,
    SingleExcitation,
    SymmetricLadder,
    SystemParams,
    optimal_detuning,
)
from dicke.parser import Parser
from dicke.scanner import Scanner

logger = logging.getLogger(__name__)

# Keys whose value may be a bare word such as `auto`
SYMBOLIC_KEYS = frozenset({"delta_R", "basis", "oracle"})
BASES = ("reduced", "single", "ladder", "full")
MAX_SEED = 2**64
# Largest n for which the full tensor oracle runs by default
ORACLE_MAX_ATOMS = 4

# Defaults that file entries can refer to by name, e.g. `delta_L = 20*g`
DEFAULT_SCOPE: Dict[str, Any] = {
    "g": 16 * TWO_PI_MHZ,
    "kappa": 1.4 * TWO_PI_MHZ,
    "n": 3,
    "m": 1,
    "T": 0.5e-6,
}


class _Invalid(Exception):
    """A value of the wrong kind or out of range; becomes a diagnostic."""


def _real(value: Any) -> int | float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _Invalid(f"Expected a number, got {_describe(value)}.")
    if isinstance(value, float) and not math.isfinite(value):
        raise _Invalid("Value must be finite.")
    return value


def _number(value: Any) -> float:
    try:
        return float(_real(value))
    except OverflowError:
        raise _Invalid("Value must be finite.") from None


def _positive(value: Any) -> float:
    number = _number(value)
    if number <= 0:
        raise _Invalid(f"Value must be > 0, got {number:g}.")
    return number


def _non_negative(value: Any) -> float:
    number = _number(value)
    if number < 0:
        raise _Invalid(f"Value must be >= 0, got {number:g}.")
    return number


def _fraction(value: Any) -> float:
    number = _number(value)
    if not 0.0 <= number <= 1.0:
        raise _Invalid(f"Value must lie in [0, 1], got {number:g}.")
    return number


def _integer(minimum: int, maximum: float = math.inf) -> Callable[[Any], int]:
    def convert(value: Any) -> int:
        number = _real(value)
        if isinstance(number, float):
            if not number.is_integer():
                raise _Invalid(f"Expected an integer, got {number:g}.")
            number = int(number)
        if number < minimum:
            raise _Invalid(f"Value must be >= {minimum}, got {number}.")
        if number >= maximum:
            raise _Invalid(f"Value must be below {maximum:g}.")
        return number

    return convert


def _detuning(value: Any) -> float | None:
    if isinstance(value, Word):
        if value.name != "auto":
            raise _Invalid(f"Expected a number or 'auto', got '{value}'.")
        return None
    return _number(value)


def _flag(value: Any) -> bool | None:
    if isinstance(value, Word) and value.name == "auto":
        return None
    if not isinstance(value, bool):
        raise _Invalid(f"Expected true, false or auto, got {_describe(value)}.")
    return value


def _basis(value: Any) -> str:
    if not isinstance(value, Word) or value.name not in BASES:
        raise _Invalid(f"Expected one of {', '.join(BASES)}.")
    return value.name


def _describe(value: Any) -> str:
    if isinstance(value, Word):
        return f"'{value}'"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, str):
        return f'"{value}"'
    return type(value).__name__


@dataclass(frozen=True)
class _Key:
    convert: Callable[[Any], Any]
    # Number of values; None means one or more
    arity: int | None = 1


_count = _integer(1)
_natural = _integer(0)

KEYS: Dict[str, _Key] = {
    "g": _Key(_non_negative),
    "g_L": _Key(_non_negative),
    "g_R": _Key(_non_negative),
    "kappa": _Key(_non_negative),
    "kappa_L": _Key(_non_negative),
    "kappa_R": _Key(_non_negative),
    "delta_L": _Key(_number),
    "delta_R": _Key(_detuning),
    "n": _Key(_count),
    "m": _Key(_count),
    "T": _Key(_non_negative),
    "gamma_s": _Key(_non_negative),
    "eta": _Key(_fraction),
    "seed": _Key(_integer(0, MAX_SEED)),
    "n_traj": _Key(_count),
    "max_trials": _Key(_natural),
    "trials": _Key(_count),
    "basis": _Key(_basis),
    "t_end": _Key(_positive),
    "samples": _Key(_integer(2)),
    "bins": _Key(_count),
    "oracle": _Key(_flag),
    "runs": _Key(_natural),
    "grid.g_over_kappa": _Key(_positive, arity=3),
    "grid.n": _Key(_count, arity=None),
    "grid.mc_traj": _Key(_natural),
    "grid.delta_over_g": _Key(_positive),
    "profile.g0": _Key(_non_negative),
    "profile.w0": _Key(_positive),
    "profile.wavelength": _Key(_positive),
    "profile.x": _Key(_number, arity=None),
    "profile.y": _Key(_number, arity=None),
    "profile.z": _Key(_number, arity=None),
    "profile.atoms": _Key(_natural, arity=None),
}


@dataclass(frozen=True)
class RunConfig:
    """
    A fully resolved config. Defaults are the practical parameter set.

    `delta_R` is None for `auto`; `m` is the Dicke target, so the ladder step
    simulated by single-step commands is m - 1.
    """

    g: float = DEFAULT_SCOPE["g"]
    g_L: float = DEFAULT_SCOPE["g"]
    g_R: float = DEFAULT_SCOPE["g"]
    kappa: float = DEFAULT_SCOPE["kappa"]
    kappa_L: float = DEFAULT_SCOPE["kappa"]
    kappa_R: float = DEFAULT_SCOPE["kappa"]
    delta_L: float = 20 * DEFAULT_SCOPE["g"]
    delta_R: float | None = None
    n: int = DEFAULT_SCOPE["n"]
    m: int = DEFAULT_SCOPE["m"]
    T: float = DEFAULT_SCOPE["T"]
    gamma_s: float = 0.0
    eta: float = 1.0
    seed: int = 0
    n_traj: int = 10000
    max_trials: int = 10
    trials: int = 10
    basis: str = "reduced"
    t_end: float = DEFAULT_SCOPE["T"]
    samples: int = 201
    bins: int = 50
    oracle: bool = True
    runs: int = 1000
    grid_g_over_kappa: Tuple[float, float, int] = (1.0, 100.0, 100)
    grid_n: Tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    grid_mc_traj: int = 0
    grid_delta_over_g: float = 20.0
    profile: CouplingProfile | None = None
    # Printed source expression of every entry set in the file
    sources: Dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def step(self) -> int:
        return self.m - 1

    def system_params(self, step: int | None = None) -> SystemParams:
        """SystemParams for a ladder step (m - 1 by default), Δ_R resolved."""
        step = self.step if step is None else step
        params = SystemParams(
            g_L=self.g_L,
            g_R=self.g_R,
            kappa_L=self.kappa_L,
            kappa_R=self.kappa_R,
            delta_L=self.delta_L,
            delta_R=self.delta_L if self.delta_R is None else self.delta_R,
            n_atoms=self.n,
            wait_time=self.T,
            gamma_s=self.gamma_s,
            detector_efficiency=self.eta,
        )
        if self.delta_R is None:
            params = params.replace(delta_R=optimal_detuning(params, step))
        return params

    def descriptor(self, step: int | None = None) -> BasisDescriptor:
        step = self.step if step is None else step
        match self.basis:
            case "reduced" if step == 0:
                return ReducedSymmetric(self.n)
            case "reduced" | "ladder":
                return SymmetricLadder(self.n, step)
            case "single":
                return SingleExcitation(self.n)
            case "full":
                return FullTensor(self.n)
        raise ParameterError(f"Unknown basis '{self.basis}'.")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def metadata(self) -> Dict[str, Any]:
        """
        Every resolved value in key order, the source of each entry set in
        the file, and the package version.
        """
        values: Dict[str, Any] = {}
        for key in KEYS:
            if key.startswith("profile."):
                continue
            value = getattr(self, key.replace(".", "_"))
            if key == "delta_R" and value is None:
                value = "auto"
            values[key] = list(value) if isinstance(value, tuple) else value
        if self.profile is not None:
            values["profile"] = {
                "g0": self.profile.g0,
                "w0": self.profile.w0,
                "wave_number": self.profile.wave_number,
                "positions": [list(p) for p in self.profile.positions],
            }
        return {
            "version": __version__,
            "config": values,
            "sources": dict(self.sources),
        }


class _Resolver:
    """Checks evaluated bindings against KEYS and fills in defaults."""

    def __init__(self, bindings: Dict[str, Binding], reporter: Reporter):
        self.bindings = bindings
        self.reporter = reporter
        self.values: Dict[str, Any] = {}

    def resolve(self) -> Dict[str, Any]:
        for key, binding in self.bindings.items():
            if key not in KEYS:
                self.reporter.key_error(binding.line, key, "Unknown key.")
                continue
            converted = self._convert(binding, KEYS[key])
            if converted is not None or key in SYMBOLIC_KEYS:
                self.values[key] = converted
        self._defaults()
        self._cross_checks()
        return self.values

    def _convert(self, binding: Binding, spec: _Key) -> Any:
        count = len(binding.values)
        if spec.arity is not None and count != spec.arity:
            expected = "a single value"
            if spec.arity != 1:
                expected = f"{spec.arity} values"
            self._error(binding.key, f"Expected {expected}, got {count}.")
            return None
        try:
            converted = tuple(spec.convert(value) for value in binding.values)
        except _Invalid as error:
            self._error(binding.key, str(error))
            return None
        return converted[0] if spec.arity == 1 else converted

    def _defaults(self) -> None:
        values = self.values
        for key in ("g", "kappa", "n", "m", "T"):
            values.setdefault(key, DEFAULT_SCOPE[key])
        values.setdefault("g_L", values["g"])
        values.setdefault("g_R", values["g"])
        values.setdefault("kappa_L", values["kappa"])
        values.setdefault("kappa_R", values["kappa"])
        values.setdefault("delta_L", 20 * values["g"])
        values.setdefault("t_end", values["T"])
        if values.get("oracle") is None:
            values["oracle"] = values["n"] <= ORACLE_MAX_ATOMS

    def _cross_checks(self) -> None:
        values = self.values
        n = values["n"]
        if values["m"] > n:
            self._error("m", f"Target m = {values['m']} exceeds n = {n}.", "n")
        if "grid.g_over_kappa" in values:
            low, high, steps = values["grid.g_over_kappa"]
            if not float(steps).is_integer() or steps < 1:
                self._error("grid.g_over_kappa", "Steps must be a positive integer.")
            elif high < low:
                self._error("grid.g_over_kappa", "Grid maximum is below its minimum.")
            else:
                values["grid.g_over_kappa"] = (low, high, int(steps))
        profile_keys = [key for key in self.bindings if key.startswith("profile.")]
        if profile_keys:
            values["profile"] = self._profile(n)
            if values["profile"] is not None:
                values.setdefault("basis", "single")
                if values["basis"] in ("reduced", "ladder"):
                    self._error(
                        "basis",
                        "Per-atom couplings need basis = single or full.",
                        profile_keys[0],
                    )
        if values.get("basis") == "single" and values["m"] != 1:
            self._error(
                "basis", "basis = single only holds the first step (m = 1).", "m"
            )

    def _profile(self, n: int) -> CouplingProfile | None:
        values = self.values
        missing = [
            key
            for key in ("profile.w0", "profile.wavelength", "profile.z")
            if key not in values
        ]
        if missing:
            first = next(key for key in self.bindings if key.startswith("profile."))
            self._error(first, f"Coupling profile needs {', '.join(missing)}.")
            return None
        z = values["profile.z"]
        x = values.get("profile.x", (0.0,) * len(z))
        y = values.get("profile.y", (0.0,) * len(z))
        if not len(x) == len(y) == len(z):
            self._error("profile.z", "profile.x, .y and .z need one entry per atom.")
            return None
        try:
            profile = CouplingProfile.from_wavelength(
                values.get("profile.g0", values["g"]),
                values["profile.w0"],
                values["profile.wavelength"],
                zip(x, y, z, strict=True),
            )
            atoms = values.get("profile.atoms")
            if atoms is not None:
                profile = profile.select(atoms)
        except ParameterError as error:
            self._error("profile.atoms", str(error), "profile.z")
            return None
        if profile.n_atoms != n:
            self._error(
                "profile.z",
                f"Profile holds {profile.n_atoms} atoms but n = {n}; "
                "choose them with profile.atoms.",
                "profile.atoms",
            )
            return None
        return profile

    def _error(self, key: str, message: str, *alternatives: str) -> None:
        # Report at the first involved key that the file actually sets
        for candidate in (key, *alternatives):
            binding = self.bindings.get(candidate)
            if binding is not None:
                self.reporter.key_error(binding.line, candidate, message)
                return
        self.reporter.key_error(0, key, message)


def load_config(source: str, reporter: Reporter | None = None) -> RunConfig:
    """
    Resolve config source text.

    Raises:
        ConfigError: with every diagnostic from every stage.
    """
    reporter = reporter if reporter is not None else Reporter()
    tokens = Scanner(source, reporter).scan_tokens()
    entries = Parser(tokens, reporter).parse()
    evaluator = Evaluator(reporter, SYMBOLIC_KEYS, DEFAULT_SCOPE)
    bindings = evaluator.evaluate(entries)
    values = _Resolver(bindings, reporter).resolve()
    reporter.raise_if_errors()

    fields = {
        key.replace(".", "_"): value
        for key, value in values.items()
        if not key.startswith("profile.")
    }
    config = RunConfig(
        **fields, sources={key: b.source for key, b in bindings.items()}
    )
    logger.debug("Loaded config with %d entries", len(bindings))
    return config


def read_config(path: str | Path, reporter: Reporter | None = None) -> RunConfig:
    """
    Raises:
        OSError: if the file cannot be read.
        ConfigError: as load_config.
    """
    return load_config(Path(path).read_text(encoding="utf-8"), reporter)
