"""Flat ``section.key = value`` run configuration.

Every key has a documented default, so an empty file is a valid
configuration (the desk-scale setup: a 32 x 32 x 9 grid, ``T = 1``,
``dt = 1e-3``, ``mu = nu = 1e-2``, ``f = 1`` and filter ``(4, 2)``).
Unknown keys, malformed values and violated constraints are reported
with the line number that caused them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

from .dynamics import ModelConfig, ModelKind
from .spectral_basis import FilterSpec, GridSpec
from .timestepper import Scheme, StepperConfig

__all__ = [
    "ConfigError",
    "ForcingConfig",
    "InitConfig",
    "KEYS",
    "OutputConfig",
    "ProbeConfig",
    "RunConfig",
    "SweepConfig",
    "parse_config",
    "serialize_config",
]

INIT_KINDS = ("remark2", "random_low", "random_banded", "file")
FORCING_KINDS = ("zero", "modal")


class ConfigError(ValueError):
    """A configuration problem, located at ``line`` (0 when not tied to a line)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class InitConfig:
    kind: str = "remark2"
    seed: int = 0
    path: str = ""
    amplitude: float = 1.0
    # ratio |(I - P) u| / |P u| of the high-mode tail in banded data
    tail: float = 0.2


@dataclass(frozen=True)
class ForcingConfig:
    kind: str = "zero"
    amplitude: float = 0.1


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    snapshot_every: int = 0
    csv_every: int = 10


@dataclass(frozen=True)
class SweepConfig:
    mu_delta: tuple[float, ...] = ()
    nu_delta: tuple[float, ...] = ()

    def pairs(self) -> list[tuple[float, float]]:
        """``(mu_delta, nu_delta)`` members; ``nu_delta`` defaults to ``mu_delta``."""
        nu = self.nu_delta or self.mu_delta
        if len(nu) != len(self.mu_delta):
            raise ConfigError("sweep.nu_delta must have as many entries as sweep.mu_delta")
        return list(zip(self.mu_delta, nu))


@dataclass(frozen=True)
class ProbeConfig:
    samples: int = 50
    seed: int = 0
    slope: float = 1.5


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    time: StepperConfig = field(default_factory=StepperConfig)
    init: InitConfig = field(default_factory=InitConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)


# -- value parsers -------------------------------------------------------------


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _float_list(text: str) -> tuple[float, ...]:
    if text.strip() == "":
        return ()
    return tuple(_float(part.strip()) for part in text.split(","))


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


def _str(text: str) -> str:
    return text


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (parser, getter from RunConfig)
KEYS: dict[str, tuple[Callable[[str], object], Callable[[RunConfig], object]]] = {
    "grid.nx": (_int, lambda c: c.grid.nx),
    "grid.ny": (_int, lambda c: c.grid.ny),
    "grid.nz": (_int, lambda c: c.grid.nz),
    "grid.lx": (_float, lambda c: c.grid.lx),
    "grid.ly": (_float, lambda c: c.grid.ly),
    "grid.h": (_float, lambda c: c.grid.h),
    "model.kind": (_choice(tuple(k.value for k in ModelKind)), lambda c: c.model.kind.value),
    "physics.mu": (_float, lambda c: c.model.mu),
    "physics.nu": (_float, lambda c: c.model.nu),
    "physics.mu_delta": (_float, lambda c: c.model.mu_delta),
    "physics.nu_delta": (_float, lambda c: c.model.nu_delta),
    "physics.f": (_float, lambda c: c.model.f),
    "physics.rho0": (_float, lambda c: c.model.rho0),
    "physics.g": (_float, lambda c: c.model.g),
    "filter.m_cut": (_int, lambda c: c.model.filter.m_cut),
    "filter.n_cut": (_int, lambda c: c.model.filter.n_cut),
    "time.dt": (_float, lambda c: c.time.dt),
    "time.t_end": (_float, lambda c: c.time.t_end),
    "time.scheme": (_choice(tuple(s.value for s in Scheme)), lambda c: c.time.scheme.value),
    "init.kind": (_choice(INIT_KINDS), lambda c: c.init.kind),
    "init.seed": (_int, lambda c: c.init.seed),
    "init.path": (_str, lambda c: c.init.path),
    "init.amplitude": (_float, lambda c: c.init.amplitude),
    "init.tail": (_float, lambda c: c.init.tail),
    "forcing.kind": (_choice(FORCING_KINDS), lambda c: c.forcing.kind),
    "forcing.amplitude": (_float, lambda c: c.forcing.amplitude),
    "output.dir": (_str, lambda c: c.output.dir),
    "output.snapshot_every": (_int, lambda c: c.output.snapshot_every),
    "output.csv_every": (_int, lambda c: c.output.csv_every),
    "sweep.mu_delta": (_float_list, lambda c: c.sweep.mu_delta),
    "sweep.nu_delta": (_float_list, lambda c: c.sweep.nu_delta),
    "probe.samples": (_int, lambda c: c.probe.samples),
    "probe.seed": (_int, lambda c: c.probe.seed),
    "probe.slope": (_float, lambda c: c.probe.slope),
}

_DEFAULTS = RunConfig()


def _strip_comment(line: str) -> str:
    """Drop ``#`` comments: whole-line, or trailing after whitespace."""
    stripped = line.strip()
    if stripped.startswith("#"):
        return ""
    for i, ch in enumerate(line):
        if ch == "#" and i > 0 and line[i - 1] in " \t":
            return line[:i].strip()
    return stripped


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration; raises :class:`ConfigError`."""
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw)
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        try:
            values[key] = KEYS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        lines[key] = lineno
    return _build(values, lines)


def _get(values: dict, key: str):
    return values[key] if key in values else KEYS[key][1](_DEFAULTS)


def _line_of(lines: dict, *keys: str) -> int:
    found = [lines[k] for k in keys if k in lines]
    return max(found) if found else 0


def _build(values: dict, lines: dict) -> RunConfig:
    v = lambda key: _get(values, key)  # noqa: E731

    grid_keys = [k for k in KEYS if k.startswith("grid.")]
    try:
        grid = GridSpec(
            lx=v("grid.lx"), ly=v("grid.ly"), h=v("grid.h"), nx=v("grid.nx"), ny=v("grid.ny"), nz=v("grid.nz")
        )
    except ValueError as exc:
        named = f"grid.{str(exc).split()[0]}"
        raise ConfigError(str(exc), _line_of(lines, named) if named in lines else _line_of(lines, *grid_keys)) from None

    kind = ModelKind(v("model.kind"))
    if kind is ModelKind.CLASSICAL:
        for key in ("physics.mu_delta", "physics.nu_delta"):
            if v(key) != 0.0:
                raise ConfigError(f"{key} must be 0 for model.kind = classical", _line_of(lines, key, "model.kind"))
    try:
        filt = FilterSpec(v("filter.m_cut"), v("filter.n_cut"))
        filt.check(grid)
    except ValueError as exc:
        raise ConfigError(str(exc), _line_of(lines, "filter.m_cut", "filter.n_cut", *grid_keys)) from None
    physics = ("mu", "nu", "mu_delta", "nu_delta", "f", "rho0", "g")
    try:
        model = ModelConfig(kind=kind, filter=filt, **{p: v(f"physics.{p}") for p in physics})
    except ValueError as exc:
        named = f"physics.{str(exc).split()[0]}"
        keys = [named] if named in lines else [f"physics.{p}" for p in physics]
        raise ConfigError(str(exc), _line_of(lines, *keys)) from None

    try:
        stepper = StepperConfig(dt=v("time.dt"), t_end=v("time.t_end"), scheme=v("time.scheme"))
    except ValueError as exc:
        raise ConfigError(str(exc), _line_of(lines, "time.dt", "time.t_end")) from None

    init = InitConfig(
        kind=v("init.kind"), seed=v("init.seed"), path=v("init.path"), amplitude=v("init.amplitude"), tail=v("init.tail")
    )
    if init.kind == "file" and not init.path:
        raise ConfigError("init.kind = file requires init.path", _line_of(lines, "init.kind"))
    if init.seed < 0:
        raise ConfigError("init.seed must be nonnegative", _line_of(lines, "init.seed"))
    if init.tail < 0:
        raise ConfigError("init.tail must be nonnegative", _line_of(lines, "init.tail"))

    forcing = ForcingConfig(kind=v("forcing.kind"), amplitude=v("forcing.amplitude"))

    output = OutputConfig(dir=v("output.dir"), snapshot_every=v("output.snapshot_every"), csv_every=v("output.csv_every"))
    for key in ("output.snapshot_every", "output.csv_every"):
        if v(key) < 0:
            raise ConfigError(f"{key} must be nonnegative", _line_of(lines, key))

    sweep = SweepConfig(mu_delta=v("sweep.mu_delta"), nu_delta=v("sweep.nu_delta"))
    for key in ("sweep.mu_delta", "sweep.nu_delta"):
        if any(x < 0 for x in v(key)):
            raise ConfigError(f"{key} entries must be nonnegative", _line_of(lines, key))
    if sweep.nu_delta and len(sweep.nu_delta) != len(sweep.mu_delta):
        raise ConfigError(
            "sweep.nu_delta must have as many entries as sweep.mu_delta", _line_of(lines, "sweep.nu_delta")
        )

    probe = ProbeConfig(samples=v("probe.samples"), seed=v("probe.seed"), slope=v("probe.slope"))
    if probe.samples < 1:
        raise ConfigError("probe.samples must be positive", _line_of(lines, "probe.samples"))
    if probe.seed < 0:
        raise ConfigError("probe.seed must be nonnegative", _line_of(lines, "probe.seed"))

    return RunConfig(grid, model, stepper, init, forcing, output, sweep, probe)


def serialize_config(cfg: RunConfig) -> str:
    """Every key with its value, in canonical order; ``parse_config`` inverts it."""
    out = []
    section = None
    for key, (_, getter) in KEYS.items():
        head = key.split(".")[0]
        if head != section:
            if section is not None:
                out.append("")
            section = head
        out.append(f"{key} = {_fmt(getter(cfg))}")
    return "\n".join(out) + "\n"


def with_model(cfg: RunConfig, **changes) -> RunConfig:
    """``cfg`` with fields of its :class:`ModelConfig` replaced."""
    return replace(cfg, model=replace(cfg.model, **changes))
