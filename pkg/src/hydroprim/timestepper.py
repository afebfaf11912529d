"""Integrating-factor time stepping.

The viscous symbol is diagonal, so it is integrated exactly by the factor
``exp(-Lambda t)``; the remaining explicit terms (advection, Coriolis,
forcing, pressure projection) are advanced with the three-stage low-storage
Runge-Kutta scheme of Williamson, or with forward Euler.

Written in terms of the transformed variable ``exp(Lambda t) u`` the stage
recursion only ever multiplies by decay factors ``exp(-Lambda dtau) <= 1``,
so arbitrarily stiff high modes cannot overflow.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

import numpy as np

from .dynamics import Kernel, ModelConfig, kernel
from .fields import State
from .spectral_basis import GridSpec, Parity

__all__ = [
    "BlowUpError",
    "Scheme",
    "Sink",
    "StepperConfig",
    "cfl_dt",
    "run",
    "step",
]

logger = logging.getLogger(__name__)

# Williamson (1980) 2N-storage RK3 coefficients and stage times.
RK3_A = (0.0, -5.0 / 9.0, -153.0 / 128.0)
RK3_B = (1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0)
RK3_C = (0.0, 1.0 / 3.0, 3.0 / 4.0, 1.0)

BLOWUP_FACTOR = 1e6


class Scheme(enum.Enum):
    RK3IF = "rk3if"
    EULERIF = "eulerif"

    @property
    def order(self) -> int:
        return 3 if self is Scheme.RK3IF else 1


class BlowUpError(RuntimeError):
    """Raised when a run produces non-finite or exploding coefficients."""


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 1e-3
    scheme: Scheme = Scheme.RK3IF
    t_end: float = 1.0
    cfl_safety: float = 0.5

    def __post_init__(self):
        if not isinstance(self.scheme, Scheme):
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be nonnegative and finite, got {self.t_end}")
        if not (0 < self.cfl_safety <= 1):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class Sink(Protocol):
    """Receives states during :func:`run`; ``emit`` is called with the step index."""

    def emit(self, step_index: int, state: State) -> None: ...

    def close(self) -> None: ...


class _Integrator:
    """Stepping with cached decay factors for one kernel and ``dt``."""

    def __init__(self, k: Kernel, dt: float, scheme: Scheme):
        self.k = k
        self.dt = dt
        self.scheme = scheme
        lam = k.symbol
        if scheme is Scheme.RK3IF:
            self.decays = [np.exp(-lam * (RK3_C[i + 1] - RK3_C[i]) * dt) for i in range(3)]
        else:
            self.decays = [np.exp(-lam * dt)]

    def advance(self, s: np.ndarray, forcing: np.ndarray | None) -> np.ndarray:
        dt = self.dt
        if self.scheme is Scheme.EULERIF:
            return self.decays[0] * (s + dt * self.k.explicit(s, forcing))
        u = s
        q = np.zeros_like(s)
        for a, b, d in zip(RK3_A, RK3_B, self.decays):
            q = d * (a * q + dt * self.k.explicit(u, forcing))
            u = d * u + b * q
        return u


def step(state: State, model: ModelConfig, forcing: State | None, cfg: StepperConfig) -> State:
    """Advance ``state`` by one step of size ``cfg.dt``."""
    k = kernel(model, state.grid)
    dt_cfl = cfl_dt(state, cfg.cfl_safety)
    if cfg.dt > dt_cfl:
        logger.warning("dt=%g exceeds the advective CFL limit %g", cfg.dt, dt_cfl)
    out = _Integrator(k, cfg.dt, cfg.scheme).advance(state.stack(), None if forcing is None else forcing.stack())
    _check_finite(out, state.time + cfg.dt)
    return State.from_stack(out, state.grid, state.time + cfg.dt)


def _check_finite(s: np.ndarray, time: float) -> None:
    if not np.all(np.isfinite(s)):
        raise BlowUpError(f"non-finite coefficients at t={time:g}")


def _max_abs(grid: GridSpec, s: np.ndarray) -> float:
    return float(np.max(np.abs(grid.padded.synth_work(s, Parity.COS))))


def cfl_dt(state: State, safety: float = 1.0) -> float:
    """Advective time-step limit ``safety * min(spacing / |velocity|)`` on the padded grid.

    Horizontal spacing ``dx`` is compared with ``|u|`` and ``|v|``, vertical
    spacing with ``|w|``.  Returns ``inf`` for a state at rest.
    """
    from .fields import diagnose_w

    grid = state.grid
    quad = grid.padded
    vel = quad.synth_work(state.stack(), Parity.COS)
    w = diagnose_w(state)
    wv = quad.synth_work(w.coeffs[None], Parity.SIN, None if w.linear is None else w.linear[None])
    rate = max(
        float(np.max(np.abs(vel[:, 0]))) / quad.dx,
        float(np.max(np.abs(vel[:, 1]))) / quad.dy,
        float(np.max(np.abs(wv))) / quad.dz,
    )
    if rate == 0.0:
        return math.inf
    return safety / rate


def run(
    initial: State,
    model: ModelConfig,
    forcing: State | None,
    cfg: StepperConfig,
    sinks: Iterable[Sink] = (),
    on_step: Callable[[int, State], None] | None = None,
) -> State:
    """Integrate from ``initial.time`` for ``cfg.n_steps`` steps.

    Every sink sees step 0 and each subsequent step; sinks decide their own
    output cadence.  Sinks are closed (flushing partial output) even when
    the run fails.
    """
    sinks = list(sinks)
    grid = initial.grid
    k = kernel(model, grid)
    integ = _Integrator(k, cfg.dt, cfg.scheme)
    f = None if forcing is None else forcing.stack()
    s = initial.stack()
    t0 = initial.time
    limit = BLOWUP_FACTOR * max(_max_abs(grid, s), 1e-300)
    state = initial
    try:
        dt_cfl = cfl_dt(initial, cfg.cfl_safety)
        if cfg.dt > dt_cfl:
            logger.warning("dt=%g exceeds the advective CFL limit %g of the initial state", cfg.dt, dt_cfl)
        for sink in sinks:
            sink.emit(0, state)
        if on_step is not None:
            on_step(0, state)
        for n in range(1, cfg.n_steps + 1):
            s = integ.advance(s, f)
            time = t0 + n * cfg.dt
            _check_finite(s, time)
            state = State.from_stack(s, grid, time)
            if n % 100 == 0 or n == cfg.n_steps:
                if _max_abs(grid, s) > limit:
                    raise BlowUpError(f"|u|_inf exceeded {BLOWUP_FACTOR:g} x initial at t={time:g}")
            for sink in sinks:
                sink.emit(n, state)
            if on_step is not None:
                on_step(n, state)
    finally:
        for sink in sinks:
            sink.close()
    return state
