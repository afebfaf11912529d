"""Scripted studies: exact-solution preservation, eddy-viscosity convergence, split consistency.

Each study takes a :class:`~hydroprim.config.RunConfig`, is deterministic
for a given configuration, and returns a report whose ``passed`` flag
decides the command-line exit status.  Reports convert to plain
dictionaries for JSON output.
"""

from __future__ import annotations

import logging
import math
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .config import RunConfig
from .diagnostics import hk_norm_sq
from .dynamics import ModelConfig, ModelKind, explicit_tendency, kernel, split_tendency, tendency
from .fields import PlanarField, State, leray_project_barotropic, remove_mean
from .spectral_basis import FilterSpec, GridSpec, Parity, SpectralField, forward_transform, workers
from .timestepper import StepperConfig, _check_finite, _Integrator, run

__all__ = [
    "ConvergenceEntry",
    "ConvergenceResult",
    "DRIFT_TOL",
    "ExactCheckReport",
    "SplitReport",
    "exact_solution_state",
    "forcing_state",
    "initial_state",
    "remark2_surface_pressure",
    "run_convergence_study",
    "run_exact_check",
    "run_split_consistency",
]

logger = logging.getLogger(__name__)

# Relative drift allowed for the exact steady solution over the run.
DRIFT_TOL = 1e-6
# Required drift reduction under dt halving for the third-order scheme.
ORDER_REDUCTION = 2.0**2.5
# The damped negative control must drift at least this much more.
CONTROL_FACTOR = 100.0
CONTROL_FILTER = FilterSpec(1, 1)

MIN_SLOPE = 0.45
SPLIT_TOL = 1e-10


# -- initial data and forcing --------------------------------------------------


def exact_solution_state(grid: GridSpec, amplitude: float = 1.0) -> State:
    """``u = grad_perp(psi)`` for ``psi = A sin(4 pi x / lx) cos(2 pi y / ly)``.

    ``grad_perp = (-d/dy, d/dx)``.  The field is z-independent and
    divergence free, and occupies exactly the horizontal modes
    ``(+-2, +-1)`` of each component.
    """
    if 3 * 2 > grid.nx or 3 * 1 > grid.ny:
        raise ValueError(f"grid {grid.nx} x {grid.ny} does not resolve the modes (2, 1) inside the dealiased band")
    psi = np.zeros(grid.shape, dtype=complex)
    s0 = grid.norm_factors[0]
    # sin(a) cos(b) = (e^{i(a+b)} + e^{i(a-b)} - e^{-i(a-b)} - e^{-i(a+b)}) / 4i
    for m1, m2, sign in ((2, 1, 1), (2, -1, 1), (-2, 1, -1), (-2, -1, -1)):
        psi[m1 % grid.nx, m2 % grid.ny, 0] = sign * amplitude / (4j * s0)
    u = -1j * grid.ky[None, :, None] * psi
    v = 1j * grid.kx[:, None, None] * psi
    return State(SpectralField(u, Parity.COS, grid), SpectralField(v, Parity.COS, grid))


def remark2_surface_pressure(grid: GridSpec, amplitude: float, f: float, rho0: float) -> PlanarField:
    """Closed-form surface pressure of the steady state, mean removed.

    ``p0 / rho0 = f psi + (A b)^2 / 2 cos^2(a x) - (A a)^2 / 2 cos^2(b y)``
    with ``a = 4 pi / lx`` and ``b = 2 pi / ly``.
    """
    quad = grid.base
    a = 4 * math.pi / grid.lx
    b = 2 * math.pi / grid.ly
    x = quad.x[:, None]
    y = quad.y[None, :]
    psi = amplitude * np.sin(a * x) * np.cos(b * y)
    p = f * psi + 0.5 * (amplitude * b) ** 2 * np.cos(a * x) ** 2 - 0.5 * (amplitude * a) ** 2 * np.cos(b * y) ** 2
    c = quad.planar_from_physical(rho0 * p)
    c[0, 0] = 0.0
    return PlanarField(c, grid)


def _random_part(grid: GridSpec, rng: np.random.Generator, mask: np.ndarray, slope: float) -> np.ndarray:
    """Random valid velocity coefficients supported on ``mask``, unnormalised."""
    comps = []
    for _ in range(2):
        noise = forward_transform(rng.standard_normal(grid.shape), Parity.COS, grid).coeffs
        comps.append(SpectralField(np.where(mask, noise * (1.0 + grid.kappa2) ** (-slope), 0.0), Parity.COS, grid))
    state = leray_project_barotropic(remove_mean(State(*comps)))[0]
    return state.stack()


def _normalised(s: np.ndarray, target: float) -> np.ndarray:
    norm = math.sqrt(float(np.sum(np.abs(s) ** 2)))
    return s if norm == 0.0 else s * (target / norm)


def initial_state(cfg: RunConfig, seed: int | None = None) -> State:
    """Initial velocity of a run; ``amplitude`` is the root-mean-square speed.

    ``random_low`` fills the retained modes of the filter; ``random_banded``
    adds a tail on the remaining dealiased modes whose norm is
    ``init.tail`` times that of the low part.
    """
    grid = cfg.grid
    kind = cfg.init.kind
    if kind == "remark2":
        return exact_solution_state(grid, cfg.init.amplitude)
    if kind == "file":
        from .snapshot import read_snapshot

        return read_snapshot(cfg.init.path, grid)
    rng = np.random.default_rng(cfg.init.seed if seed is None else seed)
    target = cfg.init.amplitude * math.sqrt(grid.volume)
    low_mask = cfg.model.filter.low_mask(grid) & grid.dealias_mask
    s = _normalised(_random_part(grid, rng, low_mask, 1.0), target)
    if kind == "random_banded":
        tail_mask = grid.dealias_mask & ~low_mask
        s = s + _normalised(_random_part(grid, rng, tail_mask, 1.0), cfg.init.tail * target)
    elif kind != "random_low":
        raise ValueError(f"unknown init.kind {kind!r}")
    return State.from_stack(s, grid)


def forcing_state(cfg: RunConfig) -> State | None:
    """``None`` for zero forcing; ``modal`` is ``F = (A sin(2 pi y / ly)(1 + cos(pi z / h)), 0)``."""
    if cfg.forcing.kind == "zero":
        return None
    if cfg.forcing.kind != "modal":
        raise ValueError(f"unknown forcing.kind {cfg.forcing.kind!r}")
    grid = cfg.grid
    amp = cfg.forcing.amplitude
    s = grid.norm_factors
    fu = SpectralField.single_mode(grid, (0, 1, 0), amp / (2j * s[0])) + SpectralField.single_mode(
        grid, (0, 1, 1), amp / (2j * s[1])
    )
    return State(fu, SpectralField.zeros(grid))


def _relative_distance(a: State, b: State) -> float:
    ref = b.norm_sq()
    if ref == 0.0:
        return 0.0 if a.norm_sq() == 0.0 else math.inf
    return math.sqrt((a - b).norm_sq() / ref)


# -- exact-solution check -------------------------------------------------------


@dataclass
class ExactCheckReport:
    """Drift of the steady state and its order/negative-control companions.

    ``passed`` is the drift bound.  The dt-halving reduction and the damped
    control are reported with their own verdicts in ``checks``.
    """

    dt: float
    t_end: float
    filter: tuple[int, int]
    drift: float
    tol: float
    passed: bool
    drift_half: float | None = None
    reduction: float | None = None
    control_drift: float | None = None
    p0_mismatch: float | None = None
    checks: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _exact_model(cfg: RunConfig, filt: FilterSpec) -> ModelConfig:
    return replace(cfg.model, kind=ModelKind.PARTIAL, mu_delta=0.0, nu_delta=0.0, filter=filt)


def _drift(initial: State, model: ModelConfig, stepper: StepperConfig) -> float:
    final = run(initial, model, None, stepper)
    return _relative_distance(final, initial)


def run_exact_check(cfg: RunConfig, halving: bool = True, control: bool = True) -> ExactCheckReport:
    """Integrate the steady state with zero forcing and measure ``|u(T) - u(0)| / |u(0)|``.

    The model is the partial-viscosity model with the configured filter and
    viscosities.  With ``halving`` the run is repeated at ``dt / 2``; with
    ``control`` it is repeated with filter ``(1, 1)``, which damps the
    state's modes and must not pass.
    """
    start = _time.perf_counter()
    initial = exact_solution_state(cfg.grid, cfg.init.amplitude)
    model = _exact_model(cfg, cfg.model.filter)
    stepper = cfg.time
    drift = _drift(initial, model, stepper)
    report = ExactCheckReport(
        dt=stepper.dt,
        t_end=stepper.t_end,
        filter=(model.filter.m_cut, model.filter.n_cut),
        drift=drift,
        tol=DRIFT_TOL,
        passed=drift <= DRIFT_TOL,
    )
    report.checks["drift"] = report.passed

    _, p0 = explicit_tendency(model, initial)
    analytic = remark2_surface_pressure(cfg.grid, cfg.init.amplitude, model.f, model.rho0)
    recovered = p0.coeffs.copy()
    recovered[0, 0] = 0.0
    ref = math.sqrt(analytic.norm_sq())
    report.p0_mismatch = math.sqrt(float(np.sum(np.abs(recovered - analytic.coeffs) ** 2))) / ref if ref else 0.0

    if halving and stepper.n_steps > 0:
        half = StepperConfig(dt=stepper.dt / 2, scheme=stepper.scheme, t_end=stepper.t_end, cfl_safety=stepper.cfl_safety)
        report.drift_half = _drift(initial, model, half)
        report.reduction = math.inf if report.drift_half == 0.0 else drift / report.drift_half
        report.checks["order"] = report.drift_half <= drift / ORDER_REDUCTION
    if control and stepper.n_steps > 0:
        report.control_drift = _drift(initial, _exact_model(cfg, CONTROL_FILTER), stepper)
        report.checks["control_fails"] = report.control_drift > DRIFT_TOL
        report.checks["control_separation"] = report.control_drift >= CONTROL_FACTOR * drift
    report.runtime_s = _time.perf_counter() - start
    return report


# -- convergence study ---------------------------------------------------------


@dataclass
class ConvergenceEntry:
    mu_delta: float
    nu_delta: float
    l2_sup: float
    h1_int: float
    bounded: bool = True


@dataclass
class ConvergenceResult:
    """Errors of the eddy-viscosity runs against the classical baseline.

    ``entries`` is sorted by decreasing ``mu_delta + nu_delta``.  ``slope``
    is the least-squares log-log slope of the sup-in-time L2 error,
    ``c_fit`` the constant of ``error <= c_fit sqrt(mu_delta + nu_delta)``
    calibrated at the coarsest level.
    """

    entries: list[ConvergenceEntry]
    slope: float
    slope_h1: float
    c_fit: float
    monotone: bool
    reference: str
    checks: dict = field(default_factory=dict)
    passed: bool = False
    runtime_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_slope(sizes: list[float], errors: list[float]) -> float:
    if any(e <= 0.0 for e in errors):
        return math.nan
    return float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])


def run_convergence_study(cfg: RunConfig, baseline_initial: State | None = None) -> ConvergenceResult:
    """Lock-step sweep over ``cfg.sweep`` against the ``mu_delta = nu_delta = 0`` baseline.

    All members share grid, time step, forcing and initial data (the
    baseline may be given different data as a negative control).  Errors are
    ``sup_t |v|_{L2}`` and ``(int_0^T |v|_{H1}^2 dt)^(1/2)`` for
    ``v = u_delta - u``, accumulated with the trapezoid rule over every step.
    """
    pairs = sorted(cfg.sweep.pairs(), key=lambda p: -(p[0] + p[1]))
    positive = [p for p in pairs if p[0] + p[1] > 0]
    if len(positive) < 3:
        raise ValueError(f"the sweep needs at least 3 members with mu_delta + nu_delta > 0, got {len(positive)}")
    base = cfg.model
    if not (base.mu > 0 and base.nu > 0):
        raise ValueError("the convergence study needs mu > 0 and nu > 0")
    start = _time.perf_counter()
    grid = cfg.grid
    models = [replace(base, kind=ModelKind.CLASSICAL, mu_delta=0.0, nu_delta=0.0)]
    models += [replace(base, kind=ModelKind.SPECTRAL_EDDY, mu_delta=md, nu_delta=nd) for md, nd in pairs]
    initial = initial_state(cfg)
    first = baseline_initial if baseline_initial is not None else initial
    forcing = forcing_state(cfg)
    fstack = None if forcing is None else forcing.stack()
    stepper = cfg.time
    integrators = [_Integrator(kernel(m, grid), stepper.dt, stepper.scheme) for m in models]
    states = [first.stack()] + [initial.stack() for _ in pairs]

    def errors(stack_list):
        ref = stack_list[0]
        out = []
        for s in stack_list[1:]:
            d = s - ref
            out.append((float(np.sum(np.abs(d) ** 2)), hk_norm_sq(d, grid, 1)))
        return out

    prev = errors(states)
    sup = [math.sqrt(e[0]) for e in prev]
    integral = [0.0] * len(pairs)
    pool = ThreadPoolExecutor(max_workers=min(workers(), len(models))) if workers() > 1 else None
    try:
        for n in range(1, stepper.n_steps + 1):
            if pool is None:
                states = [it.advance(s, fstack) for it, s in zip(integrators, states)]
            else:
                states = list(pool.map(lambda pair: pair[0].advance(pair[1], fstack), zip(integrators, states)))
            for s in states:
                _check_finite(s, n * stepper.dt)
            cur = errors(states)
            for i, (c, p) in enumerate(zip(cur, prev)):
                sup[i] = max(sup[i], math.sqrt(c[0]))
                integral[i] += 0.5 * stepper.dt * (c[1] + p[1])
            prev = cur
    finally:
        if pool is not None:
            pool.shutdown()

    entries = [
        ConvergenceEntry(md, nd, sup[i], math.sqrt(integral[i])) for i, (md, nd) in enumerate(pairs)
    ]
    pos = [e for e in entries if e.mu_delta + e.nu_delta > 0]
    zero = [e for e in entries if e.mu_delta + e.nu_delta == 0]
    sizes = [e.mu_delta + e.nu_delta for e in pos]
    l2 = [e.l2_sup for e in pos]
    slope = _fit_slope(sizes, l2)
    slope_h1 = _fit_slope(sizes, [e.h1_int for e in pos])
    c_fit = l2[0] / math.sqrt(sizes[0])
    for e, size in zip(pos, sizes):
        e.bounded = e.l2_sup <= c_fit * math.sqrt(size) * (1.0 + 1e-12)
    monotone = all(a > b for a, b in zip(l2, l2[1:]))
    checks = {
        "monotone": monotone,
        "slope": bool(slope >= MIN_SLOPE),
        "bounded": all(e.bounded for e in pos),
    }
    if zero:
        checks["zero_member_identical"] = all(e.l2_sup < 1e-12 for e in zero)
    reference = (
        f"classical baseline mu={base.mu:g} nu={base.nu:g} grid={grid.nx}x{grid.ny}x{grid.nz} "
        f"dt={stepper.dt:g} T={stepper.t_end:g} init={cfg.init.kind} seed={cfg.init.seed}"
        + (" (baseline initial data overridden)" if baseline_initial is not None else "")
    )
    result = ConvergenceResult(
        entries=entries,
        slope=slope,
        slope_h1=slope_h1,
        c_fit=c_fit,
        monotone=monotone,
        reference=reference,
        checks=checks,
        passed=all(checks.values()),
        runtime_s=_time.perf_counter() - start,
    )
    logger.info("convergence slope %.3f (H1 %.3f), passed=%s", slope, slope_h1, result.passed)
    return result


# -- split consistency ---------------------------------------------------------


@dataclass
class SplitReport:
    """Largest relative deviation between the split equations and the closed equation."""

    samples: int
    barotropic: float
    baroclinic: float
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def split_deviation(model: ModelConfig, state: State, forcing: State | None = None) -> tuple[float, float]:
    """Relative deviations ``(barotropic, baroclinic)`` for one state.

    The barotropic part compares the vertical average of the full tendency
    with the averaged equation, the baroclinic part the remaining planes.
    Both are measured against the norm of the full tendency.
    """
    grid = state.grid
    full = tendency(model, state, forcing).stack()
    (abar, bbar), clinic = split_tendency(model, state, forcing)
    scale = math.sqrt(float(np.sum(np.abs(full) ** 2)))
    if scale == 0.0:
        scale = 1.0
    avg = full[:, :, :, 0] / math.sqrt(grid.h)
    bar_dev = math.sqrt(float(np.sum(np.abs(avg - np.stack([abar.coeffs, bbar.coeffs])) ** 2) * grid.h))
    dev = full.copy()
    dev[:, :, :, 0] = 0.0
    clin_dev = math.sqrt(float(np.sum(np.abs(dev - clinic.stack()) ** 2)))
    return bar_dev / scale, clin_dev / scale


def run_split_consistency(cfg: RunConfig, steps: int = 10) -> SplitReport:
    """Check the split equations against the closed equation along a short trajectory."""
    model = cfg.model
    forcing = forcing_state(cfg)
    state = initial_state(cfg)
    samples = []

    def record(_n: int, s: State) -> None:
        samples.append(split_deviation(model, s, forcing))

    short = StepperConfig(dt=cfg.time.dt, scheme=cfg.time.scheme, t_end=steps * cfg.time.dt, cfl_safety=cfg.time.cfl_safety)
    run(state, model, forcing, short, on_step=record)
    bar = max(s[0] for s in samples)
    clin = max(s[1] for s in samples)
    return SplitReport(len(samples), bar, clin, SPLIT_TOL, bar <= SPLIT_TOL and clin <= SPLIT_TOL)
