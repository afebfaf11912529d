"""Norms, energy budgets, estimate left-hand sides and numerical probes.

Norms are evaluated in coefficient space (the basis is orthonormal) except
for Lebesgue norms with ``p != 2``, which use trapezoid quadrature on the
3/2-padded grid.  ``H^k`` norms are ``sum (1 + |kappa|^2)^k |c|^2``.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, field, fields
from typing import Sequence

import numpy as np

from .dynamics import ModelConfig, kernel, trilinear_b
from .fields import PlanarField, State, leray_project_barotropic, remove_mean, split_modes
from .spectral_basis import (
    PAD_FACTOR,
    FilterSpec,
    GridSpec,
    Parity,
    Quadrature,
    SpectralField,
    dealias,
    forward_transform,
    resample_coeffs,
)

__all__ = [
    "DiagnosticsRecord",
    "IdentityReport",
    "ProbeReport",
    "INEQUALITY_IDS",
    "energy_budget",
    "filter_bound_ratio",
    "hk_norm_sq",
    "norms",
    "poincare_constant",
    "probe_identities",
    "probe_inequality",
    "random_planar_ensemble",
    "random_scalar_ensemble",
    "random_state_ensemble",
    "trajectory_budget",
]

# Weighted integrals of degree-7 integrands are taken on a grid twice as fine
# as the padded product grid, where the trapezoid rule is exact for them.
WEIGHTED_FACTOR = 2 * PAD_FACTOR

INEQUALITY_IDS = ("a1", "a2", "a3", "a4", "a5", "a6", "vint")
# Constant-free inequalities: the ratio itself must not exceed one.
SHARP_IDS = ("a1", "a6")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One time-stamped row of tracked quantities (squared norms unless named otherwise)."""

    time: float
    l2_sq: float
    grad_sq: float
    dz_sq: float
    high_grad_sq: float
    high_dz_sq: float
    l6_prime: float
    grad_ubar_sq: float
    dz_u_sq: float
    grad_u_sq: float
    mixed_sq: float
    lap_sq: float
    dzz_sq: float
    energy_residual: float
    forcing_power: float

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[float, ...]:
        return astuple(self)


@dataclass(frozen=True)
class ProbeReport:
    id: str
    sample_count: int
    max_ratio: float
    extremal: str


@dataclass(frozen=True)
class IdentityReport:
    """Largest relative violation of each identity over the ensemble."""

    violations: dict
    sample_count: int
    tolerances: dict = field(default_factory=dict)

    def passed(self) -> bool:
        return all(self.violations[k] <= self.tolerances[k] for k in self.violations)


# -- norms --------------------------------------------------------------------


def _weighted(stack: np.ndarray, weight: np.ndarray) -> float:
    return float(np.sum(weight * (stack.real**2 + stack.imag**2)))


def hk_norm_sq(coeffs: np.ndarray, grid: GridSpec, k: int) -> float:
    """``|f|_{H^k}^2 = sum (1 + |kappa|^2)^k |c|^2`` for a field or a stack of fields."""
    return _weighted(coeffs, (1.0 + grid.kappa2) ** k)


def lp_norm(values: np.ndarray, quad: Quadrature, p: float, planar: bool = False) -> float:
    """Discrete ``L^p`` norm of physical samples ``(nxq, nyq[, nzq])`` on ``quad``."""
    weights = (quad.dx * quad.dy) if planar else quad.weights
    return float(np.sum(np.abs(values) ** p * weights)) ** (1.0 / p)


def norms(
    state: State,
    filt: FilterSpec = FilterSpec(4, 2),
    energy_residual: float = 0.0,
    forcing: State | None = None,
) -> DiagnosticsRecord:
    """Tracked norms of ``state``; ``energy_residual`` is passed through."""
    g = state.grid
    s = state.stack()
    kh2 = np.broadcast_to(g.kh2, g.shape)
    kz2 = np.broadcast_to(g.kz2, g.shape)
    high = ~filt.low_mask(g)
    grad_sq = _weighted(s, kh2)
    dz_sq = _weighted(s, kz2)
    split = split_modes(state)
    quad = g.padded
    prime = np.stack([split.uprime.coeffs, split.vprime.coeffs])
    work = quad.synth_work(prime, Parity.COS)
    mag_sq = work[:, 0] ** 2 + work[:, 1] ** 2
    l6 = float(np.sum(mag_sq**3 * (quad.dx * quad.dy) * quad.weights_z[None, :, None])) ** (1.0 / 6.0)
    power = 0.0 if forcing is None else float(np.sum((np.conj(forcing.stack()) * s).real))
    return DiagnosticsRecord(
        time=state.time,
        l2_sq=_weighted(s, np.ones(g.shape)),
        grad_sq=grad_sq,
        dz_sq=dz_sq,
        high_grad_sq=_weighted(s, np.where(high, kh2, 0.0)),
        high_dz_sq=_weighted(s, np.where(high, kz2, 0.0)),
        l6_prime=l6,
        grad_ubar_sq=_weighted(np.stack([split.ubar.coeffs, split.vbar.coeffs]), kh2[:, :, 0]),
        dz_u_sq=dz_sq,
        grad_u_sq=grad_sq,
        mixed_sq=_weighted(s, kh2 * kz2),
        lap_sq=_weighted(s, kh2**2),
        dzz_sq=_weighted(s, kz2**2),
        energy_residual=float(energy_residual),
        forcing_power=power,
    )


def poincare_constant(grid: GridSpec) -> float:
    """``1 / min |kappa|^2`` over the nonzero modes of the grid."""
    k2 = np.array(grid.kappa2, copy=True)
    k2[0, 0, 0] = np.inf
    return float(1.0 / np.min(k2))


def filter_bound_ratio(coeffs: np.ndarray, filt: FilterSpec, grid: GridSpec, k: int) -> float:
    """``|P u|_{H^k} / |u|_{L^2}`` for a field or stack of fields."""
    low = np.where(filt.low_mask(grid), coeffs, 0.0)
    denom = _weighted(coeffs, np.ones(grid.shape))
    if denom == 0.0:
        return 0.0
    return math.sqrt(hk_norm_sq(low, grid, k) / denom)


# -- energy budget ------------------------------------------------------------


def _power_and_rate(model: ModelConfig, s: np.ndarray, forcing: np.ndarray | None, grid: GridSpec):
    """``P = <F,u> - sum lambda |u|^2`` and its time derivative along the exact flow."""
    k = kernel(model, grid)
    lam = k.symbol
    t = k.full(s, forcing)
    pf = 0.0 if forcing is None else float(np.sum((np.conj(forcing) * s).real))
    dpf = 0.0 if forcing is None else float(np.sum((np.conj(forcing) * t).real))
    diss = _weighted(s, lam)
    ddiss = 2.0 * float(np.sum(lam * (np.conj(s) * t).real))
    return pf - diss, dpf - ddiss


def energy_budget(
    prev: State, next: State, model: ModelConfig, forcing: State | None, dt: float
) -> float:
    """Signed per-step residual ``dE/dt - <P>`` of the energy ``E = |u|^2 / 2``.

    ``<P>`` is the end-point corrected trapezoid average of the power
    ``P = <F,u> - sum lambda |u|^2`` over the step (fourth-order accurate),
    so the residual reflects the time integrator rather than the quadrature.
    """
    grid = prev.grid
    f = None if forcing is None else forcing.stack()
    e0 = 0.5 * prev.norm_sq()
    e1 = 0.5 * next.norm_sq()
    p0, dp0 = _power_and_rate(model, prev.stack(), f, grid)
    p1, dp1 = _power_and_rate(model, next.stack(), f, grid)
    average = 0.5 * (p0 + p1) + dt / 12.0 * (dp0 - dp1)
    return (e1 - e0) / dt - average


def trajectory_budget(states: Sequence[State], model: ModelConfig, forcing: State | None, dt: float) -> float:
    """``|sum_n dt * residual_n|``: the accumulated energy-budget mismatch of a trajectory."""
    total = 0.0
    for prev, nxt in zip(states[:-1], states[1:]):
        total += dt * energy_budget(prev, nxt, model, forcing, dt)
    return abs(total)


# -- random ensembles ---------------------------------------------------------


def _spectral_exponents(count: int, s: float) -> np.ndarray:
    """Envelope exponents cycling around ``s`` so the ensemble spans several spectra."""
    return s + 0.5 * (np.arange(count) % 5 - 2)


def random_scalar_ensemble(
    grid: GridSpec, count: int = 50, seed: int = 0, s: float = 1.5
) -> list[SpectralField]:
    """Real, dealiased cosine fields with ``|c| ~ (1 + |kappa|^2)^(-s_i)``."""
    rng = np.random.default_rng(seed)
    out = []
    for si in _spectral_exponents(count, s):
        noise = forward_transform(rng.standard_normal(grid.shape), Parity.COS, grid)
        c = noise.coeffs * (1.0 + grid.kappa2) ** (-si)
        out.append(dealias(SpectralField(c, Parity.COS, grid)))
    return out


def random_planar_ensemble(grid: GridSpec, count: int = 50, seed: int = 0, s: float = 1.5) -> list[PlanarField]:
    """Real, dealiased functions on the cross-section with the same spectral recipe."""
    rng = np.random.default_rng(seed)
    quad = grid.base
    mask = grid.dealias_mask[:, :, 0]
    out = []
    for si in _spectral_exponents(count, s):
        c = quad.planar_from_physical(rng.standard_normal(grid.shape[:2]))
        c = np.where(mask, c * (1.0 + grid.kh2[:, :, 0]) ** (-si), 0.0)
        out.append(PlanarField(c, grid))
    return out


def random_state_ensemble(grid: GridSpec, count: int = 50, seed: int = 0, s: float = 1.5) -> list[State]:
    """Valid velocity states: dealiased, mean-free, barotropically divergence free."""
    scalars = random_scalar_ensemble(grid, 2 * count, seed, s)
    out = []
    for i in range(count):
        st = remove_mean(State(scalars[2 * i], scalars[2 * i + 1]))
        out.append(leray_project_barotropic(st)[0])
    return out


# -- inequality probes ----------------------------------------------------------


def _ratio_a1(values, quad):
    p, p1, p2 = 10.0 / 3.0, 2.0, 6.0
    s1 = p1 / p * (p2 - p) / (p2 - p1)
    s2 = p2 / p * (p - p1) / (p2 - p1)
    lhs = lp_norm(values, quad, p)
    rhs = lp_norm(values, quad, p1) ** s1 * lp_norm(values, quad, p2) ** s2
    return lhs, rhs


def _ratio_a6(values, quad, p=2.0):
    """Minkowski with ``f = |phi|^6`` on ``M x (-h, 0)``: ``(int_M (int f dz)^p)^(1/p) <= int (int_M f^p)^(1/p) dz``."""
    f = np.abs(values) ** 6
    area = quad.dx * quad.dy
    inner_z = np.sum(f * quad.weights_z[None, None, :], axis=2)
    lhs = float(np.sum(inner_z**p) * area) ** (1.0 / p)
    per_level = (np.sum(f**p, axis=(0, 1)) * area) ** (1.0 / p)
    rhs = float(np.sum(per_level * quad.weights_z))
    return lhs, rhs


def _scalar_probe(pid: str, field_: SpectralField, quad: Quadrature):
    vals = quad.to_physical(field_.coeffs, Parity.COS)
    g = field_.grid
    if pid == "a1":
        return _ratio_a1(vals, quad)
    if pid == "a6":
        return _ratio_a6(vals, quad)
    h1 = math.sqrt(hk_norm_sq(field_.coeffs, g, 1))
    if pid == "a4":
        return lp_norm(vals, quad, 3), math.sqrt(lp_norm(vals, quad, 2) * h1)
    if pid == "a5":
        return lp_norm(vals, quad, 6), h1
    raise ValueError(pid)


def _planar_probe(pid: str, phi: PlanarField, quad: Quadrature):
    vals = quad.planar_to_physical(phi.coeffs)
    h1 = math.sqrt(_weighted(phi.coeffs, 1.0 + phi.grid.kh2[:, :, 0]))
    if pid == "a2":
        return lp_norm(vals, quad, 4, planar=True), math.sqrt(lp_norm(vals, quad, 2, planar=True) * h1)
    if pid == "a3":
        return lp_norm(vals, quad, 8, planar=True), lp_norm(vals, quad, 6, planar=True) ** 0.75 * h1**0.25
    raise ValueError(pid)


def _vint_probe(u: State, f: SpectralField, gfield: SpectralField, quad: Quadrature):
    """``int (int_z |grad u| dz) |f| |g| <= |f| |u|_H1^(1/2) |u|_H2^(1/2) |g|^(1/2) |g|_H1^(1/2)``."""
    grid = u.grid
    s = u.stack()
    ikx = (1j * grid.kx_odd)[:, None, None]
    iky = (1j * grid.ky_odd)[None, :, None]
    grads = quad.to_physical(np.stack([ikx * s[0], iky * s[0], ikx * s[1], iky * s[1]]), Parity.COS)
    mag = np.sqrt(np.sum(grads**2, axis=0))
    column = np.sum(mag * quad.weights_z[None, None, :], axis=2)
    fv = quad.to_physical(f.coeffs, Parity.COS)
    gv = quad.to_physical(gfield.coeffs, Parity.COS)
    lhs = float(np.sum(column[:, :, None] * np.abs(fv) * np.abs(gv) * quad.weights))
    rhs = (
        math.sqrt(f.norm_sq())
        * hk_norm_sq(s, grid, 1) ** 0.25
        * hk_norm_sq(s, grid, 2) ** 0.25
        * gfield.norm_sq() ** 0.25
        * hk_norm_sq(gfield.coeffs, grid, 1) ** 0.25
    )
    return lhs, rhs


def probe_inequality(pid: str, ensemble, factor: float = 1.5) -> ProbeReport:
    """Largest ``LHS / RHS`` (constants dropped) of one inequality over an ensemble.

    ``ensemble`` is a list of :class:`SpectralField` for ``a1``, ``a4``-``a6``,
    of :class:`PlanarField` for ``a2``/``a3`` and of :class:`State` for
    ``vint`` (where ``f`` and ``g`` are components of the next two samples).
    Samples with a vanishing right-hand side are skipped.
    """
    if pid not in INEQUALITY_IDS:
        raise ValueError(f"unknown inequality id {pid!r}; expected one of {INEQUALITY_IDS}")
    items = list(ensemble)
    if not items:
        raise ValueError("empty ensemble")
    quad = items[0].grid.quadrature(factor)
    best, where, used = -math.inf, "none", 0
    for i, item in enumerate(items):
        if pid in ("a2", "a3"):
            lhs, rhs = _planar_probe(pid, item, quad)
        elif pid == "vint":
            nxt = items[(i + 1) % len(items)]
            nxt2 = items[(i + 2) % len(items)]
            lhs, rhs = _vint_probe(item, nxt.u, nxt2.v, quad)
        else:
            lhs, rhs = _scalar_probe(pid, item, quad)
        if rhs == 0.0 or not math.isfinite(rhs):
            continue
        used += 1
        ratio = lhs / rhs
        if ratio > best:
            best, where = ratio, f"sample {i}"
    if used == 0:
        best = 0.0
    return ProbeReport(pid, used, float(best), where)


def refine_ensemble(ensemble, factor: int = 2):
    """The same band-limited functions on a grid with ``factor`` times the modes."""
    out = []
    for item in ensemble:
        fine = item.grid.refined(factor)
        if isinstance(item, State):
            out.append(
                State.from_stack(resample_coeffs(item.stack(), item.grid, fine), fine, item.time)
            )
        elif isinstance(item, PlanarField):
            out.append(PlanarField(resample_coeffs(item.coeffs, item.grid, fine), fine))
        else:
            out.append(SpectralField(resample_coeffs(item.coeffs, item.grid, fine), item.parity, fine))
    return out


# -- identity probes -----------------------------------------------------------

IDENTITY_TOLERANCES = {
    "b_uuu": 1e-10,
    "b_skew": 1e-10,
    "b_weighted": 1e-6,
    "coriolis": 1e-12,
    "pressure": 1e-12,
    "mean_prime": 1e-12,
    "avg_dzz": 1e-12,
    "avg_dzz_filtered": 1e-12,
    "avg_proj_filtered": 0.0,
    "avg_lap_filtered": 1e-14,
}


def _abs_pairing(u: State, ut: State, sharp_work: np.ndarray, quad: Quadrature) -> float:
    """``int |(u.grad)ut + w(u) dut/dz| |u#|``, the natural scale of ``b``."""
    k = kernel(ModelConfig(kind="classical", mu=0.0, nu=0.0), u.grid)
    adv = k.advection_work(u.stack(), ut.stack(), quad, band=False)
    mag = np.sqrt(adv[:, 0] ** 2 + adv[:, 1] ** 2)
    smag = np.sqrt(sharp_work[:, 0] ** 2 + sharp_work[:, 1] ** 2)
    w = (quad.dx * quad.dy) * quad.weights_z[None, :, None]
    return float(np.sum(mag * smag * w))


def weighted_b(uprime: State, factor: float = WEIGHTED_FACTOR) -> tuple[float, float]:
    """``b(u', u', |u'|^4 u')`` and its absolute scale on the quadrature grid of refinement ``factor``."""
    quad = uprime.grid.quadrature(factor)
    up = quad.synth_work(uprime.stack(), Parity.COS)
    mag4 = (up[:, 0] ** 2 + up[:, 1] ** 2) ** 2
    sharp = up * mag4[:, None]
    value = trilinear_b(uprime, uprime, sharp, factor)
    return value, _abs_pairing(uprime, uprime, sharp, quad)


def _rel(value: float, scale: float) -> float:
    if scale == 0.0:
        return 0.0 if value == 0.0 else math.inf
    return abs(value) / scale


def probe_identities(
    states: Sequence[State],
    model: ModelConfig | None = None,
    forcing: State | None = None,
    weighted_factor: float = WEIGHTED_FACTOR,
) -> IdentityReport:
    """Evaluate every skew/orthogonality/averaging identity on the ensemble.

    Each entry is the largest violation relative to the natural scale of
    the corresponding term (an absolute-value integral or product of norms).
    """
    model = model or ModelConfig()
    viol = {key: 0.0 for key in IDENTITY_TOLERANCES}
    states = list(states)
    n = len(states)
    for i, u in enumerate(states):
        g = u.grid
        quad = g.padded
        ut = states[(i + 1) % n]
        us = states[(i + 2) % n]
        uw = quad.synth_work(u.stack(), Parity.COS)
        usw = quad.synth_work(us.stack(), Parity.COS)
        utw = quad.synth_work(ut.stack(), Parity.COS)
        viol["b_uuu"] = max(viol["b_uuu"], _rel(trilinear_b(u, u, uw), _abs_pairing(u, u, uw, quad)))
        b1 = trilinear_b(u, ut, usw)
        b2 = trilinear_b(u, us, utw)
        scale = max(_abs_pairing(u, ut, usw, quad), _abs_pairing(u, us, utw, quad))
        viol["b_skew"] = max(viol["b_skew"], _rel(b1 + b2, scale))

        split = split_modes(u)
        prime = State(split.uprime, split.vprime)
        value, scale = weighted_b(prime, weighted_factor)
        viol["b_weighted"] = max(viol["b_weighted"], _rel(value, scale))

        s = u.stack()
        cor = kernel(model, g).coriolis(s)
        viol["coriolis"] = max(
            viol["coriolis"], _rel(float(np.sum((np.conj(cor) * s).real)), abs(model.f) * u.norm_sq())
        )

        # pressure gradient removed by the projection of the explicit tendency
        kern = kernel(model, g)
        raw = -kern.advection(s) - kern.coriolis(s)
        if forcing is not None:
            raw = raw + forcing.stack()
        raw = np.where(kern.mask, raw, 0.0)
        grad_p = raw - kern.project(raw)[0]
        pairing = float(np.sum((np.conj(grad_p) * s).real))
        # H (grad p0, ubar)_M with ubar's planar coefficients c/sqrt(h)
        planar = g.h * float(np.sum((np.conj(grad_p[:, :, :, 0] / math.sqrt(g.h)) * s[:, :, :, 0] / math.sqrt(g.h)).real))
        scale = math.sqrt(_weighted(grad_p, np.ones(g.shape)) * u.norm_sq())
        viol["pressure"] = max(viol["pressure"], _rel(pairing, scale), _rel(pairing - planar, scale))

        viol["mean_prime"] = max(
            viol["mean_prime"],
            float(np.max(np.abs(split.uprime.coeffs[:, :, 0]))),
            _rel(_vertical_mean_quadrature(split.uprime), math.sqrt(split.uprime.norm_sq())),
        )
        dzz = -g.kz2 * s
        viol["avg_dzz"] = max(
            viol["avg_dzz"], _rel(_vertical_mean_quadrature(SpectralField(dzz[0], Parity.COS, g)), math.sqrt(_weighted(dzz[0], np.ones(g.shape))))
        )
        low = np.where(model.filter.low_mask(g), s, 0.0)
        dzz_low = -g.kz2 * low
        viol["avg_dzz_filtered"] = max(
            viol["avg_dzz_filtered"],
            float(np.max(np.abs(dzz_low[:, :, :, 0]))),
            _rel(_vertical_mean_quadrature(SpectralField(dzz_low[0], Parity.COS, g)), math.sqrt(max(_weighted(dzz_low[0], np.ones(g.shape)), 1e-300))),
        )
        # avg(P u) versus P avg(u): both are masks of the same numbers, so bit-exact
        ubar = np.stack([split.ubar.coeffs, split.vbar.coeffs])
        mask0 = model.filter.low_mask(g)[:, :, 0]
        low_bar = split_modes(State.from_stack(low, g))
        avg_low = np.stack([low_bar.ubar.coeffs, low_bar.vbar.coeffs])
        viol["avg_proj_filtered"] = max(
            viol["avg_proj_filtered"], float(np.max(np.abs(avg_low - np.where(mask0, ubar, 0.0))))
        )
        # avg(Lap P u) versus Lap P avg(u); equal up to the order of one multiplication
        lhs = (-g.kh2 * low)[:, :, :, 0] / math.sqrt(g.h)
        rhs = -g.kh2[:, :, 0] * np.where(mask0, ubar, 0.0)
        viol["avg_lap_filtered"] = max(
            viol["avg_lap_filtered"], _rel(float(np.max(np.abs(lhs - rhs))), float(np.max(np.abs(rhs))))
        )
    return IdentityReport(viol, n, dict(IDENTITY_TOLERANCES))


def _vertical_mean_quadrature(field_: SpectralField) -> float:
    """Largest ``|(1/h) int f dz|`` over the base horizontal grid, by vertical trapezoid quadrature."""
    quad = field_.grid.base
    vals = quad.to_physical(field_.coeffs, Parity.COS)
    mean = np.sum(vals * quad.weights_z[None, None, :], axis=2) / field_.grid.h
    # compare with the pointwise scale of an L2-normalised field
    return float(np.max(np.abs(mean))) * math.sqrt(field_.grid.volume)
