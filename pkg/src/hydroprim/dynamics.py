"""Right-hand sides of the closed velocity equation for the three model kinds.

The momentum balance is

    du/dt = -(u.grad)u - w du/dz - f k x u - grad(p0)/rho0 + F - Lambda u

where ``Lambda`` is a diagonal (per-mode) viscous symbol that depends on the
model kind.  Pressure never appears explicitly: the explicit part of the
right-hand side is Leray-projected on the barotropic plane, and the removed
gradient is ``grad(p0)/rho0``.

Products are formed on the 3/2-padded grid from dealiased inputs and the
result is truncated back to the dealiased band, so every quadratic term is
computed exactly up to round-off.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._alloc import tune_allocator
from .fields import PlanarField, State, leray_project_planar, split_modes
from .spectral_basis import FilterSpec, GridSpec, Parity, Quadrature, SpectralField

__all__ = [
    "Kernel",
    "ModelConfig",
    "ModelKind",
    "advection_tendency",
    "barotropic_tendency",
    "baroclinic_tendency",
    "coriolis_tendency",
    "explicit_tendency",
    "integrate_work",
    "split_tendency",
    "kernel",
    "tendency",
    "trilinear_b",
    "viscous_symbol",
]


class ModelKind(enum.Enum):
    CLASSICAL = "classical"
    PARTIAL = "partial"
    SPECTRAL_EDDY = "spectral_eddy"


@dataclass(frozen=True)
class ModelConfig:
    """Physical parameters and filter of one model.

    ``mu``/``nu`` are the horizontal/vertical viscosities, ``mu_delta``/
    ``nu_delta`` the eddy coefficients acting on the high modes only.
    """

    kind: ModelKind = ModelKind.PARTIAL
    mu: float = 1e-2
    nu: float = 1e-2
    mu_delta: float = 0.0
    nu_delta: float = 0.0
    f: float = 1.0
    rho0: float = 1.0
    g: float = 9.81
    filter: FilterSpec = field(default_factory=lambda: FilterSpec(4, 2))

    def __post_init__(self):
        if not isinstance(self.kind, ModelKind):
            object.__setattr__(self, "kind", ModelKind(self.kind))
        for name in ("mu", "nu", "mu_delta", "nu_delta", "f", "rho0", "g"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        for name in ("mu", "nu", "mu_delta", "nu_delta", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.rho0 <= 0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")
        if self.kind is ModelKind.CLASSICAL and (self.mu_delta != 0 or self.nu_delta != 0):
            raise ValueError("the classical model takes no eddy viscosity (mu_delta = nu_delta = 0)")


def viscous_symbol(model: ModelConfig, grid: GridSpec, mode: tuple[int, int, int] | None = None):
    """Per-mode dissipation rate ``lambda >= 0``.

    Returns the full ``(nx, ny, nz)`` table, or the scalar for one
    ``mode = (m1, m2, n)`` when given.
    """
    classical = model.mu * grid.kh2 + model.nu * grid.kz2
    if model.kind is ModelKind.CLASSICAL:
        lam = classical
    else:
        model.filter.check(grid)
        high = ~model.filter.low_mask(grid)
        if model.kind is ModelKind.PARTIAL:
            lam = np.where(high, classical, 0.0)
        else:
            eddy = model.mu_delta * grid.kh2 + model.nu_delta * grid.kz2
            lam = classical + np.where(high, eddy, 0.0)
    lam = np.broadcast_to(lam, grid.shape)
    if mode is None:
        return np.array(lam)
    m1, m2, n = mode
    return float(lam[m1 % grid.nx, m2 % grid.ny, n])


class Kernel:
    """Cached operators for one ``(model, grid)`` pair, acting on ``(2, nx, ny, nz)`` stacks."""

    def __init__(self, model: ModelConfig, grid: GridSpec):
        tune_allocator()
        self.model = model
        self.grid = grid
        self.quad: Quadrature = grid.padded
        self.ikx = (1j * grid.kx_odd)[:, None, None]
        self.iky = (1j * grid.ky_odd)[None, :, None]
        self.kz = grid.kz[None, None, :]
        wfac = np.zeros(grid.nz)
        wfac[1:] = -grid.h / (np.pi * grid.n[1:])
        self.wfac = wfac[None, None, :]
        self.mask = grid.dealias_mask

    @cached_property
    def symbol(self) -> np.ndarray:
        return viscous_symbol(self.model, self.grid)

    def decay(self, dt: float) -> np.ndarray:
        return np.exp(-self.symbol * dt)

    # -- nonlinear terms ---------------------------------------------------

    def advection(self, s: np.ndarray, quad: Quadrature | None = None, band: bool = True) -> np.ndarray:
        """``(u.grad)u + w du/dz`` as a ``(2, nx, ny, nz)`` stack, truncated to ``band``."""
        quad = self.quad if quad is None else quad
        return quad.anal_work(self.advection_work(s, s, quad, band), Parity.COS, band)

    def advection_work(self, s: np.ndarray, t: np.ndarray, quad: Quadrature, band: bool) -> np.ndarray:
        """``(u.grad)ut + w(u) dut/dz`` sampled on ``quad`` in work layout, for stacks ``u=s``, ``ut=t``."""
        u, v = s[0], s[1]
        div = self.ikx * u + self.iky * v
        cos_stack = np.stack([u, v, self.ikx * t[0], self.iky * t[0], self.ikx * t[1], self.iky * t[1]])
        sin_stack = np.stack([div * self.wfac, -self.kz * t[0], -self.kz * t[1]])
        linear = np.zeros((3,) + self.grid.shape[:2], dtype=complex)
        linear[0] = div[:, :, 0]
        wc = quad.synth_work(cos_stack, Parity.COS, band=band)
        ws = quad.synth_work(sin_stack, Parity.SIN, linear, band=band)
        out = np.empty((quad.nxq, 2, quad.nzq, quad.nyq))
        out[:, 0] = wc[:, 0] * wc[:, 2] + wc[:, 1] * wc[:, 3] + ws[:, 0] * ws[:, 1]
        out[:, 1] = wc[:, 0] * wc[:, 4] + wc[:, 1] * wc[:, 5] + ws[:, 0] * ws[:, 2]
        return out

    def coriolis(self, s: np.ndarray) -> np.ndarray:
        """The term ``f k x u = (-f v, f u)``."""
        return np.stack([-self.model.f * s[1], self.model.f * s[0]])

    def project(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Barotropic Leray projection of a stack; returns it and the planar potential (3D n=0 scaling)."""
        out = s.copy()
        a, b, phi = leray_project_planar(s[0, :, :, 0], s[1, :, :, 0], self.grid)
        out[0, :, :, 0] = a
        out[1, :, :, 0] = b
        return out, phi

    def explicit(self, s: np.ndarray, forcing: np.ndarray | None) -> np.ndarray:
        """Projected, dealiased ``-(advection) - coriolis + F`` (viscosity excluded)."""
        rhs = -self.advection(s)
        rhs -= self.coriolis(s)
        if forcing is not None:
            rhs += forcing
        rhs = np.where(self.mask, rhs, 0.0)
        return self.project(rhs)[0]

    def explicit_with_potential(self, s: np.ndarray, forcing: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        rhs = -self.advection(s) - self.coriolis(s)
        if forcing is not None:
            rhs = rhs + forcing
        rhs = np.where(self.mask, rhs, 0.0)
        return self.project(rhs)

    def full(self, s: np.ndarray, forcing: np.ndarray | None) -> np.ndarray:
        return self.explicit(s, forcing) - self.symbol * s


_KERNELS: dict = {}


def kernel(model: ModelConfig, grid: GridSpec) -> Kernel:
    """Shared :class:`Kernel` for a model and grid (both are immutable)."""
    key = (model, grid)
    k = _KERNELS.get(key)
    if k is None:
        if len(_KERNELS) > 64:
            _KERNELS.clear()
        k = _KERNELS[key] = Kernel(model, grid)
    return k


def _forcing_stack(forcing: State | None) -> np.ndarray | None:
    return None if forcing is None else forcing.stack()


def advection_tendency(state: State) -> State:
    """The advection term ``(u.grad)u + w du/dz`` (to be subtracted), dealiased."""
    k = kernel(ModelConfig(kind=ModelKind.CLASSICAL, mu=0.0, nu=0.0), state.grid)
    return State.from_stack(k.advection(state.stack()), state.grid, state.time)


def coriolis_tendency(state: State, f: float) -> State:
    """The Coriolis term ``f k x u = (-f v, f u)`` (to be subtracted)."""
    return State(state.v * (-f), state.u * f, state.time)


def explicit_tendency(model: ModelConfig, state: State, forcing: State | None = None) -> tuple[State, PlanarField]:
    """Explicit right-hand side (no viscosity) and the surface pressure ``p0``."""
    k = kernel(model, state.grid)
    rhs, phi = k.explicit_with_potential(state.stack(), _forcing_stack(forcing))
    p0 = PlanarField(model.rho0 * phi / math.sqrt(state.grid.h), state.grid)
    return State.from_stack(rhs, state.grid, state.time), p0


def tendency(model: ModelConfig, state: State, forcing: State | None = None) -> State:
    """Full right-hand side ``du/dt`` of the closed equation, including viscosity."""
    k = kernel(model, state.grid)
    return State.from_stack(k.full(state.stack(), _forcing_stack(forcing)), state.grid, state.time)


def trilinear_b(u: State, utilde: State, usharp: State | np.ndarray, factor: float = 1.5) -> float:
    """``b(u, ut, u#) = <(u.grad)ut + w(u) dut/dz, u#>`` by quadrature.

    ``usharp`` is either a velocity state or its samples in work layout
    ``(nxq, 2, nzq, nyq)`` on the quadrature grid of refinement ``factor``
    (the latter allows pointwise composites such as ``|u|^4 u``).
    """
    grid = u.grid
    quad = grid.quadrature(factor)
    k = kernel(ModelConfig(kind=ModelKind.CLASSICAL, mu=0.0, nu=0.0), grid)
    adv = k.advection_work(u.stack(), utilde.stack(), quad, band=False)
    if isinstance(usharp, State):
        sharp = quad.synth_work(usharp.stack(), Parity.COS)
    else:
        sharp = np.asarray(usharp)
        if sharp.shape != adv.shape:
            raise ValueError(f"usharp samples must have shape {adv.shape}, got {sharp.shape}")
    return integrate_work(quad, adv * sharp)


def integrate_work(quad: Quadrature, work: np.ndarray) -> float:
    """Quadrature over Omega of a work-layout array, summed over its field axis."""
    w = (quad.dx * quad.dy) * quad.weights_z[None, None, :, None]
    return float(np.sum(work * w))


def _n0_plane(stack: np.ndarray) -> np.ndarray:
    return stack[:, :, :, 0]


def barotropic_tendency(model: ModelConfig, split, forcing: State | None = None) -> tuple[PlanarField, PlanarField]:
    """Right-hand side of the vertically averaged momentum equation.

    ``d ubar/dt = P_L[-(ubar.grad)ubar - avg((u'.grad)u') - avg((div u') u') - f k x ubar + avg F]
    - Lambda(m, 0) ubar``, with ``P_L`` the planar Leray projection.
    """
    grid = split.uprime.grid
    k = kernel(model, grid)
    sh = math.sqrt(grid.h)
    bar = split_to_stack(split, barotropic=True)
    prime = split_to_stack(split, barotropic=False)
    quad = k.quad
    # (ubar.grad)ubar; the 3D machinery on a z-independent stack is the 2D product.
    adv_bar = k.advection(bar)
    interaction = quad.anal_work(_interaction_work(k, prime, quad), Parity.COS, band=True)
    rhs = -adv_bar - interaction - k.coriolis(bar)
    if forcing is not None:
        rhs = rhs + forcing.stack()
    rhs = np.where(k.mask, rhs, 0.0)
    plane = _n0_plane(rhs)
    a, b, _ = leray_project_planar(plane[0], plane[1], grid)
    lam0 = k.symbol[:, :, 0]
    a = a - lam0 * bar[0, :, :, 0]
    b = b - lam0 * bar[1, :, :, 0]
    return PlanarField(a / sh, grid), PlanarField(b / sh, grid)


def _interaction_work(k: Kernel, prime: np.ndarray, quad: Quadrature) -> np.ndarray:
    """``(u'.grad)u' + (div u') u'`` sampled in work layout."""
    u, v = prime[0], prime[1]
    cos_stack = np.stack([u, v, k.ikx * u, k.iky * u, k.ikx * v, k.iky * v])
    wc = quad.synth_work(cos_stack, Parity.COS, band=True)
    div = wc[:, 2] + wc[:, 5]
    out = np.empty((quad.nxq, 2, quad.nzq, quad.nyq))
    out[:, 0] = wc[:, 0] * wc[:, 2] + wc[:, 1] * wc[:, 3] + div * wc[:, 0]
    out[:, 1] = wc[:, 0] * wc[:, 4] + wc[:, 1] * wc[:, 5] + div * wc[:, 1]
    return out


def baroclinic_tendency(model: ModelConfig, split, forcing: State | None = None) -> State:
    """Right-hand side of the deviation equation (zero vertical mean by construction).

    ``du'/dt = -(u'.grad)u' - w(u') du'/dz - f k x u' - [(u'.grad)ubar + (ubar.grad)u'
    - avg((u'.grad)u') - avg((div u') u')] + F' - Lambda u'``.
    """
    grid = split.uprime.grid
    k = kernel(model, grid)
    quad = k.quad
    bar = split_to_stack(split, barotropic=True)
    prime = split_to_stack(split, barotropic=False)
    self_adv = k.advection_work(prime, prime, quad, band=True)
    cross = _cross_work(k, prime, bar, quad)
    terms = quad.anal_work(self_adv + cross, Parity.COS, band=True)
    rhs = -terms - k.coriolis(prime)
    if forcing is not None:
        rhs = rhs + forcing.stack()
    rhs = np.where(k.mask, rhs, 0.0)
    rhs = rhs - k.symbol * prime
    rhs[:, :, :, 0] = 0.0  # removes avg(...) and the barotropic parts of F
    return State.from_stack(rhs, grid)


def _cross_work(k: Kernel, prime: np.ndarray, bar: np.ndarray, quad: Quadrature) -> np.ndarray:
    """``(u'.grad)ubar + (ubar.grad)u'`` sampled in work layout."""
    up, vp = prime[0], prime[1]
    ub, vb = bar[0], bar[1]
    cos_stack = np.stack(
        [up, vp, ub, vb, k.ikx * ub, k.iky * ub, k.ikx * vb, k.iky * vb, k.ikx * up, k.iky * up, k.ikx * vp, k.iky * vp]
    )
    c = quad.synth_work(cos_stack, Parity.COS, band=True)
    out = np.empty((quad.nxq, 2, quad.nzq, quad.nyq))
    out[:, 0] = c[:, 0] * c[:, 4] + c[:, 1] * c[:, 5] + c[:, 2] * c[:, 8] + c[:, 3] * c[:, 9]
    out[:, 1] = c[:, 0] * c[:, 6] + c[:, 1] * c[:, 7] + c[:, 2] * c[:, 10] + c[:, 3] * c[:, 11]
    return out


def split_to_stack(split, barotropic: bool) -> np.ndarray:
    """3D coefficient stack of either the broadcast barotropic part or the baroclinic part."""
    if barotropic:
        return np.stack([split.ubar.broadcast().coeffs, split.vbar.broadcast().coeffs])
    return np.stack([split.uprime.coeffs, split.vprime.coeffs])


def split_tendency(model: ModelConfig, state: State, forcing: State | None = None):
    """Convenience: both split right-hand sides of ``state``."""
    split = split_modes(state)
    return barotropic_tendency(model, split, forcing), baroclinic_tendency(model, split, forcing)


def state_from_pair(a: SpectralField, b: SpectralField, time: float = 0.0) -> State:
    return State(a, b, time)
