"""Prognostic state, diagnosed ``w`` and pressure, and the barotropic/baroclinic split.

The barotropic part of a cosine field is its ``n = 0`` plane.  It is kept as a
:class:`PlanarField` in the orthonormal basis ``exp(i m.x') / sqrt(lx ly)`` of
``L2(M)``, so a 3D coefficient ``c`` on the ``n = 0`` plane corresponds to the
planar coefficient ``c / sqrt(h)`` of the vertical average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral_basis import (
    GridSpec,
    Parity,
    SpectralField,
    dx,
    dy,
    integral_z_to_0,
)

__all__ = [
    "DiagnosedFields",
    "HydrostaticPressure",
    "ModeSplit",
    "PlanarField",
    "State",
    "diagnose",
    "diagnose_pressure",
    "diagnose_w",
    "divergence_barotropic",
    "leray_project_barotropic",
    "remove_mean",
    "split_modes",
]


@dataclass(frozen=True, eq=False)
class PlanarField:
    """Fourier coefficients ``(nx, ny)`` of a function on the cross-section ``M``."""

    coeffs: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape[:2]:
            raise ValueError(f"planar coefficient shape {c.shape} does not match grid {self.grid.shape[:2]}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: GridSpec) -> PlanarField:
        return cls(np.zeros(grid.shape[:2], dtype=complex), grid)

    def __add__(self, other: PlanarField) -> PlanarField:
        return PlanarField(self.coeffs + other.coeffs, self.grid)

    def __sub__(self, other: PlanarField) -> PlanarField:
        return PlanarField(self.coeffs - other.coeffs, self.grid)

    def __neg__(self) -> PlanarField:
        return PlanarField(-self.coeffs, self.grid)

    def __mul__(self, scalar) -> PlanarField:
        return PlanarField(self.coeffs * scalar, self.grid)

    __rmul__ = __mul__

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def dx(self) -> PlanarField:
        return PlanarField(self.coeffs * (1j * self.grid.kx_odd)[:, None], self.grid)

    def dy(self) -> PlanarField:
        return PlanarField(self.coeffs * (1j * self.grid.ky_odd)[None, :], self.grid)

    def to_physical(self, factor: float = 1.0) -> np.ndarray:
        return self.grid.quadrature(factor).planar_to_physical(self.coeffs)

    def broadcast(self) -> SpectralField:
        """The z-independent 3D cosine field with this vertical average."""
        c = np.zeros(self.grid.shape, dtype=complex)
        c[:, :, 0] = self.coeffs * math.sqrt(self.grid.h)
        return SpectralField(c, Parity.COS, self.grid)


@dataclass(frozen=True, eq=False)
class State:
    """Horizontal velocity ``(u, v)`` as two cosine fields, plus the model time."""

    u: SpectralField
    v: SpectralField
    time: float = 0.0

    def __post_init__(self):
        if self.u.parity is not Parity.COS or self.v.parity is not Parity.COS:
            raise ValueError("velocity components must be COS fields")
        if self.u.grid != self.v.grid:
            raise ValueError("velocity components live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: GridSpec, time: float = 0.0) -> State:
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid), time)

    @classmethod
    def from_stack(cls, stack: np.ndarray, grid: GridSpec, time: float = 0.0) -> State:
        return cls(SpectralField(stack[0], Parity.COS, grid), SpectralField(stack[1], Parity.COS, grid), time)

    def stack(self) -> np.ndarray:
        """Coefficients as one ``(2, nx, ny, nz)`` array."""
        return np.stack([self.u.coeffs, self.v.coeffs])

    def with_time(self, time: float) -> State:
        return State(self.u, self.v, time)

    def norm_sq(self) -> float:
        return self.u.norm_sq() + self.v.norm_sq()

    def __add__(self, other: State) -> State:
        return State(self.u + other.u, self.v + other.v, self.time)

    def __sub__(self, other: State) -> State:
        return State(self.u - other.u, self.v - other.v, self.time)

    def __mul__(self, scalar) -> State:
        return State(self.u * scalar, self.v * scalar, self.time)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ModeSplit:
    """Barotropic (vertical-mean) and baroclinic (zero-mean deviation) parts of a velocity."""

    ubar: PlanarField
    vbar: PlanarField
    uprime: SpectralField
    vprime: SpectralField

    def reconstruct(self) -> State:
        return State(self.ubar.broadcast() + self.uprime, self.vbar.broadcast() + self.vprime)


@dataclass(frozen=True)
class HydrostaticPressure:
    """``p(x, y, z) = p0(x, y) - rho0 g z`` held in closed form."""

    p0: PlanarField
    rho0: float
    g: float

    def evaluate(self, factor: float = 1.0) -> np.ndarray:
        """Pressure on the quadrature grid with the given refinement, shape ``(nxq, nyq, nzq)``."""
        quad = self.p0.grid.quadrature(factor)
        return self.p0.to_physical(factor)[:, :, None] - self.rho0 * self.g * quad.z[None, None, :]

    def dpdz(self, factor: float = 1.0) -> np.ndarray:
        quad = self.p0.grid.quadrature(factor)
        return np.full(quad.shape, -self.rho0 * self.g)


@dataclass(frozen=True)
class DiagnosedFields:
    w: SpectralField
    p0: PlanarField
    p: HydrostaticPressure


def diagnose_w(state: State) -> SpectralField:
    """Vertical velocity ``w = div int_z^0 u dxi`` as a SIN field.

    The constant-in-z part of the divergence integrates to a linear term,
    which is carried in ``linear`` and vanishes once the barotropic flow is
    divergence free.
    """
    return integral_z_to_0(dx(state.u) + dy(state.v))


def split_modes(state: State) -> ModeSplit:
    g = state.grid
    sh = math.sqrt(g.h)
    ubar = PlanarField(state.u.coeffs[:, :, 0] / sh, g)
    vbar = PlanarField(state.v.coeffs[:, :, 0] / sh, g)
    up = state.u.coeffs.copy()
    vp = state.v.coeffs.copy()
    up[:, :, 0] = 0.0
    vp[:, :, 0] = 0.0
    return ModeSplit(ubar, vbar, SpectralField(up, Parity.COS, g), SpectralField(vp, Parity.COS, g))


def divergence_barotropic(state: State) -> PlanarField:
    """Horizontal divergence of the vertical mean."""
    split = split_modes(state)
    return split.ubar.dx() + split.vbar.dy()


def leray_project_planar(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Divergence-free part of the planar pair ``(a, b)`` and the potential of the rest.

    Returns ``(a_sol, b_sol, phi)`` with ``(a, b) = (a_sol, b_sol) + grad(phi)``.
    Odd-derivative wavenumbers are used so the result is discretely
    divergence free under :func:`dx` / :func:`dy`.
    """
    kx = grid.kx_odd[:, None]
    ky = grid.ky_odd[None, :]
    k2 = kx**2 + ky**2
    safe = np.where(k2 > 0, k2, 1.0)
    kdot = kx * a + ky * b
    coef = np.where(k2 > 0, kdot / safe, 0.0)
    phi = np.where(k2 > 0, -1j * kdot / safe, 0.0)
    return a - kx * coef, b - ky * coef, phi


def leray_project_barotropic(state: State) -> tuple[State, PlanarField]:
    """Remove the gradient part of the barotropic velocity (or tendency).

    Returns the projected pair and the planar potential ``p0 / rho0`` whose
    gradient was removed.  The baroclinic planes are untouched.
    """
    g = state.grid
    a, b, phi = leray_project_planar(state.u.coeffs[:, :, 0], state.v.coeffs[:, :, 0], g)
    uc = state.u.coeffs.copy()
    vc = state.v.coeffs.copy()
    uc[:, :, 0] = a
    vc[:, :, 0] = b
    potential = PlanarField(phi / math.sqrt(g.h), g)
    return State(SpectralField(uc, Parity.COS, g), SpectralField(vc, Parity.COS, g), state.time), potential


def diagnose_pressure(p0: PlanarField, grid: GridSpec, rho0: float, g: float) -> HydrostaticPressure:
    if p0.grid != grid:
        raise ValueError("p0 lives on a different grid")
    return HydrostaticPressure(p0, float(rho0), float(g))


def diagnose(state: State, p0: PlanarField, rho0: float, g: float) -> DiagnosedFields:
    return DiagnosedFields(diagnose_w(state), p0, diagnose_pressure(p0, state.grid, rho0, g))


def remove_mean(state: State) -> State:
    uc = state.u.coeffs.copy()
    vc = state.v.coeffs.copy()
    uc[0, 0, 0] = 0.0
    vc[0, 0, 0] = 0.0
    g = state.grid
    return State(SpectralField(uc, Parity.COS, g), SpectralField(vc, Parity.COS, g), state.time)
