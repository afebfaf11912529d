"""Mixed Fourier x cosine/sine spectral basis on a periodic channel.

Fields on ``Omega = (0, lx) x (0, ly) x (-h, 0)`` are expanded as::

    f(x, y, z) = sum_{m1, m2, n} c[m1, m2, n] * s_n * exp(i m . x') * Z_n(z)

with ``x' = 2 pi (x / lx, y / ly)``, ``Z_n = cos(n pi z / h)`` for ``COS``
fields and ``Z_n = sin(n pi z / h)`` for ``SIN`` fields.  The factors ``s_n``
make the basis orthonormal in ``L2(Omega)``, so the coefficient 2-norm is the
L2 norm of the field and no Parseval factors appear anywhere else.

Coefficient arrays have shape ``(nx, ny, nz)`` with numpy FFT ordering along
the two horizontal axes.  Physical arrays are indexed ``(x, y, z)``; the
vertical collocation points ``z_k = -h k / (nq - 1)`` include the surface
``z = 0`` and the bottom ``z = -h``.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "PAD_FACTOR",
    "FilterSpec",
    "GridSpec",
    "Parity",
    "Quadrature",
    "SpectralField",
    "dealias",
    "dx",
    "dy",
    "dz",
    "dzz",
    "filter_norm_constant",
    "forward_transform",
    "inner",
    "integral_z_to_0",
    "inverse_transform",
    "laplacian_h",
    "project_high",
    "project_low",
    "resample",
    "resample_coeffs",
    "workers",
]

PAD_FACTOR = 1.5


def workers() -> int:
    """Worker count for internal parallelism, capped by ``HYDROPRIM_THREADS`` when set."""
    raw = os.environ.get("HYDROPRIM_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"HYDROPRIM_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"HYDROPRIM_THREADS must be a positive integer, got {raw!r}")
    return value


class Parity(enum.Enum):
    """Vertical basis of a field: cosine (free-slip) or sine (vanishing at walls)."""

    COS = 0
    SIN = 1


@dataclass(frozen=True)
class FilterSpec:
    """Cutoffs of the low-pass projector: keep ``max(|m1|, |m2|) <= m_cut`` and ``n <= n_cut``."""

    m_cut: int
    n_cut: int

    def __post_init__(self):
        if int(self.m_cut) != self.m_cut or int(self.n_cut) != self.n_cut:
            raise ValueError("filter cutoffs must be integers")
        if self.m_cut < 0 or self.n_cut < 0:
            raise ValueError(f"filter cutoffs must be nonnegative, got ({self.m_cut}, {self.n_cut})")

    def check(self, grid: GridSpec) -> None:
        if self.m_cut >= min(grid.nx, grid.ny) // 2:
            raise ValueError(f"m_cut={self.m_cut} must be < min(nx, ny)/2 = {min(grid.nx, grid.ny) // 2}")
        if self.n_cut >= grid.nz:
            raise ValueError(f"n_cut={self.n_cut} must be < nz={grid.nz}")

    def low_mask(self, grid: GridSpec) -> np.ndarray:
        m_sup = np.maximum(np.abs(grid.m1)[:, None], np.abs(grid.m2)[None, :])
        return (m_sup <= self.m_cut)[:, :, None] & (grid.n <= self.n_cut)[None, None, :]


@dataclass(frozen=True)
class GridSpec:
    """Domain lengths and mode counts of the periodic channel.

    ``nx`` and ``ny`` are the numbers of horizontal Fourier modes (FFT
    ordering), ``nz`` the number of vertical cosine modes ``n = 0 .. nz-1``.
    Products are evaluated on the 3/2-padded grid returned by ``padded``.
    """

    lx: float = 2 * math.pi
    ly: float = 2 * math.pi
    h: float = 1.0
    nx: int = 32
    ny: int = 32
    nz: int = 9

    def __post_init__(self):
        for name in ("lx", "ly", "h"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        for name in ("nx", "ny", "nz"):
            value = getattr(self, name)
            if int(value) != value or value < 4:
                raise ValueError(f"{name} must be an integer >= 4, got {value}")
        if self.nx % 2 or self.ny % 2:
            raise ValueError(f"nx and ny must be even, got ({self.nx}, {self.ny})")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def volume(self) -> float:
        return self.lx * self.ly * self.h

    @cached_property
    def m1(self) -> np.ndarray:
        return np.fft.fftfreq(self.nx, 1.0 / self.nx).round().astype(int)

    @cached_property
    def m2(self) -> np.ndarray:
        return np.fft.fftfreq(self.ny, 1.0 / self.ny).round().astype(int)

    @cached_property
    def n(self) -> np.ndarray:
        return np.arange(self.nz)

    @cached_property
    def kx(self) -> np.ndarray:
        return 2 * np.pi * self.m1 / self.lx

    @cached_property
    def ky(self) -> np.ndarray:
        return 2 * np.pi * self.m2 / self.ly

    @cached_property
    def kz(self) -> np.ndarray:
        return np.pi * self.n / self.h

    @cached_property
    def kx_odd(self) -> np.ndarray:
        # Nyquist column has no conjugate partner; odd derivatives drop it.
        k = self.kx.copy()
        k[self.nx // 2] = 0.0
        return k

    @cached_property
    def ky_odd(self) -> np.ndarray:
        k = self.ky.copy()
        k[self.ny // 2] = 0.0
        return k

    @cached_property
    def kh2(self) -> np.ndarray:
        """Horizontal ``|k|^2`` with shape ``(nx, ny, 1)``."""
        return (self.kx[:, None] ** 2 + self.ky[None, :] ** 2)[:, :, None]

    @cached_property
    def kz2(self) -> np.ndarray:
        """Vertical ``(n pi / h)^2`` with shape ``(1, 1, nz)``."""
        return (self.kz**2)[None, None, :]

    @cached_property
    def kappa2(self) -> np.ndarray:
        return self.kh2 + self.kz2

    @cached_property
    def norm_factors(self) -> np.ndarray:
        """``s_n`` such that ``s_n exp(i m.x') cos(n z')`` is orthonormal on Omega."""
        eps = np.where(self.n == 0, 1.0, 2.0)
        return np.sqrt(eps / self.volume)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep_x = 3 * np.abs(self.m1) <= self.nx
        keep_y = 3 * np.abs(self.m2) <= self.ny
        keep_z = 3 * self.n <= 2 * self.nz
        return keep_x[:, None, None] & keep_y[None, :, None] & keep_z[None, None, :]

    @cached_property
    def base(self) -> Quadrature:
        """Collocation grid with one point per mode."""
        return Quadrature.build(self, 1.0)

    @cached_property
    def padded(self) -> Quadrature:
        """3/2-padded grid used for products and weighted integrals."""
        return Quadrature.build(self, PAD_FACTOR)

    def quadrature(self, factor: float) -> Quadrature:
        if factor == 1.0:
            return self.base
        if factor == PAD_FACTOR:
            return self.padded
        cache = self.__dict__.setdefault("_quadrature_cache", {})
        if factor not in cache:
            cache[factor] = Quadrature.build(self, factor)
        return cache[factor]

    def refined(self, factor: int = 2) -> GridSpec:
        """Same domain with ``factor`` times the mode counts (vertical: ``factor*(nz-1)+1``)."""
        return GridSpec(self.lx, self.ly, self.h, factor * self.nx, factor * self.ny, factor * (self.nz - 1) + 1)


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Physical sampling grid plus the matrices that move between it and coefficients.

    Horizontal directions use ``nxq x nyq`` uniform points; the vertical
    direction uses ``nzq`` equispaced points on ``[-h, 0]`` with trapezoid
    weights, which integrate products of the even/odd extensions exactly as
    long as the combined vertical degree stays below ``2 (nzq - 1)``.

    All transforms are dense matrix products.  At the mode counts used here
    this beats batched small FFTs, and it lets callers that know their data
    is dealiased skip the truncated third of the spectrum (``band=True``).
    Synthesis relies on conjugate symmetry: only ``m2 >= 0`` is read and the
    real part of the half-spectrum sum is returned.
    """

    grid: GridSpec
    nxq: int
    nyq: int
    nzq: int
    z: np.ndarray
    weights_z: np.ndarray
    synth_z: dict = field(repr=False)
    anal_z: dict = field(repr=False)
    synth_x: np.ndarray = field(repr=False)
    anal_x: np.ndarray = field(repr=False)
    synth_y: np.ndarray = field(repr=False)
    anal_y: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, grid: GridSpec, factor: float) -> Quadrature:
        if factor < 1.0:
            raise ValueError("quadrature factor must be >= 1")
        nxq = grid.nx if factor == 1.0 else int(math.ceil(factor * grid.nx))
        nyq = grid.ny if factor == 1.0 else int(math.ceil(factor * grid.ny))
        nzq = grid.nz if factor == 1.0 else int(math.ceil(factor * (grid.nz - 1))) + 1
        k = np.arange(nzq)
        z = -grid.h * k / (nzq - 1)
        dzq = grid.h / (nzq - 1)
        wz = np.full(nzq, dzq)
        wz[0] = wz[-1] = dzq / 2
        theta = np.pi * np.outer(k, grid.n) / (nzq - 1)  # (nzq, nz), equals n pi |z| / h
        s = grid.norm_factors
        cos_synth = np.cos(theta) * s
        # sin(n pi z / h) = -sin(n theta) since z = -h theta / pi
        sin_synth = -np.sin(theta) * s
        sin_synth[:, 0] = 0.0
        sin_synth[0, :] = 0.0
        sin_synth[-1, :] = 0.0
        gamma = np.where((grid.n == 0) | (grid.n == nzq - 1), 1.0, 0.5)
        cos_anal = (cos_synth / s).T * wz[None, :] / (grid.h * gamma[:, None] * s[:, None])
        sin_anal = (sin_synth / s).T * wz[None, :] / (grid.h * 0.5 * s[:, None])
        sin_anal[(grid.n == 0) | (grid.n >= nzq - 1), :] = 0.0

        jx = np.arange(nxq)
        phase_x = np.exp(2j * np.pi * np.outer(jx, grid.m1) / nxq)  # (nxq, nx)
        nyq_x = grid.nx // 2
        phase_x[:, nyq_x] = np.cos(np.pi * grid.nx * jx / nxq)
        anal_x = np.conj(phase_x).T / nxq
        if nxq != grid.nx:
            anal_x[nyq_x, :] = 0.0

        jy = np.arange(nyq)
        m2_half = np.arange(grid.ny // 2 + 1)
        weight_y = np.where((m2_half == 0) | (m2_half == grid.ny // 2), 1.0, 2.0)
        synth_y = np.exp(2j * np.pi * np.outer(jy, m2_half) / nyq) * weight_y
        anal_y = np.exp(-2j * np.pi * np.outer(m2_half, jy) / nyq) / nyq
        if nyq != grid.ny:
            anal_y[-1, :] = 0.0
        return cls(
            grid=grid,
            nxq=nxq,
            nyq=nyq,
            nzq=nzq,
            z=z,
            weights_z=wz,
            synth_z={Parity.COS: cos_synth, Parity.SIN: sin_synth},
            anal_z={Parity.COS: cos_anal, Parity.SIN: sin_anal},
            synth_x=phase_x,
            anal_x=anal_x,
            synth_y=synth_y,
            anal_y=anal_y,
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nxq, self.nyq, self.nzq)

    @property
    def dx(self) -> float:
        return self.grid.lx / self.nxq

    @property
    def dy(self) -> float:
        return self.grid.ly / self.nyq

    @property
    def dz(self) -> float:
        return self.grid.h / (self.nzq - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nxq) * self.dx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.nyq) * self.dy

    @cached_property
    def weights(self) -> np.ndarray:
        """Full 3D trapezoid weights, broadcastable against ``(nxq, nyq, nzq)``."""
        return (self.dx * self.dy) * self.weights_z[None, None, :]

    @cached_property
    def linear_profile(self) -> np.ndarray:
        """``-z * s_0`` at the vertical points: the integrated constant mode."""
        return -self.z * self.grid.norm_factors[0]

    @cached_property
    def _index_sets(self) -> dict:
        g = self.grid
        m2_half = np.arange(g.ny // 2 + 1)
        full = (np.arange(g.nx), m2_half, np.arange(g.nz))
        band = (
            np.flatnonzero(3 * np.abs(g.m1) <= g.nx),
            np.flatnonzero(3 * m2_half <= g.ny),
            np.flatnonzero(3 * g.n <= 2 * g.nz),
        )
        return {False: full, True: band}

    @cached_property
    def _stage_mats(self) -> dict:
        """GEMM operands per ``band`` setting.

        The y stage works on complex arrays viewed as interleaved floats:
        synthesis rows alternate ``(Re, -Im)`` so one real product yields
        the real part of the half-spectrum sum, and analysis columns
        alternate ``(Re, Im)`` so the real product can be viewed as complex.
        """
        mats = {}
        for band, (ix, jy, nz_idx) in self._index_sets.items():
            ey = self.synth_y[:, jy].T  # (J, nyq)
            sy = np.empty((2 * len(jy), self.nyq))
            sy[0::2] = ey.real
            sy[1::2] = -ey.imag
            ay = self.anal_y[jy, :].T  # (nyq, J)
            an = np.empty((self.nyq, 2 * len(jy)))
            an[:, 0::2] = ay.real
            an[:, 1::2] = ay.imag
            sz = {
                Parity.COS: np.ascontiguousarray(self.synth_z[Parity.COS][:, nz_idx].T),
                # trailing row multiplies the linear-in-z coefficient
                Parity.SIN: np.vstack([self.synth_z[Parity.SIN][:, nz_idx].T, self.linear_profile]),
            }
            az = {p: np.ascontiguousarray(self.anal_z[p][nz_idx, :].T) for p in Parity}
            mats[band] = {
                "sx": np.ascontiguousarray(self.synth_x[:, ix]),
                "ax": np.ascontiguousarray(self.anal_x[ix, :]),
                "sy": sy,
                "ay": an,
                "sz": sz,
                "az": az,
            }
        return mats

    def _scatter(self, part: np.ndarray, ix, jy, nz_idx) -> np.ndarray:
        """Full coefficients ``(F, nx, ny, nz)`` from a block ``(F, X, J, Z)`` via conjugate symmetry."""
        g = self.grid
        out = np.zeros((part.shape[0],) + g.shape, dtype=complex)
        out[:, ix[:, None, None], jy[None, :, None], nz_idx[None, None, :]] = part
        cols = np.arange(1, (g.ny + 1) // 2)  # strictly positive, non-Nyquist m2
        mirror = (-np.arange(g.nx)) % g.nx
        out[:, :, (-cols) % g.ny, :] = np.conj(out[:, mirror][:, :, cols, :])
        return out

    def synth_work(
        self,
        coeffs: np.ndarray,
        parity: Parity | None,
        linear: np.ndarray | None = None,
        band: bool = False,
    ) -> np.ndarray:
        """Sample a stack ``(F, nx, ny, nz)`` into the work layout ``(nxq, F, nzq, nyq)``.

        ``parity=None`` treats the stack as planar ``(F, nx, ny)`` and returns
        ``(nxq, F, 1, nyq)``.  ``linear`` (``(F, nx, ny)``, SIN only) adds the
        exact linear-in-z terms.  With ``band=True`` only dealiased modes are read.
        """
        ix, jy, nz_idx = self._index_sets[band]
        m = self._stage_mats[band]
        nf = coeffs.shape[0]
        if parity is None:
            block = coeffs[:, ix][:, :, jy][..., None] / math.sqrt(self.grid.area)
        else:
            block = coeffs[:, ix][:, :, jy][..., nz_idx]
            if parity is Parity.SIN:
                lin = np.zeros((nf, len(ix), len(jy), 1), dtype=complex)
                if linear is not None:
                    lin[..., 0] = linear[:, ix][:, :, jy]
                block = np.concatenate([block, lin], axis=-1)
        nzb = block.shape[-1]
        block = np.ascontiguousarray(block.transpose(1, 0, 2, 3))  # (X, F, J, Z)
        cx = m["sx"] @ block.reshape(len(ix), -1)  # (nxq, F*J*Z)
        if parity is None:
            cz = cx.reshape(self.nxq, nf, len(jy), 1).transpose(0, 1, 3, 2)
            nzl = 1
        else:
            cz = cx.reshape(-1, nzb) @ m["sz"][parity]  # (nxq*F*J, nzq)
            cz = cz.reshape(self.nxq, nf, len(jy), self.nzq).transpose(0, 1, 3, 2)
            nzl = self.nzq
        cz = np.ascontiguousarray(cz)  # (nxq, F, Z, J)
        out = cz.view(float).reshape(-1, 2 * len(jy)) @ m["sy"]
        return out.reshape(self.nxq, nf, nzl, self.nyq)

    def anal_work(self, work: np.ndarray, parity: Parity | None, band: bool = False) -> np.ndarray:
        """Inverse of :meth:`synth_work`: ``(nxq, F, nzq, nyq)`` to ``(F, nx, ny, nz)``.

        ``parity=None`` expects ``(nxq, F, 1, nyq)`` and returns planar ``(F, nx, ny)``.
        Refined grids drop the Nyquist slots.
        """
        ix, jy, nz_idx = self._index_sets[band]
        m = self._stage_mats[band]
        nxq, nf, nzl, _ = work.shape
        work = np.ascontiguousarray(work, dtype=float)
        cy = (work.reshape(-1, self.nyq) @ m["ay"]).view(complex)  # (nxq*F*Z, J)
        cx = m["ax"] @ cy.reshape(nxq, -1)  # (X, F*Z*J)
        cx = cx.reshape(len(ix), nf, nzl, len(jy))
        if parity is None:
            part = cx[:, :, 0, :].transpose(1, 0, 2)[..., None] * math.sqrt(self.grid.area)
            return self._scatter(part, ix, jy, np.array([0]))[..., 0]
        cz = np.ascontiguousarray(cx.transpose(0, 1, 3, 2)).reshape(-1, nzl) @ m["az"][parity]
        part = cz.reshape(len(ix), nf, len(jy), len(nz_idx)).transpose(1, 0, 2, 3)
        return self._scatter(part, ix, jy, nz_idx)

    def work_to_xyz(self, work: np.ndarray) -> np.ndarray:
        """Reorder ``(nxq, F, Z, nyq)`` into ``(F, nxq, nyq, Z)``."""
        return np.ascontiguousarray(work.transpose(1, 0, 3, 2))

    def xyz_to_work(self, values: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(values.transpose(1, 0, 3, 2))

    def to_physical(
        self, coeffs: np.ndarray, parity: Parity, linear: np.ndarray | None = None, band: bool = False
    ) -> np.ndarray:
        """Evaluate coefficient arrays ``(..., nx, ny, nz)`` on this grid, returning ``(..., nxq, nyq, nzq)``."""
        lead = coeffs.shape[:-3]
        c = np.asarray(coeffs).reshape((-1,) + self.grid.shape)
        lin = None if linear is None else np.asarray(linear).reshape((-1,) + self.grid.shape[:2])
        out = self.work_to_xyz(self.synth_work(c, parity, lin, band))
        return out.reshape(lead + self.shape)

    def from_physical(self, values: np.ndarray, parity: Parity, band: bool = False) -> np.ndarray:
        """Project physical arrays ``(..., nxq, nyq, nzq)`` onto the base coefficients."""
        lead = values.shape[:-3]
        v = np.asarray(values, dtype=float).reshape((-1,) + self.shape)
        return self.anal_work(self.xyz_to_work(v), parity, band).reshape(lead + self.grid.shape)

    def planar_to_physical(self, coeffs: np.ndarray, band: bool = False) -> np.ndarray:
        """Evaluate planar coefficients ``(..., nx, ny)`` (basis ``exp(i m.x')/sqrt(lx ly)``)."""
        lead = coeffs.shape[:-2]
        c = np.asarray(coeffs).reshape((-1,) + self.grid.shape[:2])
        out = self.work_to_xyz(self.synth_work(c, None, band=band))[..., 0]
        return out.reshape(lead + (self.nxq, self.nyq))

    def planar_from_physical(self, values: np.ndarray, band: bool = False) -> np.ndarray:
        lead = values.shape[:-2]
        v = np.asarray(values, dtype=float).reshape((-1, self.nxq, self.nyq))
        work = np.ascontiguousarray(v.transpose(1, 0, 2))[:, :, None, :]
        return self.anal_work(work, None, band).reshape(lead + self.grid.shape[:2])

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoid quadrature of a physical array over Omega."""
        return float(np.sum(values * self.weights))

    def integrate_planar(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.dx * self.dy)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of one scalar component in the mixed basis.

    ``linear`` is only used for ``SIN`` fields produced by
    :func:`integral_z_to_0`: it holds the planar coefficients ``l_m`` of the
    exactly represented term ``l_m * s_0 * exp(i m.x') * (-z)`` coming from
    the vertically constant input mode.
    """

    coeffs: np.ndarray
    parity: Parity
    grid: GridSpec
    linear: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)
        if self.parity is Parity.SIN and np.any(c[:, :, 0] != 0):
            raise ValueError("SIN fields must have an identically zero n=0 plane")
        if self.linear is not None:
            if self.parity is not Parity.SIN:
                raise ValueError("only SIN fields carry a linear-in-z component")
            lin = np.asarray(self.linear, dtype=complex)
            if lin.shape != self.grid.shape[:2]:
                raise ValueError("linear component must have shape (nx, ny)")
            object.__setattr__(self, "linear", lin)

    @classmethod
    def zeros(cls, grid: GridSpec, parity: Parity = Parity.COS) -> SpectralField:
        return cls(np.zeros(grid.shape, dtype=complex), parity, grid)

    @classmethod
    def single_mode(
        cls, grid: GridSpec, mode: tuple[int, int, int], value: complex = 1.0, parity: Parity = Parity.COS
    ) -> SpectralField:
        """Field with ``value`` at ``mode`` and its conjugate at ``(-m1, -m2, n)``."""
        m1, m2, n = mode
        i, j = m1 % grid.nx, m2 % grid.ny
        ic, jc = (-m1) % grid.nx, (-m2) % grid.ny
        c = np.zeros(grid.shape, dtype=complex)
        if (i, j) == (ic, jc):
            c[i, j, n] = np.real(value)
        else:
            c[i, j, n] = value
            c[ic, jc, n] = np.conj(value)
        return cls(c, parity, grid)

    def with_coeffs(self, coeffs: np.ndarray, linear: np.ndarray | None = None) -> SpectralField:
        return SpectralField(coeffs, self.parity, self.grid, linear)

    def _check_compatible(self, other: SpectralField) -> None:
        if other.parity is not self.parity or other.grid != self.grid:
            raise ValueError("fields differ in parity or grid")

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs, _add_linear(self.linear, other.linear))

    def __sub__(self, other: SpectralField) -> SpectralField:
        return self + (-other)

    def __neg__(self) -> SpectralField:
        return self.with_coeffs(-self.coeffs, None if self.linear is None else -self.linear)

    def __mul__(self, scalar) -> SpectralField:
        return self.with_coeffs(self.coeffs * scalar, None if self.linear is None else self.linear * scalar)

    __rmul__ = __mul__

    def norm_sq(self) -> float:
        """Squared L2 norm of the modal part (the linear-in-z term is not included)."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def conjugate_symmetry_error(self) -> float:
        g = self.grid
        ix = (-np.arange(g.nx)) % g.nx
        iy = (-np.arange(g.ny)) % g.ny
        mirrored = np.conj(self.coeffs[ix][:, iy])
        return float(np.max(np.abs(self.coeffs - mirrored), initial=0.0))


def _add_linear(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def inner(a: SpectralField, b: SpectralField) -> float:
    """Real L2(Omega) inner product of two same-parity fields."""
    a._check_compatible(b)
    return float(np.sum((np.conj(a.coeffs) * b.coeffs).real))


def forward_transform(physical: np.ndarray, parity: Parity, grid: GridSpec) -> SpectralField:
    """Coefficients of a real field sampled on the base collocation grid.

    ``SIN`` data must vanish on the surface and bottom planes, which belong
    to the collocation grid.
    """
    values = np.asarray(physical)
    if values.shape != grid.shape:
        raise ValueError(f"physical array shape {values.shape} does not match grid {grid.shape}")
    if np.iscomplexobj(values):
        raise ValueError("physical data must be real")
    values = values.astype(float)
    if parity is Parity.SIN:
        scale = float(np.max(np.abs(values), initial=0.0))
        walls = max(np.max(np.abs(values[:, :, 0])), np.max(np.abs(values[:, :, -1])))
        if walls > 1e-12 * max(scale, 1e-300):
            raise ValueError("SIN data must vanish at z = 0 and z = -h")
    coeffs = grid.base.from_physical(values, parity)
    if parity is Parity.SIN:
        coeffs[:, :, 0] = 0.0
    return SpectralField(coeffs, parity, grid)


def inverse_transform(field: SpectralField, tol: float = 1e-10) -> np.ndarray:
    """Real physical values on the base collocation grid."""
    scale = float(np.max(np.abs(field.coeffs), initial=0.0))
    if field.conjugate_symmetry_error() > tol * max(scale, 1e-300):
        raise ValueError("coefficients break conjugate symmetry; field would not be real")
    return field.grid.base.to_physical(field.coeffs, field.parity, field.linear)


def project_low(field: SpectralField, filt: FilterSpec) -> SpectralField:
    """Keep modes with ``|m|_sup <= m_cut`` and ``n <= n_cut``, zero the rest."""
    mask = filt.low_mask(field.grid)
    return field.with_coeffs(np.where(mask, field.coeffs, 0.0))


def project_high(field: SpectralField, filt: FilterSpec) -> SpectralField:
    """Complement of :func:`project_low`."""
    mask = filt.low_mask(field.grid)
    return field.with_coeffs(np.where(mask, 0.0, field.coeffs), field.linear)


def dx(field: SpectralField) -> SpectralField:
    ik = 1j * field.grid.kx_odd
    lin = None if field.linear is None else field.linear * ik[:, None]
    return field.with_coeffs(field.coeffs * ik[:, None, None], lin)


def dy(field: SpectralField) -> SpectralField:
    ik = 1j * field.grid.ky_odd
    lin = None if field.linear is None else field.linear * ik[None, :]
    return field.with_coeffs(field.coeffs * ik[None, :, None], lin)


def dz(field: SpectralField) -> SpectralField:
    """Vertical derivative; swaps parity (cos -> -k sin, sin -> +k cos)."""
    g = field.grid
    kz = g.kz[None, None, :]
    if field.parity is Parity.COS:
        return SpectralField(-kz * field.coeffs, Parity.SIN, g)
    out = kz * field.coeffs
    if field.linear is not None:
        out[:, :, 0] -= field.linear
    return SpectralField(out, Parity.COS, g)


def dzz(field: SpectralField) -> SpectralField:
    return field.with_coeffs(-field.grid.kz2 * field.coeffs, None if field.linear is None else 0 * field.linear)


def laplacian_h(field: SpectralField) -> SpectralField:
    lin = None if field.linear is None else -field.grid.kh2[:, :, 0] * field.linear
    return field.with_coeffs(-field.grid.kh2 * field.coeffs, lin)


def integral_z_to_0(field: SpectralField) -> SpectralField:
    """``F(z) = int_z^0 f(xi) dxi`` for a ``COS`` field, as a ``SIN`` field.

    Mode ``n > 0`` maps ``cos(n pi z / h)`` to ``-(h / (n pi)) sin(n pi z / h)``;
    the ``n = 0`` plane becomes the exact linear term ``-z`` stored in
    ``linear``.
    """
    if field.parity is not Parity.COS:
        raise ValueError("integral_z_to_0 expects a COS field")
    g = field.grid
    factor = np.zeros(g.nz)
    factor[1:] = -g.h / (np.pi * g.n[1:])
    coeffs = field.coeffs * factor[None, None, :]
    return SpectralField(coeffs, Parity.SIN, g, linear=field.coeffs[:, :, 0].copy())


def dealias(field: SpectralField) -> SpectralField:
    """2/3-rule truncation: zero ``|m1| > nx/3``, ``|m2| > ny/3`` and ``n > 2 nz/3``."""
    g = field.grid
    lin = None
    if field.linear is not None:
        lin = np.where(g.dealias_mask[:, :, 0], field.linear, 0.0)
    return field.with_coeffs(np.where(g.dealias_mask, field.coeffs, 0.0), lin)


def filter_norm_constant(filt: FilterSpec, k: int, grid: GridSpec) -> float:
    """Sharp constant ``C_k`` in ``|P u|_{H^k} <= C_k |u|_{L^2}`` on this grid.

    The ``H^k`` norm is weighted by ``(1 + |kappa|^2)^k`` per mode, so the
    constant is the largest such weight over the retained index set.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"k must be 0, 1 or 2, got {k}")
    weights = (1.0 + grid.kappa2) ** (k / 2)
    return float(np.max(np.where(filt.low_mask(grid), weights, 0.0)))


def resample_coeffs(coeffs: np.ndarray, src: GridSpec, dst: GridSpec) -> np.ndarray:
    """Copy the modes two grids share; all others (and Nyquist lines of a changed size) are zero.

    Works on ``(..., nx, ny, nz)`` or planar ``(..., nx, ny)`` arrays.  The
    basis normalization only depends on the domain, so embedding a band-
    limited field in a finer grid leaves the continuous function unchanged.
    """
    if (src.lx, src.ly, src.h) != (dst.lx, dst.ly, dst.h):
        raise ValueError("resampling requires identical domains")
    planar = coeffs.shape[-2:] == (src.nx, src.ny)
    if not planar and coeffs.shape[-3:] != src.shape:
        raise ValueError("coefficient array does not match the source grid")

    def axis_map(ns, nd):
        if ns == nd:
            idx = np.arange(ns)
            return idx, idx
        keep = min(ns, nd) // 2
        m = np.r_[0:keep, -keep + 1:0]
        return m % ns, m % nd

    sx, dx_ = axis_map(src.nx, dst.nx)
    sy, dy_ = axis_map(src.ny, dst.ny)
    nzk = min(src.nz, dst.nz)
    if planar:
        out = np.zeros(coeffs.shape[:-2] + (dst.nx, dst.ny), dtype=complex)
        out[..., dx_[:, None], dy_[None, :]] = coeffs[..., sx[:, None], sy[None, :]]
    else:
        out = np.zeros(coeffs.shape[:-3] + dst.shape, dtype=complex)
        out[..., dx_[:, None], dy_[None, :], :nzk] = coeffs[..., sx[:, None], sy[None, :], :nzk]
    return out


def resample(field: SpectralField, grid: GridSpec) -> SpectralField:
    """:func:`resample_coeffs` for a field; the linear-in-z part is carried along."""
    lin = None if field.linear is None else resample_coeffs(field.linear, field.grid, grid)
    return SpectralField(resample_coeffs(field.coeffs, field.grid, grid), field.parity, grid, lin)
