"""Advection, Coriolis, viscosity, projected tendencies and the split equations."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hydroprim.diagnostics import random_state_ensemble
from hydroprim.dynamics import (
    ModelConfig,
    ModelKind,
    advection_tendency,
    barotropic_tendency,
    baroclinic_tendency,
    coriolis_tendency,
    explicit_tendency,
    split_tendency,
    tendency,
    trilinear_b,
    viscous_symbol,
)
from hydroprim.experiments import exact_solution_state, remark2_surface_pressure
from hydroprim.fields import State, divergence_barotropic, split_modes
from hydroprim.spectral_basis import (
    FilterSpec,
    GridSpec,
    Parity,
    SpectralField,
    dzz,
    forward_transform,
    laplacian_h,
    project_high,
)

from .conftest import SMALL

seeds = st.integers(min_value=0, max_value=2**31 - 1)
BOX = GridSpec(lx=2 * math.pi, ly=2 * math.pi, h=1.0, nx=16, ny=16, nz=9)


def stack_inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum((np.conj(a) * b).real))


def project_fine(values: np.ndarray, grid: GridSpec, nz_fine: int) -> np.ndarray:
    """Basis coefficients of samples on a uniform (N, N, nz_fine) grid by FFT and trapezoid in z."""
    nxf, nyf, _ = values.shape
    z = np.linspace(0.0, -grid.h, nz_fine)
    wz = np.full(nz_fine, grid.h / (nz_fine - 1))
    wz[[0, -1]] /= 2
    hat = np.fft.fft2(values, axes=(0, 1)) * (grid.lx * grid.ly / (nxf * nyf)) / math.sqrt(grid.area)
    out = np.zeros(grid.shape, dtype=complex)
    ix = np.fft.fftfreq(grid.nx, 1.0 / grid.nx).astype(int) % nxf
    iy = np.fft.fftfreq(grid.ny, 1.0 / grid.ny).astype(int) % nyf
    for n in range(grid.nz):
        basis = math.sqrt((1 if n == 0 else 2) / grid.h) * np.cos(n * np.pi * z / grid.h)
        plane = np.sum(hat * (basis * wz)[None, None, :], axis=2)
        out[:, :, n] = plane[np.ix_(ix, iy)]
    return out


class TestAdvection:
    def test_oracle_by_independent_quadrature(self):
        h = BOX.h
        q = BOX.base
        X, Y, Z = np.meshgrid(q.x, q.y, q.z, indexing="ij")
        u = forward_transform(np.cos(X + Y) * np.cos(np.pi * Z / h), Parity.COS, BOX)
        v = forward_transform(np.sin(2 * X) * np.cos(2 * np.pi * Z / h), Parity.COS, BOX)
        got = advection_tendency(State(u, v)).stack()

        N, NZ = 64, 129
        x = np.arange(N) * 2 * np.pi / N
        z = np.linspace(0.0, -h, NZ)
        x, y, z = np.meshgrid(x, x, z, indexing="ij")
        cz, sz = np.cos(np.pi * z / h), np.sin(np.pi * z / h)
        c2z, s2z = np.cos(2 * np.pi * z / h), np.sin(2 * np.pi * z / h)
        uu = np.cos(x + y) * cz
        vv = np.sin(2 * x) * c2z
        w = (h / np.pi) * np.sin(x + y) * sz
        ux, uy, uz = -np.sin(x + y) * cz, -np.sin(x + y) * cz, -(np.pi / h) * np.cos(x + y) * sz
        vx, vy, vz = 2 * np.cos(2 * x) * c2z, 0.0 * x, -(2 * np.pi / h) * np.sin(2 * x) * s2z
        adv_u = uu * ux + vv * uy + w * uz
        adv_v = uu * vx + vv * vy + w * vz
        expected = np.stack([project_fine(adv_u, BOX, NZ), project_fine(adv_v, BOX, NZ)])
        expected = np.where(BOX.dealias_mask, expected, 0.0)
        np.testing.assert_allclose(got, expected, atol=1e-10)
        assert np.max(np.abs(expected)) > 0.1

    def test_zero_first_argument(self, small):
        states = random_state_ensemble(small, 2, seed=1)
        assert trilinear_b(State.zeros(small), states[0], states[1]) == 0.0

    @given(seeds)
    def test_skew_symmetry(self, seed):
        u, ut, us = random_state_ensemble(SMALL, 3, seed=seed)
        b1 = trilinear_b(u, ut, us)
        b2 = trilinear_b(u, us, ut)
        assert abs(b1 + b2) < 1e-12 * (abs(b1) + 1e-300) + 1e-14

    def test_tendency_pairing_vanishes(self, small):
        for u in random_state_ensemble(small, 4, seed=2):
            adv = advection_tendency(u).stack()
            assert abs(stack_inner(adv, u.stack())) < 1e-12 * math.sqrt(np.sum(np.abs(adv) ** 2) * u.norm_sq())

    def test_output_is_dealiased(self, small):
        adv = advection_tendency(random_state_ensemble(small, 1)[0]).stack()
        assert not np.any(adv[:, ~small.dealias_mask])


class TestCoriolis:
    @given(seeds, st.floats(-10, 10))
    def test_orthogonal(self, seed, f):
        u = random_state_ensemble(SMALL, 1, seed=seed)[0]
        c = coriolis_tendency(u, f)
        assert abs(stack_inner(c.stack(), u.stack())) <= 1e-15 * abs(f) * u.norm_sq()

    def test_components(self, small):
        u = random_state_ensemble(small, 1)[0]
        c = coriolis_tendency(u, 2.0)
        np.testing.assert_array_equal(c.u.coeffs, -2.0 * u.v.coeffs)
        np.testing.assert_array_equal(c.v.coeffs, 2.0 * u.u.coeffs)


class TestViscousSymbol:
    def test_classical_mode(self, small):
        m = ModelConfig(kind=ModelKind.CLASSICAL, mu=0.1, nu=0.2)
        kx = 2 * np.pi / small.lx
        kz = np.pi / small.h
        assert viscous_symbol(m, small, (1, 0, 1)) == pytest.approx(0.1 * kx**2 + 0.2 * kz**2, rel=1e-14)

    def test_partial_neutral_on_low_modes(self, small):
        m = ModelConfig(kind=ModelKind.PARTIAL, mu=0.1, nu=0.2, filter=FilterSpec(2, 1))
        assert viscous_symbol(m, small, (2, -2, 1)) == 0.0
        ky = 2 * np.pi * 3 / small.ly
        assert viscous_symbol(m, small, (0, 3, 0)) == pytest.approx(0.1 * ky**2, rel=1e-14)

    def test_spectral_eddy_adds_on_high_modes(self, small):
        m = ModelConfig(kind=ModelKind.SPECTRAL_EDDY, mu=0.1, nu=0.2, mu_delta=0.05, nu_delta=0.07, filter=FilterSpec(2, 1))
        kx, kz = 2 * np.pi / small.lx, np.pi / small.h
        assert viscous_symbol(m, small, (1, 0, 1)) == pytest.approx(0.1 * kx**2 + 0.2 * kz**2, rel=1e-14)
        kz2 = 2 * np.pi / small.h
        assert viscous_symbol(m, small, (1, 0, 2)) == pytest.approx(0.15 * kx**2 + 0.27 * kz2**2, rel=1e-14)

    def test_nonnegative_table(self, small):
        for kind in ModelKind:
            m = ModelConfig(kind=kind, mu_delta=0.0 if kind is ModelKind.CLASSICAL else 0.1)
            assert np.all(viscous_symbol(m, small) >= 0)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(mu=-1.0), dict(nu=math.nan), dict(rho0=0.0), dict(kind=ModelKind.CLASSICAL, mu_delta=0.1), dict(kind="bogus")],
    )
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            ModelConfig(**kwargs)


class TestTendency:
    def test_spectral_eddy_by_brute_force(self, small):
        filt = FilterSpec(3, 2)
        m = ModelConfig(kind=ModelKind.SPECTRAL_EDDY, mu=0.02, nu=0.03, mu_delta=0.5, nu_delta=0.7, filter=filt)
        u = random_state_ensemble(small, 1, seed=3)[0]
        visc = tendency(m, u).stack() - explicit_tendency(m, u)[0].stack()
        expected = []
        for comp in (u.u, u.v):
            high = project_high(comp, filt)
            expected.append(
                (0.02 * laplacian_h(comp) + 0.03 * dzz(comp) + 0.5 * laplacian_h(high) + 0.7 * dzz(high)).coeffs
            )
        np.testing.assert_allclose(visc, np.stack(expected), atol=1e-12)

    def test_partial_neutral_on_low_state(self, small):
        filt = FilterSpec(2, 1)
        m = ModelConfig(kind=ModelKind.PARTIAL, filter=filt, mu=0.3, nu=0.3)
        s = random_state_ensemble(small, 1, seed=4)[0].stack()
        s = np.where(filt.low_mask(small), s, 0.0)
        u = State.from_stack(s, small)
        np.testing.assert_array_equal(tendency(m, u).stack(), explicit_tendency(m, u)[0].stack())

    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_energy_identity(self, small, kind):
        m = ModelConfig(kind=kind, mu_delta=0.0 if kind is ModelKind.CLASSICAL else 0.1, nu_delta=0.0 if kind is ModelKind.CLASSICAL else 0.2)
        u, forcing = random_state_ensemble(small, 2, seed=5)
        t = tendency(m, u, forcing).stack()
        s = u.stack()
        lam = viscous_symbol(m, small)
        expected = stack_inner(forcing.stack(), s) - float(np.sum(lam * np.abs(s) ** 2))
        assert stack_inner(t, s) == pytest.approx(expected, rel=1e-11, abs=1e-13)

    def test_projected_tendency_is_barotropically_solenoidal(self, small):
        m = ModelConfig()
        u = random_state_ensemble(small, 1, seed=6)[0]
        t = tendency(m, u)
        assert math.sqrt(divergence_barotropic(t).norm_sq()) < 1e-13

    def test_zero_state(self, small):
        t, p0 = explicit_tendency(ModelConfig(), State.zeros(small))
        assert not np.any(t.stack()) and not np.any(p0.coeffs)

    def test_remark2_state_is_steady(self):
        grid = GridSpec()
        m = ModelConfig(kind=ModelKind.PARTIAL)
        u = exact_solution_state(grid, 1.0)
        t, p0 = explicit_tendency(m, u)
        assert np.max(np.abs(tendency(m, u).stack())) < 1e-13
        expected = remark2_surface_pressure(grid, 1.0, m.f, m.rho0)
        diff = (p0 - expected).coeffs
        diff[0, 0] = 0.0
        assert np.max(np.abs(diff)) < 1e-12


class TestSplitEquations:
    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_matches_full_tendency(self, small, kind):
        m = ModelConfig(kind=kind, mu_delta=0.0 if kind is ModelKind.CLASSICAL else 0.1, filter=FilterSpec(3, 2))
        u, forcing = random_state_ensemble(small, 2, seed=7)
        (ab, bb), prime = split_tendency(m, u, forcing)
        full = tendency(m, u, forcing).stack()
        sh = math.sqrt(small.h)
        np.testing.assert_allclose(ab.coeffs, full[0, :, :, 0] / sh, atol=1e-12)
        np.testing.assert_allclose(bb.coeffs, full[1, :, :, 0] / sh, atol=1e-12)
        np.testing.assert_allclose(prime.stack()[:, :, :, 1:], full[:, :, :, 1:], atol=1e-12)
        assert not np.any(prime.stack()[:, :, :, 0])

    def test_z_independent_state(self, small):
        u = random_state_ensemble(small, 1, seed=8)[0].stack()
        u[:, :, :, 1:] = 0.0
        split = split_modes(State.from_stack(u, small))
        out = baroclinic_tendency(ModelConfig(), split)
        assert not np.any(out.stack())
        ab, bb = barotropic_tendency(ModelConfig(), split)
        assert ab.norm_sq() > 0 or bb.norm_sq() > 0

    def test_zero_split(self, small):
        split = split_modes(State.zeros(small))
        ab, bb = barotropic_tendency(ModelConfig(), split)
        assert not np.any(ab.coeffs) and not np.any(bb.coeffs)
        assert not np.any(baroclinic_tendency(ModelConfig(), split).stack())

    def test_single_mode_prime_is_zero_mean(self, small):
        f = SpectralField.single_mode(small, (1, 0, 1), 0.2)
        split = split_modes(State(f, SpectralField.zeros(small)))
        assert not np.any(split.uprime.coeffs[:, :, 0])
