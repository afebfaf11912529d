"""State containers, diagnosed w, the mode split, Leray projection and pressure."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hydroprim.diagnostics import random_scalar_ensemble, random_state_ensemble
from hydroprim.fields import (
    PlanarField,
    State,
    diagnose,
    diagnose_pressure,
    diagnose_w,
    divergence_barotropic,
    leray_project_barotropic,
    leray_project_planar,
    remove_mean,
    split_modes,
)
from hydroprim.spectral_basis import GridSpec, Parity, SpectralField, dx, dy, dz, forward_transform, inverse_transform

from .conftest import SMALL

seeds = st.integers(min_value=0, max_value=2**31 - 1)
BOX = GridSpec(lx=2 * math.pi, ly=2 * math.pi, h=1.0, nx=16, ny=16, nz=9)


def raw_state(grid, seed):
    """Dealiased random state without the mean removal or the projection."""
    a, b = random_scalar_ensemble(grid, 2, seed=seed)
    return State(a, b)


class TestState:
    def test_rejects_sin_velocity(self, small):
        with pytest.raises(ValueError):
            State(SpectralField.zeros(small, Parity.SIN), SpectralField.zeros(small))

    def test_rejects_mixed_grids(self, small):
        with pytest.raises(ValueError):
            State(SpectralField.zeros(small), SpectralField.zeros(small.refined(2)))

    def test_stack_round_trip(self, small):
        s = raw_state(small, 1)
        back = State.from_stack(s.stack(), small, 0.5)
        np.testing.assert_array_equal(back.stack(), s.stack())
        assert back.time == 0.5

    def test_arithmetic(self, small):
        s = raw_state(small, 2)
        assert (s - s).norm_sq() == 0.0
        assert (2.0 * s).norm_sq() == pytest.approx(4.0 * s.norm_sq())

    def test_planar_shape_checked(self, small):
        with pytest.raises(ValueError):
            PlanarField(np.zeros((3, 3)), small)


class TestDiagnoseW:
    def test_analytic_example(self):
        # u = cos(x + y) cos(pi z), v = 0: div u = -sin(x + y) cos(pi z),
        # w = int_z^0 div u = (1/pi) sin(x + y) sin(pi z)
        q = BOX.base
        x, y, z = np.meshgrid(q.x, q.y, q.z, indexing="ij")
        u = forward_transform(np.cos(x + y) * np.cos(np.pi * z), Parity.COS, BOX)
        w = diagnose_w(State(u, SpectralField.zeros(BOX)))
        np.testing.assert_allclose(inverse_transform(w), np.sin(x + y) * np.sin(np.pi * z) / np.pi, atol=1e-13)

    @given(seeds)
    def test_walls_and_continuity(self, seed):
        state = random_state_ensemble(SMALL, 1, seed=seed)[0]
        w = diagnose_w(state)
        vals = inverse_transform(w)
        scale = math.sqrt(state.norm_sq()) * 10
        assert np.max(np.abs(vals[:, :, [0, -1]])) < 1e-12 * scale
        # dw/dz + div u = 0
        resid = dz(w) + dx(state.u) + dy(state.v)
        assert math.sqrt(resid.norm_sq()) < 1e-12 * scale

    def test_zero_state(self, small):
        w = diagnose_w(State.zeros(small))
        assert not np.any(w.coeffs)

    def test_linear_term_cancels_after_projection(self, small):
        raw = raw_state(small, 3)
        assert np.max(np.abs(diagnose_w(raw).linear)) > 1e-3
        proj, _ = leray_project_barotropic(raw)
        assert np.max(np.abs(diagnose_w(proj).linear)) < 1e-14


class TestSplit:
    @given(seeds)
    def test_reconstruct_is_exact(self, seed):
        s = raw_state(SMALL, seed)
        np.testing.assert_allclose(split_modes(s).reconstruct().stack(), s.stack(), rtol=0, atol=1e-15)

    def test_prime_has_zero_mean(self, small):
        split = split_modes(raw_state(small, 4))
        assert not np.any(split.uprime.coeffs[:, :, 0])
        assert not np.any(split.vprime.coeffs[:, :, 0])

    def test_barotropic_is_vertical_average(self, small):
        s = raw_state(small, 5)
        q = small.base
        avg = np.sum(inverse_transform(s.u) * q.weights_z[None, None, :], axis=2) / small.h
        np.testing.assert_allclose(split_modes(s).ubar.to_physical(), avg, atol=1e-13)

    @given(seeds, st.floats(-4, 4))
    def test_linear(self, seed, a):
        s1, s2 = raw_state(SMALL, seed), raw_state(SMALL, seed + 1)
        lhs = split_modes(s1 + a * s2)
        r1, r2 = split_modes(s1), split_modes(s2)
        np.testing.assert_allclose(lhs.ubar.coeffs, (r1.ubar + a * r2.ubar).coeffs, atol=1e-13)
        np.testing.assert_allclose(lhs.vprime.coeffs, (r1.vprime + a * r2.vprime).coeffs, atol=1e-13)


class TestLeray:
    @given(seeds)
    def test_idempotent_and_solenoidal(self, seed):
        s = raw_state(SMALL, seed)
        p1, _ = leray_project_barotropic(s)
        p2, phi2 = leray_project_barotropic(p1)
        np.testing.assert_allclose(p2.stack(), p1.stack(), atol=1e-15)
        assert np.max(np.abs(phi2.coeffs)) < 1e-15
        assert math.sqrt(divergence_barotropic(p1).norm_sq()) < 1e-13
        # baroclinic planes untouched
        np.testing.assert_array_equal(p1.stack()[:, :, :, 1:], s.stack()[:, :, :, 1:])

    def test_gradient_input_recovers_potential(self, small):
        rng = np.random.default_rng(0)
        phi = rng.standard_normal(small.shape[:2])
        phi = small.base.planar_from_physical(phi)
        phi = np.where(small.dealias_mask[:, :, 0], phi, 0.0)
        phi[0, 0] = 0.0
        a = 1j * small.kx_odd[:, None] * phi
        b = 1j * small.ky_odd[None, :] * phi
        a_sol, b_sol, got = leray_project_planar(a, b, small)
        assert np.max(np.abs(a_sol)) < 1e-14 and np.max(np.abs(b_sol)) < 1e-14
        np.testing.assert_allclose(got, phi, atol=1e-14)

    @given(seeds)
    def test_orthogonal_splitting(self, seed):
        s = raw_state(SMALL, seed)
        a, b = s.u.coeffs[:, :, 0], s.v.coeffs[:, :, 0]
        a_sol, b_sol, _ = leray_project_planar(a, b, SMALL)
        pairing = np.sum(np.conj(a - a_sol) * a_sol + np.conj(b - b_sol) * b_sol).real
        assert abs(pairing) < 1e-13 * (np.sum(np.abs(a) ** 2 + np.abs(b) ** 2) + 1e-300)


class TestPressure:
    def test_hydrostatic(self, small):
        p0 = PlanarField(np.zeros(small.shape[:2]), small)
        p0.coeffs[1, 0] = p0.coeffs[-1, 0] = 0.3
        pres = diagnose_pressure(p0, small, rho0=1.2, g=9.81)
        vals = pres.evaluate()
        q = small.base
        np.testing.assert_allclose(vals[:, :, 0], p0.to_physical(), atol=1e-14)
        np.testing.assert_allclose(vals[:, :, -1] - vals[:, :, 0], 1.2 * 9.81 * small.h, rtol=1e-14)
        np.testing.assert_allclose(np.diff(vals, axis=2) / np.diff(q.z), -1.2 * 9.81, rtol=1e-12)
        np.testing.assert_array_equal(pres.dpdz(), -1.2 * 9.81)

    def test_grid_mismatch(self, small):
        with pytest.raises(ValueError):
            diagnose_pressure(PlanarField.zeros(small.refined(2)), small, 1.0, 9.81)

    def test_diagnose_bundle(self, small):
        s = random_state_ensemble(small, 1)[0]
        out = diagnose(s, PlanarField.zeros(small), 1.0, 9.81)
        np.testing.assert_array_equal(out.w.coeffs, diagnose_w(s).coeffs)
        assert out.p.rho0 == 1.0


class TestRemoveMean:
    def test_idempotent(self, small):
        s = raw_state(small, 6)
        once = remove_mean(s)
        assert once.u.coeffs[0, 0, 0] == 0 and once.v.coeffs[0, 0, 0] == 0
        np.testing.assert_array_equal(remove_mean(once).stack(), once.stack())
