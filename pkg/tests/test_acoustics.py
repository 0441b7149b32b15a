import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import signal as sps

from vsbanc.acoustics import (
    BAFFLE_FACTOR,
    CavitySpec,
    EvalGrid,
    Medium,
    ModalField,
    Opening,
    PathSet,
    SourceLayout,
    build_pathset,
    cavity_pressure,
    condition_number,
    controllable_limit,
    eigenfunction,
    fir_from_frequency_response,
    fir_point_to_point,
    fir_response,
    monopole_transfer,
    noise_reduction,
    opening_volume_velocity,
    optimal_source_strengths,
    outside_pressure,
    primary_modal_field,
    transfer_matrices,
    volume_velocity_from_field,
    wavenumber_y,
)
from vsbanc.errors import GeometryError, IllPosedControlError, SingularityError

from oracles import tone_phase_delay

CAV = CavitySpec(0.64, 0.50, 0.92)
OPENING = Opening((0.32, 0.50, 0.46), 0.20, 0.48)
SECONDARIES = [(0.22, 0.5, 0.46), (0.42, 0.5, 0.46), (0.32, 0.5, 0.22), (0.32, 0.5, 0.70)]
PRIMARY = (0.32, 0.25, 0.46)


def layout(**kw):
    args = dict(primary=PRIMARY, secondaries=SECONDARIES, opening=OPENING, cavity=CAV)
    args.update(kw)
    return SourceLayout(**args)


def ref_monopole(src, rcv, f, c0=343.0, rho0=1.21):
    r = math.dist(src, rcv)
    w = 2 * math.pi * f
    return 1j * rho0 * w * cmath.exp(-1j * w / c0 * r) / (4 * math.pi * r)


def random_instance(rng, K, n_points, freq):
    op = Opening((0.0, 0.0, 0.0), 0.2, 0.48)
    sec = np.column_stack([rng.uniform(-0.3, 0.3, K), np.zeros(K), rng.uniform(-0.3, 0.3, K)])
    d = rng.normal(size=(n_points, 3))
    d[:, 1] = np.abs(d[:, 1])
    d /= np.linalg.norm(d, axis=1)[:, None]
    pts = d * rng.uniform(0.5, 3.0, n_points)[:, None]
    pts[:, 1] += 0.05
    lay = SourceLayout((0.0, -0.2, 0.0), sec, op)
    return transfer_matrices(lay, EvalGrid(pts), freq)


# -- modal field ----------------------------------------------------------------

class TestEigenfunction:
    def test_zeroth_mode_uniform(self):
        for x, z in [(0, 0), (0.1, 0.7), (0.64, 0.92)]:
            assert eigenfunction(0, 0, x, z, CAV) == 1.0

    def test_node(self):
        assert abs(eigenfunction(1, 0, CAV.l_x / 2, 0.0, CAV)) < 1e-15

    def test_closed_form(self):
        assert eigenfunction(2, 1, CAV.l_x / 2, CAV.l_z, CAV) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("x,z", [(-0.01, 0.1), (0.65, 0.1), (0.1, 0.93), (0.1, -1)])
    def test_outside_rejected(self, x, z):
        with pytest.raises(GeometryError):
            eigenfunction(1, 1, x, z, CAV)


class TestWavenumberY:
    def test_plane_mode(self):
        assert wavenumber_y(0, 0, 10.0, CAV) == 10 + 0j

    def test_propagating(self):
        ky = wavenumber_y(1, 0, 10.0, CAV)
        assert ky.imag == 0
        assert ky.real == pytest.approx(8.7123, abs=1e-4)
        assert ky.real == pytest.approx(math.sqrt(100 - (math.pi / 0.64) ** 2), rel=1e-14)

    def test_evanescent(self):
        ky = wavenumber_y(1, 0, 1.0, CAV)
        assert ky.real == 0
        assert abs(ky) == pytest.approx(math.sqrt((math.pi / 0.64) ** 2 - 1), rel=1e-14)
        # decays in +y under exp(-j k_y y)
        assert abs(cmath.exp(-1j * ky * 1.0)) < 1

    def test_vectorised(self):
        n = np.arange(3)[:, None]
        m = np.arange(2)[None, :]
        ky = wavenumber_y(n, m, 20.0, CAV)
        assert ky.shape == (3, 2)
        assert ky[0, 0] == 20


class TestCavityPressure:
    def test_plane_wave(self):
        k = 7.0
        field = ModalField(np.array([[1.0]]), np.zeros((1, 1)), k, CAV)
        assert cavity_pressure(field, (0.1, 0.0, 0.2)) == pytest.approx(1.0)
        assert cavity_pressure(field, (0.1, math.pi / k, 0.2)).real == pytest.approx(-1.0, abs=1e-12)

    def test_zero_field(self):
        field = ModalField(np.zeros((2, 2)), np.zeros((2, 2)), 5.0, CAV)
        assert cavity_pressure(field, (0.3, 0.2, 0.4)) == 0

    def test_mode_node(self):
        a = np.zeros((2, 1))
        a[1, 0] = 1.0
        field = ModalField(a, a, 30.0, CAV)
        for y, z in [(0.0, 0.0), (0.2, 0.5), (0.5, 0.92)]:
            assert abs(cavity_pressure(field, (CAV.l_x / 2, y, z))) < 1e-15

    def test_minus_component_travels_backwards(self):
        k = 9.0
        field = ModalField(np.zeros((1, 1)), np.array([[1.0]]), k, CAV)
        y = 0.3
        assert cavity_pressure(field, (0.1, y, 0.1)) == pytest.approx(cmath.exp(1j * k * y))

    def test_outside_rejected(self):
        field = ModalField(np.ones((1, 1)), np.zeros((1, 1)), 1.0, CAV)
        with pytest.raises(GeometryError):
            cavity_pressure(field, (0.1, 0.6, 0.1))

    def test_truncation_enforced(self):
        with pytest.raises(GeometryError):
            ModalField(np.ones((12, 1)), np.zeros((1, 1)), 1.0, CAV)
        with pytest.raises(GeometryError):
            ModalField(np.array([[np.nan]]), np.zeros((1, 1)), 1.0, CAV)


class TestPrimaryModal:
    @pytest.mark.parametrize("f", [80.0, 333.0, 700.0, 1200.0])
    def test_volume_velocity_consistent_with_field(self, f):
        field = primary_modal_field(PRIMARY, 1.0, f, CAV)
        u_field = volume_velocity_from_field(field, OPENING)
        u_closed = opening_volume_velocity(PRIMARY, 1.0, f, CAV, OPENING)
        assert u_field == pytest.approx(u_closed, rel=1e-9)

    @pytest.mark.parametrize("f", [50.0, 200.0, 400.0])
    def test_full_aperture_plane_wave(self, f):
        # only the uniform mode has non-zero net flux over the full cross-section
        full = Opening((0.32, 0.5, 0.46), 0.64, 0.92)
        k = 2 * math.pi * f / 343.0
        expect = math.cos(k * PRIMARY[1]) * cmath.exp(-1j * k * CAV.l_y)
        assert opening_volume_velocity(PRIMARY, 1.0, f, CAV, full) == pytest.approx(expect, rel=1e-9)

    def test_linear_in_strength(self):
        a = opening_volume_velocity(PRIMARY, 1.0, 300.0, CAV, OPENING)
        b = opening_volume_velocity(PRIMARY, 2.5 - 1j, 300.0, CAV, OPENING)
        assert b == pytest.approx((2.5 - 1j) * a, rel=1e-12)

    def test_plane_mode_pressure(self):
        # n_max = m_max = 0: 1-D duct with a rigid end and a source at y0
        cav = CavitySpec(0.64, 0.5, 0.92, 0, 0)
        f, y0, y = 200.0, 0.1, 0.4
        k = 2 * math.pi * f / 343.0
        w = 2 * math.pi * f
        field = primary_modal_field((0.3, y0, 0.4), 1.0, f, cav)
        expect = 1.21 * w / (0.64 * 0.92 * k) * math.cos(k * y0) * cmath.exp(-1j * k * y)
        assert cavity_pressure(field, (0.3, y, 0.4)) == pytest.approx(expect, rel=1e-12)


# -- radiation ------------------------------------------------------------------

class TestMonopole:
    def test_reference_value(self):
        z = monopole_transfer((0, 0, 0), (1, 0, 0), 100.0, Medium(343.0, 1.21))
        # rho0 * 2*pi*100 / (4*pi*1) = 1.21 * 50
        assert abs(z) == pytest.approx(60.5, rel=1e-12)
        assert z == pytest.approx(ref_monopole((0, 0, 0), (1, 0, 0), 100.0), rel=1e-12)

    def test_inverse_distance(self):
        a = monopole_transfer((0, 0, 0), (0.7, 0, 0), 250.0)
        b = monopole_transfer((0, 0, 0), (1.4, 0, 0), 250.0)
        assert abs(b) == pytest.approx(abs(a) / 2, rel=1e-12)

    def test_wavelength_periodicity(self):
        f = 343.0
        a = monopole_transfer((0, 0, 0), (0.5, 0, 0), f)
        b = monopole_transfer((0, 0, 0), (1.5, 0, 0), f)
        assert cmath.phase(a / b) == pytest.approx(0.0, abs=1e-9)

    def test_vectorised(self):
        pts = np.array([[1.0, 0, 0], [0, 2.0, 0], [0, 0, 3.0]])
        z = monopole_transfer((0, 0, 0), pts, 120.0)
        expect = [ref_monopole((0, 0, 0), p, 120.0) for p in pts]
        np.testing.assert_allclose(z, expect, rtol=1e-12)

    def test_singular(self):
        with pytest.raises(SingularityError):
            monopole_transfer((1, 2, 3), (1, 2, 3), 100.0)


class TestExterior:
    grid = EvalGrid([[0.1, 1.2, 0.3], [0.5, 0.9, 0.6], [0.32, 2.0, 0.46], [-1.0, 1.5, 1.5]])

    def test_primary_alone(self):
        lay = layout()
        p_vec, _ = transfer_matrices(lay, self.grid, 300.0)
        np.testing.assert_allclose(outside_pressure(lay, self.grid, 300.0), p_vec, rtol=1e-14)

    def test_primary_is_baffled_equivalent_source(self):
        f = 300.0
        k = 2 * math.pi * f / 343.0
        p = outside_pressure(layout(), self.grid, f)
        d_in = 0.5 - PRIMARY[1]
        for i, pt in enumerate(self.grid.points):
            expect = 2 * cmath.exp(-1j * k * d_in) * ref_monopole(OPENING.center, pt, f)
            assert p[i] == pytest.approx(expect, rel=1e-12)

    def test_modal_equivalent_source(self):
        f = 420.0
        lay = layout(equivalent="modal")
        u = opening_volume_velocity(PRIMARY, 1.0, f, CAV, OPENING)
        p_vec, _ = transfer_matrices(lay, self.grid, f)
        expect = [2 * u * ref_monopole(OPENING.center, pt, f) for pt in self.grid.points]
        np.testing.assert_allclose(p_vec, expect, rtol=1e-12)

    def test_doubling_q_p(self):
        a = outside_pressure(layout(q_p=1.0, q_s=[0.1, 0.2j, -0.3, 0.0]), self.grid, 200.0)
        b = outside_pressure(layout(q_p=2.0, q_s=[0.2, 0.4j, -0.6, 0.0]), self.grid, 200.0)
        np.testing.assert_allclose(b, 2 * a, rtol=1e-13)
        c = outside_pressure(layout(q_p=2.0), self.grid, 200.0)
        np.testing.assert_allclose(c, 2 * outside_pressure(layout(q_p=1.0), self.grid, 200.0), rtol=1e-13)

    def test_symmetry(self):
        grid = EvalGrid([[0.32 - 0.4, 1.3, 0.46], [0.32 + 0.4, 1.3, 0.46]])
        lay = layout(q_s=[1.0, 1.0, 0.5j, 0.5j])
        p = outside_pressure(lay, grid, 450.0)
        assert abs(p[0] - p[1]) <= 1e-12 * abs(p[0])

    def test_behind_baffle(self):
        with pytest.raises(GeometryError):
            outside_pressure(layout(), EvalGrid([[0.3, 0.4, 0.3]]), 100.0)
        with pytest.raises(GeometryError):
            outside_pressure(layout(), EvalGrid([[0.3, 0.5, 0.3]]), 100.0)

    def test_linearity_identity(self, rng):
        p_vec, s_mat = transfer_matrices(layout(), self.grid, 333.0)
        for _ in range(5):
            q_p = complex(*rng.normal(size=2))
            q_s = rng.normal(size=4) + 1j * rng.normal(size=4)
            got = outside_pressure(layout(q_p=q_p, q_s=q_s), self.grid, 333.0)
            np.testing.assert_allclose(got, p_vec * q_p + s_mat @ q_s, rtol=1e-12, atol=1e-12)

    def test_degenerate_shape(self):
        lay = SourceLayout(PRIMARY, [SECONDARIES[0]], OPENING)
        pt = [[0.3, 1.1, 0.2]]
        p_vec, s_mat = transfer_matrices(lay, EvalGrid(pt), 150.0)
        assert p_vec.shape == (1,) and s_mat.shape == (1, 1)
        assert s_mat[0, 0] == pytest.approx(BAFFLE_FACTOR * ref_monopole(SECONDARIES[0], pt[0], 150.0), rel=1e-12)

    def test_permutation(self):
        perm = [2, 0, 3, 1]
        _, s1 = transfer_matrices(layout(), self.grid, 500.0)
        _, s2 = transfer_matrices(layout(secondaries=[SECONDARIES[i] for i in perm]), self.grid, 500.0)
        np.testing.assert_array_equal(s2, s1[:, perm])

    def test_layout_validation(self):
        with pytest.raises(GeometryError):
            layout(secondaries=[(0.3, 0.6, 0.4)])
        with pytest.raises(GeometryError):
            layout(primary=(0.3, 0.7, 0.4))
        with pytest.raises(GeometryError):
            SourceLayout(PRIMARY, SECONDARIES, OPENING, equivalent="modal")


# -- optimal control --------------------------------------------------------------

class TestOptimal:
    def test_scalar(self):
        q = optimal_source_strengths([4.0], [[2.0]], 1.0)
        assert q[0] == pytest.approx(-2.0)
        assert abs(4.0 + 2.0 * q[0]) == 0

    def test_nothing_to_cancel(self):
        q = optimal_source_strengths(np.zeros(3), np.eye(3, 2) + 1j, 1.0)
        np.testing.assert_array_equal(q, 0)

    def test_dense_grid_two_points(self, rng):
        P = rng.normal(size=2) + 1j * rng.normal(size=2)
        S = rng.normal(size=(2, 1)) + 1j * rng.normal(size=(2, 1))
        q = optimal_source_strengths(P, S)[0]
        # 400 x 400 complex grid centred on the analytic solution, span 2|q|
        span = 2 * abs(q)
        axis = np.linspace(-span, span, 400)
        Q = (q.real + axis)[:, None] + 1j * (q.imag + axis)[None, :]
        J = np.abs(P[0] + S[0, 0] * Q) ** 2 + np.abs(P[1] + S[1, 0] * Q) ** 2
        i, j = np.unravel_index(np.argmin(J), J.shape)
        assert abs(Q[i, j] - q) <= 1e-3 * max(1.0, abs(q)) + (axis[1] - axis[0])
        # the analytic point is no worse than any grid point
        J0 = np.abs(P[0] + S[0, 0] * q) ** 2 + np.abs(P[1] + S[1, 0] * q) ** 2
        assert J0 <= J.min() + 1e-12

    def test_rank_deficient(self):
        col = np.array([1.0, 2.0, 3.0j])
        with pytest.raises(IllPosedControlError) as exc:
            optimal_source_strengths(np.ones(3), np.column_stack([col, col]))
        assert exc.value.condition_number > 1e10

    def test_underdetermined(self):
        with pytest.raises(IllPosedControlError):
            optimal_source_strengths(np.ones(2), np.ones((2, 3)) + np.eye(2, 3))

    def test_condition_number(self):
        assert condition_number(np.diag([4.0, 2.0])) == pytest.approx(2.0)

    def test_colocated_secondary(self):
        lay = SourceLayout(PRIMARY, [OPENING.center], OPENING)
        grid = EvalGrid.hemisphere(OPENING.center, 2.0, 64)
        for f in [100.0, 500.0, 1500.0]:
            p_vec, s_mat = transfer_matrices(lay, grid, f)
            q = optimal_source_strengths(p_vec, s_mat)
            assert noise_reduction(p_vec, p_vec + s_mat @ q) > 60


class TestNoiseReduction:
    def test_identity(self):
        p = np.array([1 + 1j, 2.0])
        assert noise_reduction(p, p) == 0.0

    def test_half(self):
        p = np.array([1 + 1j, 2.0, -3j])
        assert noise_reduction(p, p / 2) == pytest.approx(10 * math.log10(4), abs=1e-12)
        assert noise_reduction(p, p / 2) == pytest.approx(6.0206, abs=1e-4)

    def test_direct(self):
        assert noise_reduction([1, 1], [1, 0]) == pytest.approx(10 * math.log10(2), abs=1e-12)

    def test_sentinels(self):
        assert noise_reduction([1.0], [0.0]) == math.inf
        assert noise_reduction([0.0], [1.0]) == -math.inf

    def test_errors(self):
        with pytest.raises(ValueError):
            noise_reduction([1, 2], [1])
        with pytest.raises(ValueError):
            noise_reduction([], [])


class TestControllableLimit:
    def test_reference_speed(self):
        assert controllable_limit(0.20, Medium(c0=350.0)) == pytest.approx(875.0)

    def test_default_speed(self):
        assert controllable_limit(0.20) == pytest.approx(857.5)

    def test_inverse(self):
        assert controllable_limit(0.40) == pytest.approx(controllable_limit(0.20) / 2)

    def test_opening_shorter_side(self):
        assert OPENING.shorter_side == 0.20

    def test_rejects(self):
        with pytest.raises(GeometryError):
            controllable_limit(0.0)

    def test_medium_validation(self):
        with pytest.raises(GeometryError):
            Medium(c0=-1)


def test_controllability_trend():
    grid = EvalGrid.hemisphere(OPENING.center, 2.0, 64)

    def nr(f):
        p_vec, s_mat = transfer_matrices(layout(), grid, f)
        q = optimal_source_strengths(p_vec, s_mat)
        return noise_reduction(p_vec, p_vec + s_mat @ q)

    assert nr(500.0) - nr(1000.0) >= 10.0


# -- FIR synthesis ------------------------------------------------------------------

def measure_response(h, f, sr=16000, seconds=0.5):
    """Complex gain of FIR ``h`` at ``f`` by driving it with a tone."""
    n = np.arange(int(seconds * sr))
    x = np.cos(2 * np.pi * f * n / sr)
    y = sps.lfilter(h, 1.0, x)
    skip = len(h)
    ref = np.exp(-2j * np.pi * f * n[skip:] / sr)
    return np.sum(y[skip:] * ref) / np.sum(x[skip:] * ref)


class TestFirSynthesis:
    def test_allpass(self):
        h = fir_from_frequency_response(np.ones(513), 128)
        assert h[64] == pytest.approx(1.0, abs=1e-6)
        assert np.max(np.abs(np.delete(h, 64))) <= 1e-6

    @pytest.mark.parametrize("D", [1, 5, 20])
    def test_pure_delay(self, D):
        w = np.linspace(0, np.pi, 513)
        h = fir_from_frequency_response(np.exp(-1j * w * D), 128)
        assert int(np.argmax(np.abs(h))) == 64 + D

    def test_monopole_probe(self):
        # 256 taps: the j*omega factor gives the response a slowly decaying differentiator tail
        sr, taps, G = 16000, 256, 1025
        freqs = np.linspace(0, sr / 2, G)
        src, rcv = (0, 0, 0), (0.05, 0, 0)
        H = np.array([ref_monopole(src, rcv, f) if f > 0 else 0.0 for f in freqs])
        h = fir_from_frequency_response(H, taps, sr)
        for f in np.linspace(50, 600, 10):
            target = monopole_transfer(src, rcv, f) * np.exp(-2j * np.pi * f * (taps // 2) / sr)
            got = measure_response(h, f)
            assert abs(20 * np.log10(abs(got) / abs(target))) <= 0.5
            assert abs(np.degrees(np.angle(got / target))) <= 5.0

    def test_rejects(self):
        with pytest.raises(ValueError):
            fir_from_frequency_response([1.0, np.nan, 1.0], 4)
        with pytest.raises(ValueError):
            fir_from_frequency_response(np.ones(5), 16)


class TestPointToPoint:
    sr = 16000

    def test_integer_delay(self):
        c0 = 343.0
        h = fir_point_to_point(c0 * 10 / self.sr, 1.0, 64, self.sr)
        assert int(np.argmax(np.abs(h))) == 10
        assert np.max(np.abs(np.delete(h, 10))) <= 1e-12 * abs(h[10])
        assert h[10] == pytest.approx(1.0 / (4 * math.pi * c0 * 10 / self.sr))

    def test_double_distance(self):
        d = 343.0 * 10 / self.sr
        a = fir_point_to_point(d, 1.0, 64, self.sr)
        b = fir_point_to_point(2 * d, 1.0, 64, self.sr)
        assert np.max(np.abs(b)) == pytest.approx(np.max(np.abs(a)) / 2, rel=1e-12)

    @pytest.mark.parametrize("f", [100, 200, 300, 400, 500, 600])
    @pytest.mark.parametrize("distance", [0.137, 0.5, 0.91])
    def test_phase_delay(self, f, distance):
        h = fir_point_to_point(distance, 1.0, 128, self.sr)
        n = np.arange(self.sr)
        x = np.sin(2 * np.pi * f * n / self.sr)
        y = sps.lfilter(h, 1.0, x)
        coarse = np.argmax(np.abs(h)) / self.sr
        tau = tone_phase_delay(x[200:], y[200:], f, self.sr, coarse)
        assert tau == pytest.approx(distance / 343.0, rel=0.01)

    def test_budget(self):
        with pytest.raises(GeometryError):
            fir_point_to_point(1.0, 1.0, 32, self.sr)
        with pytest.raises(GeometryError):
            fir_point_to_point(0.0, 1.0, 32, self.sr)


class TestPathSet:
    mics = np.array([[0.02, 1.0, 0.46], [0.62, 1.0, 0.46], [0.32, 1.0, 0.16]])

    def test_shapes(self):
        ps = build_pathset(layout(), self.mics, 128, 16000)
        assert ps.primary_irs.shape == (3, 128)
        assert ps.secondary_irs.shape == (4, 3, 128)
        assert (ps.taps, ps.n_secondaries, ps.n_errors) == (128, 4, 3)

    def test_analytic_matches_geometry(self):
        ps = build_pathset(layout(), self.mics, 128, 16000)
        for f in [100.0, 300.0, 600.0]:
            k = 2 * math.pi * f / 343.0
            for m, mic in enumerate(self.mics):
                r = math.dist(OPENING.center, mic)
                expect = 2 * cmath.exp(-1j * k * (0.25 + r)) / (4 * math.pi * r)
                assert fir_response(ps.primary_irs[m], f, 16000) == pytest.approx(expect, rel=2e-3)
                for s, pos in enumerate(SECONDARIES):
                    r = math.dist(pos, mic)
                    expect = 2 * cmath.exp(-1j * k * r) / (4 * math.pi * r)
                    got = fir_response(ps.secondary_irs[s, m], f, 16000)
                    assert got == pytest.approx(expect, rel=2e-3)

    def test_modal_synthesis_matches_analytic_up_to_delay(self):
        a = build_pathset(layout(), self.mics, 128, 16000)
        b = build_pathset(layout(), self.mics, 128, 16000, mode="modal-synthesized")
        for f in [100.0, 250.0, 500.0]:
            ratio_p = fir_response(b.primary_irs, f, 16000) / fir_response(a.primary_irs, f, 16000)
            ratio_s = fir_response(b.secondary_irs, f, 16000) / fir_response(a.secondary_irs, f, 16000)
            ratios = np.concatenate([ratio_p.ravel(), ratio_s.ravel()])
            # one common delay for every path
            np.testing.assert_allclose(ratios, ratios[0], rtol=0.02)
            assert abs(ratios[0]) == pytest.approx(1.0, rel=0.02)

    def test_responses(self, rng):
        ps = build_pathset(layout(), self.mics, 64, 16000)
        x = rng.normal(size=500)
        d = ps.primary_response(x)
        np.testing.assert_allclose(d[1], np.convolve(x, ps.primary_irs[1])[:500], atol=1e-12)
        y = ps.secondary_response(2, x)
        np.testing.assert_allclose(y[0], np.convolve(x, ps.secondary_irs[2, 0])[:500], atol=1e-12)
        np.testing.assert_array_equal(ps(2, x), y)

    def test_validation(self):
        with pytest.raises(ValueError):
            PathSet(np.zeros((2, 8)), np.zeros((1, 3, 8)), 16000)
        with pytest.raises(ValueError):
            PathSet(np.zeros((2, 8)), np.full((1, 2, 8), np.inf), 16000)
        with pytest.raises(GeometryError):
            build_pathset(layout(), [[0.3, 0.4, 0.3]])
        with pytest.raises(ValueError):
            build_pathset(layout(), self.mics, mode="bem")


# -- properties ---------------------------------------------------------------------

instance = st.tuples(
    st.integers(1, 4),
    st.integers(0, 8),
    st.floats(50.0, 1500.0),
    st.integers(0, 2**32 - 1),
)


@given(instance, st.lists(st.floats(-1, 1), min_size=8, max_size=8), st.floats(1e-6, 0.1))
def test_optimum_beats_perturbations(inst, direction, radius):
    K, extra, freq, seed = inst
    P, S = random_instance(np.random.default_rng(seed), K, K + 1 + extra, freq)
    assume(condition_number(S) < 1e8)
    q = optimal_source_strengths(P, S)
    d = np.array(direction[:K]) + 1j * np.array(direction[4:4 + K])
    assume(np.linalg.norm(d) > 0)
    delta = d / np.linalg.norm(d) * radius * np.linalg.norm(q)
    J = lambda v: float(np.sum(np.abs(P + S @ v) ** 2))  # noqa: E731
    assert J(q + delta) >= J(q) * (1 - 1e-12)


@given(instance, st.sampled_from([0.1, 10.0]))
def test_nr_invariant_to_primary_scale(inst, alpha):
    K, extra, freq, seed = inst
    P, S = random_instance(np.random.default_rng(seed), K, K + 1 + extra, freq)
    assume(condition_number(S) < 1e8)

    def nr(q_p):
        q = optimal_source_strengths(P, S, q_p)
        return noise_reduction(P * q_p, P * q_p + S @ q)

    assert nr(alpha) == pytest.approx(nr(1.0), abs=1e-9)


@given(
    n=st.integers(0, 10), m=st.integers(0, 10),
    lx=st.floats(0.1, 3.0), lz=st.floats(0.1, 3.0),
)
def test_wavenumber_branch_continuity(n, m, lx, lz):
    assume(n + m > 0)
    cav = CavitySpec(lx, 1.0, lz)
    kc = math.hypot(n * math.pi / lx, m * math.pi / lz)
    dk = 1e-6
    below = wavenumber_y(n, m, kc - dk, cav)
    above = wavenumber_y(n, m, kc + dk, cav)
    assert below.imag <= 0 and above.imag == 0 and above.real >= 0
    assert abs(abs(above) - abs(below)) <= 1e-6 * max(1.0, kc)
    assert abs(above) <= math.sqrt(2 * kc * dk) * 1.01 + 1e-12


coord = st.floats(-5, 5)


@given(st.tuples(coord, coord, coord), st.tuples(coord, coord, coord), st.floats(1.0, 4000.0))
def test_monopole_reciprocity(a, b, f):
    assume(math.dist(a, b) > 1e-3)
    assert monopole_transfer(a, b, f) == monopole_transfer(b, a, f)


@given(st.floats(1.5, 6.0), st.integers(64, 256))
def test_controllability_trend_hemispheres(radius, n_points):
    grid = EvalGrid.hemisphere(OPENING.center, radius, n_points)

    def nr(f):
        p_vec, s_mat = transfer_matrices(layout(), grid, f)
        q = optimal_source_strengths(p_vec, s_mat)
        return noise_reduction(p_vec, p_vec + s_mat @ q)

    assert nr(500.0) - nr(1000.0) >= 10.0
