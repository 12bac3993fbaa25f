import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavetrace.profiles import SingleGaussian, eval_profile, preset
from wavetrace.wavefront import (
    RayCrossingError,
    Wavefront,
    compute_force,
    compute_wave_potential,
    derivative_all,
    derivative_nonuniform,
    flux_ratio,
    front_spacing,
    intensity_profile,
    seed_wavefront,
    transport_amplitude,
)

EPS = 1.65e-4


def random_grid(seed, n=25):
    rng = np.random.default_rng(seed)
    return np.cumsum(rng.uniform(0.05, 0.3, n)) - 2.0


class TestSeed:
    def test_centre_ray(self):
        wf = seed_wavefront(SingleGaussian(), 101, 4.0)
        assert wf.x[50] == 0.0
        assert wf.r[50] == 1.0
        ray = wf.rays[50]
        assert (ray.px, ray.pz) == (0.0, 1.0)

    @pytest.mark.parametrize("name", ["gaussian", "fig2", "fig5", "fig8"])
    def test_launch_direction(self, name):
        p = preset(name)
        wf = seed_wavefront(p.spec, 51, p.half_span)
        assert np.all(wf.px == 0.0)
        assert np.all(wf.pz == 1.0)
        assert np.all(wf.z == 0.0)
        assert wf.t == 0.0

    def test_uniform_and_antisymmetric(self):
        wf = seed_wavefront(SingleGaussian(), 77, 3.3)
        np.testing.assert_allclose(np.diff(wf.x), 6.6 / 76, rtol=1e-12)
        assert np.array_equal(wf.x, -wf.x[::-1])

    def test_fig8_two_humps(self):
        p = preset("fig8")
        wf = seed_wavefront(p.spec, 2001, p.half_span)
        r = wf.r
        peaks = np.flatnonzero((r[1:-1] > r[:-2]) & (r[1:-1] > r[2:])) + 1
        assert peaks.shape[0] == 2
        # Independent scan of the two-lobe sum for its maximum.
        fine = np.linspace(0.0, 5.0, 500001)
        ref = fine[np.argmax(np.exp(-((fine - 2.5) ** 2)) + np.exp(-((fine + 2.5) ** 2)))]
        np.testing.assert_allclose(np.abs(wf.x[peaks]), ref, atol=2 * np.diff(wf.x)[0])

    @pytest.mark.parametrize("n", [1, 5, 6])
    def test_too_few_rays(self, n):
        with pytest.raises(ValueError):
            seed_wavefront(SingleGaussian(), n, 4.0)

    def test_too_few_for_wide_stencil(self):
        with pytest.raises(ValueError):
            seed_wavefront(SingleGaussian(), 8, 4.0, stencil_width=7)

    def test_bad_span(self):
        with pytest.raises(ValueError):
            seed_wavefront(SingleGaussian(), 11, 0.0)


class TestDerivative:
    def test_square_second_derivative(self):
        xs = random_grid(0)
        vals = xs**2
        for i in range(2, xs.shape[0] - 2):
            assert derivative_nonuniform(xs, vals, i, 2) == pytest.approx(2.0, rel=1e-10)

    def test_constant_first_derivative(self):
        xs = random_grid(1)
        d = derivative_all(xs, np.full_like(xs, 3.7), 1)
        np.testing.assert_allclose(d, 0.0, atol=1e-12)

    def test_gaussian_curvature_at_origin(self):
        xs = np.arange(-200, 201) * 0.01
        d2 = derivative_nonuniform(xs, np.exp(-xs**2), 200, 2)
        assert abs(d2 + 2.0) < 1e-6

    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(0, 10**6),
        coeffs=st.lists(st.floats(-3, 3), min_size=5, max_size=5),
        order=st.sampled_from([1, 2]),
    )
    def test_polynomial_exactness(self, seed, coeffs, order):
        xs = random_grid(seed, 15)
        poly = np.polynomial.Polynomial(coeffs)
        got = derivative_all(xs, poly(xs), order)
        want = poly.deriv(order)(xs)
        scale = 1.0 + np.max(np.abs(want))
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-10 * scale)

    def test_one_sided_ends_match_single_node(self):
        xs = random_grid(2, 12)
        vals = np.sin(xs)
        all_d = derivative_all(xs, vals, 2)
        for i in (0, 1, 10, 11, 5):
            assert derivative_nonuniform(xs, vals, i, 2) == pytest.approx(all_d[i], rel=1e-12)

    def test_non_monotone_rejected(self):
        xs = np.array([0.0, 0.1, 0.3, 0.2, 0.5, 0.6, 0.7])
        with pytest.raises(RayCrossingError):
            derivative_all(xs, xs, 1)


class TestWavePotential:
    def test_seed_gaussian_matches_analytic(self):
        wf = seed_wavefront(SingleGaussian(), 801, 4.0)
        inner = slice(2, -2)
        ref = 4.0 * wf.x**2 - 2.0
        np.testing.assert_allclose(wf.g[inner], ref[inner], rtol=1e-6, atol=1e-6)
        assert wf.g[400] == pytest.approx(-2.0, abs=1e-6)

    def test_gaussian_root(self):
        # A ray placed exactly on the root of 4x^2 - 2.
        root = 1 / math.sqrt(2.0)
        wf = seed_wavefront(SingleGaussian(), 801, 400 * root / 200)
        i = int(np.argmin(np.abs(wf.x - root)))
        assert wf.x[i] == pytest.approx(root, rel=1e-14)
        assert abs(wf.g[i]) < 1e-6

    def test_finite_difference_cross_check(self):
        wf = seed_wavefront(SingleGaussian(), 401, 4.0)
        h = 1e-4
        x = wf.x[150]
        fd = (math.exp(-((x + h) ** 2)) - 2 * math.exp(-x * x) + math.exp(-((x - h) ** 2))) / h**2
        assert wf.g[150] == pytest.approx(fd / math.exp(-x * x), rel=1e-4)

    @pytest.mark.parametrize("scale", [1e-3, 10.0, 7.3e5])
    def test_scale_invariance(self, scale):
        spec = preset("fig2").spec
        wf = seed_wavefront(spec, 301, 3.0)
        big = wf.copy()
        big.r = wf.r * scale
        big.seed_r = wf.seed_r * scale
        compute_wave_potential(big)
        np.testing.assert_allclose(big.g, wf.g, rtol=1e-12, atol=1e-12 * np.max(np.abs(wf.g)))

    def test_floor_clamps_and_counts(self):
        wf = seed_wavefront(SingleGaussian(), 201, 6.0)
        compute_wave_potential(wf, r_floor=1e-8)
        expected = int(np.count_nonzero(wf.r < 1e-8))
        assert expected > 0
        assert wf.clamped == expected
        assert np.all(np.isfinite(wf.g))

    def test_momentum_factor(self):
        wf = seed_wavefront(SingleGaussian(), 201, 4.0)
        g0 = wf.g.copy()
        wf.px = np.full(wf.n, 0.6)
        compute_wave_potential(wf)
        np.testing.assert_allclose(wf.g, g0 / 0.64, rtol=1e-12)


class TestForce:
    def test_seed_gaussian(self):
        wf = seed_wavefront(SingleGaussian(), 801, 4.0)
        f = compute_force(wf, EPS)
        ref = EPS**2 / (8 * math.pi**2) * 8.0 * wf.x
        # Two nested one-sided stencils degrade the outermost few rays.
        np.testing.assert_allclose(f[5:-5], ref[5:-5], rtol=1e-5, atol=1e-16)
        assert abs(f[400]) < 1e-10 * np.max(np.abs(f))

    def test_zero_epsilon(self):
        wf = seed_wavefront(preset("fig5").spec, 201, 3.0)
        assert np.all(compute_force(wf, 0.0) == 0.0)

    @pytest.mark.parametrize("name", ["fig2", "fig5", "fig8"])
    def test_odd_under_mirror(self, name):
        p = preset(name)
        wf = seed_wavefront(p.spec, 301, p.half_span)
        f = compute_force(wf, EPS)
        np.testing.assert_allclose(f, -f[::-1], rtol=0, atol=1e-11 * np.max(np.abs(f)))


class TestTransport:
    def test_unchanged_spacing(self):
        wf = seed_wavefront(preset("fig2").spec, 101, 3.0)
        r0 = wf.r.copy()
        wf.z = wf.z + 17.0
        np.testing.assert_allclose(transport_amplitude(wf), r0, rtol=1e-15)

    def test_doubled_spacing(self):
        wf = seed_wavefront(SingleGaussian(), 101, 3.0)
        r0 = wf.r.copy()
        wf.x = 2.0 * wf.x
        np.testing.assert_allclose(transport_amplitude(wf), r0 / math.sqrt(2.0), rtol=1e-14)

    def test_spacing_is_euclidean(self):
        x = np.array([0.0, 3.0, 6.0])
        z = np.array([0.0, 4.0, 4.0])
        np.testing.assert_allclose(front_spacing(x, z), [5.0, 4.0, 3.0])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_flux_ratio_identity(self, seed):
        rng = np.random.default_rng(seed)
        wf = seed_wavefront(SingleGaussian(), 41, 3.0)
        wf.x = np.cumsum(rng.uniform(0.01, 0.5, 41))
        wf.z = rng.uniform(0.0, 0.1, 41)
        transport_amplitude(wf)
        np.testing.assert_allclose(flux_ratio(wf), 1.0, rtol=0, atol=1e-12)

    def test_crossing_names_rays_and_time(self):
        wf = seed_wavefront(SingleGaussian(), 21, 3.0)
        wf.t = 12.5
        wf.x[7], wf.x[8] = wf.x[8], wf.x[7]
        with pytest.raises(RayCrossingError) as info:
            transport_amplitude(wf)
        assert info.value.ids == (7, 8)
        assert info.value.t == 12.5
        assert "12.5" in str(info.value)

    def test_axis_amplitude_follows_width(self, gaussian_record):
        # Power conservation on the axis gives R(0, z) = w(z) ** -0.5.
        centre = gaussian_record.config.n_rays // 2
        for wf in gaussian_record.snapshots[::20]:
            w = math.sqrt(1.0 + (EPS * wf.z[centre] / math.pi) ** 2)
            assert wf.r[centre] == pytest.approx(w**-0.5, rel=1e-2)


class TestIntensity:
    def test_seed_gaussian(self):
        wf = seed_wavefront(SingleGaussian(), 51, 3.0)
        x, i = intensity_profile(wf)
        np.testing.assert_allclose(i, np.exp(-2 * x**2), rtol=1e-14)

    def test_length_and_order(self):
        wf = seed_wavefront(preset("fig5").spec, 63, 3.0)
        x, i = intensity_profile(wf)
        assert x.shape == i.shape == (63,)
        assert np.all(np.diff(x) > 0)

    def test_rays_view(self):
        wf = seed_wavefront(SingleGaussian(), 11, 2.0)
        assert [r.id for r in wf.rays] == list(range(11))
        assert isinstance(wf, Wavefront)
        assert eval_profile(SingleGaussian(), wf.rays[3].x) == wf.rays[3].r
