from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diomhd import spectral as sp
from diomhd.spectral import Grid3, OperatorSpec, SpectralField, VectorSpectralField

W = (1.0, np.sqrt(2.0), np.sqrt(3.0))


def random_scalar(grid, seed=0, k_max=3.0):
    return SpectralField(grid, sp.band_limited_random(grid, np.random.default_rng(seed), k_max))


def random_vector(grid, seed=0, k_max=3.0):
    return VectorSpectralField(grid, sp.band_limited_random(grid, np.random.default_rng(seed), k_max, 3))


class TestGrid:
    @pytest.mark.parametrize("n", [3, 5, 2, 0])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            Grid3(n)

    def test_rejects_non_integer(self):
        with pytest.raises(TypeError):
            Grid3(8.0)

    def test_wave_numbers_cover_band(self):
        g = Grid3(8)
        assert sorted(g.k1d.tolist()) == list(range(-4, 4))
        assert np.all(g.k1d[g.shifted_index()] == np.arange(-4, 4))

    def test_nyquist_zeroed_in_odd_vectors(self):
        g = Grid3(8)
        assert g.k_odd[0].ravel()[4] == 0.0

    @pytest.mark.parametrize("n, kept", [(8, 5), (16, 11), (32, 21)])
    def test_two_thirds_mask(self, n, kept):
        # |k| < n/3 per axis
        g = Grid3(n)
        per_axis = np.count_nonzero(np.abs(g.k1d) < n / 3)
        assert per_axis == kept
        assert g.dealias_mask.sum() == kept**3


class TestTransforms:
    @pytest.mark.parametrize("n", [16, 32])
    def test_roundtrip_and_parseval(self, n):
        g = Grid3(n)
        x = np.random.default_rng(1).standard_normal(g.shape)
        f, back = sp.transform_roundtrip(g, x)
        assert np.max(np.abs(back - x)) < 1e-12
        assert abs(np.mean(x**2) - sp.l2_norm(f) ** 2) < 1e-10

    def test_single_mode_coefficients(self):
        g = Grid3(8)
        _, y, _ = g.points()
        f = SpectralField.from_samples(g, np.broadcast_to(np.cos(2 * np.pi * 2 * y), g.shape))
        c = f.coeffs
        assert c[0, 2, 0] == pytest.approx(0.5, abs=1e-14)
        assert c[0, -2, 0] == pytest.approx(0.5, abs=1e-14)
        assert np.sum(np.abs(c) > 1e-14) == 2

    def test_random_field_is_hermitian(self):
        g = Grid3(8)
        assert sp.hermitian_defect(random_scalar(g)) < 1e-15

    def test_inverse_hermitian_matches_inverse(self):
        g = Grid3(8)
        f = random_scalar(g, 3)
        assert np.max(np.abs(sp.inverse_hermitian(f.coeffs) - f.to_samples())) < 1e-14


class TestOperators:
    def test_gradient_of_sine(self):
        g = Grid3(16)
        x, y, z = g.points()
        phase = 2 * np.pi * (x + 2 * y - z)
        f = SpectralField.from_samples(g, np.sin(phase) + 0 * x * y * z)
        grad = sp.apply_operator(f, OperatorSpec("gradient")).to_samples()
        for comp, k in zip(grad, (1, 2, -1)):
            assert np.max(np.abs(comp - 2 * np.pi * k * np.cos(phase))) < 1e-12

    def test_curl_grad_and_div_curl_vanish(self):
        g = Grid3(16)
        f = random_scalar(g, 2)
        v = random_vector(g, 3)
        cg = sp.apply_operator(sp.apply_operator(f, OperatorSpec("gradient")), OperatorSpec("curl"))
        dc = sp.apply_operator(sp.apply_operator(v, OperatorSpec("curl")), OperatorSpec("divergence"))
        assert sp.l2_norm(cg) < 1e-12
        assert sp.l2_norm(dc) < 1e-12

    def test_laplacian_is_minus_lambda_two(self):
        g = Grid3(16)
        f = random_scalar(g, 4)
        lap = sp.apply_operator(f, OperatorSpec("laplacian"))
        lam2 = sp.apply_operator(f, OperatorSpec("lambda", s=2))
        assert sp.l2_norm(lap + lam2 * 1.0) < 1e-10 * sp.l2_norm(lam2)

    def test_lambda_zero_is_identity(self):
        g = Grid3(8)
        f = random_scalar(g, 5)
        f.coeffs[0, 0, 0] = 3.0
        out = sp.apply_operator(f, OperatorSpec("lambda", s=0))
        assert np.array_equal(out.coeffs, f.coeffs)

    def test_lambda_kills_mean(self):
        g = Grid3(8)
        f = SpectralField(g, np.zeros(g.shape))
        f.coeffs[0, 0, 0] = 1.0
        assert sp.l2_norm(sp.apply_operator(f, OperatorSpec("lambda", s=0.5))) == 0.0

    @settings(max_examples=25, deadline=None)
    @given(s1=st.floats(0, 4), s2=st.floats(0, 4))
    def test_lambda_composition(self, s1, s2):
        g = Grid3(16)
        f = random_scalar(g, 6)
        lhs = sp.apply_operator(sp.apply_operator(f, OperatorSpec("lambda", s=s1)), OperatorSpec("lambda", s=s2))
        rhs = sp.apply_operator(f, OperatorSpec("lambda", s=s1 + s2))
        assert sp.l2_norm(lhs - rhs) <= 1e-12 * max(sp.l2_norm(rhs), 1.0)

    def test_laplacian_w_matches_cross_squared(self):
        # -(w x grad).(w x grad) a equals laplacian_w a
        g = Grid3(16)
        f = random_scalar(g, 7)
        wxg = sp.apply_operator(f, OperatorSpec("w_cross_grad", w=W))
        lhs = sp.apply_operator(wxg, OperatorSpec("div_w", w=W))
        rhs = sp.apply_operator(f, OperatorSpec("laplacian_w", w=W))
        assert sp.l2_norm(lhs - rhs) < 1e-10 * sp.l2_norm(rhs)

    def test_w_dot_grad_of_mode(self):
        g = Grid3(8)
        x, y, z = g.points()
        f = SpectralField.from_samples(g, np.cos(2 * np.pi * (x + y)) + 0 * z)
        out = sp.apply_operator(f, OperatorSpec("w_dot_grad", w=W)).to_samples()
        expected = -2 * np.pi * (W[0] + W[1]) * np.sin(2 * np.pi * (x + y)) + 0 * z
        assert np.max(np.abs(out - expected)) < 1e-12

    @pytest.mark.parametrize("kind", ["w_dot_grad", "w_cross_grad", "laplacian_w", "div_w"])
    def test_w_operators_need_nonzero_w(self, kind):
        with pytest.raises(ValueError):
            OperatorSpec(kind, w=(0, 0, 0))
        with pytest.raises(ValueError):
            OperatorSpec(kind)

    @pytest.mark.parametrize("s", [-1.0, float("nan"), None])
    def test_lambda_order_validated(self, s):
        with pytest.raises(ValueError):
            OperatorSpec("lambda", s=s)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            OperatorSpec("rot")

    def test_rank_checks(self):
        g = Grid3(8)
        with pytest.raises(TypeError):
            sp.apply_operator(random_vector(g), OperatorSpec("gradient"))
        with pytest.raises(TypeError):
            sp.apply_operator(random_scalar(g), OperatorSpec("curl"))

    def test_grid_mismatch(self):
        with pytest.raises(sp.GridMismatchError):
            random_scalar(Grid3(8)) + random_scalar(Grid3(16))


class TestNormsAndProjections:
    def test_sobolev_norm_of_mode(self):
        g = Grid3(8)
        x, _, _ = g.points()
        f = SpectralField.from_samples(g, np.broadcast_to(np.cos(2 * np.pi * x), g.shape))
        # two coefficients of 1/2, weight (1 + 4 pi^2)^s
        for s in (0, 1, 2.5):
            assert sp.sobolev_norm(f, s) ** 2 == pytest.approx(0.5 * (1 + 4 * np.pi**2) ** s, rel=1e-13)

    def test_cached_weights_are_read_only(self):
        w = sp.sobolev_weight(Grid3(8), 2.0)
        with pytest.raises(ValueError):
            w[0, 0, 0] = 5.0

    def test_leray_projection(self):
        g = Grid3(16)
        v = random_vector(g, 8)
        p = sp.leray_project(v)
        div = sp.apply_operator(p, OperatorSpec("divergence"))
        assert sp.l2_norm(div) < 1e-12
        assert sp.l2_norm(sp.leray_project(p) - p) < 1e-14
        # the removed part is a gradient, orthogonal to the projection
        assert abs(sp.inner(p, v - p)) < 1e-14

    def test_mean_and_center(self):
        g = Grid3(8)
        f = random_scalar(g)
        f.coeffs[0, 0, 0] = 0.25
        mean, centred = sp.mean_and_center(f)
        assert mean == 0.25
        assert centred.coeffs[0, 0, 0] == 0
        assert np.mean(centred.to_samples()) == pytest.approx(0.0, abs=1e-16)

    def test_dealiased_product_matches_padded_product(self):
        g = Grid3(16)
        f = sp.dealias(random_scalar(g, 9, 8.0))
        h = sp.dealias(random_scalar(g, 10, 8.0))
        prod = sp.dealiased_product(f, h)
        # oracle: exact product on a 3/2-padded grid, then truncated
        big = Grid3(24, dealias_fraction=1)
        pad = np.zeros((2,) + big.shape, dtype=complex)
        idx = np.ix_(*(3 * [np.r_[0:8, 16:24]]))
        sel = np.ix_(*(3 * [np.r_[0:8, 8:16]]))
        pad[0][idx] = f.coeffs[sel]
        pad[1][idx] = h.coeffs[sel]
        exact = sp.forward(big, sp.inverse(pad[0]) * sp.inverse(pad[1]))[idx] * g.dealias_mask[sel]
        assert np.max(np.abs(prod.coeffs[sel] - exact)) < 1e-14

    def test_band_limited_support(self):
        g = Grid3(16)
        c = sp.band_limited_random(g, np.random.default_rng(0), 2.0)
        support = np.abs(c) > 0
        assert not support[0, 0, 0]
        assert np.all(g.k_squared[support] <= 4.0)
