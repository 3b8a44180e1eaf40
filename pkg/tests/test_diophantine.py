from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diomhd import diophantine as dio

GOLDEN = (1.0, np.sqrt(2.0), np.sqrt(3.0))


class TestDioVector:
    def test_default_direction(self):
        v = dio.DioVector.default(2.0)
        assert v.w == pytest.approx((2.0, 2 * np.sqrt(2), 2 * np.sqrt(3)))
        assert v.proven_regime

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            dio.DioVector((0, 0, 0))

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            dio.DioVector((1, 2))

    def test_nonpositive_constant(self):
        with pytest.raises(ValueError):
            dio.DioVector(GOLDEN, claimed_c=0.0)

    def test_small_r_warns(self, caplog):
        with caplog.at_level("WARNING"):
            v = dio.DioVector(GOLDEN, r=2.0)
        assert not v.proven_regime
        assert "r=2.0" in caplog.text


class TestLattice:
    @pytest.mark.parametrize("K, full", [(1, 6), (2, 32), (3, 122)])
    def test_counts(self, K, full):
        # oracle: brute-force count of integer points in the punctured ball
        r = range(-K, K + 1)
        brute = sum(1 for a in r for b in r for c in r if 0 < a * a + b * b + c * c <= K * K)
        assert brute == full
        assert len(dio.lattice_band(K)) == full
        assert len(dio.lattice_band(K, half=True)) == full // 2

    def test_half_band_picks_one_of_each_pair(self):
        half = {tuple(k) for k in dio.lattice_band(3, half=True)}
        assert all(tuple(-np.array(k)) not in half for k in half)

    def test_budget(self):
        with pytest.raises(dio.LatticeBudgetError):
            dio.lattice_band(50, budget=1000)

    def test_invalid_K(self):
        with pytest.raises(ValueError):
            dio.lattice_band(0)


class TestMargins:
    @pytest.mark.parametrize("w, resonant", [((1, 0, 0), (0, 1, 0)), ((1, 2, 3), (1, 1, -1))])
    def test_resonant_vectors(self, w, resonant):
        rep = dio.margin_report(w, 3.0, 20)
        assert rep.dot_margin == 0.0
        assert rep.dot_argmin == resonant
        assert not rep.diophantine_in_band

    def test_golden_vector_positive(self):
        rep = dio.margin_report(GOLDEN, 3.0, 20)
        assert rep.diophantine_in_band
        # oracle: brute force over the band
        k = dio.lattice_band(20).astype(float)
        brute = np.min(np.abs(k @ np.array(GOLDEN)) * np.linalg.norm(k, axis=1) ** 3)
        assert rep.dot_margin == pytest.approx(brute, rel=1e-12)

    def test_margin_table_matches_report(self):
        table = dio.margin_table(GOLDEN, 3.0, 5)
        rep = dio.margin_report(GOLDEN, 3.0, 5)
        assert min(row[4] for row in table) == pytest.approx(rep.dot_margin)
        assert min(row[5] for row in table) == pytest.approx(rep.cross_margin)


class TestTilde:
    @pytest.mark.parametrize("k, expected", [((3, 0, -1), (0, 1, 0)), ((0, 0, 5), (0, -5, 0)), ((2, 0, 0), (0, 0, -2))])
    def test_vectors(self, k, expected):
        assert tuple(dio.tilde_vector(k)) == expected

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            dio.tilde_vector((0, 0, 0))

    @pytest.mark.parametrize("w", [GOLDEN, (1, 0, 0), (1, 2, 3)])
    def test_inequality_holds(self, w):
        check = dio.tilde_inequality_check(w, 8)
        assert check.passed
        assert check.max_ratio <= 1 + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(k=st.tuples(*(3 * [st.integers(-30, 30)])).filter(any))
    def test_tilde_orthogonal_and_short(self, k):
        t = dio.tilde_vector(k)
        assert np.dot(t, k) == 0
        assert 0 < np.linalg.norm(t) <= np.linalg.norm(k)


class TestConstants:
    def test_single_mode_ratio(self):
        # w = e1, k = e1, r = s = 3: |f|_0 / |2 pi Lambda^3 f|_0 = (2 pi)^-4
        grid = dio.certification_grid(2)
        ratios = dio.inequality_ratios(dio.single_mode(grid, (1, 0, 0)), (1, 0, 0), 3.0, 3.0)
        assert abs(ratios["K1"] - (2 * np.pi) ** -4) < 1e-12
        assert ratios["K2"] == float("inf")

    def test_non_diophantine_is_infinite(self):
        c = dio.empirical_constants((1, 0, 0), 3.0, 3.0, 4)
        assert not c.diophantine_in_band
        assert c.worst_k1 == (0, 1, 0)
        assert c.status == "not Diophantine in band"

    def test_s_below_r(self):
        with pytest.raises(ValueError):
            dio.empirical_constants(GOLDEN, 2.0, 3.0, 4)

    def test_certification_attains_constants(self):
        cert = dio.certify_constants(GOLDEN, 3.0, 3.0, K=4, samples=10, seed=1)
        assert cert.holds()
        c = cert.constants
        assert abs(cert.max_observed("K1") - c.K1_emp) <= 1e-12 * c.K1_emp
        assert abs(cert.max_observed("K2") - c.K2_emp) <= 1e-12 * c.K2_emp
        assert cert.max_random_ratios["K1"] <= c.K1_emp * (1 + 1e-12)

    def test_certification_refuses_resonant(self):
        with pytest.raises(ValueError):
            dio.certify_constants((1, 0, 0), 3.0, 3.0, K=3, samples=2)


class TestHarness:
    def test_ratios_are_finite_and_positive(self):
        reports = dio.ratio_harness(samples=5, seed=0)
        assert [r.name for r in reports] == ["product", "commutator", "composition", "weighted_poincare"]
        for r in reports:
            assert np.isfinite(r.max_ratio) and r.max_ratio > 0
            assert r.mean_ratio <= r.max_ratio

    def test_weighted_poincare_rejects_bad_weight(self):
        grid = dio.certification_grid(2)
        f = dio.single_mode(grid, (1, 0, 0))
        with pytest.raises(ValueError):
            dio.weighted_poincare_ratio(f, f)
