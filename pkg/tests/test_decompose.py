"""Dyadic slicing, Fourier coefficients and paraproduct synthesis.

The accuracy targets for the single-cone reconstruction and for the
operator-level synthesis live in ``test_acceptance.py``.
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rel_l2
from twistpar.cutoffs import theta, vartheta
from twistpar.decompose import (
    Decomposition,
    QuadratureResolutionError,
    apply_decomposed,
    decay_report,
    decompose,
    export_decomposition,
    fourier_coefficients,
    grid_scale_range,
    import_decomposition,
    reconstruct_symbol,
    shift_exponent,
    slice_symbol,
    synthesize_paraproducts,
)
from twistpar.grid import GridGeometry, SupportViolationError, band_limited_random, sample
from twistpar.operators import (
    TwistedSymbol,
    apply_paraproduct,
    apply_twisted_multiplier,
    cone,
    cone_symbol,
    constant_symbol,
    hard_cone_symbol,
)


def tilted_cone() -> TwistedSymbol:
    """Non-homogeneous smooth symbol supported in the unit cone."""
    return TwistedSymbol(lambda t1, t2: cone(t1, t2, 1.0) * np.exp(-0.3 * t1 ** 2) * (1 + 0.5j * np.tanh(t2)), 1.0)


@pytest.fixture(scope="module")
def cone_decomp() -> Decomposition:
    return decompose(cone_symbol(1.0), (-1, 1), 8)


@pytest.fixture(scope="module")
def fields():
    geo = GridGeometry(32, 8.0)
    f = sample(band_limited_random(geo, (0.25, 1.0), 1), geo)
    g = sample(band_limited_random(geo, (0.25, 1.0), 2), geo)
    return geo, f, g


class TestShiftExponent:
    @pytest.mark.parametrize("c,a", [(1, 0), (3, 2), (0.5, 0), (2, 1), (2.0001, 2), (1e-3, 0)])
    def test_examples(self, c, a):
        assert shift_exponent(c) == a

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1e6))
    def test_minimality(self, c):
        a = shift_exponent(c)
        assert c <= 2.0 ** a
        assert a == 0 or c > 2.0 ** (a - 1)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            shift_exponent(0.0)


class TestSlices:
    def test_zero_symbol(self):
        sl = slice_symbol(constant_symbol(0.0), 0)
        assert np.all(sl(np.linspace(-8, 8, 50), np.linspace(0.6, 1.9, 50)) == 0)

    def test_outside_box_vanishes(self):
        sl = slice_symbol(cone_symbol(1.0), 2)
        assert sl(0.5, 0.5) == 0 and sl(1.0, 9.0) == 0 and sl(40.0, 4.0) == 0

    def test_requires_support_constant(self):
        with pytest.raises(SupportViolationError):
            slice_symbol(constant_symbol(1.0), 0)
        liar = TwistedSymbol(lambda t1, t2: np.ones_like(t1), 1.0)
        with pytest.raises(SupportViolationError):
            slice_symbol(liar, 0)

    def test_defining_formula(self):
        m = tilted_cone()
        sl = slice_symbol(m, 1)
        rng = np.random.default_rng(0)
        t1, t2 = rng.uniform(-20, 20, 2000), rng.uniform(-5, 5, 2000)
        expected = m(t1, t2) * theta(2.0 ** -4 * t1) * vartheta(2.0 ** -1 * t2)
        np.testing.assert_allclose(sl(t1, t2), expected, atol=1e-15)

    @pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
    def test_support_on_dense_sample(self, c):
        # the unrestricted product must vanish outside the advertised box
        m = cone_symbol(c)
        for k in (-2, 0, 3):
            sl = slice_symbol(m, k)
            b1, lo, hi = sl.support_box
            assert max(b1, hi) <= sl.half_width
            t = np.linspace(-4 * sl.half_width, 4 * sl.half_width, 801)
            T1, T2 = np.meshgrid(t, t, indexing="ij")
            full = m(T1, T2) * theta(np.ldexp(T1, -(k + sl.a + 3))) * vartheta(np.ldexp(T2, -k))
            outside = (np.abs(T1) >= b1) | (np.abs(T2) <= lo) | (np.abs(T2) >= hi)
            assert np.all(full[outside] == 0)
            np.testing.assert_array_equal(sl(T1, T2)[~outside], full[~outside])

    @pytest.mark.parametrize("c", [1.0, 3.0])
    def test_slices_sum_to_symbol(self, c):
        m = cone_symbol(c)
        rng = np.random.default_rng(1)
        t2 = rng.choice([-1, 1], 1000) * 2.0 ** rng.uniform(-3, 3, 1000)
        t1 = rng.uniform(-1, 1, 1000) * c * np.abs(t2)
        total = sum(slice_symbol(m, k, check=False)(t1, t2) for k in range(-6, 7))
        np.testing.assert_allclose(total, m(t1, t2), atol=1e-12)


class TestFourierCoefficients:
    def test_zero(self):
        fc = fourier_coefficients(slice_symbol(constant_symbol(0.0), 0), 3)
        assert np.all(fc.table == 0)

    def test_even_real_symbol(self):
        fc = fourier_coefficients(slice_symbol(cone_symbol(1.0), 0), 6)
        tab = fc.table
        np.testing.assert_allclose(tab, tab[::-1, ::-1], atol=1e-10)
        assert np.max(np.abs(tab.imag)) <= 1e-10

    def test_center_matches_refined_quadrature(self):
        sl = slice_symbol(cone_symbol(1.0), 0)
        fc = fourier_coefficients(sl, 8)
        # independent route: midpoint rule on the positive quadrant, using evenness
        B = sl.half_width
        M = 4096
        t = (np.arange(M) + 0.5) * (B / M)
        T1, T2 = np.meshgrid(t, t, indexing="ij")
        ref = np.mean(sl(T1, T2).real)
        assert fc(0, 0) == pytest.approx(ref, abs=1e-8)

    def test_center_at_fixed_resolution_128(self):
        # literal example: M = 128 against a 512^2 reference. At M = 128 the
        # doubling check moves kappa by ~2.5e-5, so this raises (see ledger).
        sl = slice_symbol(cone_symbol(1.0), 0)
        fc = fourier_coefficients(sl, 8, M=128)
        t = -sl.half_width + np.arange(512) * (2 * sl.half_width / 512)
        T1, T2 = np.meshgrid(t, t, indexing="ij")
        assert fc(0, 0) == pytest.approx(np.mean(sl(T1, T2)), abs=1e-8)

    def test_explicit_resolution_is_checked(self):
        # at M = 128 the vartheta transition (width 2^{k-1}) is resolved by ~8 nodes only
        with pytest.raises(QuadratureResolutionError):
            fourier_coefficients(slice_symbol(cone_symbol(1.0), 0), 8, M=128)
        fc = fourier_coefficients(slice_symbol(cone_symbol(1.0), 0), 8, M=2176)
        assert fc.change <= 1e-8

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            fourier_coefficients(slice_symbol(cone_symbol(1.0), 0), 8, M=64)

    def test_homogeneous_symbol_is_scale_free(self, cone_decomp):
        tabs = [cone_decomp.coeffs[k] for k in cone_decomp.scales]
        for t in tabs[1:]:
            np.testing.assert_allclose(t, tabs[0], atol=1e-10)

    def test_table_truncation(self):
        fc = fourier_coefficients(slice_symbol(cone_symbol(1.0), 0), 4)
        small = fc.truncate(2)
        np.testing.assert_array_equal(small.table, fc.table[2:7, 2:7])
        assert small(1, -2) == fc(1, -2)
        with pytest.raises(ValueError):
            small.truncate(3)


class TestDecomposition:
    def test_term_count_and_synthesis(self, cone_decomp):
        specs = synthesize_paraproducts(cone_decomp)
        assert len(specs) == cone_decomp.term_count == 3 * 17 ** 2
        small = cone_decomp.truncate(0, with_error=False)
        assert len(synthesize_paraproducts(small)) == 3

    def test_lambda_bounds_and_scale_invariance(self, cone_decomp):
        for spec in synthesize_paraproducts(cone_decomp.truncate(2, with_error=False)):
            vals = np.array(list(spec.lambdas.values()))
            assert spec.sup_lambda <= np.max(np.abs(vals)) + 1e-15
            np.testing.assert_allclose(vals, vals[0], atol=1e-10)

    def test_zero_decomposition(self, fields):
        geo, f, g = fields
        d = decompose(constant_symbol(0.0), (-1, 0), 2)
        assert d.error_budget == 0.0
        assert np.all(apply_decomposed(d, f, g).values == 0)
        for spec in synthesize_paraproducts(d):
            assert np.all(apply_paraproduct(spec, f, g, warn=False).values == 0)
        assert np.all(decay_report(d).weighted == 0)

    def test_reconstruction_improves(self, cone_decomp):
        _, r0 = reconstruct_symbol(cone_decomp.truncate(0, with_error=False))
        _, r8 = reconstruct_symbol(cone_decomp)
        assert r8.sup_error < r0.sup_error
        assert r8.sup_error == cone_decomp.error_budget

    def test_regrouped_sum_equals_spec_sum(self, fields):
        geo, f, g = fields
        d = decompose(tilted_cone(), (-1, 0), 2)
        total = sum(apply_paraproduct(s, f, g, warn=False).values for s in synthesize_paraproducts(d))
        assert rel_l2(apply_decomposed(d, f, g).values, total) <= 1e-12

    def test_operator_error_decreases(self, fields):
        geo, f, g = fields
        k_range = grid_scale_range(geo)
        for m in (cone_symbol(2.0), tilted_cone()):
            d = decompose(m, k_range, 8, with_error=False)
            ref = apply_twisted_multiplier(m, f, g).values
            errs = [rel_l2(apply_decomposed(d.truncate(n, with_error=False), f, g).values, ref) for n in (2, 4, 8)]
            assert errs[0] > errs[1] > errs[2]

    def test_decay_report_oracle(self):
        n = np.arange(-6, 7)
        shell = np.abs(n)[:, None] + np.abs(n)[None, :]
        exact = 3.0 * (1.0 + shell) ** -10.0
        rep = decay_report(exact)
        assert rep.radii.tolist() == list(range(13))
        np.testing.assert_allclose(rep.weighted, 3.0)
        assert not rep.flagged and rep.median == pytest.approx(3.0)
        slow = (1.0 + shell) ** -2.0
        assert decay_report(slow).flagged
        assert decay_report(slow).growth > 2

    def test_decay_report_flags_hard_cone(self):
        # the jump never settles under doubling, so the resolution check is relaxed here
        fc = fourier_coefficients(slice_symbol(hard_cone_symbol(1.0), 0), 8, M=1024, tol=1.0)
        assert decay_report(fc).flagged

    def test_grid_scale_range(self):
        assert grid_scale_range(GridGeometry(64, 16.0)) == (-4, 1)


class TestExport:
    def test_round_trip(self, cone_decomp, tmp_path):
        p = tmp_path / "d.json"
        doc = export_decomposition(cone_decomp, p)
        assert set(doc) == {"a", "k_range", "n_max", "i_list", "coeffs", "error_budget"}
        back = import_decomposition(p)
        assert back.n_max == cone_decomp.n_max and back.k_range == cone_decomp.k_range
        for k in cone_decomp.scales:
            np.testing.assert_array_equal(back.coeffs[k], cone_decomp.coeffs[k])

    def test_reimported_operator_matches(self, cone_decomp, fields):
        geo, f, g = fields
        small = cone_decomp.truncate(3, with_error=False)
        back = import_decomposition(json.loads(json.dumps(export_decomposition(small))))
        np.testing.assert_array_equal(apply_decomposed(back, f, g).values, apply_decomposed(small, f, g).values)

    def test_rejects_bad_index(self, cone_decomp):
        doc = export_decomposition(cone_decomp.truncate(1, with_error=False))
        doc["coeffs"][0]["n1"] = 5
        with pytest.raises(ValueError):
            import_decomposition(doc)
