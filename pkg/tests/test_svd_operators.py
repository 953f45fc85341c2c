import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqinvert.svd_operators import (
    DomainError,
    OperatorKind,
    OperatorSpec,
    SignalCoefficients,
    catalog_signal,
    conjugate_basis_eval,
    eigenbasis_eval,
    forward_apply,
    heat_truth_function,
    singular_value,
    sobolev_norm,
    tail_negligible,
)

SQRT2 = math.sqrt(2.0)

ALL_OPS = [
    OperatorSpec.volterra(),
    OperatorSpec.heat(0.02),
    OperatorSpec.mild(1.5),
    OperatorSpec.extreme(0.5, 1.5),
]


class TestSingularValue:
    def test_volterra_first(self):
        # 2/pi
        assert singular_value(OperatorSpec.volterra(), 1) == pytest.approx(0.6366197723675813, abs=1e-15)

    def test_mild_identity(self):
        assert singular_value(OperatorSpec.mild(1.0), 1) == 1.0

    def test_heat_k3(self):
        # exp(-9 pi^2 0.02), evaluated with mpmath at 40 digits
        assert singular_value(OperatorSpec.heat(0.02), 3) == pytest.approx(0.16922454248244995, rel=1e-14)

    def test_volterra_square_exact(self):
        op = OperatorSpec.volterra()
        k = np.arange(1, 200)
        np.testing.assert_allclose(op.singular_values(k) ** 2, 1.0 / ((k - 0.5) ** 2 * math.pi**2), rtol=1e-15)

    def test_heat_descriptor(self):
        op = OperatorSpec.heat(0.02)
        assert op.p == pytest.approx(math.pi**2 * 0.02)
        assert op.s == 2.0

    @pytest.mark.parametrize("k", [0, -1])
    def test_rejects_nonpositive_index(self, k):
        with pytest.raises(DomainError):
            singular_value(OperatorSpec.volterra(), k)

    @pytest.mark.parametrize("op", ALL_OPS[:3] + [OperatorSpec.mild(0.3)], ids=lambda o: o.kind.value)
    def test_positive_strictly_decreasing(self, op):
        a = op.singular_values(np.arange(1, 100_001)) if op.regime.value == "Mild" else op.singular_values(np.arange(1, 50))
        assert np.all(a > 0)
        assert np.all(np.diff(a) < 0)

    def test_extreme_decreasing_until_underflow(self):
        op = OperatorSpec.extreme(1.0, 1.0)
        a = op.singular_values(np.arange(1, 2000))
        pos = a[a > 0]
        assert pos.size > 700
        assert np.all(np.diff(pos) < 0)
        # underflow yields exact zeros rather than errors
        assert a[-1] == 0.0

    def test_invalid_specs(self):
        with pytest.raises(DomainError):
            OperatorSpec(OperatorKind.VOLTERRA, p=2.0)
        with pytest.raises(DomainError):
            OperatorSpec.mild(0.0)
        with pytest.raises(DomainError):
            OperatorSpec.extreme(1.0, 0.5)


class TestBases:
    def test_examples(self):
        vol, heat = OperatorSpec.volterra(), OperatorSpec.heat()
        assert eigenbasis_eval(vol, 1, 0.0) == pytest.approx(SQRT2, abs=1e-15)
        assert eigenbasis_eval(heat, 1, 0.5) == pytest.approx(SQRT2, abs=1e-15)
        assert eigenbasis_eval(heat, 2, 0.5) == pytest.approx(0.0, abs=1e-15)
        assert conjugate_basis_eval(vol, 1, 1.0) == pytest.approx(SQRT2, abs=1e-15)
        assert conjugate_basis_eval(heat, 3, 1 / 3) == pytest.approx(0.0, abs=1e-15)
        assert conjugate_basis_eval(heat, 1, 0.0) == 0.0

    @pytest.mark.parametrize("x", [-0.1, 1.0000001, float("nan")])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            eigenbasis_eval(OperatorSpec.heat(), 1, x)

    @pytest.mark.parametrize("op", ALL_OPS, ids=lambda o: o.kind.value)
    @pytest.mark.parametrize("which", ["eigenbasis", "conjugate_basis"])
    def test_l2_orthonormal(self, op, which):
        # composite midpoint rule on 10^4 cells
        m = 10_000
        x = (np.arange(m) + 0.5) / m
        k = np.arange(1, 21)
        B = getattr(op, which)(k[:, None], x[None, :])
        gram = B @ B.T / m
        assert np.max(np.abs(gram - np.eye(20))) <= 1e-6


class TestForward:
    @pytest.mark.parametrize("op", ALL_OPS, ids=lambda o: o.kind.value)
    def test_zero_signal(self, op):
        assert forward_apply(op, SignalCoefficients(np.zeros(5)), 0.5) == 0.0

    def test_heat_single_term(self):
        f = SignalCoefficients.unit(1, 10)
        # sqrt(2) exp(-pi^2 0.02), mpmath
        assert forward_apply(OperatorSpec.heat(0.02), f, 0.5) == pytest.approx(1.1608836730968642, rel=1e-14)

    def test_volterra_single_term(self):
        f = SignalCoefficients.unit(1, 10)
        # 2 sqrt(2) / pi, mpmath
        assert forward_apply(OperatorSpec.volterra(), f, 1.0) == pytest.approx(0.9003163161571061, rel=1e-14)

    @pytest.mark.parametrize("op", ALL_OPS, ids=lambda o: o.kind.value)
    def test_unit_vectors(self, op):
        x = np.linspace(0, 1, 37)
        for k in (1, 2, 7, 20):
            got = forward_apply(op, SignalCoefficients.unit(k, 25), x)
            np.testing.assert_allclose(got, singular_value(op, k) * op.conjugate_basis(k, x), atol=1e-12, rtol=0)

    def test_volterra_is_integration(self):
        # A f(x) = int_0^x f for f = phi_3, compared against the antiderivative
        op = OperatorSpec.volterra()
        x = np.linspace(0, 1, 11)
        exact = SQRT2 * np.sin(2.5 * math.pi * x) / (2.5 * math.pi)
        np.testing.assert_allclose(forward_apply(op, SignalCoefficients.unit(3), x), exact, atol=1e-14)

    def test_tail_predicate(self):
        op = OperatorSpec.heat()
        assert tail_negligible(op, catalog_signal("HeatTruth", 40))
        assert not tail_negligible(OperatorSpec.volterra(), catalog_signal("VolterraTruth", 100))


class TestSobolev:
    def test_examples(self):
        assert sobolev_norm(SignalCoefficients([1.0, 0, 0]), 2) == 1.0
        assert sobolev_norm(SignalCoefficients([0.0, 1.0, 0]), 1) == pytest.approx(2.0)
        assert sobolev_norm(SignalCoefficients(np.zeros(4)), 3.3) == 0.0

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(0, 3), st.floats(0, 3))
    def test_monotone_in_beta(self, coeffs, b1, b2):
        f = SignalCoefficients(coeffs)
        lo, hi = sorted((b1, b2))
        assert sobolev_norm(f, lo) <= sobolev_norm(f, hi) * (1 + 1e-12) + 1e-300


class TestCatalog:
    def test_volterra_truth(self):
        f = catalog_signal("VolterraTruth", 10)
        assert f.coeffs[0] == pytest.approx(math.sin(1.0), abs=1e-15)
        assert f.beta == 1.0
        k = np.arange(1, 11)
        np.testing.assert_allclose(f.coeffs, k**-1.5 * np.sin(k), rtol=1e-15)

    def test_heat_truth_coefficients_against_quadrature(self):
        # mpmath quadrature of 4x(x-1)(8x-5) sqrt(2) sin(k pi x) on [0, 1]
        quad = [0.7297689184443774, 1.0946533776665661, 0.027028478460902867]
        f = catalog_signal("HeatTruth", 3)
        np.testing.assert_allclose(f.coeffs, quad, rtol=1e-14)
        assert f.beta == 2.49

    def test_heat_truth_partial_sums(self):
        f = catalog_signal("HeatTruth", 200)
        x = np.linspace(0, 1, 101)
        err = np.max(np.abs(f.evaluate(OperatorSpec.heat(), x) - heat_truth_function(x)))
        assert err <= 1e-3

    @pytest.mark.parametrize("name", ["VolterraTruth", "HeatTruth"])
    def test_tail_proxy(self, name):
        f = catalog_signal(name, 4096)
        K, beta = f.K, f.beta
        assert f.coeffs[-1] ** 2 * K ** (2 * beta) <= f.coeffs[0] ** 2 + 1e-12

    def test_beta_override(self):
        assert catalog_signal("VolterraTruth", 4, beta=0.5).beta == 0.5
