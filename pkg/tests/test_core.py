import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from jacobi_wvn.core import (E22, IDENTITY, PeriodicOperator, PointClass, classify,
                             det_relative_error, diagonalizer, free_operator, mat_norm, monodromy,
                             monodromy_batch, monodromy_trace, partial_products, require_elliptic,
                             sigma_bound_constant, sigma_k, trace_polynomial, transfer_matrix)
from jacobi_wvn.errors import DomainError, ValidationError

from conftest import interior_points, operators


class TestOperatorValidation:
    def test_rejects_nonpositive_off_diagonal(self):
        with pytest.raises(ValidationError, match=r"a\[1\]"):
            PeriodicOperator([1.0, 0.0])
        with pytest.raises(ValidationError):
            PeriodicOperator([-1.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValidationError):
            PeriodicOperator([1.0, 2.0], [0.0])

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            PeriodicOperator([])

    def test_from_dict_round_trip(self, trimer):
        op = PeriodicOperator.from_dict(trimer.to_dict())
        assert_array_equal(op.a, trimer.a)
        assert_array_equal(op.b, trimer.b)

    def test_from_dict_messages_name_field(self):
        with pytest.raises(ValidationError, match="operator.a: missing"):
            PeriodicOperator.from_dict({"b": [0.0]})
        with pytest.raises(ValidationError, match="operator.a: expected 2 entries"):
            PeriodicOperator.from_dict({"period": 2, "a": [1.0]})
        with pytest.raises(ValidationError, match=r"operator.a\[0\]"):
            PeriodicOperator.from_dict({"a": [0.0]})

    def test_arrays_read_only(self, dimer):
        with pytest.raises(ValueError):
            dimer.a[0] = 5.0

    def test_periodic_lookup_wraps(self, dimer):
        assert dimer.a_at(0) == 2.0
        assert dimer.a_at(3) == 1.0
        assert dimer.b_at(2) == 0.0


class TestTransferMatrix:
    def test_free_at_zero(self, free1):
        assert_array_equal(transfer_matrix(free1, 1, 0.0), [[0, 1], [-1, 0]])

    def test_dimer_first_site(self, dimer):
        assert_array_equal(transfer_matrix(dimer, 1, 1.0), [[0, 1], [-2, 1]])

    def test_index_out_of_range(self, dimer):
        with pytest.raises(ValidationError):
            transfer_matrix(dimer, 0, 0.0)
        with pytest.raises(ValidationError):
            transfer_matrix(dimer, 3, 0.0)

    def test_complex_lambda(self, free1):
        B = transfer_matrix(free1, 1, 1j)
        assert B.dtype == complex
        assert B[1, 1] == 1j

    @given(operators(), st.floats(-20, 20), st.data())
    def test_determinant_is_ratio_of_links(self, op, lam, data):
        i = data.draw(st.integers(1, op.period))
        B = transfer_matrix(op, i, lam)
        assert_allclose(np.linalg.det(B), op.a_at(i - 1) / op.a_at(i), rtol=1e-13)


class TestMonodromy:
    @pytest.mark.parametrize("lam", [-1.5, 0.0, 0.7])
    def test_free_single_factor(self, free1, lam):
        m = monodromy(free1, lam)
        assert_array_equal(m.matrix, [[0, 1], [-1, lam]])
        assert m.trace == lam

    def test_two_site_chain_at_zero(self):
        op = PeriodicOperator([1.0, 1.0])
        m = monodromy(op, 0.0)
        direct = transfer_matrix(op, 2, 0.0) @ transfer_matrix(op, 1, 0.0)
        assert_array_equal(m.matrix, direct)
        assert m.trace == -2.0

    @given(operators(), st.floats(-20, 20))
    def test_determinant_one(self, op, lam):
        m = monodromy(op, lam)
        assert det_relative_error(m.matrix) <= 1e-12

    @given(operators(), st.floats(-20, 20))
    def test_real_entries_for_real_lambda(self, op, lam):
        m = monodromy(op, lam)
        assert m.matrix.dtype == float

    @given(operators())
    def test_vectorised_trace_and_polynomial_agree(self, op):
        lams = np.linspace(-5, 5, 37)
        tr = monodromy_trace(op, lams)
        scalar = np.array([monodromy(op, l).trace for l in lams])
        assert_allclose(tr, scalar, rtol=1e-12, atol=1e-12)
        assert_allclose(trace_polynomial(op)(lams), tr,
                        rtol=1e-9, atol=1e-9 * np.abs(tr).max())
        assert_allclose(monodromy_batch(op, lams), np.array([monodromy(op, l).matrix for l in lams]),
                        rtol=1e-12, atol=1e-12)

    def test_dimer_trace_formula(self, dimer):
        lams = np.linspace(-4, 4, 9)
        assert_allclose(monodromy_trace(dimer, lams), (lams ** 2 - 5) / 2, atol=1e-14)


class TestClassify:
    def test_free_examples(self, free1):
        pt = classify(free1, 0.0)
        assert pt.kind is PointClass.ELLIPTIC
        assert pt.theta == pytest.approx(math.pi / 2)
        assert pt.mu == pytest.approx(1j)
        assert classify(free1, 3.0).kind is PointClass.HYPERBOLIC
        assert classify(free1, 2.0).kind is PointClass.PARABOLIC
        assert classify(free1, -2.0).kind is PointClass.PARABOLIC

    def test_non_elliptic_carries_no_angle(self, free1):
        pt = classify(free1, 3.0)
        assert pt.theta is None and pt.mu is None

    def test_bad_tolerance(self, free1):
        with pytest.raises(ValidationError):
            classify(free1, 0.0, tol=0.0)

    @given(operators(), st.floats(-10, 10))
    def test_elliptic_consistency(self, op, lam):
        pt = classify(op, lam)
        if pt.is_elliptic:
            assert abs(abs(pt.mu) - 1) < 1e-12
            assert pt.mu.imag > 0
            assert 0 < pt.theta < math.pi
            assert_allclose(pt.trace, 2 * math.cos(pt.theta), atol=1e-12)

    def test_require_elliptic(self, free1):
        with pytest.raises(DomainError):
            require_elliptic(classify(free1, 2.5))
        with pytest.raises(DomainError):
            require_elliptic(classify(free1, 1.9999999), edge_guard=1e-3)
        require_elliptic(classify(free1, 1.0), edge_guard=1e-3)


class TestPartialProducts:
    def test_identity_ends(self, trimer):
        pp = partial_products(trimer, 0.3)
        assert_array_equal(pp.left[0], IDENTITY)
        assert_array_equal(pp.right[-1], IDENTITY)

    def test_dimer_left_one_factor(self, dimer):
        pp = partial_products(dimer, 0.4)
        assert_allclose(pp.left[1], transfer_matrix(dimer, 2, 0.4))

    @given(operators(), st.floats(-5, 5))
    def test_consistency(self, op, lam):
        # roundoff scale is the product of the factor norms, not |M|
        pp = partial_products(op, lam)
        T = op.period
        scale = max(mat_norm(pp.left[j]) * mat_norm(transfer_matrix(op, T - j, lam))
                    * mat_norm(pp.right[j]) for j in range(T))
        assert pp.residual(op) <= 1e-12 * max(1.0, scale)

    def test_consistency_absolute_in_band(self, trimer):
        assert partial_products(trimer, 0.1).residual(trimer) <= 1e-12


class TestSigma:
    def test_zero_potential_is_exact_zero(self, trimer):
        assert_array_equal(sigma_k(trimer, 0.3, lambda n: 0.0, 4), np.zeros((2, 2)))

    def test_single_site(self):
        op = PeriodicOperator([1.5])
        S = sigma_k(op, 0.3, lambda n: 0.25 if n == 4 else 0.0, 3)
        assert_allclose(S, [[0, 0], [0, 0.25 / 1.5]])

    @given(operators(max_period=5), st.floats(-5, 5), st.integers(1, 50), st.data())
    def test_norm_bound(self, op, lam, k, data):
        vals = data.draw(st.lists(st.floats(-1, 1), min_size=op.period, max_size=op.period))
        q = lambda n: vals[(n - 1) % op.period]
        S = sigma_k(op, lam, q, k)
        C = sigma_bound_constant(op, lam)
        assert mat_norm(S) <= C * max(abs(v) for v in vals) * (1 + 1e-12) + 1e-300

    def test_first_order_perturbed_block(self, trimer):
        # product of perturbed transfer matrices over one block is M - Sigma + O(q^2)
        lam, k, s = 0.3, 5, 1e-6
        q = lambda n: s * math.sin(n)
        M = monodromy(trimer, lam).matrix
        P = np.eye(2)
        for n in range(k * trimer.period + 1, (k + 1) * trimer.period + 1):
            i = (n - 1) % trimer.period + 1
            B = transfer_matrix(trimer, i, lam).copy()
            B[1, 1] -= q(n) / trimer.a_at(i)
            P = B @ P
        assert mat_norm(P - (M - sigma_k(trimer, lam, q, k))) < 1e-10


class TestDiagonalizer:
    def test_free_at_zero(self, free1):
        V, Vinv = diagonalizer(free1, classify(free1, 0.0))
        assert_allclose(V, [[-1j, 1j], [1, 1]], atol=1e-15)
        assert_allclose(V @ Vinv, np.eye(2), atol=1e-15)

    def test_non_elliptic_refused(self, free1):
        with pytest.raises(DomainError):
            diagonalizer(free1, classify(free1, 3.0))

    @given(interior_points(max_period=6, margin=0.01))
    def test_diagonalises(self, sample):
        op, _, lam = sample
        pt = classify(op, lam)
        V, Vinv = diagonalizer(op, pt)
        M = monodromy(op, lam).matrix
        D = Vinv @ M @ V
        scale = max(1.0, mat_norm(M))
        assert abs(D[0, 1]) < 1e-10 * scale and abs(D[1, 0]) < 1e-10 * scale
        assert_allclose(np.diag(D), [pt.mu, pt.mu.conjugate()], atol=1e-10 * scale)
        assert abs(np.linalg.det(V)) > 0


def test_free_operator_is_unit_chain():
    op = free_operator()
    assert op.period == 1 and op.a[0] == 1.0 and op.b[0] == 0.0


def test_e22_projector():
    assert_array_equal(E22, [[0, 0], [0, 1]])
