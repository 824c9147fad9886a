"""Tests for the q-series kernel."""

import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkm.context import QContext
from qkm.errors import DomainError, TruncationExhausted
from qkm.qseries import (ThetaKind, bilateral_sum, bracket, big_theta4_const,
                         gauss_check, gauss_double_sum_check,
                         jacobi_transform_check, pentagonal_check,
                         qpoch_finite, qpoch_inf, qpoch_inf_array,
                         theta, theta_product, theta_sum)

CTX = QContext(q=0.4)


def test_qpoch_finite_empty_product():
    assert qpoch_finite(0.7, 0.4, 0) == 1


def test_qpoch_finite_unrolled():
    x, q = 0.3 + 0.1j, 0.5
    assert qpoch_finite(x, q, 2) == pytest.approx((1 - x) * (1 - x * q))
    assert qpoch_finite(q, q, 1) == pytest.approx(1 - q)


def test_qpoch_finite_negative_index_inverts():
    x, q = 0.3, 0.45
    for n in (1, 3, 7):
        assert qpoch_finite(x, q, -n) * qpoch_finite(x * q ** -n, q, n) == pytest.approx(1.0)


def test_qpoch_inf_at_zero_argument():
    assert qpoch_inf(0.0, 0.4, CTX) == 1


def test_qpoch_inf_pairing_oracle():
    # (q;q)_inf (-q;q)_inf = (q^2;q^2)_inf, checked against an explicit
    # factor-by-factor product oracle
    q = 0.4
    oracle = 1.0
    for k in range(1, 200):
        oracle *= 1 - q ** (2 * k)
    lhs = qpoch_inf(q, q, CTX) * qpoch_inf(-q, q, CTX)
    assert abs(lhs - oracle) < 1e-12


def test_qpoch_inf_shift_property():
    rng = np.random.default_rng(7)
    for x in rng.uniform(-0.9, 0.9, 10) + 1j * rng.uniform(-0.3, 0.3, 10):
        ratio = qpoch_inf(x, 0.4, CTX) / qpoch_inf(x * 0.4, 0.4, CTX)
        assert abs(ratio - (1 - x)) < 1e-9


def test_qpoch_inf_array_matches_scalar():
    xs = np.array([0.3, -0.2 + 0.1j, 1.7, 0.0])
    arr = qpoch_inf_array(xs, 0.16, CTX)
    for x, v in zip(xs, arr):
        assert abs(v - qpoch_inf(x, 0.16, CTX)) < 1e-12


def test_truncation_exhausted_raised():
    slow = QContext(q=0.9999, max_terms=50)
    with pytest.raises(TruncationExhausted):
        qpoch_inf(0.5, 0.9999, slow)


def test_bracket_fixed_points():
    assert bracket(1.0) == 0
    assert bracket(-1.0) == 0


def test_bracket_hand_value():
    # z = i q^{nu+m}: bracket = i (q^{nu+m} + q^{-nu-m}), expanded by hand
    q, nu, m = 0.4, 0.5, 2
    z = 1j * q ** (nu + m)
    expect = 1j * (q ** (nu + m) + q ** (-nu - m))
    assert abs(bracket(z) - expect) < 1e-14


def test_bracket_zero_rejected():
    with pytest.raises(DomainError):
        bracket(0)


@settings(max_examples=40, deadline=None, derandomize=True)
@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3,
                          allow_nan=False, allow_infinity=False))
def test_bracket_inversion_antisymmetry(z):
    assert abs(bracket(z) + bracket(1 / z)) <= 1e-12 * max(abs(bracket(z)), 1.0)


def test_theta_h_vanishes_at_one():
    assert abs(theta(ThetaKind.H, 1.0, CTX)) < 1e-12


def test_theta_const_three_routes():
    s, _ = theta_sum(ThetaKind.CAP_THETA4, 1.0, CTX)
    p = theta_product(ThetaKind.CAP_THETA4, 1.0, CTX)
    ratio = qpoch_inf(0.4, 0.4, CTX) / qpoch_inf(-0.4, 0.4, CTX)
    assert abs(s - p) < 1e-12
    assert abs(p - ratio) < 1e-12
    assert abs(big_theta4_const(CTX) - s) < 1e-12


@settings(max_examples=25, deadline=None, derandomize=True)
@given(st.floats(0.5, 2.0), st.floats(0.0, 6.28))
def test_theta4_u_inversion_symmetry(r, phi):
    u = r * cmath.exp(1j * phi)
    a = theta(ThetaKind.THETA4, u, CTX)
    b = theta(ThetaKind.THETA4, 1 / u, CTX)
    assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)


def test_theta_sum_product_agreement_all_kinds():
    rng = np.random.default_rng(11)
    for ctx in (CTX, QContext(q=0.7 + 0.1j)):
        for kind in ThetaKind:
            for _ in range(50):
                u = rng.uniform(0.5, 2.0) * cmath.exp(2j * cmath.pi * rng.uniform())
                s, peak = theta_sum(kind, u, ctx)
                p = theta_product(kind, u, ctx)
                assert abs(s - p) <= 1e-9 * max(abs(s), abs(p), peak)


def test_jacobi_transform_holds():
    b = cmath.exp(1j * cmath.pi / 5)
    assert jacobi_transform_check(0.3, b, CTX).residual < 1e-9
    assert jacobi_transform_check(0.0, b, CTX).residual < 1e-9


def test_jacobi_transform_negative_control():
    b = cmath.exp(1j * cmath.pi / 5)
    r = jacobi_transform_check(0.3, b, CTX, rhs_phase=0.01)
    assert r.residual > 1e-9


def test_gauss_identity():
    assert gauss_check(0.2, 0.3, CTX).residual < 1e-9


def test_gauss_double_sum_trivial_point():
    r = gauss_double_sum_check(0.0, 0.0, CTX)
    assert r.params["res_double"] < 1e-15


def test_gauss_double_sum_against_brute_force():
    # oracle: plain 200x200 double loop, no tail machinery
    q2 = 0.16
    z1, z2 = 0.3, 0.2
    poch = [1.0]
    for n in range(1, 201):
        poch.append(poch[-1] * (1 - q2 ** n))
    total = 0.0
    for n1 in range(120):
        for n2 in range(120):
            total += q2 ** (n1 * n2) * z1 ** n1 * z2 ** n2 / (poch[n1] * poch[n2])
    rhs = qpoch_inf(z1 * z2, q2, CTX) / (qpoch_inf(z1, q2, CTX) * qpoch_inf(z2, q2, CTX))
    assert abs(total - rhs) < 1e-12
    assert gauss_double_sum_check(z1, z2, CTX).residual < 1e-9


def test_gauss_diagonal_against_brute_force():
    q2 = 0.16
    poch = [1.0]
    for n in range(1, 201):
        poch.append(poch[-1] * (1 - q2 ** n))
    total = sum(q2 ** (n * n) / poch[n] ** 2 for n in range(200))
    assert abs(total - 1 / qpoch_inf(q2, q2, CTX)) < 1e-13


def test_pentagonal_series():
    assert pentagonal_check(CTX).residual < 1e-9


def test_bilateral_sum_gaussian():
    # sum of q^{n^2} over Z equals the theta-constant at u = -1
    q = 0.4
    total = bilateral_sum(lambda n: q ** (n * n), CTX)
    s, _ = theta_sum(ThetaKind.CAP_THETA3, 1.0, CTX)
    assert abs(total - s) < 1e-12


def test_context_validation():
    with pytest.raises(DomainError):
        QContext(q=1.2)
    with pytest.raises(DomainError):
        QContext(q=0.4, tol_identity=1e-9, tail_cut=1e-3)  # cut above tol
    ctx = QContext(q=0.4, tol_identity=1e-6)
    assert ctx.tail_cut == pytest.approx(1e-8)
    assert ctx.q_pow_half(3) == pytest.approx(complex(0.4) ** 1.5)


def test_context_branch_consistency_negative_q():
    ctx = QContext(q=-0.3)
    # all half-integer powers share the principal branch fixed at construction
    assert ctx.q_pow_half(2) == pytest.approx(-0.3)
    assert ctx.q_pow_half(1) ** 2 == pytest.approx(-0.3)


def test_theta_zero_argument_rejected():
    with pytest.raises(DomainError):
        theta(ThetaKind.H, 0.0, CTX)


def test_theta_representation_mismatch(monkeypatch):
    import qkm.qseries as qs
    monkeypatch.setattr(qs, "theta_sum", lambda kind, u, ctx: (1.0 + 0j, 1.0))
    from qkm.errors import RepresentationMismatch
    with pytest.raises(RepresentationMismatch):
        qs.theta(ThetaKind.THETA4, 1.7, CTX)
