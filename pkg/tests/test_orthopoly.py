"""Tests for the Laurent polynomials and their q-hypergeometric extension."""

import numpy as np
import pytest

from qkm.context import QContext
from qkm.errors import DegenerateArgument, DomainError, OverflowGuard
from qkm.orthopoly import (ChiParams, PolyEvalMethod, chi, chi_equation_checks,
                           genfun_checks, poly_norm_sum_check, poly_P,
                           poly_P_difference_checks, scaled_poly_values)
from qkm.qseries import qpoch_inf, qpoch_inf_multi

CTX = QContext(q=0.4)
METHODS = list(PolyEvalMethod)


def test_low_orders():
    xi = 1.3
    assert poly_P(0, xi, CTX) == 1
    assert abs(poly_P(1, xi, CTX) - (xi + 1 / xi)) < 1e-15
    # one step of the three-term recursion by hand
    expect2 = xi ** 2 + xi ** -2 + 1 + 0.4 ** -2
    assert abs(poly_P(2, xi, CTX) - expect2) < 1e-12


def test_three_methods_agree():
    rng = np.random.default_rng(3)
    for n in range(21):
        for _ in range(20):
            xi = rng.uniform(0.5, 2.0) * np.exp(2j * np.pi * rng.uniform())
            vals = [poly_P(n, xi, CTX, m) for m in METHODS]
            scale = max(abs(vals[1]), 1.0)
            assert abs(vals[0] - vals[1]) < 1e-9 * scale
            assert abs(vals[2] - vals[1]) < 1e-9 * scale


def test_parity():
    rng = np.random.default_rng(5)
    for n in range(21):
        xi = rng.uniform(0.6, 1.8) + 0.2j
        a = poly_P(n, -xi, CTX)
        b = (-1) ** n * poly_P(n, xi, CTX)
        assert abs(a - b) < 1e-9 * max(abs(b), 1.0)


def test_laurent_inversion_invariance():
    rng = np.random.default_rng(9)
    for n in range(21):
        xi = rng.uniform(0.6, 1.8) * np.exp(2j * np.pi * rng.uniform())
        a = poly_P(n, xi, CTX)
        b = poly_P(n, 1 / xi, CTX)
        assert abs(a - b) < 1e-9 * max(abs(a), 1.0)


def test_zero_argument_rejected():
    with pytest.raises(DomainError):
        poly_P(3, 0.0, CTX)


def test_overflow_guard():
    with pytest.raises(OverflowGuard):
        poly_P(60, 1.3, QContext(q=0.3))


def test_scaled_rows_match_plain_values():
    xi = 1.1 + 0.3j
    rows = scaled_poly_values(15, xi, CTX)
    for a in (0, 3, 9, 15):
        expect = CTX.q_pow_half(a * a) * poly_P(a, xi, CTX)
        assert abs(rows[a] - expect) < 1e-10 * max(abs(expect), 1.0)


def test_difference_equations():
    assert poly_P_difference_checks(3, 1.3, CTX).residual < 1e-9
    assert poly_P_difference_checks(0, 1.7, CTX).residual == 0.0
    r = poly_P_difference_checks(5, 0.7 + 0.2j, QContext(q=0.35))
    assert r.residual < 1e-9


def test_difference_oracle_explicit_sum():
    # both sides of the three-point relation assembled from the explicit sum
    n, xi, q = 4, 1.2, 0.4
    p = poly_P(n, xi, CTX, PolyEvalMethod.EXPLICIT_SUM)
    p_up = poly_P(n, q * xi, CTX, PolyEvalMethod.EXPLICIT_SUM)
    p_dn = poly_P(n, xi / q, CTX, PolyEvalMethod.EXPLICIT_SUM)
    assert abs(p - q ** -n * (xi * p_up - p_dn / xi) / (xi - 1 / xi)) < 1e-9 * abs(p)


def test_degenerate_argument_rejected():
    with pytest.raises(DegenerateArgument):
        poly_P_difference_checks(3, 1.0 + 1e-8, CTX)


def test_generating_functions():
    assert genfun_checks(0.0, 1.2, 0.8, CTX).residual < 1e-12
    assert genfun_checks(0.3, 1.2, 0.8, CTX).residual < 1e-9


def test_genfun_double_oracle():
    # left side of the two-variable generating function summed with explicit
    # polynomial values (terms decay like (z/q)^n), right side from products
    q, z, u, v = 0.4, 0.12, 1.2, 0.8
    poch2 = [1.0]
    for n in range(1, 61):
        poch2.append(poch2[-1] * (1 - (q * q) ** n))
    lhs = sum((-1) ** n * q ** (n * (n - 1)) * z ** n
              * poly_P(n, u, CTX, PolyEvalMethod.FORWARD_RECURSION)
              * poly_P(n, v, CTX, PolyEvalMethod.FORWARD_RECURSION) / poch2[n]
              for n in range(38))
    rhs = (qpoch_inf_multi((z * u * v, z / (u * v), z * u / v, z * v / u), q * q, CTX)
           / qpoch_inf(z * z / (q * q), q * q, CTX))
    assert abs(lhs - rhs) < 1e-10 * abs(rhs)


def test_norm_sum_diagonal_and_off():
    assert poly_norm_sum_check(0, 0, CTX).residual < 1e-9
    assert poly_norm_sum_check(2, 2, CTX).residual < 1e-9
    assert poly_norm_sum_check(1, 3, CTX).residual < 1e-9


def test_chi_trivial_points():
    assert chi(ChiParams(1.7, 1.0, 0.4), CTX) == 1.0
    u = 0.9 + 0.2j
    lhs = chi(ChiParams(u, 0.4 ** -2, 0.4), CTX)
    assert abs(lhs - u * poly_P(1, u, CTX)) < 1e-12


def test_chi_reduces_to_polynomials():
    u = 1.1
    for m in range(11):
        lhs = chi(ChiParams(u, 0.4 ** (-2 * m), 0.4), CTX)
        rhs = u ** m * poly_P(m, u, CTX)
        assert abs(lhs - rhs) < 1e-9 * max(abs(rhs), 1.0)


def test_chi_wronskian_ratio():
    ctx = QContext(q=0.5)
    m, z = 2, 0.3
    num = chi(ChiParams(0.5 ** -m, z, 0.5), ctx)
    den = chi(ChiParams(0.5 ** m, z, 0.5), ctx)
    assert abs(num / den - z ** m) < 1e-12


def test_chi_equations():
    ctx = QContext(q=0.45)
    assert chi_equation_checks(ChiParams(1.1, 0.3, 0.45), ctx).residual < 1e-9
    ctx5 = QContext(q=0.5)
    assert chi_equation_checks(ChiParams(0.8j, 0.2, 0.5), ctx5).residual < 1e-9


def test_chi_equations_independent_series_oracle():
    # both sides of the u-shift relation summed to 100 explicit terms
    q, u, z = 0.5, 0.8j, 0.2
    q2 = q * q

    def chi_direct(uu, zz):
        total, term = 0.0, 1.0
        for n in range(100):
            total += term
            term *= -q2 ** (n + 1) * (1 - zz * q2 ** n) * uu ** 2 / (1 - q2 ** (n + 1))
        return total

    lhs = chi_direct(u / q, z)
    rhs = (1 - u * u) * chi_direct(u, z) + z * u * u * chi_direct(q * u, z)
    assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1.0)


def test_chi_wronskian_degenerate_z():
    r = chi_equation_checks(ChiParams(1.3, 1.0, 0.4), CTX)
    # at z = 1 both sides of the Wronskian vanish identically
    assert r.params["res_wronskian"] < 1e-12


def test_chi_wronskian_grid():
    for u in (0.7, 0.9, 1.2, 1.5, 0.6 + 0.3j):
        for z in (0.1, 0.25, 0.4, 0.15 + 0.1j, 0.55):
            r = chi_equation_checks(ChiParams(u, z, 0.4), CTX)
            assert r.params["res_wronskian"] < 1e-9
