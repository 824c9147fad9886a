"""Tests for the spin-lattice sector and the rational Kashiwara-Miwa model."""

import cmath

import numpy as np
import pytest

from qkm.context import QContext
from qkm.errors import DomainError, PoleHit, SingularMeasure
from qkm.fock import FockRepParams, brace, vform_matrices
from qkm.qseries import bracket
from qkm.vgamma import (GammaContext, brace_gamma_check, gamma_norm_const,
                        km_inversion_check, km_kappa, km_log_z,
                        km_partition_checks, km_Phi, km_S, km_summation_check,
                        km_V, km_weight_set, star_triangle_km,
                        vgamma_decomposition, weight_Veps,
                        weight_Veps_from_overlaps, weight_Veps_table)

CTX = QContext(q=0.4)
Q = 0.4
GENERIC = GammaContext(gamma=0.7 * cmath.exp(0.4j), m_window=40)


def test_selected_construction():
    gc = GammaContext.make_selected(0.5, CTX)
    assert gc.selected
    assert abs(gc.gamma - 1j * CTX.q_pow_half(1)) < 1e-16
    assert not GENERIC.selected


def test_selected_needs_half_integer():
    with pytest.raises(DomainError):
        GammaContext(gamma=1j, nu=0.3)


def test_completeness_both_directions():
    dec = vgamma_decomposition(GENERIC, 1.1, 40, CTX)
    br = np.array([bracket(GENERIC.gamma * Q ** int(m)) for m in dec.m_values])
    for e in range(2):
        for ep in range(2):
            g = np.einsum("am,m,mb->ab", dec.ket[e], br, dec.bra[ep])
            tgt = np.eye(41) if e == ep else np.zeros((41, 41))
            assert np.max(np.abs((g - tgt)[:30, :30])) < 1e-8
    g = sum(np.einsum("ma,an->mn", dec.bra[e], dec.ket[e]) for e in range(2))
    tgt = np.diag(1.0 / br)
    n = len(dec.m_values)
    ctr = slice(n // 2 - 25, n // 2 + 26)
    rel = np.max(np.abs((g - tgt)[ctr, ctr])) / np.max(np.abs(tgt[ctr, ctr]))
    assert rel < 1e-8


def test_singular_measure_detected():
    # gamma q^m = 1 inside the window makes the site measure vanish
    gc = GammaContext(gamma=Q ** -2, m_window=10)
    with pytest.raises(SingularMeasure):
        vgamma_decomposition(gc, 1.0, 5, CTX)


def test_parity_action_on_sectors():
    dec = vgamma_decomposition(GENERIC, 1.0, 8, CTX)
    mv = dec.m_values
    for e, eps in ((0, 1), (1, -1)):
        for j in range(5, len(mv) - 5):
            m = int(mv[j])
            for a in range(6):
                lhs = dec.bra[e][j - 1, a] - dec.bra[e][j + 1, a]
                rhs = eps * Q ** a * CTX.q_pow_half(1) * bracket(GENERIC.gamma * Q ** m) \
                    * dec.bra[e][j, a]
                assert abs(lhs - rhs) < 1e-12


def test_half_integer_gamma_reduces_to_fock():
    # at gamma = q^{1/2} the even sector reproduces the one-tower basis and
    # the odd sector annihilates symmetrised states
    gc = GammaContext(gamma=CTX.q_pow_half(1), m_window=30)
    dec = vgamma_decomposition(gc, 1.0, 10, CTX)
    vm = vform_matrices(FockRepParams(), 10, 30, CTX)
    j0 = int(np.where(dec.m_values == 0)[0][0])
    for m in range(8):
        jm, jneg = j0 + m, j0 - 1 - m
        for a in range(8):
            sym = 0.5 * (dec.ket[0][a, jm] + dec.ket[0][a, jneg])
            assert abs(sym - 0.5 * vm.ket(a, m)) < 1e-12
            anti = 0.5 * (dec.ket[1][a, jm] + dec.ket[1][a, jneg])
            assert abs(anti) < 1e-13
            assert abs(dec.bra[0][jm, a] - (-1) ** m * vm.bra(m, a)) < 1e-12


def test_gamma_norm_doubles_fock_norm():
    gc = GammaContext(gamma=CTX.q_pow_half(1))
    from qkm.fock import fock_norm_const
    assert abs(gamma_norm_const(gc, CTX) - 2 * fock_norm_const(CTX)) < 1e-12


def test_sector_weight_closed_vs_sum():
    for (x, eps, m, mp) in ((0.7, 1, 0, 0), (0.8, -1, 2, -3), (0.6 + 0.1j, 1, -1, 4)):
        a = weight_Veps(x, eps, m, mp, GENERIC, CTX)
        b = weight_Veps_from_overlaps(x, eps, m, mp, GENERIC, CTX)
        assert abs(a - b) < 1e-9 * max(abs(a), 1e-300)


def test_sector_orthogonality():
    # opposite sectors convolve to zero under the lattice measure
    def cross(b):
        return (weight_Veps(0.7, 1, 0, b, GENERIC, CTX)
                * bracket(GENERIC.gamma * Q ** b)
                * weight_Veps(0.8, -1, b, 1, GENERIC, CTX))

    from qkm.vgamma import windowed_bilateral_sum
    total = windowed_bilateral_sum(cross, 75, CTX)
    scale = abs(weight_Veps(0.7 * 0.8, 1, 0, 1, GENERIC, CTX))
    assert abs(total) / scale < 1e-8


def test_projector_algebra():
    m_w = 40
    mv = np.arange(-m_w, m_w + 1)
    tab_p = weight_Veps_table(1.0, 1, mv, mv, GENERIC, CTX)
    tab_m = weight_Veps_table(1.0, -1, mv, mv, GENERIC, CTX)
    br = np.array([bracket(GENERIC.gamma * Q ** int(m)) for m in mv])
    pp = br[:, None] * tab_p
    pm = br[:, None] * tab_m
    n = len(mv)
    ctr = slice(n // 2 - 20, n // 2 + 21)
    eye = np.eye(n)
    assert np.max(np.abs((pp + pm - eye)[ctr, ctr])) < 1e-8
    assert np.max(np.abs((pp @ pm)[ctr, ctr])) < 1e-8
    assert np.max(np.abs((pp @ pp - pp)[ctr, ctr])) < 1e-8


def test_opposite_parity_sector_sum_vanishes():
    for m in (-3, -2, 0, 1, 2):
        for mp in (-2, 1, 3, 4):
            if (m + mp) % 2:
                total = (weight_Veps(0.7, 1, m, mp, GENERIC, CTX)
                         + weight_Veps(0.7, -1, m, mp, GENERIC, CTX))
                assert abs(total) < 1e-12


def test_brace_gamma_independence():
    gammas = [0.6, 0.9 * cmath.exp(0.2j), 0.7 * cmath.exp(0.4j), CTX.q_pow_half(1)]
    assert brace_gamma_check(2, 1, 1, gammas, CTX).residual < 1e-9
    assert brace_gamma_check(0, 0, 0, gammas, CTX).residual < 1e-12
    r = brace_gamma_check(3, 2, 4, gammas[:2], CTX)
    assert r.residual < 1e-8
    # the lattice sum at each gamma is cross-checked against the closed form
    assert abs(brace(3, 2, 4, CTX)) > 0


def test_km_weight_symmetry_box():
    for gc in (GENERIC, GammaContext.make_selected(0.0, CTX)):
        for a in range(-5, 6):
            for b in range(-5, 6):
                v = km_V(0.7, a, b, gc, CTX)
                assert abs(v - km_V(0.7, b, a, gc, CTX)) < 1e-12
                assert abs(v * km_V(Q * Q / 0.7, a, b, gc, CTX) - 1.0) < 1e-12
                assert abs(km_V(Q, a, b, gc, CTX) - 1.0) < 1e-13
                expect = 1 / km_S(a, gc, CTX) if a == b else 0.0
                assert abs(km_V(1.0, a, b, gc, CTX) - expect) < 1e-12


def test_km_weight_set_bundle():
    ws = km_weight_set(GammaContext.make_selected(0.0, CTX), CTX)
    assert abs(ws.v(Q, 2, -1) - 1.0) < 1e-13
    assert abs(ws.vbar(Q, 1, 1) - ws.v(1.0, 1, 1)) < 1e-12
    assert abs(ws.s(0) - 1.0) < 1e-15
    assert abs(ws.phi(1.0) - 1.0) < 1e-12


def test_km_pole_reported():
    # denominator factor (gamma^2 q^2 / x; q^2)_{m+m'} vanishes here
    gc = GammaContext(gamma=1.0 + 0.0j)
    with pytest.raises(PoleHit):
        km_V(Q * Q, 1, 1, gc, CTX)


def test_km_phi_product_equals_definition():
    for gc in (GENERIC, GammaContext.make_selected(0.0, CTX)):
        a = km_Phi(0.7, gc, CTX)
        b = km_Phi(0.7, gc, CTX, route="definition")
        assert abs(a - b) < 1e-12 * abs(a)


def test_km_summation_formula():
    gc = GammaContext.make_selected(0.0, CTX, m_window=40)
    assert km_summation_check(0.7, 0.8, 0, 0, gc, CTX).residual < 1e-8
    assert km_summation_check(0.7, 0.8, 2, -1, gc, CTX).residual < 1e-8
    assert km_inversion_check(0.7, 1, 1, gc, CTX).residual < 1e-8
    assert km_inversion_check(0.7, 1, 3, gc, CTX).residual < 1e-8


def test_star_triangle_selected_gamma():
    for nu in (0.0, 0.5):
        gc = GammaContext.make_selected(nu, CTX, m_window=40)
        assert star_triangle_km(0.7, 0.6, 0, 0, 0, gc, CTX).residual < 1e-7
        assert star_triangle_km(0.7, 0.6, 1, -1, 2, gc, CTX).residual < 1e-7


def test_star_triangle_generic_gamma_fails():
    gc = GammaContext(gamma=0.8 * cmath.exp(0.3j), m_window=40)
    assert star_triangle_km(0.7, 0.6, 1, -1, 2, gc, CTX).residual > 1e-3
    assert star_triangle_km(0.7, 0.6, 2, 1, -1, gc, CTX).residual > 1e-3


def test_kappa_site_value():
    gci = GammaContext.make_selected(0.0, CTX)
    gch = GammaContext.make_selected(0.5, CTX)
    for gc in (gci, gch):
        assert abs(km_kappa(Q, gc, CTX) * km_kappa(1.0, gc, CTX) - 1.0) < 1e-10
    # both signs of the half-integer label share one kappa
    gcm = GammaContext.make_selected(-0.5, CTX)
    assert abs(km_kappa(0.7, gch, CTX) - km_kappa(0.7, gcm, CTX)) < 1e-14


def test_partition_function_equations():
    for nu in (0.0, 0.5):
        gc = GammaContext.make_selected(nu, CTX)
        for x in (0.6, 0.75):
            r = km_partition_checks(x, gc, CTX)
            assert r.residual < 1e-9
            assert r.params["res_site"] < 1e-10


def test_partition_series_brute_force_oracle():
    # 200 explicit terms of the nu = 0 series against the library value
    x, q = 0.7, Q
    total = 0.0
    for n in range(1, 201):
        total += (-(q ** (2 * n)) * (x ** (2 * n) - q ** (4 * n) / x ** (2 * n))
                  / (n * (1 - q ** (4 * n)) * (1 + q ** (2 * n))))
    gc = GammaContext.make_selected(0.0, CTX)
    assert abs(km_log_z(x, gc, CTX) - total) < 1e-12


def test_partition_sign_label_identical():
    gch = GammaContext.make_selected(0.5, CTX)
    gcm = GammaContext.make_selected(-0.5, CTX)
    assert km_log_z(0.7, gch, CTX) == km_log_z(0.7, gcm, CTX)


def test_kappa_half_step_recursion():
    # ratio of the two selected closed forms matches the gamma-shift product
    from qkm.qseries import qpoch_inf_multi
    gci = GammaContext.make_selected(0.0, CTX)
    gch = GammaContext.make_selected(0.5, CTX)
    q2 = Q * Q
    for x in (0.6, 0.85):
        lhs = km_kappa(x, gch, CTX) / km_kappa(x, gci, CTX)
        g2 = gci.gamma ** 2
        rhs = (qpoch_inf_multi((q2 * g2 * x, q2 / (g2 * x)), q2, CTX)
               / qpoch_inf_multi((Q * x / g2, Q ** 3 * g2 / x), q2, CTX))
        assert abs(lhs - rhs) < 1e-10 * abs(rhs)


def test_reality_on_physical_points():
    # at gamma = i the bold weight is real for real x even though the
    # intermediates are complex
    gc = GammaContext.make_selected(0.0, CTX)
    for a in range(-3, 4):
        for b in range(-3, 4):
            v = km_V(0.7, a, b, gc, CTX)
            assert abs(v.imag) < 1e-12 * max(abs(v), 1.0)
