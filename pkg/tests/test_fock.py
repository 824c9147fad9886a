"""Tests for the Fock-space sector: spectra, braces, weights, lattice relations."""

import cmath

import numpy as np
import pytest

from qkm.context import QContext
from qkm.errors import TailTooFat
from qkm.fock import (BraceMethod, CGSide, FockRepParams, Regularisation,
                      TruncatedHamiltonian, box_intertwining_check,
                      box_rmatrix_fock, brace, build_truncated_H,
                      cg_coefficient, cg_norm_const, fock_norm_const,
                      kappa_fock, partition_series_fock, rll_check, s_measure,
                      spectral_experiment, star_triangle_fock,
                      transitivity_check_fock, vbasis_operator_matrices,
                      vform_matrices, weight_table, weight_V_fock,
                      weight_V_fock_from_overlaps, _sqrt_qpoch2)
from qkm.qseries import bracket, qpoch_inf_multi

CTX = QContext(q=0.4)
Q = 0.4


def test_truncated_h_transcription():
    # N = 1, boundary rule III: plain 2x2 with no feedback
    h = build_truncated_H(TruncatedHamiltonian(1, Regularisation.III, 1.0), CTX)
    assert h[0, 0] == 0 and h[1, 1] == 0
    assert abs(h[0, 1] - Q ** -0.5 * np.sqrt(1 - Q ** 2)) < 1e-15
    assert abs(h[1, 0] + Q ** -1.5 * np.sqrt(1 - Q ** 2)) < 1e-15


def test_gauge_ratio_drops_out():
    a = build_truncated_H(TruncatedHamiltonian(6, Regularisation.I, 1.0), CTX)
    b = build_truncated_H(TruncatedHamiltonian(6, Regularisation.I, 1.7 - 0.2j), CTX)
    ea = np.linalg.eigvals(a[::-1, ::-1])
    eb = np.linalg.eigvals(b[::-1, ::-1])
    for e in ea:  # spectra agree as multisets
        assert np.min(np.abs(eb - e)) < 1e-9 * max(abs(e), 1.0)


def test_spectral_branches_reg_i():
    rep = spectral_experiment(Q, [8, 16, 24], Regularisation.I)
    # errors shrink with N and hit the closed-form limits
    assert np.max(rep.branch_errors[24]) < 1e-5
    assert np.max(rep.branch_errors[24]) < np.max(rep.branch_errors[8])
    assert abs(rep.eigenvalues[24][0] - (Q ** 0.5 + Q ** -0.5)) < 1e-6


def test_spectral_reg_ii_negates_reg_i():
    rep1 = spectral_experiment(Q, [12], Regularisation.I)
    rep2 = spectral_experiment(Q, [12], Regularisation.II)
    for e in rep1.eigenvalues[12]:  # spectra are negatives as multisets
        assert np.min(np.abs(rep2.eigenvalues[12] + e)) < 1e-9 * max(abs(e), 1.0)
    # oracle: conjugating by diag((-1)^a) maps rule I to minus rule II
    h1 = build_truncated_H(TruncatedHamiltonian(12, Regularisation.I, 1.0), CTX)
    h2 = build_truncated_H(TruncatedHamiltonian(12, Regularisation.II, 1.0), CTX)
    d = np.diag([(-1.0) ** a for a in range(13)])
    assert np.max(np.abs(d @ h1 @ d + h2)) < 1e-12


def test_spectral_reg_iii_splits():
    rep = spectral_experiment(Q, [29, 30, 31, 32], Regularisation.III)
    odd = [abs(Q ** (2 * m + 1) - Q ** (-2 * m - 1)) for m in range(2)]
    even = [abs(Q ** (2 * m) - Q ** (-2 * m)) for m in range(2)]
    assert abs(rep.odd_branches[0] - odd[0]) < 1e-6
    assert abs(rep.odd_branches[2] - odd[1]) < 1e-4
    assert abs(rep.even_branches[0] - even[0]) < 1e-6
    assert rep.subsequence_gap > 0.1


def test_vform_zero_row():
    vm = vform_matrices(FockRepParams(), 6, 10, CTX)
    for j, m in enumerate(vm.m_values):
        expect = CTX.q_pow_half(int(m) * (int(m) + 1))
        assert abs(vm.chi[0, j] - expect) < 1e-14


def test_completeness_m_sum():
    for q in (0.3, 0.4, 0.5):
        ctx = QContext(q=q)
        vm = vform_matrices(FockRepParams(omega=1.1, lam=0.9, mu=1.2), 12, 50, ctx)
        meas = np.array([s_measure(int(m), ctx) for m in vm.m_values])
        ident = np.einsum("am,m,mb->ab", vm.chi, meas, vm.chi_bar) / vm.n_f
        assert np.max(np.abs(ident - np.eye(13))) < 1e-8


def test_antisymmetric_window_sum():
    m_w = 30
    vm = vform_matrices(FockRepParams(), 8, m_w - 1, CTX, m_min=-m_w)
    br = np.array([bracket(CTX.q_pow_half(2 * int(m) + 1)) for m in vm.m_values])
    sums = np.einsum("am,m,mb->ab", vm.chi, br, vm.chi_bar)
    assert np.max(np.abs(sums)) < 1e-10 * np.max(np.abs(vm.chi)) ** 2 * np.max(np.abs(br))


def test_brace_base_values():
    assert abs(brace(3, 2, 0, CTX) - Q ** 6) < 1e-15
    # by-hand value from one recursion step: {1,1,0} = q, {0,0,0} = 1
    hand = Q ** 3 - (1 - Q * Q) ** 2 / Q
    for method in BraceMethod:
        assert abs(brace(1, 1, 1, CTX, method) - hand) < 1e-10


def test_brace_method_agreement_small_box():
    for q in (0.3, 0.5):
        ctx = QContext(q=q)
        for a in range(4):
            for b in range(4):
                for c in range(4):
                    vals = [brace(a, b, c, ctx, m) for m in BraceMethod]
                    scale = max(abs(vals[1]), 1e-300)
                    assert max(abs(vals[0] - vals[1]),
                               abs(vals[2] - vals[1])) / scale < 1e-11


def test_brace_permutation_symmetry():
    v = brace(3, 1, 2, CTX)
    assert brace(2, 3, 1, CTX) == v  # closed form is manifestly symmetric
    assert abs(brace(1, 2, 3, CTX, BraceMethod.RECURSION) - v) < 1e-12
    assert abs(brace(2, 1, 3, CTX, BraceMethod.SPIN_SUM) - v) < 1e-12


P1 = FockRepParams(omega=1.2, lam=0.9)
P2 = FockRepParams(omega=0.8, lam=1.1)
OMEGA = 1.05


def test_cg_vacuum_closed_form():
    for a in range(5):
        for b in range(5):
            v = cg_coefficient(CGSide.KET, a, b, 0, P1, P2, OMEGA, CTX)
            f1 = OMEGA / (P1.lam * P2.omega)
            f2 = P1.omega / (P2.lam * OMEGA)
            expect = (f1 ** a * f2 ** b * Q ** (a * b)
                      / (_sqrt_qpoch2(CTX, a) * _sqrt_qpoch2(CTX, b)))
            assert abs(v - expect) < 1e-13


def test_cg_vacuum_annihilation():
    dim = 12
    c0 = np.array([[cg_coefficient(CGSide.KET, a, b, 0, P1, P2, OMEGA, CTX)
                    for b in range(dim + 1)] for a in range(dim + 1)])
    worst = 0.0
    for a in range(dim - 1):
        for b in range(dim - 1):
            ann = (P1.lam * np.sqrt(1 - Q ** (2 * a + 2)) * P2.lam
                   * np.sqrt(1 - Q ** (2 * b + 2)) * c0[a + 1, b + 1]
                   - P1.omega / P2.omega * Q ** (a + b + 1) * c0[a, b])
            worst = max(worst, abs(ann))
    assert worst < 1e-12


def test_cg_raising_identity():
    dim = 10
    prev = np.array([[cg_coefficient(CGSide.KET, a, b, 0, P1, P2, OMEGA, CTX)
                      for b in range(dim + 1)] for a in range(dim + 1)])
    for c in range(6):
        nxt = np.array([[cg_coefficient(CGSide.KET, a, b, c + 1, P1, P2, OMEGA, CTX)
                         for b in range(dim + 1)] for a in range(dim + 1)])
        for a in range(1, dim - 1):
            for b in range(1, dim - 1):
                lhs = (np.sqrt((1 - Q ** (2 * a)) * (1 - Q ** (2 * b)))
                       / (P1.lam * P2.lam) * prev[a - 1, b - 1]
                       - P2.omega / P1.omega * Q ** (a + b + 1) * prev[a, b])
                rhs = np.sqrt(1 - Q ** (2 * c + 2)) * nxt[a, b]
                assert abs(lhs - rhs) < 1e-12
        prev = nxt


def test_brace_spin_sum_route_matches_cg_kernel():
    # the weighted eigenbasis triple sum equals (-q)^c {a,b,c} / norms
    vm = vform_matrices(FockRepParams(), 10, 60, CTX)
    meas = np.array([s_measure(int(m), CTX) for m in vm.m_values])
    for (a, b, c) in ((0, 0, 0), (1, 2, 1), (3, 1, 2), (4, 4, 3)):
        lhs = np.sum(vm.chi[a] * vm.chi[b] * meas * vm.chi_bar[:, c]) / cg_norm_const(CTX)
        rhs = ((-Q) ** c * brace(a, b, c, CTX)
               / (_sqrt_qpoch2(CTX, a) * _sqrt_qpoch2(CTX, b) * _sqrt_qpoch2(CTX, c)))
        assert abs(lhs - rhs) < 1e-10 * abs(rhs)


def test_weight_closed_vs_overlap_sum():
    for (x, m, mp) in ((0.5, 0, 0), (0.8, 2, 3), (0.7 + 0.2j, 1, 4)):
        a = weight_V_fock(x, m, mp, CTX)
        b = weight_V_fock_from_overlaps(x, m, mp, CTX)
        assert abs(a - b) < 1e-8 * abs(a)


def test_weight_delta_normalisation():
    for m in range(4):
        for mp in range(4):
            v = weight_V_fock(1.0, m, mp, CTX)
            expect = (-1) ** m / bracket(CTX.q_pow_half(2 * m + 1)) if m == mp else 0.0
            assert abs(v - expect) < 1e-10


def test_weight_symmetries():
    x = 0.7
    v = weight_V_fock(x, 1, 3, CTX)
    assert abs(v - weight_V_fock(x, 3, 1, CTX)) < 1e-14
    assert abs(v - weight_V_fock(x, -2, 3, CTX)) < 1e-14


def test_weight_product_relation():
    z = 0.6
    rhs = (fock_norm_const(CTX) ** -2
           * qpoch_inf_multi((z, Q * Q / z), Q, CTX)
           / qpoch_inf_multi((-z / Q, -Q / z), Q, CTX))
    for m, mp in ((0, 0), (1, 2), (3, 1)):
        lhs = weight_V_fock(z, m, mp, CTX) * weight_V_fock(Q * Q / z, m, mp, CTX)
        assert abs(lhs - rhs) < 1e-9 * abs(rhs)


def test_weight_table_matches_scalar():
    tab = weight_table(0.7, range(4), range(4), CTX)
    for m in range(4):
        for mp in range(4):
            assert abs(tab[m, mp] - weight_V_fock(0.7, m, mp, CTX)) < 1e-13


def test_transitivity():
    assert transitivity_check_fock(0.8, 0.7, 0, 0, 90, CTX).residual < 1e-10
    assert transitivity_check_fock(0.8, 0.7, 2, 1, 90, CTX).residual < 1e-10


def test_transitivity_delta_collapse():
    # y = 1 turns the sum into the delta measure
    assert transitivity_check_fock(0.8, 1.0, 1, 1, 40, CTX).residual < 1e-10


def test_transitivity_inverse_pair():
    # x y = 1 reproduces the delta-normalised weight
    x, m, mpp = 0.8, 1, 1
    row_x = weight_table(x, [m], range(90), CTX)[0]
    row_y = weight_table(1 / x, range(90), [mpp], CTX)[:, 0]
    meas = np.array([s_measure(k, CTX) for k in range(90)])
    lhs = np.sum(row_x * meas * row_y)
    expect = (-1) ** m / bracket(CTX.q_pow_half(2 * m + 1))
    assert abs(lhs - expect) < 1e-9


def test_tail_too_fat_raised():
    with pytest.raises(TailTooFat):
        transitivity_check_fock(0.8, 0.7, 0, 0, 12, CTX)


def test_star_triangle_physical_regime():
    ctx = QContext(q=-0.3)
    # x y = -q puts the first acceptance point on the delta boundary
    r = star_triangle_fock(0.5, 0.6, 0, 0, 0, 45, ctx)
    assert r.params["boundary"] is True and r.residual < 1e-8
    assert star_triangle_fock(0.5, 0.6, 2, 1, 3, 45, ctx).residual < 1e-8
    r = star_triangle_fock(0.45, 0.7, 2, 1, 3, 45, ctx)
    assert r.params["boundary"] is False and r.residual < 1e-8


def test_star_triangle_generic_complex_point():
    ctx = QContext(q=0.35 * cmath.exp(0.2j))
    assert star_triangle_fock(0.6, 0.55 + 0.1j, 1, 0, 2, 60, ctx).residual < 1e-8


def test_star_triangle_negative_control():
    ctx = QContext(q=-0.3)
    r = star_triangle_fock(0.45, 0.7, 2, 1, 3, 45, ctx, perturb_r=0.01)
    assert r.residual > 1e-3


def test_partition_series():
    assert abs(partition_series_fock(Q, CTX)) < 1e-14
    x = 0.7
    assert abs(partition_series_fock(x, CTX)
               + partition_series_fock(Q * Q / x, CTX)) < 1e-12


def test_partition_product_consistency():
    x = 0.7
    kk = (kappa_fock(x, CTX) * kappa_fock(Q * Q / x, CTX) / fock_norm_const(CTX) ** 2)
    lhs = weight_V_fock(x, 2, 1, CTX) * weight_V_fock(Q * Q / x, 2, 1, CTX)
    assert abs(kk - lhs) < 1e-9 * abs(kk)


def test_rll():
    assert rll_check(1.3, 0.7, 8, CTX).residual < 1e-12
    assert rll_check(1.3, 0.7, 8, CTX, sigma_x=True).residual < 1e-12


def test_rll_negative_control():
    assert rll_check(1.3, 0.7, 8, CTX, scramble=0.5).residual > 0.01


def test_vbasis_algebra_relations():
    ops = vbasis_operator_matrices(1.3, 0.8, 20, CTX)
    k0, ep, em = ops["K0"], ops["Ep"], ops["Em"]
    eye = np.eye(21)
    blk = slice(0, 18)
    assert np.max(np.abs((ep @ em - (eye - k0 @ k0 / Q))[blk, blk])) < 1e-12
    assert np.max(np.abs((em @ ep - (eye - Q * k0 @ k0))[blk, blk])) < 1e-12
    assert np.max(np.abs((k0 @ ep - Q * ep @ k0)[blk, blk])) < 1e-12
    assert np.max(np.abs((k0 @ em - em @ k0 / Q)[blk, blk])) < 1e-12


def test_box_coincident_rapidities_delta():
    # x = y, x' = y': the two chain factors become delta-normalised
    v = box_rmatrix_fock(0.9, 1.2, 0.9, 1.2, (1, 2, 1, 2), CTX)
    d1 = (-1) ** 1 / bracket(CTX.q_pow_half(3))
    d2 = (-1) ** 2 / bracket(CTX.q_pow_half(5))
    expect = (weight_V_fock(0.9 / 1.2, 1, 2, CTX) * d1 * d2
              * weight_V_fock(Q * Q * 1.2 / 0.9, 1, 2, CTX))
    assert abs(v - expect) < 1e-12 * abs(expect)
    assert abs(box_rmatrix_fock(0.9, 1.2, 0.9, 1.2, (1, 2, 1, 0), CTX)) < 1e-12


def test_box_spin_reflection_invariance():
    spins = (1, 2, 0, 1)
    v = box_rmatrix_fock(1.1, 0.8, 0.9, 1.3, spins, CTX)
    for k in range(4):
        refl = list(spins)
        refl[k] = -1 - refl[k]
        w = box_rmatrix_fock(1.1, 0.8, 0.9, 1.3, tuple(refl), CTX)
        assert abs(v - w) < 1e-12 * abs(v)


def test_box_intertwining_small_cutoff():
    ctx = QContext(q=0.35)
    assert box_intertwining_check(1.1, 0.8, 0.9, 1.3, 12, ctx).residual < 1e-10
