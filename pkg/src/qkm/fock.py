"""Fock-space representation, its eigenbasis, and the lattice model built on it.

Contents: the truncated tridiagonal operator and its spectral experiment,
the basis-change matrices to the eigenbasis (the "V-form"), symmetric
Clebsch-Gordan coefficients {a,b,c} (three evaluation routes), the edge
Boltzmann weight V_x(m, m'), its transitivity and star-triangle relations,
the per-edge partition series, the six-vertex RLL check on the truncated
space, and the factorised box R-matrix with its intertwining check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .context import QContext
from .errors import (DomainError, EigensolverFailure, OverflowGuard,
                     TailTooFat, TruncationExhausted)
from .orthopoly import scaled_poly_iter, scaled_poly_values
from .qseries import (bracket, big_theta4_const, log_qpoch_inf_array,
                      qpoch_finite, qpoch_inf, qpoch_inf_multi, tail_sum)
from .report import make_report, relative_residual

__all__ = [
    "FockRepParams", "Regularisation", "TruncatedHamiltonian",
    "build_truncated_H", "SpectralReport", "spectral_experiment",
    "VFormMatrices", "vform_matrices", "s_measure", "fock_norm_const",
    "cg_norm_const", "BraceMethod", "brace", "CGSide", "cg_coefficient",
    "weight_V_fock", "weight_V_fock_from_overlaps", "weight_table",
    "kappa_fock", "transitivity_check_fock", "star_triangle_fock",
    "partition_series_fock", "rll_check", "vbasis_operator_matrices",
    "box_rmatrix_fock", "box_intertwining_check",
]


@dataclass(frozen=True)
class FockRepParams:
    """Representation labels: central parameter omega, ladder gauge lam,
    and the eigenbasis parameter mu."""
    omega: complex = 1.0
    lam: complex = 1.0
    mu: complex = 1.0

    def __post_init__(self):
        for name in ("omega", "lam", "mu"):
            if complex(getattr(self, name)) == 0:
                raise DomainError(f"{name} must be nonzero")


class Regularisation(Enum):
    I = "I"
    II = "II"
    III = "III"


@dataclass(frozen=True)
class TruncatedHamiltonian:
    """Finite section of the tridiagonal operator, with its boundary rule."""
    n: int
    regularisation: Regularisation
    lambda_over_mu: complex = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("need dimension N + 1 >= 2")


def build_truncated_H(params: TruncatedHamiltonian, ctx: QContext) -> np.ndarray:
    """(N+1) x (N+1) matrix of the tridiagonal eigenproblem.

    Interior rows are the exact difference equation; the last row closes
    the out-of-range term psi_{N+1} by the selected boundary rule:
    I: psi_{N+1} = (mu/lam) psi_N, II: the same with a minus sign,
    III: psi_{N+1} = 0.
    """
    n = params.n
    t = complex(params.lambda_over_mu)
    q = ctx.q
    h = np.zeros((n + 1, n + 1), dtype=complex)
    for a in range(n + 1):
        pref = ctx.q_pow_half(-2 * a - 1)
        if a + 1 <= n:
            h[a, a + 1] = pref * t * np.sqrt(1 - q ** (2 * a + 2))
        if a - 1 >= 0:
            h[a, a - 1] = -pref / t * np.sqrt(1 - q ** (2 * a))
    edge = ctx.q_pow_half(-2 * n - 1) * np.sqrt(1 - q ** (2 * n + 2))
    if params.regularisation is Regularisation.I:
        h[n, n] += edge
    elif params.regularisation is Regularisation.II:
        h[n, n] -= edge
    return h


@dataclass
class SpectralReport:
    """Spectra of the truncated operator over a list of cutoffs.

    For boundary rules I/II, ``branch_errors[N]`` holds the distance of the
    four lowest computed branches from their closed-form limits.  For rule
    III the odd-N and even-N subsequences are reported separately together
    with the gap between their lowest branches.
    """
    q: float
    regularisation: Regularisation
    n_values: list
    eigenvalues: dict
    branch_limits: np.ndarray | None = None
    branch_errors: dict | None = None
    odd_branches: np.ndarray | None = None
    even_branches: np.ndarray | None = None
    subsequence_gap: float | None = None


def spectral_experiment(q: float, n_values, regularisation: Regularisation,
                        branches: int = 4) -> SpectralReport:
    """Diagonalise the truncated operator for each cutoff in ``n_values``.

    The gauge ratio lam/mu is removed by an exact diagonal similarity
    before solving, so the spectra are computed at ratio 1 with a dense
    general eigensolver.
    """
    if not 0 < q < 1:
        raise DomainError("the spectral experiment runs at real q in (0, 1)")
    ctx = QContext(q=q)
    n_values = sorted(int(n) for n in n_values)
    eigs = {}
    for n in n_values:
        h = build_truncated_H(TruncatedHamiltonian(n, regularisation), ctx)
        # Reverse the index grading (largest entries to the top-left) so the
        # QR iteration deflates the small eigenvalues at their own scale;
        # without this the norm ~ q^{-N} wipes out the low branches.
        h = h[::-1, ::-1]
        try:
            vals = np.linalg.eigvals(h)
        except np.linalg.LinAlgError as exc:
            raise EigensolverFailure(f"dense eigensolver failed at N = {n}") from exc
        eigs[n] = vals[np.argsort(np.abs(vals))]
    report = SpectralReport(q=q, regularisation=regularisation,
                            n_values=n_values, eigenvalues=eigs)
    ms = np.arange(branches)
    if regularisation in (Regularisation.I, Regularisation.II):
        sign = 1.0 if regularisation is Regularisation.I else -1.0
        limits = sign * (q ** (ms + 0.5) + q ** (-(ms + 0.5)))
        report.branch_limits = limits
        report.branch_errors = {
            n: np.abs(eigs[n][:branches] - limits) for n in n_values
        }
    else:
        odd = [n for n in n_values if n % 2 == 1]
        even = [n for n in n_values if n % 2 == 0]
        if odd:
            report.odd_branches = np.abs(eigs[odd[-1]][:branches])
        if even:
            report.even_branches = np.abs(eigs[even[-1]][:branches])
        if odd and even:
            report.subsequence_gap = float(
                np.max(np.abs(report.odd_branches - report.even_branches)))
    return report


@lru_cache(maxsize=128)
def fock_norm_const(ctx: QContext) -> complex:
    """Normalisation constant -q^{-1/2} (q, q, q^2; q^2)_inf of the V-form."""
    return -ctx.q_pow_half(-1) * big_theta4_const(ctx)


@lru_cache(maxsize=128)
def cg_norm_const(ctx: QContext) -> complex:
    """Normalisation constant -q^{-1/2} (q; q)_inf of the brace sum."""
    return -ctx.q_pow_half(-1) * qpoch_inf(ctx.q, ctx.q, ctx)


def s_measure(m: int, ctx: QContext) -> complex:
    """Site measure S_m = (-)^m [q^{m+1/2}]."""
    return (-1) ** m * bracket(ctx.q_pow_half(2 * m + 1))


@lru_cache(maxsize=512)
def _sqrt_qpoch2(ctx: QContext, n: int) -> complex:
    """Principal square root of (q^2; q^2)_n."""
    return complex(np.sqrt(qpoch_finite(ctx.q * ctx.q, ctx.q * ctx.q, n) + 0j))


@dataclass
class VFormMatrices:
    """Basis-change matrices between occupation and eigenbasis labels.

    ``chi[a, j]`` is q^{a^2/2} P_a(q^{m+1/2}) q^{m(m+1)/2} / sqrt((q^2;q^2)_a)
    at m = m_values[j]; ``chi_bar[j, a]`` carries the extra (-)^a q^a.  The
    dressed matrix elements (with the (mu/lam)^{+-a} prefactors and the
    overall 1/N_F on the ket side) are exposed as ``ket``/``bra``.
    """
    chi: np.ndarray
    chi_bar: np.ndarray
    n_f: complex
    params: FockRepParams
    m_values: np.ndarray

    def ket(self, a: int, j: int) -> complex:
        r = self.params.mu / self.params.lam
        return r ** a * self.chi[a, j] / self.n_f

    def bra(self, j: int, a: int) -> complex:
        r = self.params.mu / self.params.lam
        return r ** (-a) * self.chi_bar[j, a]


def vform_matrices(params: FockRepParams, a_max: int, m_max: int,
                   ctx: QContext, m_min: int = 0) -> VFormMatrices:
    """Eigenbasis overlap matrices on the window a <= a_max, m_min <= m <= m_max."""
    if a_max < 1 or m_max < 1:
        raise DomainError("need a_max, m_max >= 1")
    q = ctx.q
    m_values = np.arange(m_min, m_max + 1)
    n_m = len(m_values)
    chi = np.empty((a_max + 1, n_m), dtype=complex)
    for j, m in enumerate(m_values):
        xi = ctx.q_pow_half(2 * m + 1)
        chi[:, j] = scaled_poly_values(a_max, xi, ctx) * ctx.q_pow_half(m * (m + 1))
    norms = np.array([_sqrt_qpoch2(ctx, a) for a in range(a_max + 1)])
    chi /= norms[:, None]
    signs = np.array([(-1) ** a * q ** a for a in range(a_max + 1)])
    chi_bar = (chi * signs[:, None]).T.copy()
    return VFormMatrices(chi=chi, chi_bar=chi_bar, n_f=fock_norm_const(ctx),
                         params=params, m_values=m_values)


class BraceMethod(Enum):
    SPIN_SUM = "spin_sum"
    CLOSED_FORM = "closed_form"
    RECURSION = "recursion"


def _brace_guard(a: int, b: int, c: int, q: complex):
    s = a + b + c
    worst = 0.0
    ln_inv_q = np.log(1.0 / abs(q))
    for k in range(min(a, b, c) + 1):
        worst = max(worst, (2 * k * s + k - 3 * k * k - (a * b + a * c + b * c)) * ln_inv_q)
    if worst > 690.0 or max(a, b, c) > 30:
        raise OverflowGuard("brace indices too large for double precision; reduce (a, b, c)")


def brace(a: int, b: int, c: int, ctx: QContext,
          method: BraceMethod = BraceMethod.CLOSED_FORM) -> complex:
    """Symmetric coefficient {a, b, c} by the selected route.

    ``closed_form`` is the single finite k-sum, ``spin_sum`` the weighted
    eigenvalue-lattice sum over the triple product of polynomials, and
    ``recursion`` the two-term descent from {a, b, 0} = q^{ab}.
    """
    if min(a, b, c) < 0:
        raise DomainError("brace indices must be nonnegative")
    q = ctx.q
    _brace_guard(a, b, c, q)
    if method is BraceMethod.CLOSED_FORM:
        return _brace_closed(a, b, c, ctx)
    if method is BraceMethod.RECURSION:
        return _brace_recursion(ctx)(a, b, c)
    return _brace_spin_sum(a, b, c, ctx)


def _brace_closed(a: int, b: int, c: int, ctx: QContext) -> complex:
    a, b, c = sorted((a, b, c))  # manifest symmetry, bit-identical permutations
    q = ctx.q
    q2 = q * q
    s = a + b + c
    p = a * b + a * c + b * c
    pref = qpoch_finite(q2, q2, a) * qpoch_finite(q2, q2, b) * qpoch_finite(q2, q2, c)
    total = 0.0 + 0.0j
    for k in range(min(a, b, c) + 1):
        # prefactor q^p folded into each term so exponents stay moderate
        num = (-1) ** k * q ** (p + 3 * k * k - k - 2 * k * s)
        den = (qpoch_finite(q2, q2, k) * qpoch_finite(q2, q2, a - k)
               * qpoch_finite(q2, q2, b - k) * qpoch_finite(q2, q2, c - k))
        total += num / den
    return pref * total


def _brace_spin_sum(a: int, b: int, c: int, ctx: QContext, dps: int = 40) -> complex:
    """Eigenvalue-lattice sum for {a, b, c}, evaluated in extended precision.

    The summands are O(1) while the result can be as small as
    q^{ab+ac+bc}, so the cancellation exceeds double precision on the
    corners of the index box; 40-digit arithmetic restores full double
    accuracy of the returned value.
    """
    import mpmath as mp

    with mp.workdps(dps):
        q = mp.mpc(ctx.q)
        qh = mp.sqrt(q)  # principal branch, same as QContext.q_half
        n_top = max(a, b, c)

        def scaled_rows(xi):
            s = xi + 1 / xi
            prev, cur = mp.mpc(0), mp.mpc(1)
            out = []
            for k in range(n_top + 1):
                out.append(cur)
                prev, cur = cur, qh ** (2 * k + 1) * s * cur + (1 - q ** (2 * k)) * prev
            return out

        total = mp.mpc(0)
        peak = mp.mpf(0)
        below = 0
        for m in range(ctx.max_terms):
            xi = qh ** (2 * m + 1)
            rows = scaled_rows(xi)
            t = ((-1) ** m * q ** (3 * m * (m + 1) // 2) * (xi - 1 / xi)
                 * rows[a] * rows[b] * rows[c])
            total += t
            peak = max(peak, abs(t))
            below = below + 1 if abs(t) < peak * mp.mpf(10) ** (5 - dps) else 0
            if below >= 3:
                break
        else:
            raise TruncationExhausted("brace spin sum has no tail within max_terms")
        poch = mp.mpc(1)  # (q; q)_inf for the normalising constant
        f = q
        while abs(f) > mp.mpf(10) ** (-dps):
            poch *= 1 - f
            f *= q
        return complex(total / (-poch / qh))


@lru_cache(maxsize=32)
def _brace_recursion(ctx: QContext):
    q = ctx.q
    memo = {}

    def rec(a: int, b: int, c: int) -> complex:
        if a < 0 or b < 0:
            return 0.0 + 0.0j
        if c == 0:
            return q ** (a * b)
        key = (a, b, c)
        if key not in memo:
            memo[key] = (q ** (a + b) * rec(a, b, c - 1)
                         - (1 - q ** (2 * a)) * (1 - q ** (2 * b)) * rec(a - 1, b - 1, c - 1) / q)
        return memo[key]

    return rec


class CGSide(Enum):
    KET = "ket"
    BRA = "bra"


def cg_coefficient(side: CGSide, a: int, b: int, c: int,
                   params1: FockRepParams, params2: FockRepParams,
                   omega, ctx: QContext,
                   method: BraceMethod = BraceMethod.CLOSED_FORM) -> complex:
    """Symmetric Clebsch-Gordan coefficient for the two-factor co-product.

    The ket side couples occupation labels (a, b) to the composite label c;
    the bra side is its dual, differing only in inverted gauge prefactors
    and the orientation of the (-q omega ratio)^c factor.
    """
    omega = complex(omega)
    core = brace(a, b, c, ctx, method) / (
        _sqrt_qpoch2(ctx, a) * _sqrt_qpoch2(ctx, b) * _sqrt_qpoch2(ctx, c))
    f1 = omega / (params1.lam * params2.omega)
    f2 = params1.omega / (params2.lam * omega)
    if side is CGSide.KET:
        return f1 ** a * f2 ** b * (-ctx.q * params2.omega / params1.omega) ** c * core
    return f1 ** (-a) * f2 ** (-b) * (-ctx.q * params1.omega / params2.omega) ** c * core


def weight_V_fock(x, m: int, mp: int, ctx: QContext) -> complex:
    """Edge Boltzmann weight V_x(m, m') in closed q-product form."""
    return complex(weight_table(x, [m], [mp], ctx)[0, 0])


def weight_V_fock_from_overlaps(x, m: int, mp: int, ctx: QContext) -> complex:
    """The same weight from its defining occupation sum (cross-check route).

    Sums (mu'/mu)^a <mu,m|lam,a><lam,a|mu',mp> over a with the tail rule;
    converges for |x| > |q|.
    """
    x = complex(x)
    q = ctx.q
    if abs(x) <= abs(q):
        raise DomainError("overlap sum converges for |x| > |q| only")

    def terms():
        f = 1.0 + 0.0j  # (-1)^a q^a x^{-a} / (q^2; q^2)_a
        rows = zip(scaled_poly_iter(ctx.q_pow_half(2 * m + 1), ctx),
                   scaled_poly_iter(ctx.q_pow_half(2 * mp + 1), ctx))
        for a, (ra, rb) in enumerate(rows):
            yield f * ra * rb
            f *= -q / (x * (1 - (q * q) ** (a + 1)))

    pref = ctx.q_pow_half(m * (m + 1) + mp * (mp + 1)) / fock_norm_const(ctx)
    return pref * tail_sum(terms(), ctx)


def weight_table(x, m_values, mp_values, ctx: QContext) -> np.ndarray:
    """V_x on a spin grid, vectorised over both indices.

    Assembled in log space: the four numerator products grow like
    q^{-(m+m')^2/4} before the q^{(m(m+1)+m'(m'+1))/2} prefactor tames
    them, which overflows plain double arithmetic on wide spin windows.
    """
    x = complex(x)
    if x == 0:
        raise DomainError("weight needs x != 0")
    q = ctx.q
    y = 1.0 / x
    ms = np.asarray(m_values, dtype=int)[:, None]
    mps = np.asarray(mp_values, dtype=int)[None, :]
    shape = np.broadcast_shapes(ms.shape, mps.shape)
    log_v = np.full(shape, np.log(complex(ctx.q_half)) + 0j, dtype=complex)
    log_v *= ms * (ms + 1) + mps * (mps + 1)
    for expo in (2 + ms - mps, 2 - ms + mps, 3 + ms + mps, 1 - ms - mps):
        log_v = log_v + log_qpoch_inf_array(y * q ** expo.astype(float), q * q, ctx)
    den = qpoch_inf(q * q * y * y, q * q, ctx) * fock_norm_const(ctx)
    if den == 0:
        raise DomainError("weight evaluated on a pole of its closed form")
    log_v -= np.log(den)
    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
        return np.exp(log_v)


def kappa_fock(x, ctx: QContext) -> complex:
    """Scalar kappa_x = (x; q)_inf / (-q/x; q)_inf."""
    q = ctx.q
    return qpoch_inf(x, q, ctx) / qpoch_inf(-q / x, q, ctx)


def transitivity_check_fock(x, y, m: int, mpp: int, m_sum: int, ctx: QContext):
    """Residual of the transitivity sum: V_x * S * V_y summed equals V_{xy}."""
    started = time.perf_counter()
    row_x = weight_table(x, [m], range(m_sum + 1), ctx)[0]
    row_y = weight_table(y, range(m_sum + 1), [mpp], ctx)[:, 0]
    meas = np.array([s_measure(k, ctx) for k in range(m_sum + 1)])
    summands = row_x * meas * row_y
    if abs(summands[-1]) > ctx.tail_cut:
        raise TailTooFat(f"last summand {abs(summands[-1]):.3g} above tail cut; raise m_sum")
    lhs = summands.sum()
    rhs = weight_V_fock(complex(x) * complex(y), m, mpp, ctx)
    res = relative_residual(lhs, rhs)
    return make_report("fock.weight_transitivity.4_46",
                       {"x": x, "y": y, "m": m, "mpp": mpp, "m_sum": m_sum},
                       res, ctx.tol_identity, started)


def _boundary_triangle_factor(m_a: int, m_b: int, ctx: QContext) -> complex:
    """Limit of kappa_z V_{-q/z}(m_a, m_b) as z -> 1 (the xy = -q boundary).

    Both factors have a simple zero/pole there; the finite limit is
    (q;q)_inf q^{(m_a(m_a+1)+m_b(m_b+1))/2} times the numerator products
    at z = 1, over 2 (-q;q)_inf (q^2;q^2)_inf N_F.
    """
    q = ctx.q
    num = qpoch_inf_multi((-q ** (1 + m_a - m_b), -q ** (1 - m_a + m_b),
                           -q ** (2 + m_a + m_b), -q ** float(-m_a - m_b)),
                          q * q, ctx)
    return (0.5 * qpoch_inf(q, q, ctx) / qpoch_inf(-q, q, ctx)
            * ctx.q_pow_half(m_a * (m_a + 1) + m_b * (m_b + 1)) * num
            / (qpoch_inf(q * q, q * q, ctx) * fock_norm_const(ctx)))


def star_triangle_fock(x, y, m_a: int, m_b: int, m_c: int, m_sum: int,
                       ctx: QContext, perturb_r: float = 0.0):
    """Residual of the star-triangle relation for the Fock-space weights.

    The summed (star) side runs over one internal spin with measure S_m;
    the triangle side carries the scalar R = N_F kappa_x kappa_y
    kappa_{-q/xy}.  On the boundary xy = -q of the physical wedge the
    internal weight collapses to the delta-normalised one while
    kappa V_{xy} becomes a 0 * inf limit; that case is detected and both
    sides are evaluated in their exact limit forms.  ``perturb_r`` scales
    R by (1 + perturb_r) as a negative-control probe.
    """
    started = time.perf_counter()
    x = complex(x)
    y = complex(y)
    q = ctx.q
    z = -q / (x * y)
    if abs(z - 1.0) < 1e-8:
        lhs = (weight_V_fock(x, m_a, m_c, ctx) * weight_V_fock(y, m_b, m_c, ctx))
        r_part = (fock_norm_const(ctx) * kappa_fock(x, ctx) * kappa_fock(y, ctx)
                  * (1.0 + perturb_r))
        rhs = (r_part * _boundary_triangle_factor(m_a, m_b, ctx)
               * weight_V_fock(-q / y, m_a, m_c, ctx)
               * weight_V_fock(-q / x, m_b, m_c, ctx))
        res = relative_residual(lhs, rhs)
        return make_report("fock.star_triangle.4_49",
                           {"x": x, "y": y, "spins": (m_a, m_b, m_c), "q": q,
                            "perturb_r": perturb_r, "boundary": True},
                           res, ctx.tol_identity, started)
    row_x = weight_table(x, [m_a], range(m_sum + 1), ctx)[0]
    row_y = weight_table(y, [m_b], range(m_sum + 1), ctx)[0]
    row_z = weight_table(z, range(m_sum + 1), [m_c], ctx)[:, 0]
    meas = np.array([s_measure(k, ctx) for k in range(m_sum + 1)])
    summands = row_x * meas * row_z * row_y
    if abs(summands[-1]) > ctx.tail_cut:
        raise TailTooFat(f"last summand {abs(summands[-1]):.3g} above tail cut; raise m_sum")
    lhs = summands.sum()
    r = fock_norm_const(ctx) * kappa_fock(x, ctx) * kappa_fock(y, ctx) * kappa_fock(z, ctx)
    r *= 1.0 + perturb_r
    rhs = (r * weight_V_fock(-q / y, m_a, m_c, ctx)
           * weight_V_fock(x * y, m_a, m_b, ctx)
           * weight_V_fock(-q / x, m_b, m_c, ctx))
    res = relative_residual(lhs, rhs)
    return make_report("fock.star_triangle.4_49",
                       {"x": x, "y": y, "spins": (m_a, m_b, m_c),
                        "q": q, "perturb_r": perturb_r, "boundary": False},
                       res, ctx.tol_identity, started)


def partition_series_fock(x, ctx: QContext) -> complex:
    """log z_x = sum_{n>=1} (x^n - (q^2/x)^n) / (n (1-q^n) (1+(-q)^n))."""
    x = complex(x)
    q = ctx.q

    def terms():
        n = 1
        while True:
            yield ((x ** n - (q * q / x) ** n)
                   / (n * (1 - q ** n) * (1 + (-q) ** n)))
            n += 1

    return tail_sum(terms(), ctx)


def _fock_rep_matrices(lam, a_max: int, ctx: QContext):
    """Occupation-basis generator matrices truncated to a <= a_max (sign label +1)."""
    q = ctx.q
    lam = complex(lam)
    dim = a_max + 1
    k0 = np.diag([ctx.q_pow_half(2 * a + 1) for a in range(dim)]).astype(complex)
    em = np.zeros((dim, dim), dtype=complex)
    ep = np.zeros((dim, dim), dtype=complex)
    for a in range(1, dim):
        em[a - 1, a] = lam * np.sqrt(1 - q ** (2 * a))
    for a in range(dim - 1):
        ep[a + 1, a] = np.sqrt(1 - q ** (2 * a + 2)) / lam
    return em, ep, k0


def rll_check(lam, mu_spec, a_max: int, ctx: QContext,
              sigma_x: bool = False, scramble: float = 0.0):
    """Residual of the six-vertex RLL relation on the truncated Fock space.

    Both sides live on aux (2x2) x aux (2x2) x quantum; the residual is
    taken over all 16 aux components, restricted to the quantum block
    a <= a_max - 2 that truncation cannot touch.  ``sigma_x`` right-dresses
    both L factors by the first Pauli matrix; ``scramble`` perturbs one
    R-matrix entry as a negative control.
    """
    started = time.perf_counter()
    lam = complex(lam)
    mu = complex(mu_spec)
    q = ctx.q
    em, ep, k0 = _fock_rep_matrices(1.0, a_max, ctx)

    def l_matrix(spectral):
        entries = [[em, -k0 / spectral], [spectral * k0, ep]]
        if sigma_x:
            entries = [[entries[0][1], entries[0][0]],
                       [entries[1][1], entries[1][0]]]
        return entries

    l_lam = l_matrix(lam)
    l_mu = l_matrix(mu)

    r = np.zeros((2, 2, 2, 2), dtype=complex)  # indices (i1, i2, j1, j2)
    r[0, 0, 0, 0] = r[1, 1, 1, 1] = bracket(q * mu / lam)
    r[0, 1, 0, 1] = r[1, 0, 1, 0] = bracket(mu / lam)
    r[0, 1, 1, 0] = r[1, 0, 0, 1] = bracket(q)
    r[0, 0, 0, 0] *= 1.0 + scramble

    dim = a_max + 1
    block = slice(0, max(dim - 2, 1))
    worst = 0.0
    for i1 in range(2):
        for i2 in range(2):
            for k1 in range(2):
                for k2 in range(2):
                    lhs = np.zeros((dim, dim), dtype=complex)
                    rhs = np.zeros((dim, dim), dtype=complex)
                    for j1 in range(2):
                        for j2 in range(2):
                            lhs += r[i1, i2, j1, j2] * (l_lam[j1][k1] @ l_mu[j2][k2])
                            rhs += (l_mu[i2][j2] @ l_lam[i1][j1]) * r[j1, j2, k1, k2]
                    diff = np.max(np.abs(lhs[block, block] - rhs[block, block]))
                    scale = max(np.max(np.abs(lhs[block, block])),
                                np.max(np.abs(rhs[block, block])), 1e-300)
                    worst = max(worst, diff / scale)
    return make_report("fock.rll.2_15",
                       {"lam": lam, "mu": mu, "a_max": a_max,
                        "sigma_x": sigma_x, "scramble": scramble},
                       worst, ctx.tol_identity, started)


def vbasis_operator_matrices(omega, mu, m_cut: int, ctx: QContext) -> dict:
    """Generator matrices in the eigenbasis, folded onto spins m >= 0.

    The basis vectors with labels m and -1-m coincide, so the action that
    lowers m = 0 to m = -1 folds back into the m = 0 row.  Entries follow
    the two-term shift action with unit normalisation of the basis.
    """
    omega = complex(omega)
    mu = complex(mu)
    dim = m_cut + 1
    k0 = np.zeros((dim, dim), dtype=complex)
    ep = np.zeros((dim, dim), dtype=complex)
    em = np.zeros((dim, dim), dtype=complex)

    def add(mat, row, col, val):
        if row == -1:
            row = 0  # fold: |m=-1> is |m=0>
        if 0 <= row < dim:
            mat[row, col] += val

    for m in range(dim):
        xi = ctx.q_pow_half(2 * m + 1)
        br = xi - 1.0 / xi
        add(k0, m + 1, m, 1.0 / br)
        add(k0, m - 1, m, -1.0 / br)
        add(ep, m - 1, m, xi / (mu * br))
        add(ep, m + 1, m, -1.0 / (xi * mu * br))
        add(em, m + 1, m, mu * xi / br)
        add(em, m - 1, m, -mu / (xi * br))
    return {"K0": k0, "K": omega * k0, "Kp": k0 / omega, "Ep": ep, "Em": em}


def box_rmatrix_fock(x, xp, y, yp, spins, ctx: QContext) -> complex:
    """Factorised box R-matrix element at spins (m1, m2, m1', m2').

    Four-factor product of edge weights; the diagonal factors take the
    sign label -1, which turns them into weights at arguments y/x' and
    q^2 y'/x.
    """
    m1, m2, m1p, m2p = spins
    q = ctx.q
    return (weight_V_fock(y / xp, m1, m2, ctx)
            * weight_V_fock(x / y, m1, m1p, ctx)
            * weight_V_fock(xp / yp, m2, m2p, ctx)
            * weight_V_fock(q * q * yp / x, m1p, m2p, ctx))


def box_intertwining_check(x, xp, y, yp, m_cut: int, ctx: QContext):
    """Residual of the intertwining relation for the box R-matrix.

    Assembles both co-product sides from the eigenbasis generator matrices
    at spin cutoff m_cut and compares against the box matrix built from
    vectorised weight tables; the comparison is restricted to the block
    truncation cannot touch (all spins <= m_cut - 1).
    """
    started = time.perf_counter()
    x, xp, y, yp = (complex(v) for v in (x, xp, y, yp))
    q = ctx.q
    omega1 = np.sqrt(x * xp + 0j)
    mu1 = x / omega1
    omega2 = np.sqrt(y * yp + 0j)
    mu2 = y / omega2

    dim = m_cut + 1
    spins = np.arange(dim)
    a_tab = weight_table(y / xp, spins, spins, ctx)
    b_tab = weight_table(x / y, spins, spins, ctx)
    c_tab = weight_table(xp / yp, spins, spins, ctx)
    d_tab = weight_table(q * q * yp / x, spins, spins, ctx)
    s_mat = (np.einsum("ac,bd->abcd", b_tab, c_tab)
             * a_tab[:, :, None, None] * d_tab[None, None, :, :])
    s_mat = s_mat.reshape(dim * dim, dim * dim)
    # kernel -> coefficient matrix: the non-diagonal factors carry the
    # basis measure on their left index
    meas = np.array([s_measure(k, ctx) for k in range(dim)])
    s_mat = np.outer(meas, meas).ravel()[:, None] * s_mat

    def l_of(ops):
        return [[ops["Em"], -ops["K"]], [ops["Kp"], ops["Ep"]]]

    l1 = l_of(vbasis_operator_matrices(omega1, mu1, m_cut, ctx))
    l2 = l_of(vbasis_operator_matrices(omega2, mu2, m_cut, ctx))

    keep = np.arange(dim * dim).reshape(dim, dim)[:dim - 1, :dim - 1].ravel()
    worst = 0.0
    for i in range(2):
        for k in range(2):
            lhs_op = sum(np.kron(l1[i][j], l2[j][k]) for j in range(2))
            rhs_op = sum(np.kron(l2[i][j], l1[j][k]) for j in range(2))
            lhs = (lhs_op @ s_mat)[np.ix_(keep, keep)]
            rhs = (s_mat @ rhs_op)[np.ix_(keep, keep)]
            scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
            worst = max(worst, np.max(np.abs(lhs - rhs)) / scale)
    return make_report("fock.box_intertwine.4_54",
                       {"x": x, "xp": xp, "y": y, "yp": yp, "m_cut": m_cut},
                       worst, ctx.tol_identity, started)
