"""Laurent polynomials P_n(xi) and their q-hypergeometric extension chi(u, z).

P_n is defined by an explicit sum with q**2-binomial coefficients, or
equivalently by a q-shift recursion or a three-term recursion; the three
routes are kept side by side as mutual cross-checks.  chi(u, z) extends
P_n off the lattice z = q^{-2m} and is the building block of the modular
wavefunction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .context import QContext
from .errors import DegenerateArgument, DomainError, OverflowGuard
from .qseries import qpoch_finite, qpoch_inf, qpoch_inf_multi, tail_sum, big_theta4_const
from .report import make_report, relative_residual

__all__ = [
    "PolyEvalMethod", "poly_P", "scaled_poly_iter", "scaled_poly_values",
    "poly_P_difference_checks", "genfun_checks", "poly_norm_sum_check",
    "ChiParams", "chi", "chi_equation_checks",
]

# ln(1e300); exponents beyond this overflow double precision
_LN_OVERFLOW = 690.0


class PolyEvalMethod(Enum):
    EXPLICIT_SUM = "explicit_sum"
    FORWARD_RECURSION = "forward_recursion"
    QSHIFT_RECURSION = "qshift_recursion"


@lru_cache(maxsize=4096)
def _qpoch2_finite(q: complex, n: int) -> complex:
    """(q^2; q^2)_n, cached per nome."""
    return qpoch_finite(q * q, q * q, n)


@lru_cache(maxsize=65536)
def _qbinom2(q: complex, n: int, k: int) -> complex:
    """q^2-binomial coefficient as a ratio of finite Pochhammers."""
    return _qpoch2_finite(q, n) / (_qpoch2_finite(q, k) * _qpoch2_finite(q, n - k))


def _guard_scale(n: int, q: complex):
    # Largest term in the explicit sum carries q^{-2k(n-k)} ~ q^{-n^2/2}.
    if n > 1 and (n * n / 2.0) * math.log(1.0 / abs(q)) > _LN_OVERFLOW:
        raise OverflowGuard(
            f"P_{n} at |q| = {abs(q):.3g} exceeds double range; reduce n")


def poly_P(n: int, xi, ctx: QContext,
           method: PolyEvalMethod = PolyEvalMethod.FORWARD_RECURSION) -> complex:
    """P_n(xi), by the selected evaluation route.

    The default three-term recursion is numerically stable for |q| < 1;
    the explicit sum is kept as the cross-check oracle at moderate n.
    """
    xi = complex(xi)
    if xi == 0:
        raise DomainError("P_n needs xi != 0")
    if n < 0:
        raise DomainError("P_n defined for n >= 0")
    q = ctx.q
    _guard_scale(n, q)
    if method is PolyEvalMethod.EXPLICIT_SUM:
        total = 0.0 + 0.0j
        for k in range(n + 1):
            total += xi ** (2 * k - n) * q ** (-2 * k * (n - k)) * _qbinom2(q, n, k)
        return total
    if method is PolyEvalMethod.FORWARD_RECURSION:
        prev, cur = 0.0 + 0.0j, 1.0 + 0.0j  # P_{-1} (unused), P_0
        s = xi + 1.0 / xi
        for m in range(n):
            prev, cur = cur, s * cur - (1 - q ** (-2 * m)) * prev
        return cur
    # q-shift recursion: level m needs P_m on the grid xi * q^j, |j| <= n - m.
    level = {j: 1.0 + 0.0j for j in range(-n, n + 1)}
    for m in range(n):
        nxt = {}
        for j in range(-(n - m - 1), n - m):
            x = xi * q ** j
            nxt[j] = q ** (-m) * (x * x * level[j + 1] - level[j - 1] / (x * x)) / (x - 1.0 / x)
        level = nxt
    return level[0]


def scaled_poly_iter(xi, ctx: QContext, scale: complex = 1.0):
    """Yield scale * q^{a^2/2} P_a(xi) for a = 0, 1, 2, ...

    The q^{a^2/2} weight is folded into the three-term recursion, whose
    coefficients then stay bounded, so large orders neither overflow nor
    lose the scale (plain P_a grows like q^{-a^2/2}).  ``scale`` folds a
    caller prefactor into the start value; on spin lattices xi = gamma q^m
    the natural site factor gamma^m q^{m^2/2} keeps every product bounded
    by |gamma|-powers.
    """
    xi = complex(xi)
    if xi == 0:
        raise DomainError("P_n needs xi != 0")
    s = xi + 1.0 / xi
    q = ctx.q
    prev, cur = 0.0 + 0.0j, complex(scale)
    a = 0
    while True:
        yield cur
        prev, cur = cur, ctx.q_pow_half(2 * a + 1) * s * cur + (1 - q ** (2 * a)) * prev
        a += 1


def scaled_poly_values(n_max: int, xi, ctx: QContext,
                       scale: complex = 1.0) -> np.ndarray:
    """scale * q^{a^2/2} P_a(xi) for a = 0..n_max as an array."""
    it = scaled_poly_iter(xi, ctx, scale)
    return np.array([next(it) for _ in range(n_max + 1)], dtype=complex)


def poly_P_difference_checks(n: int, xi, ctx: QContext):
    """Residuals of the two homogeneous difference equations for P_n.

    First: P_n(xi) = q^{-n} (xi P_n(q xi) - xi^{-1} P_n(xi/q)) / (xi - 1/xi).
    Second (backward): (1 - q^{-2n}) P_{n-1}(xi) =
    q^{-n} (P_n(q xi) - P_n(xi/q)) / (xi - 1/xi).
    """
    started = time.perf_counter()
    xi = complex(xi)
    if min(abs(xi - 1), abs(xi + 1)) < 1e-6:
        raise DegenerateArgument("difference quotient singular at xi = +-1; perturb xi")
    q = ctx.q
    p = poly_P(n, xi, ctx)
    p_up = poly_P(n, q * xi, ctx)
    p_dn = poly_P(n, xi / q, ctx)
    br = xi - 1.0 / xi
    res_fwd = relative_residual(p, q ** (-n) * (xi * p_up - p_dn / xi) / br)
    if n == 0:
        res_back = 0.0
    else:
        lhs = (1 - q ** (-2 * n)) * poly_P(n - 1, xi, ctx)
        res_back = relative_residual(lhs, q ** (-n) * (p_up - p_dn) / br)
    res = max(res_fwd, res_back)
    return make_report("orthopoly.difference.B_4_B_5",
                       {"n": n, "xi": xi, "q": q,
                        "res_difference": res_fwd, "res_backward": res_back},
                       res, ctx.tol_identity, started)


def genfun_checks(z, u, v, ctx: QContext):
    """Residuals of the two generating functions of P_n.

    Single: sum_n (-)^n q^{n(n-1)/2} z^n P_n(u) / (q;q)_n equals
    (z u, z/u; q)_inf / (z^2/q; q^2)_inf.  Double: sum_n (-)^n q^{n(n-1)}
    z^n P_n(u) P_n(v) / (q^2;q^2)_n equals
    (z u v, z/(u v), z u/v, z v/u; q^2)_inf / (z^2/q^2; q^2)_inf.
    """
    started = time.perf_counter()
    q = ctx.q
    z = complex(z)
    u = complex(u)
    v = complex(v)
    if abs(z) >= 0.9 * abs(q) ** -0.5:
        raise DomainError("generating-function series needs smaller |z|")

    # Single generating function: q^{n(n-1)/2} P_n = q^{-n/2} * (q^{n^2/2} P_n).
    def single_terms():
        f = 1.0 + 0.0j  # (-z)^n q^{-n/2} / (q;q)_n, built incrementally
        for n, row in enumerate(scaled_poly_iter(u, ctx)):
            yield f * row
            f *= -z * ctx.q_pow_half(-1) / (1 - q ** (n + 1))

    lhs1 = tail_sum(single_terms(), ctx)
    rhs1 = (qpoch_inf_multi((z * u, z / u), q, ctx)
            / qpoch_inf(z * z / q, q * q, ctx))
    res1 = relative_residual(lhs1, rhs1)

    def double_terms():
        f = 1.0 + 0.0j  # (-z)^n q^{-n} / (q^2;q^2)_n
        rows = zip(scaled_poly_iter(u, ctx), scaled_poly_iter(v, ctx))
        for n, (row_u, row_v) in enumerate(rows):
            yield f * row_u * row_v
            f *= -z / q / (1 - (q * q) ** (n + 1))

    lhs2 = tail_sum(double_terms(), ctx)
    rhs2 = (qpoch_inf_multi((z * u * v, z / (u * v), z * u / v, z * v / u), q * q, ctx)
            / qpoch_inf(z * z / (q * q), q * q, ctx))
    res2 = relative_residual(lhs2, rhs2)

    res = max(res1, res2)
    return make_report("orthopoly.genfun.B_6_B_7",
                       {"z": z, "u": u, "v": v, "q": q,
                        "res_single": res1, "res_double": res2},
                       res, ctx.tol_identity, started)


def poly_norm_sum_check(m: int, mp: int, ctx: QContext):
    """Diagonal specialisation of the double generating function.

    sum_n (-)^n q^{n(n+1)} P_n(q^{m+1/2}) P_n(q^{mp+1/2}) / (q^2;q^2)_n
    is delta_{m,mp} (-)^m q^{-m^2} Theta_4 / (1 - q^{2m+1}).
    """
    started = time.perf_counter()
    q = ctx.q
    xi_m = ctx.q_pow_half(2 * m + 1)
    xi_mp = ctx.q_pow_half(2 * mp + 1)

    # q^{n(n+1)} P_n(xi_m) P_n(xi_mp) = q^n (q^{n^2/2}P_n)(q^{n^2/2}P_n)
    def terms():
        f = 1.0 + 0.0j  # (-q)^n / (q^2;q^2)_n
        rows = zip(scaled_poly_iter(xi_m, ctx), scaled_poly_iter(xi_mp, ctx))
        for n, (row_m, row_mp) in enumerate(rows):
            yield f * row_m * row_mp
            f *= -q / (1 - (q * q) ** (n + 1))

    lhs = tail_sum(terms(), ctx)
    if m == mp:
        rhs = (-1) ** m * q ** (-m * m) * big_theta4_const(ctx) / (1 - q ** (2 * m + 1))
        res = relative_residual(lhs, rhs)
    else:
        scale = abs(big_theta4_const(ctx) / (1 - q))
        res = abs(lhs) / scale
    return make_report("orthopoly.norm_sum.B_8",
                       {"m": m, "mp": mp, "q": q},
                       res, ctx.tol_identity, started)


@dataclass(frozen=True)
class ChiParams:
    """Arguments of chi(u, z): the point (u, z) and the nome q itself."""
    u: complex
    z: complex
    nome: complex

    def __post_init__(self):
        if abs(complex(self.nome)) >= 1:
            raise DomainError("chi needs |nome| < 1")


def chi(params: ChiParams, ctx: QContext) -> complex:
    """chi(u, z) = sum_n (-)^n q^{n(n+1)} (z;q^2)_n / (q^2;q^2)_n u^{2n}.

    Entire in u (terms carry q^{n(n+1)}); truncated by the tail rule.
    """
    q = complex(params.nome)
    q2 = q * q
    u2 = complex(params.u) ** 2
    z = complex(params.z)

    def terms():
        t = 1.0 + 0.0j
        n = 0
        while True:
            yield t
            t *= -q2 ** (n + 1) * (1 - z * q2 ** n) * u2 / (1 - q2 ** (n + 1))
            n += 1

    return tail_sum(terms(), ctx)


def chi_equation_checks(params: ChiParams, ctx: QContext):
    """Residuals of the shift equations and the Wronskian of chi.

    Checked relations, all at the same (u, z): the three-point shift in u,
    the two shifts of z by q^{+-2}, their Laurent combination, and the
    Wronskian chi(u/q,z) chi(1/u,z) - z chi(u,z) chi(q/u,z) =
    (u^2, q^2/u^2, z; q^2)_inf.
    """
    started = time.perf_counter()
    q = complex(params.nome)
    u = complex(params.u)
    z = complex(params.z)
    if u == 0:
        raise DomainError("chi equations need u != 0")
    c = lambda uu, zz: chi(ChiParams(uu, zz, q), ctx)

    x = c(u, z)
    x_up = c(q * u, z)
    x_dn = c(u / q, z)
    res_shift_u = relative_residual(x_dn, (1 - u * u) * x + z * u * u * x_up)

    x_zup = c(u, q * q * z)
    x_zdn = c(u, z / (q * q))
    res_z_up = relative_residual((1 - z) * (1 - u * u) * x_zup, x_dn - z * x_up)
    res_z_dn = relative_residual((1 - u * u) * x_zdn, x_dn - z * u ** 4 * x_up)
    res_laurent = relative_residual(x_zdn / u + u * (1 - z) * x_zup,
                                    (u + 1.0 / u) * x)

    lhs_w = x_dn * c(1.0 / u, z) - z * x * c(q / u, z)
    rhs_w = qpoch_inf_multi((u * u, q * q / (u * u), z), q * q, ctx)
    res_w = relative_residual(lhs_w, rhs_w)

    res = max(res_shift_u, res_z_up, res_z_dn, res_laurent, res_w)
    return make_report("orthopoly.chi_equations.C_3_C_4_C_5_C_6",
                       {"u": u, "z": z, "q": q,
                        "res_shift_u": res_shift_u, "res_z_up": res_z_up,
                        "res_z_dn": res_z_dn, "res_laurent": res_laurent,
                        "res_wronskian": res_w},
                       res, ctx.tol_identity, started)
