"""q-series kernel: Pochhammer symbols, brackets, theta functions.

Everything downstream (orthogonal polynomials, lattice Boltzmann weights,
the modular-double machinery) is built on the primitives here.  Infinite
sums and products are truncated by one uniform tail rule: stop after
three consecutive terms below ``ctx.tail_cut``, hard-capped at
``ctx.max_terms``.  Nomes are always explicit; nothing squares a nome
implicitly, callers pass q*q where a base-q**2 symbol is wanted.
"""

from __future__ import annotations

import cmath
import math
import time
from enum import Enum

import numpy as np

from .context import QContext
from .errors import DomainError, RepresentationMismatch, TruncationExhausted
from .report import make_report, relative_residual

__all__ = [
    "tail_sum", "bilateral_sum", "qpoch_finite", "qpoch_inf",
    "qpoch_inf_multi", "qpoch_inf_array", "log_qpoch_inf_array", "bracket", "ThetaKind",
    "theta", "theta_sum", "theta_product", "big_theta4_const",
    "jacobi_transform_check", "gauss_check", "gauss_double_sum_check",
    "pentagonal_check",
]


def tail_sum(terms, ctx: QContext, with_peak: bool = False):
    """Sum a term iterable until three consecutive terms drop below tail_cut."""
    total = 0.0 + 0.0j
    peak = 0.0
    below = 0
    stopped = False
    for k, t in enumerate(terms):
        if k >= ctx.max_terms:
            raise TruncationExhausted(f"no tail after {ctx.max_terms} terms")
        total += t
        a = abs(t)
        if a > peak:
            peak = a
        below = below + 1 if a < ctx.tail_cut else 0
        if below >= 3:
            stopped = True
            break
    if not stopped:
        raise TruncationExhausted("term generator ended before the tail criterion")
    return (total, peak) if with_peak else total


def bilateral_sum(term, ctx: QContext, with_peak: bool = False):
    """Sum term(m) over m in Z, applying the tail rule separately in each direction."""
    total = term(0)
    peak = abs(total)
    for direction in (1, -1):
        below = 0
        m = direction
        for _ in range(ctx.max_terms):
            t = term(m)
            total += t
            a = abs(t)
            if a > peak:
                peak = a
            below = below + 1 if a < ctx.tail_cut else 0
            if below >= 3:
                break
            m += direction
        else:
            raise TruncationExhausted("bilateral sum has no tail within max_terms")
    return (total, peak) if with_peak else total


def qpoch_finite(x, q, n: int) -> complex:
    """Finite q-Pochhammer prod_{k=0}^{n-1} (1 - x q^k); empty product is 1.

    Negative n uses the standard extension (x; q)_{-n} = 1 / (x q^{-n}; q)_n,
    which makes (x; q)_n (x q^n; q)_{-n} = ... consistent for all integers.
    """
    if n >= 0:
        out = 1.0 + 0.0j
        f = complex(x)
        q = complex(q)
        for _ in range(n):
            out *= 1.0 - f
            f *= q
        return out
    den = qpoch_finite(complex(x) * complex(q) ** n, q, -n)
    if den == 0:
        raise DomainError("negative-index q-Pochhammer hits a vanishing factor")
    return 1.0 / den


def qpoch_inf(x, q, ctx: QContext) -> complex:
    """Infinite product prod_{k>=0} (1 - x q^k), truncated by the tail rule."""
    out = 1.0 + 0.0j
    f = complex(x)
    q = complex(q)
    below = 0
    for _ in range(ctx.max_terms):
        out *= 1.0 - f
        below = below + 1 if abs(f) < ctx.tail_cut else 0
        if below >= 3:
            return out
        f *= q
    raise TruncationExhausted("q-Pochhammer product has no tail within max_terms")


def qpoch_inf_multi(xs, q, ctx: QContext) -> complex:
    """Product of infinite q-Pochhammers over several first arguments."""
    out = 1.0 + 0.0j
    for x in xs:
        out *= qpoch_inf(x, q, ctx)
    return out


def log_qpoch_inf_array(xs, q, ctx: QContext) -> np.ndarray:
    """Sum over k of log(1 - x q^k); its exp is the infinite product.

    Branch-insensitive for that purpose (2 pi i shifts die in the exp),
    and immune to the overflow of huge intermediate products.
    """
    xs = np.asarray(xs, dtype=complex)
    q = complex(q)
    top = float(np.max(np.abs(xs))) if xs.size else 0.0
    if top == 0.0:
        return np.zeros_like(xs)
    if abs(q) == 0.0:
        return np.log(1.0 - xs)
    k_cut = int(math.ceil((math.log(ctx.tail_cut) - math.log(top)) / math.log(abs(q)))) + 3
    k_cut = max(k_cut, 1)
    if k_cut > ctx.max_terms:
        raise TruncationExhausted("log q-Pochhammer has no tail within max_terms")
    powers = q ** np.arange(k_cut)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(np.log(1.0 - xs[..., None] * powers), axis=-1)


def qpoch_inf_array(xs, q, ctx: QContext) -> np.ndarray:
    """Vectorised qpoch_inf over an array of first arguments (shared nome)."""
    xs = np.asarray(xs, dtype=complex)
    q = complex(q)
    top = float(np.max(np.abs(xs))) if xs.size else 0.0
    if top == 0.0:
        return np.ones_like(xs)
    aq = abs(q)
    if aq == 0.0:
        return 1.0 - xs
    k_cut = int(math.ceil((math.log(ctx.tail_cut) - math.log(top)) / math.log(aq))) + 3
    k_cut = max(k_cut, 1)
    if k_cut > ctx.max_terms:
        raise TruncationExhausted("q-Pochhammer array product has no tail within max_terms")
    powers = q ** np.arange(k_cut)
    return np.prod(1.0 - xs[..., None] * powers, axis=-1)


def bracket(z) -> complex:
    """Square-bracket symbol z - 1/z."""
    z = complex(z)
    if z == 0:
        raise DomainError("bracket undefined at z = 0")
    return z - 1.0 / z


class ThetaKind(Enum):
    THETA4 = "theta4"
    THETA3 = "theta3"
    CAP_THETA4 = "Theta4"
    CAP_THETA3 = "Theta3"
    H = "H"


def theta_sum(kind: ThetaKind, u, ctx: QContext):
    """Theta function by its bilateral sum; returns (value, largest term)."""
    u = complex(u)
    if u == 0:
        raise DomainError("theta functions need u != 0")
    if kind is ThetaKind.THETA3:
        return theta_sum(ThetaKind.THETA4, -u, ctx)
    if kind is ThetaKind.CAP_THETA3:
        return theta_sum(ThetaKind.CAP_THETA4, -u, ctx)
    q = ctx.q
    if kind is ThetaKind.THETA4:
        term = lambda n: ctx.q_pow_half(n * n) * (-u) ** n
    elif kind is ThetaKind.CAP_THETA4:
        term = lambda n: q ** (n * n) * (-u) ** n
    else:  # H
        term = lambda n: q ** (n * (n - 1)) * (-1) ** n * u ** (2 * n - 1)
    return bilateral_sum(term, ctx, with_peak=True)


def theta_product(kind: ThetaKind, u, ctx: QContext) -> complex:
    """Theta function by its triple-product representation."""
    u = complex(u)
    if u == 0:
        raise DomainError("theta functions need u != 0")
    if kind is ThetaKind.THETA3:
        return theta_product(ThetaKind.THETA4, -u, ctx)
    if kind is ThetaKind.CAP_THETA3:
        return theta_product(ThetaKind.CAP_THETA4, -u, ctx)
    q = ctx.q
    if kind is ThetaKind.THETA4:
        return qpoch_inf_multi((ctx.q_half * u, ctx.q_half / u, q), q, ctx)
    if kind is ThetaKind.CAP_THETA4:
        return qpoch_inf_multi((q * u, q / u, q * q), q * q, ctx)
    return qpoch_inf_multi((u * u, q * q / (u * u), q * q), q * q, ctx) / u


def theta(kind: ThetaKind, u, ctx: QContext) -> complex:
    """Theta function, evaluated by both the sum and the product forms.

    The two evaluations must agree within ctx.tol_identity (relative to the
    larger of the two values and the largest summand, so exact zeros do not
    trip the comparison); the sum value is returned.
    """
    s, peak = theta_sum(kind, u, ctx)
    p = theta_product(kind, u, ctx)
    scale = max(abs(s), abs(p), peak, 1e-300)
    if abs(s - p) / scale > ctx.tol_identity:
        raise RepresentationMismatch(
            f"{kind.value}: sum {s} vs product {p} disagree beyond tolerance")
    return s


def big_theta4_const(ctx: QContext) -> complex:
    """Theta constant (q, q, q^2; q^2)_inf used in normalisation constants."""
    q = ctx.q
    return qpoch_inf_multi((q, q, q * q), q * q, ctx)


def jacobi_transform_check(x: float, b, ctx: QContext, rhs_phase: float = 0.0):
    """Residual of the modular (Jacobi) transform of the odd theta product.

    With u = exp(pi b x), ubar = exp(pi x / b), q = exp(i pi b^2) and
    qbar = exp(-i pi / b^2), compares

        q^{1/4} (u^2, q^2/u^2, q^2; q^2)_inf / u

    against exp(3 i pi / 4 + i pi x^2) b^{-1} qbar^{1/4} times the same
    expression in the barred variables.  ``rhs_phase`` multiplies the right
    side by exp(i rhs_phase); nonzero values are negative-control probes.
    """
    started = time.perf_counter()
    b = complex(b)
    q = cmath.exp(1j * cmath.pi * b * b)
    qb = cmath.exp(-1j * cmath.pi / (b * b))
    for nome in (q, qb):
        if abs(nome) >= 1:
            raise DomainError("both nomes must contract; take b = exp(i theta), theta in (0, pi/2)")
    ctx_q = QContext(q=q, tol_identity=ctx.tol_identity, max_terms=ctx.max_terms)
    ctx_qb = QContext(q=qb, tol_identity=ctx.tol_identity, max_terms=ctx.max_terms)
    u = cmath.exp(cmath.pi * b * x)
    ub = cmath.exp(cmath.pi * x / b)
    lhs = (cmath.exp(1j * cmath.pi * b * b / 4)
           * qpoch_inf_multi((u * u, q * q / (u * u), q * q), q * q, ctx_q) / u)
    rhs = (cmath.exp(3j * cmath.pi / 4 + 1j * cmath.pi * x * x) / b
           * cmath.exp(-1j * cmath.pi / (4 * b * b))
           * qpoch_inf_multi((ub * ub, qb * qb / (ub * ub), qb * qb), qb * qb, ctx_qb) / ub)
    rhs *= cmath.exp(1j * rhs_phase)
    res = relative_residual(lhs, rhs)
    return make_report("qseries.jacobi.A_5",
                       {"x": x, "b": b, "rhs_phase": rhs_phase},
                       res, ctx.tol_identity, started)


def gauss_check(x, z, ctx: QContext):
    """Residual of the Gauss summation sum_n x^n (z;q)_n/(q;q)_n = (xz;q)_inf/(x;q)_inf."""
    started = time.perf_counter()
    q = ctx.q
    x = complex(x)
    z = complex(z)

    def terms():
        t = 1.0 + 0.0j
        n = 0
        while True:
            yield t
            t *= x * (1 - z * q ** n) / (1 - q ** (n + 1))
            n += 1

    lhs = tail_sum(terms(), ctx)
    rhs = qpoch_inf(x * z, q, ctx) / qpoch_inf(x, q, ctx)
    res = relative_residual(lhs, rhs)
    return make_report("qseries.gauss.A_9", {"x": x, "z": z, "q": q},
                       res, ctx.tol_identity, started)


def gauss_double_sum_check(z1, z2, ctx: QContext):
    """Two convergent consequences of the Gauss identity.

    First: the double sum over n1, n2 of q^{2 n1 n2} z1^n1 z2^n2 /
    ((q^2;q^2)_{n1} (q^2;q^2)_{n2}) equals (z1 z2; q^2)_inf /
    ((z1;q^2)_inf (z2;q^2)_inf).  Third: the diagonal sum of
    q^{2 n^2} / (q^2;q^2)_n^2 equals 1/(q^2;q^2)_inf.  (The middle,
    distributional, identity of the family is out of numerical scope.)
    """
    started = time.perf_counter()
    q = ctx.q
    q2 = q * q
    z1 = complex(z1)
    z2 = complex(z2)
    if abs(z1) >= 1 or abs(z2) >= 1:
        raise DomainError("double sum needs |z1|, |z2| < 1")

    poch = [1.0 + 0.0j]

    def poch2(n):
        while len(poch) <= n:
            k = len(poch)
            poch.append(poch[k - 1] * (1 - q2 ** k))
        return poch[n]

    def outer_terms():
        n1 = 0
        while True:
            w = z2 * q2 ** n1

            def inner():
                t = 1.0 + 0.0j
                n2 = 0
                while True:
                    yield t
                    t *= w / (1 - q2 ** (n2 + 1))
                    n2 += 1

            yield z1 ** n1 / poch2(n1) * tail_sum(inner(), ctx)
            n1 += 1

    lhs1 = tail_sum(outer_terms(), ctx)
    rhs1 = qpoch_inf(z1 * z2, q2, ctx) / (qpoch_inf(z1, q2, ctx) * qpoch_inf(z2, q2, ctx))
    res1 = relative_residual(lhs1, rhs1)

    def diag_terms():
        n = 0
        while True:
            yield q2 ** (n * n) / poch2(n) ** 2
            n += 1

    lhs3 = tail_sum(diag_terms(), ctx)
    rhs3 = 1.0 / qpoch_inf(q2, q2, ctx)
    res3 = relative_residual(lhs3, rhs3)

    return make_report("qseries.gauss_double.A_8",
                       {"z1": z1, "z2": z2, "q": q,
                        "res_double": res1, "res_diagonal": res3},
                       max(res1, res3), ctx.tol_identity, started)


def pentagonal_check(ctx: QContext):
    """Pentagonal-number series sum_m (-)^m q^{m(3m+1)/2} against (q;q)_inf."""
    started = time.perf_counter()
    q = ctx.q
    lhs = bilateral_sum(lambda m: (-1) ** m * q ** (m * (3 * m + 1) // 2), ctx)
    rhs = qpoch_inf(q, q, ctx)
    res = relative_residual(lhs, rhs)
    return make_report("qseries.pentagonal.A_7", {"q": q}, res,
                       ctx.tol_identity, started)
