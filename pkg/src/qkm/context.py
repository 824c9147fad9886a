"""Global evaluation context: deformation parameter and truncation policy."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DomainError


@dataclass(frozen=True)
class QContext:
    """Deformation parameter q (|q| < 1, possibly complex) plus tolerances.

    * ``tol_identity`` is the relative residual bound used by identity checks.
    * ``tail_cut`` ends series/products once three consecutive terms fall
      below it (defaults to ``tol_identity / 100``).
    * ``max_terms`` is a hard cap on any single truncated sum or product.

    Fractional powers of q are computed once at construction on the
    principal branch and shared by every module, so quantities like
    q**(m + 1/2) carry a single consistent branch throughout a run.
    """

    q: complex
    tol_identity: float = 1e-9
    tail_cut: float | None = None
    max_terms: int = 10_000
    q_half: complex = field(init=False, repr=False, compare=False)
    q_quarter: complex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = complex(self.q)
        object.__setattr__(self, "q", q)
        if abs(q) >= 1.0:
            raise DomainError(f"|q| must be strictly below 1, got {abs(q):.6g}")
        if self.tail_cut is None:
            object.__setattr__(self, "tail_cut", self.tol_identity / 100.0)
        if not 0.0 < self.tail_cut < self.tol_identity < 1.0:
            raise DomainError("tolerances must satisfy 0 < tail_cut < tol_identity < 1")
        object.__setattr__(self, "q_half", q ** 0.5)
        object.__setattr__(self, "q_quarter", q ** 0.25)

    def q_pow_half(self, k: int) -> complex:
        """q**(k/2) for integer k, on the branch fixed at construction."""
        return self.q_half ** k
