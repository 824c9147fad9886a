"""Identity reports: one verified identity at one parameter point."""

from __future__ import annotations

import time
from dataclasses import dataclass

PASS = "PASS"
FAIL = "FAIL"
EXPECTED_FAIL = "EXPECTED_FAIL"
SKIPPED = "SKIPPED"

# Floor used in relative residuals so that 0 vs 0 compares as 0, not nan.
_FLOOR = 1e-300


def relative_residual(lhs: complex, rhs: complex) -> float:
    """|lhs - rhs| relative to the larger magnitude (floored away from 0)."""
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), _FLOOR)


@dataclass
class IdentityReport:
    """Outcome of checking one identity at one parameter point.

    ``params`` records the evaluated point (and, for multi-part checks,
    the individual component residuals); ``residual`` is the worst
    component.  Verdicts: PASS iff residual <= tolerance, except for
    identities registered as negative controls, which report
    EXPECTED_FAIL when the residual exceeds ten times the tolerance.
    """

    identity_id: str
    params: dict
    residual: float
    tolerance: float
    verdict: str
    wall_time_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.verdict in (PASS, EXPECTED_FAIL, SKIPPED)

    def as_dict(self) -> dict:
        return {
            "identity_id": self.identity_id,
            "params": {k: _plain(v) for k, v in sorted(self.params.items())},
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "verdict": self.verdict,
            "wall_time_ms": float(self.wall_time_ms),
        }


def _plain(value):
    """JSON-friendly, deterministic rendering of a parameter value."""
    if isinstance(value, complex):
        if value.imag == 0.0:
            return value.real
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):  # numpy scalar
        return _plain(value.item())
    return value


def make_report(identity_id, params, residual, tolerance, started=None,
                negative_control=False) -> IdentityReport:
    residual = float(residual)
    if negative_control:
        verdict = EXPECTED_FAIL if residual > 10.0 * tolerance else FAIL
    else:
        verdict = PASS if residual <= tolerance else FAIL
    wall = 0.0 if started is None else (time.perf_counter() - started) * 1e3
    return IdentityReport(identity_id, dict(params), residual, float(tolerance),
                          verdict, wall)


def skipped_report(identity_id, params, tolerance, reason) -> IdentityReport:
    p = dict(params)
    p["skip_reason"] = reason
    return IdentityReport(identity_id, p, float("nan"), float(tolerance), SKIPPED)
