"""The worked r-objective example: scores 1..9, nu = 0.33, minimum at r = 3."""
from __future__ import annotations
from dataclasses import dataclass

from shared.quantile import nu_quantile, r_objective

GOLDEN_SCORES = tuple(float(v) for v in range(1, 10))
GOLDEN_NU = 0.33
GOLDEN_R = 3.0
# reference f(r) for r = 1..9, two decimals
PRINTED_F = (-1.00, -1.67, -1.99, -1.98, -1.63, -0.94, 0.07, 1.43, 3.12)
DEFAULT_TOL = 0.01


@dataclass(frozen=True)
class GoldenRow:
    r: float
    computed: float
    printed: float
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"r={self.r:g}  f={self.computed:+.5f}  printed={self.printed:+.2f}  {verdict}"


def golden_rows(tol: float = DEFAULT_TOL) -> list[GoldenRow]:
    rows = []
    for r, printed in zip(GOLDEN_SCORES, PRINTED_F):
        f = r_objective(GOLDEN_SCORES, GOLDEN_NU, r)
        rows.append(GoldenRow(r, f, printed, abs(f - printed) <= tol))
    return rows


def golden_quantile() -> tuple[float, bool]:
    r = nu_quantile(GOLDEN_SCORES, GOLDEN_NU).r
    return r, r == GOLDEN_R
