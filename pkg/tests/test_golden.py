"""Tests for the worked r-objective table."""
from runner.golden import (
    GOLDEN_R, PRINTED_F, golden_quantile, golden_rows,
)

EXACT_F = (-1.0, -1.6633, -1.9899, -1.9798, -1.6330, -0.9495, 0.0707, 1.4276, 3.1212)


def test_all_rows_pass_at_default_tolerance():
    rows = golden_rows()
    assert len(rows) == 9
    assert all(row.passed for row in rows)


def test_computed_values():
    for row, expected in zip(golden_rows(), EXACT_F):
        assert abs(row.computed - expected) < 1e-4


def test_tight_tolerance_flags_rounded_rows():
    rows = golden_rows(1e-6)
    by_r = {int(row.r): row for row in rows}
    assert by_r[1].passed
    assert not by_r[3].passed
    assert not by_r[4].passed


def test_quantile_is_three():
    r, ok = golden_quantile()
    assert r == GOLDEN_R
    assert ok


def test_row_line_format():
    row = golden_rows()[2]
    line = row.line()
    assert line.startswith("r=3")
    assert "PASS" in line
    assert f"{PRINTED_F[2]:+.2f}" in line
