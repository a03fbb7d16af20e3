"""Tests for multi-seed evaluation."""
import dataclasses
import statistics
import threading
import time

import numpy as np
import pytest

from evaluation.report import build_report
from evaluation.seeds import SeedRunError, multi_seed_eval, run_seeds_async
from learners.ocnn import ScoreSet
from shared.errors import ConfigError


def _fake_runner(delays=None):
    """Reports with AUC = 0.5 + seed/100, optionally sleeping per seed first."""
    def run(seed: int):
        if delays:
            time.sleep(delays.get(seed, 0.0))
        raw = np.r_[np.zeros(10), np.ones(10)]
        labels = np.r_[np.ones(10, dtype=int), np.zeros(10, dtype=int)]
        report = build_report(ScoreSet(raw, raw - 0.5, 0.5, labels), bins=2, seed=seed)
        return dataclasses.replace(report, auc=0.5 + seed / 100)
    return run


def test_mean_and_population_std():
    result = multi_seed_eval(_fake_runner(), [1, 2, 3])
    aucs = [0.51, 0.52, 0.53]
    assert [r.seed for r in result.reports] == [1, 2, 3]
    assert result.mean_auc == pytest.approx(statistics.fmean(aucs))
    assert result.std_auc == pytest.approx(statistics.pstdev(aucs))
    agg = result.aggregate
    assert agg.seeds == (1, 2, 3)
    assert agg.aucs == pytest.approx(tuple(aucs))


def test_parallel_merge_is_in_seed_order():
    # later seeds finish first
    delays = {1: 0.2, 2: 0.1, 3: 0.0}
    serial = multi_seed_eval(_fake_runner(), [1, 2, 3])
    parallel = multi_seed_eval(_fake_runner(delays), [1, 2, 3], workers=3)
    assert [r.seed for r in parallel.reports] == [1, 2, 3]
    assert parallel.mean_auc == serial.mean_auc
    assert parallel.std_auc == serial.std_auc


async def test_run_seeds_async_limits_concurrency():
    active = 0
    peak = 0
    lock = threading.Lock()
    inner = _fake_runner()

    def run(seed: int):
        nonlocal active, peak
        with lock:
            active += 1
            peak = max(peak, active)
        time.sleep(0.05)
        with lock:
            active -= 1
        return inner(seed)

    result = await run_seeds_async(run, [5, 6, 7, 8], workers=2)
    assert [r.seed for r in result.reports] == [5, 6, 7, 8]
    assert peak <= 2


def test_seed_validation():
    with pytest.raises(ConfigError):
        multi_seed_eval(_fake_runner(), [1])
    with pytest.raises(ConfigError):
        multi_seed_eval(_fake_runner(), [1, 1])


def test_failure_names_the_seed():
    def run(seed: int):
        if seed == 2:
            raise ConfigError("bad data")
        return _fake_runner()(seed)

    with pytest.raises(SeedRunError) as info:
        multi_seed_eval(run, [1, 2, 3])
    assert info.value.seed == 2
    assert isinstance(info.value.__cause__, ConfigError)
