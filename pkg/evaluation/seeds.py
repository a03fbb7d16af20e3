"""Run one evaluation pipeline over several seeds and aggregate the AUCs."""
from __future__ import annotations
import asyncio
import dataclasses
import logging
import statistics
from typing import Callable, Sequence

from evaluation.report import EvalReport, SeedAggregate
from shared.errors import ConfigError, OcnnError

logger = logging.getLogger("ocnn.evaluation.seeds")

SeedRunner = Callable[[int], EvalReport]


class SeedRunError(OcnnError):
    """A per-seed pipeline failed; the original error is chained as __cause__."""

    def __init__(self, seed: int, cause: BaseException):
        self.seed = seed
        super().__init__(f"seed {seed}: {type(cause).__name__}: {cause}")


@dataclasses.dataclass(frozen=True)
class MultiSeedResult:
    mean_auc: float
    std_auc: float
    reports: tuple[EvalReport, ...]

    @property
    def aggregate(self) -> SeedAggregate:
        return SeedAggregate(
            tuple(r.seed for r in self.reports),
            tuple(r.auc for r in self.reports),
            self.mean_auc,
            self.std_auc,
        )


def _check_seeds(seeds: Sequence[int]) -> list[int]:
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ConfigError(f"multi-seed evaluation needs at least 2 seeds, got {len(seeds)}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    return seeds


def _run_one(runner: SeedRunner, seed: int) -> EvalReport:
    try:
        report = runner(seed)
    except Exception as e:
        logger.error("Seed %d failed: %s", seed, e)
        raise SeedRunError(seed, e) from e
    if report.seed != seed:
        report = dataclasses.replace(report, seed=seed)
    logger.info("Seed %d: AUC %.4f", seed, report.auc)
    return report


def _aggregate(reports: list[EvalReport]) -> MultiSeedResult:
    aucs = [r.auc for r in reports]
    return MultiSeedResult(statistics.fmean(aucs), statistics.pstdev(aucs), tuple(reports))


async def run_seeds_async(runner: SeedRunner, seeds: Sequence[int], workers: int = 4) -> MultiSeedResult:
    """Seeds run in worker threads, at most `workers` at a time; results merge in seed-list order."""
    seeds = _check_seeds(seeds)
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    gate = asyncio.Semaphore(workers)

    async def one(seed: int) -> EvalReport:
        async with gate:
            return await asyncio.to_thread(_run_one, runner, seed)

    reports = await asyncio.gather(*(one(s) for s in seeds))
    return _aggregate(list(reports))


def multi_seed_eval(runner: SeedRunner, seeds: Sequence[int], workers: int = 1) -> MultiSeedResult:
    """Mean and population std of AUC over seeds; workers > 1 runs seeds concurrently."""
    seeds = _check_seeds(seeds)
    if workers > 1:
        return asyncio.run(run_seeds_async(runner, seeds, workers))
    return _aggregate([_run_one(runner, s) for s in seeds])
