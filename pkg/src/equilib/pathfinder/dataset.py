"""Batch generation of a Pathfinder dataset on disk."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from equilib.config import config_hash, worker_threads
from equilib.errors import EquilibConfigError
from equilib.repositories import DatasetEntry, DatasetManifest, DatasetRepository

from .config import PathfinderConfig
from .generator import generate_sample


def generate_dataset(
    config: PathfinderConfig,
    n_samples: int,
    out_dir: str | Path,
    *,
    seed_start: int | None = None,
    threads: int | None = None,
    logger: logging.Logger | None = None,
) -> DatasetManifest:
    """Write ``n_samples`` samples with seeds ``seed_start + i``.

    Output bytes do not depend on the thread count.
    """

    if n_samples < 1:
        raise EquilibConfigError(f"--n must be >= 1, got {n_samples}")
    config.check_feasible()
    seed_start = config.seed if seed_start is None else seed_start
    repository = DatasetRepository.at(out_dir)
    workers = max(1, threads if threads is not None else worker_threads())

    def _one(index: int) -> DatasetEntry:
        sample = generate_sample(config, seed=seed_start + index)
        entry = repository.write_sample(index, sample)
        if logger:
            logger.debug("Sample %d (seed %d) written", index, seed_start + index)
        return entry

    if workers == 1:
        entries = [_one(index) for index in range(n_samples)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_one, range(n_samples)))

    settings = {"pathfinder": config.as_settings()}
    manifest = DatasetManifest(
        config=settings["pathfinder"],
        config_hash=config_hash(settings),
        seed_start=seed_start,
        entries=entries,
    )
    repository.write_manifest(manifest)
    if logger:
        logger.info("Wrote %d samples to %s", n_samples, repository.root)
    return manifest
