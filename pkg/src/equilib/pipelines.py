"""pipelines"""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np

from equilib import __version__, config
from equilib.cells import ModelConfig, RecurrentModel
from equilib.cells.base import zero_state
from equilib.equilibrium import (
    GradAlgorithm,
    contraction_ratio,
    forward_unroll,
    spectral_norm_estimate,
)
from equilib.equilibrium.suites import run_suite
from equilib.errors import EquilibCLIError, GradientCheckError
from equilib.harness import (
    METRICS_FILE,
    Trainer,
    TrainConfig,
    evaluate,
    ks_two_sample,
    memory_report,
    parse_steps,
    plot_state_space,
    state_space_analysis,
)
from equilib.harness.evaluation import image_batch
from equilib.logging import get_logger
from equilib.pathfinder import PathfinderConfig, generate_dataset, generate_sample
from equilib.repositories import (
    CheckpointManifest,
    CheckpointRepository,
    DatasetRepository,
    MetricsRepository,
    RunManifest,
    RunManifestRepository,
    encode_png,
    utc_now,
)
from equilib.repositories.files import atomic_write_bytes, atomic_write_text
from equilib.tensor import as_tensor, no_grad

GRADCHECK_COLUMNS = (
    "op_name",
    "param_name",
    "analytic",
    "finite_diff",
    "rel_err",
    "tolerance",
    "passed",
)


def _config_path(cli_options: Mapping[str, Any]) -> Path | None:
    raw = cli_options.get("config")
    return Path(raw).expanduser() if raw else None


def _resolve_settings(
    cli_options: Mapping[str, Any],
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> dict[str, dict[str, Any]]:
    cleaned = {
        section: {key: value for key, value in values.items() if value is not None}
        for section, values in (overrides or {}).items()
    }
    cleaned = {section: values for section, values in cleaned.items() if values}
    return config.get_config(_config_path(cli_options), cleaned)


def _out_dir(cli_options: Mapping[str, Any], required: bool = True) -> Path | None:
    raw = cli_options.get("out")
    if not raw:
        if required:
            raise EquilibCLIError("--out is required for this command")
        return None
    return Path(raw).expanduser()


def _begin_run(
    subcommand: str,
    settings: Mapping[str, Mapping[str, Any]],
    out_dir: Path,
    cli_options: Mapping[str, Any],
) -> tuple[RunManifestRepository, RunManifest]:
    repository = RunManifestRepository(out_dir, overwrite=bool(cli_options.get("overwrite")))
    manifest = RunManifest(
        subcommand=subcommand,
        config={section: dict(values) for section, values in settings.items()},
        config_hash=config.config_hash(settings),
        version=__version__,
        outputs={},
        started_at=utc_now(),
    )
    repository.begin(manifest)
    atomic_write_text(out_dir / "config.toml", config.render_config(settings))
    return repository, manifest


def _load_checkpoint(path: str | Path) -> tuple[RecurrentModel, CheckpointManifest]:
    manifest, arrays = CheckpointRepository.load(path)
    model_config = ModelConfig(
        cell=manifest.cell,
        channels=manifest.channels,
        kernel_size=manifest.kernel_size,
        input_kernel_size=manifest.input_kernel_size,
        bn_eps=manifest.bn_eps,
        depth=manifest.depth,
    )
    return RecurrentModel.from_arrays(model_config, arrays), manifest


def _checkpoint_overrides(manifest: CheckpointManifest) -> dict[str, dict[str, Any]]:
    settings = manifest.as_settings()
    return {
        "model": {key: settings[key] for key in ModelConfig.__slots__},
        "algorithm": {"kind": manifest.algorithm, "steps": manifest.steps, "lam": manifest.lam},
        "training": {"batch_size": manifest.batch_size},
    }


def _require(cli_options: Mapping[str, Any], key: str, flag: str) -> Any:
    value = cli_options.get(key)
    if value is None or value == "":
        raise EquilibCLIError(f"{flag} is required")
    return value


def _split_list(raw: str | None, label: str) -> list[str]:
    items = [item.strip() for item in str(raw or "").split(",") if item.strip()]
    if not items:
        raise EquilibCLIError(f"{label} needs a comma-separated list")
    return items


def run_generate(cli_options: Mapping[str, Any] | None = None):
    """Generate command."""

    cli_options = dict(cli_options or {})
    logger = get_logger("equilib.generate", bool(cli_options.get("verbose")))
    n_samples = int(_require(cli_options, "n", "--n"))
    settings = _resolve_settings(cli_options, {"pathfinder": {"seed": cli_options.get("seed")}})
    pathfinder = PathfinderConfig.from_settings(settings["pathfinder"])
    pathfinder.check_feasible()
    out_dir = _out_dir(cli_options)

    runs, manifest = _begin_run("generate", settings, out_dir, cli_options)
    dataset = generate_dataset(pathfinder, n_samples, out_dir, logger=logger)
    runs.finish(manifest, {"dataset": str(DatasetRepository.at(out_dir).manifest_path)})
    print(f"Wrote {len(dataset.entries)} samples to {out_dir}")
    return 0


def run_train(cli_options: Mapping[str, Any] | None = None):
    """Train command."""

    cli_options = dict(cli_options or {})
    logger = get_logger("equilib.train", bool(cli_options.get("verbose")))
    settings = _resolve_settings(
        cli_options,
        {
            "data": {"train": cli_options.get("data"), "test": cli_options.get("test_data")},
            "training": {"seed": cli_options.get("seed"), "epochs": cli_options.get("epochs")},
        },
    )
    out_dir = _out_dir(cli_options)
    train_config = TrainConfig.from_settings(settings, checkpoint_dir=out_dir / "checkpoints")
    if train_config.train_dir is None:
        raise EquilibCLIError(
            "No training data configured",
            hint="Set data.train in the config or pass --data DIR.",
        )
    train_samples = DatasetRepository.at(train_config.train_dir).load_all()
    test_samples = (
        DatasetRepository.at(train_config.test_dir).load_all() if train_config.test_dir else None
    )

    runs, manifest = _begin_run("train", settings, out_dir, cli_options)
    trainer = Trainer(
        train_config,
        checkpoints=CheckpointRepository.at(train_config.checkpoint_dir),
        metrics=MetricsRepository(out_dir),
        logger=logger,
    )
    result = trainer.train(train_samples, test_samples)
    runs.finish(
        manifest,
        {"checkpoint": str(result.checkpoint), "metrics": str(out_dir / METRICS_FILE)},
    )
    for split in ("train", "test"):
        best = result.best(split)
        if best is not None:
            print(f"Best {split} IoU: {best.mean_iou:.4f} (epoch {best.epoch})")
    print(f"Checkpoint: {result.checkpoint}")
    return 0


def run_eval(cli_options: Mapping[str, Any] | None = None):
    """Eval command."""

    cli_options = dict(cli_options or {})
    model, checkpoint = _load_checkpoint(_require(cli_options, "ckpt", "--ckpt"))
    data_dir = Path(_require(cli_options, "data", "--data")).expanduser()
    steps = parse_steps(cli_options.get("steps") or checkpoint.steps)
    settings = _resolve_settings(
        cli_options, {**_checkpoint_overrides(checkpoint), "data": {"test": str(data_dir)}}
    )
    samples = DatasetRepository.at(data_dir).load_all(cli_options.get("limit"))
    out_dir = _out_dir(cli_options)

    runs, manifest = _begin_run("eval", settings, out_dir, cli_options)
    result = evaluate(
        model,
        samples,
        steps,
        batch_size=checkpoint.batch_size,
        return_maps=bool(cli_options.get("maps")),
    )
    metrics = MetricsRepository(out_dir)
    table = metrics.write_table("eval.csv", ("step", "mean_iou", "mean_loss"), result.rows())
    outputs = {"eval": str(table)}
    if result.maps:
        for t, probabilities in result.maps.items():
            atomic_write_bytes(out_dir / "maps" / f"step_{t:03d}.png", encode_png(probabilities))
        outputs["maps"] = str(out_dir / "maps")
    runs.finish(manifest, outputs)

    for row in result.rows():
        print(f"  t={row['step']:>3}  IoU {row['mean_iou']:.4f}  loss {row['mean_loss']:.4f}")
    print(f"Max IoU {max(result.mean_iou):.4f} at step {result.best_step}")
    return 0


def _contraction_rows(
    model: RecurrentModel, image: np.ndarray, n_steps: int, pairs: int, seed: int
) -> list[dict[str, Any]]:
    rng = np.random.default_rng(seed)
    with no_grad():
        x = model.drive(as_tensor(image_batch([image]), name="image"))
        h_n = forward_unroll(model.cell, x, zero_state(model.cell, x), n_steps).state
    scale = 1e-3 * max(float(np.abs(h_n.value).max()), 1.0)
    jacobian_norm = spectral_norm_estimate(model.cell, x, h_n, rng=rng)
    rows = []
    for index in range(pairs):
        a = h_n.value + scale * rng.standard_normal(h_n.shape)
        b = h_n.value + scale * rng.standard_normal(h_n.shape)
        ratio = contraction_ratio(model.cell, x, as_tensor(a), as_tensor(b))
        rows.append({"pair": index, "ratio": ratio, "jacobian_norm": jacobian_norm})
    return rows


def run_analyze(cli_options: Mapping[str, Any] | None = None):
    """Analyze command."""

    cli_options = dict(cli_options or {})
    logger = get_logger("equilib.analyze", bool(cli_options.get("verbose")))
    model, checkpoint = _load_checkpoint(_require(cli_options, "ckpt", "--ckpt"))
    data_dir = Path(_require(cli_options, "data", "--data")).expanduser()
    settings = _resolve_settings(
        cli_options, {**_checkpoint_overrides(checkpoint), "data": {"test": str(data_dir)}}
    )
    n_steps = int(cli_options.get("N") or checkpoint.steps)
    horizon = int(cli_options.get("T") or settings["training"]["analysis_horizon"])
    samples = DatasetRepository.at(data_dir).load_all(cli_options.get("limit"))
    out_dir = _out_dir(cli_options)

    runs, manifest = _begin_run("analyze", settings, out_dir, cli_options)
    result = state_space_analysis(
        model, samples, n_steps, horizon, batch_size=checkpoint.batch_size, logger=logger
    )
    tables = MetricsRepository(out_dir)
    outputs = {
        "state_space": str(
            tables.write_table(
                "state_space.csv", ("image_id", "step", "pc1", "pc2"), result.projection_rows()
            )
        ),
        "distances": str(
            tables.write_table("distances.csv", ("image_id", "distance"), result.distance_rows())
        ),
    }
    if cli_options.get("plot"):
        outputs["plot"] = str(plot_state_space(result, out_dir / "state_space.png"))
    pairs = int(cli_options.get("pairs") or 0)
    if pairs:
        rows = _contraction_rows(model, samples[0][0], n_steps, pairs, settings["training"]["seed"])
        outputs["contraction"] = str(
            tables.write_table("contraction.csv", ("pair", "ratio", "jacobian_norm"), rows)
        )
        below = sum(1 for row in rows if row["ratio"] < 1.0)
        print(f"Contraction ratio < 1 for {below}/{pairs} perturbation pairs")
        print(f"Jacobian spectral norm at h_N: {rows[0]['jacobian_norm']:.4f}")

    print(f"Median distance d(N={n_steps}, T={horizon}): {float(np.median(result.distances)):.6f}")
    if cli_options.get("compare"):
        other, other_checkpoint = _load_checkpoint(cli_options["compare"])
        baseline = state_space_analysis(
            other,
            samples,
            n_steps,
            horizon,
            batch_size=other_checkpoint.batch_size,
            logger=logger,
        )
        ks = ks_two_sample(result.distances, baseline.distances)
        outputs["ks"] = str(
            tables.write_table(
                "ks.csv",
                ("statistic", "p_value", "median_distance", "median_distance_compare"),
                [
                    {
                        "statistic": ks.statistic,
                        "p_value": ks.p_value,
                        "median_distance": float(np.median(result.distances)),
                        "median_distance_compare": float(np.median(baseline.distances)),
                    }
                ],
            )
        )
        print(
            f"Comparison median distance: {float(np.median(baseline.distances)):.6f}; "
            f"KS D={ks.statistic:.4f}, p={ks.p_value:.3g}"
        )
    runs.finish(manifest, outputs)
    return 0


def run_gradcheck(cli_options: Mapping[str, Any] | None = None):
    """Gradcheck command."""

    cli_options = dict(cli_options or {})
    suite = str(_require(cli_options, "suite", "--suite"))
    seed = int(cli_options.get("seed") or 0)
    settings = _resolve_settings(cli_options)
    rows = run_suite(suite, seed)
    out_dir = _out_dir(cli_options, required=False)
    if out_dir is not None:
        runs, manifest = _begin_run("gradcheck", settings, out_dir, cli_options)
        records = [{**row.as_record(), "tolerance": row.tolerance, "passed": row.passed} for row in rows]
        path = MetricsRepository(out_dir).write_table(f"gradcheck_{suite}.csv", GRADCHECK_COLUMNS, records)
        runs.finish(manifest, {"gradcheck": str(path)})

    failed = [row for row in rows if not row.passed]
    worst = max(rows, key=lambda row: row.rel_err)
    print(f"Suite {suite}: {len(rows) - len(failed)}/{len(rows)} checks passed")
    print(f"Max rel_err {worst.rel_err:.3e} ({worst.op_name}, {worst.param_name})")
    if failed:
        names = ", ".join(f"{row.op_name}/{row.param_name}" for row in failed[:5])
        raise GradientCheckError(
            f"{len(failed)} gradient check(s) exceeded tolerance: {names}",
            hint="Run with --out DIR to get the full CSV of analytic and numeric values.",
        )
    return 0


def run_memreport(cli_options: Mapping[str, Any] | None = None):
    """Memreport command."""

    cli_options = dict(cli_options or {})
    logger = get_logger("equilib.memreport", bool(cli_options.get("verbose")))
    algorithms = _split_list(cli_options.get("algorithm"), "--algorithm")
    try:
        steps_list = [int(item) for item in _split_list(cli_options.get("steps"), "--steps")]
    except ValueError as exc:
        raise EquilibCLIError("--steps needs integers, e.g. 20,40,80") from exc
    settings = _resolve_settings(cli_options)
    model = RecurrentModel.initialize(
        ModelConfig.from_settings(settings["model"]),
        np.random.default_rng(settings["training"]["seed"]),
    )
    sample = generate_sample(PathfinderConfig.from_settings(settings["pathfinder"]))
    template = GradAlgorithm.from_settings({**settings["algorithm"], "per_step_loss": False})

    out_dir = _out_dir(cli_options, required=False)
    runs = manifest = None
    if out_dir is not None:
        runs, manifest = _begin_run("memreport", settings, out_dir, cli_options)
    rows = memory_report(
        model, sample.image, sample.mask, algorithms, steps_list, template=template, logger=logger
    )
    if runs is not None and manifest is not None:
        path = MetricsRepository(out_dir).write_table(
            "memreport.csv",
            ("algorithm", "steps", "saved_count", "peak_bytes"),
            [row.as_record() for row in rows],
        )
        runs.finish(manifest, {"memreport": str(path)})

    width = max(len(row.algorithm) for row in rows)
    for row in rows:
        print(f"  {row.algorithm.ljust(width)}  N={row.steps:<4} {row.peak_bytes:>12} bytes  ({row.saved_count} saved)")
    return 0


def run_config_show(cli_options: Mapping[str, Any] | None = None):
    cli_options = dict(cli_options or {})
    merged = config.get_config_with_sources(_config_path(cli_options))
    print("Effective configuration:")
    for section, values in merged.items():
        print(f"[{section}]")
        key_width = max(len(key) for key in values)
        rendered = {key: config.render_value(value) for key, (value, _source) in values.items()}
        value_width = max(len(value) for value in rendered.values())
        for key, (_value, source) in values.items():
            line = f"  {key.ljust(key_width)} = {rendered[key].ljust(value_width)}"
            print(f"{line}  ({source})" if source != "file" else line.rstrip())
    return 0
