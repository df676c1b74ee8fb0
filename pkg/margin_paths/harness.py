"""
Experiment orchestration

run(config) resolves settings, executes one experiment and writes its
artifacts (results.csv, side files, summary.json, summary.txt) after all
computation is finished.
"""
import logging
import time
from pathlib import Path
from typing import Optional

from margin_paths.config import Config, ExperimentConfig, get_config
from margin_paths.errors import ConfigError, MarginPathsError
from margin_paths.experiments import REGISTRY, ExperimentContext, ExperimentResult
from margin_paths.reports import ReportWriter

logger = logging.getLogger("marginpaths.harness")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def output_dir(config: ExperimentConfig, settings: Config) -> Path:
    if config.output_dir:
        return Path(config.output_dir)
    return Path(settings.OUTPUT_DIR) / config.experiment


def summary_text(result: ExperimentResult) -> str:
    lines = [f"experiment: {result.experiment}", f"statements: {', '.join(result.statements)}", ""]
    for check in result.checks:
        tag = "" if check.gating else " (info)"
        detail = f" ({check.detail})" if check.detail else ""
        lines.append(f"[{check.statement}] {check.name}: {check.status}{tag}{detail}")
    if result.notes:
        lines.append("")
        lines.extend(f"note: {n}" for n in result.notes)
    lines.append("")
    gating = [c for c in result.checks if c.gating]
    failed = sum(1 for c in gating if not c.passed)
    verdict = "PASS" if result.passed else "FAIL"
    lines.append(f"overall: {verdict} ({len(gating) - failed}/{len(gating)} gating checks passed)")
    return "\n".join(lines)


def write_artifacts(result: ExperimentResult, ctx: ExperimentContext, out: Path) -> ReportWriter:
    writer = ReportWriter(out, ctx.provenance_header())
    header, rows = result.results if result.results is not None else (["note"], [])
    writer.write_csv("results.csv", header, rows)
    for name, (side_header, side_rows) in sorted(result.tables.items()):
        writer.write_csv(name, side_header, side_rows)
    for name, payload in sorted(result.documents.items()):
        writer.write_json(name, payload)
    writer.write_json(
        "summary.json",
        {
            "experiment": result.experiment,
            "statements": list(result.statements),
            "checks": [c.to_dict() for c in result.checks],
            "passed": result.passed,
            "metrics": result.metrics,
            "notes": result.notes,
            "provenance": writer.provenance,
            "config": ctx.config.model_dump(),
        },
    )
    writer.write_text("summary.txt", summary_text(result))
    return writer


def run(config: ExperimentConfig, settings: Optional[Config] = None) -> int:
    """
    Execute one experiment and write its reports

    Args:
        config: Validated experiment config
        settings: Process settings; read from the environment when omitted

    Returns:
        0 if every gating check passed, 1 if one failed or a solver error
        aborted the run, 2 for configuration errors
    """
    settings = settings or get_config()
    ctx = ExperimentContext(config, settings)
    out = output_dir(config, settings)

    logger.info("=" * 60)
    logger.info("margin-paths experiment: %s", config.experiment)
    logger.info("=" * 60)
    logger.info("Seed: %d", ctx.seed)
    logger.info("Threads: %d", ctx.threads)
    logger.info("Output: %s", out)
    logger.info("Config hash: %s", config.fingerprint())
    logger.info("=" * 60)

    started = time.perf_counter()
    try:
        result = REGISTRY[config.experiment](ctx)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        for line in e.diagnostics:
            logger.error("  %s", line)
        return EXIT_CONFIG
    except MarginPathsError as e:
        logger.exception("Experiment %s aborted: %s", config.experiment, e)
        return EXIT_FAILED
    elapsed = time.perf_counter() - started

    write_artifacts(result, ctx, out)
    gating = [c for c in result.checks if c.gating]
    failed = [c for c in gating if not c.passed]
    logger.info("=" * 60)
    logger.info(
        "Finished %s in %.1fs: %d/%d gating checks passed",
        config.experiment,
        elapsed,
        len(gating) - len(failed),
        len(gating),
    )
    logger.info("=" * 60)
    return EXIT_OK if result.passed else EXIT_FAILED
