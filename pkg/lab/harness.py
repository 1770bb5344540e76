"""Runs a validated experiment, writes its results and maps failures to exit codes."""

import logging
from typing import Mapping, Optional

from lab.config import ExperimentConfig, validate_config
from lab.errors import ConfigError, LabError
from lab.experiments import RUNNERS
from lab.foundations import RandomStream
from lab.reporting import generate_excel_report, write_csv
from lab.settings import ARTIFACT_VERSION, TOOL_NAME

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def output_header(config: ExperimentConfig) -> dict:
    return {
        "tool": TOOL_NAME,
        "experiment": config.name,
        "config_hash": config.config_hash,
        "seed": config.seed,
        "artifact_version": ARTIFACT_VERSION,
    }


def execute(config: ExperimentConfig) -> dict:
    """Run the experiment and write the CSV (and Excel report when asked). Raises on failure."""
    logger.info("Starting %s (config hash %s, seed %d, %d threads)",
                config.name, config.config_hash[:12], config.seed, config.threads)
    tables = RUNNERS[config.name](config, RandomStream(config.seed))
    header = output_header(config)
    name, frame = next(iter(tables.items()))
    write_csv(frame, config.output, header)
    if config.excel_report:
        generate_excel_report(config.excel_report, tables, header)
    logger.info("Finished %s: %d rows in %s table written to %s (config hash %s)",
                config.name, len(frame), name, config.output, config.config_hash[:12])
    return tables


def _guarded(action) -> int:
    try:
        action()
        return EXIT_OK
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        logger.warning("Run interrupted by user.")
        return EXIT_RUNTIME
    except LabError as e:
        logger.error("Run failed: %s: %s", e.__class__.__name__, e)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("Unexpected failure: %s: %s", e.__class__.__name__, e)
        return EXIT_RUNTIME


def run(config: ExperimentConfig) -> int:
    return _guarded(lambda: execute(config))


def resume(config: ExperimentConfig) -> int:
    """Continue a census from its checkpoint; other experiments simply run again."""
    def action():
        if not config.checkpoint:
            raise ConfigError("checkpoint", "resume needs a checkpoint path")
        if config.name != "census":
            logger.info("%s has no checkpointed work units, running it from the start", config.name)
        execute(config)

    return _guarded(action)


def run_from_path(path: str, overrides: Optional[Mapping[str, str]] = None, resume_run: bool = False) -> int:
    try:
        config = validate_config(path, overrides)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    return resume(config) if resume_run else run(config)
