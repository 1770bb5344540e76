import argparse
import glob
import logging
import os
import sys

import questionary

from lab.config import EXPERIMENTS, SECTION_OF
from lab.harness import run_from_path
from lab.settings import TOOL_NAME

CONFIG_DIR = "configs"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# flag -> (section, key); the section "*" means the subcommand's own section
FLAG_KEYS = {
    "seed": ("experiment", "seed"),
    "threads": ("experiment", "threads"),
    "out": ("experiment", "output"),
    "process": ("*", "process"),
    "radii": ("*", "radii"),
    "nu": ("*", "nu"),
    "target": ("*", "target"),
    "levels": ("*", "levels"),
    "trials": ("*", "trials"),
    "gauge": ("*", "gauge"),
    "depth": ("*", "depth"),
    "mass": ("*", "mass"),
}
SUBCOMMAND_FLAGS = {
    "cover": ("process", "radii", "nu", "target", "levels", "trials"),
    "percolate": ("gauge", "depth", "trials", "mass"),
}


def safe_ask(question):
    answer = question.ask()
    if answer is None:
        print("Cancelled.")
        sys.exit(0)
    return answer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL_NAME, description="Rational approximation on the Cantor set.")
    parser.add_argument("--log-level", default="INFO")
    subparsers = parser.add_subparsers(dest="command")
    for name in EXPERIMENTS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", required=True)
        sub.add_argument("--seed")
        sub.add_argument("--threads")
        sub.add_argument("--out")
        sub.add_argument("--resume", action="store_true")
        sub.add_argument("--no-progress", action="store_true")
        for flag in SUBCOMMAND_FLAGS.get(name, ()):
            sub.add_argument(f"--{flag}")
    return parser


def collect_overrides(args) -> dict:
    section = SECTION_OF.get(args.command, args.command)
    overrides = {"experiment.name": args.command}
    for flag, (part, key) in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[f"{section if part == '*' else part}.{key}"] = value
    if args.no_progress:
        overrides["experiment.progress"] = "false"
    return overrides


def pick_interactively() -> list:
    configs = sorted(glob.glob(os.path.join(CONFIG_DIR, "*.ini")))
    if not configs:
        print(f"No config files found in {CONFIG_DIR}/.")
        sys.exit(2)
    command = safe_ask(questionary.select("Select which experiment you want to run:", choices=list(EXPERIMENTS)))
    path = safe_ask(questionary.select("Choose a config file:", choices=configs))
    argv = [command, "--config", path]
    if safe_ask(questionary.confirm("Resume from the checkpoint if there is one?", default=False)):
        argv.append("--resume")
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        args = parser.parse_args(argv + pick_interactively())
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)
    return run_from_path(args.config, collect_overrides(args), resume_run=args.resume)


if __name__ == "__main__":
    sys.exit(main())
