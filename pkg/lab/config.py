"""
Experiment configuration: INI files with one ``[experiment]`` section and one
section per subcommand.

Every key has a parser, a default (``REQUIRED`` when there is none) and an
optional range check. Values are hashed as the text they were given in, after
defaults and command-line overrides are applied.
"""

import configparser
import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

from lab.errors import ConfigError
from lab.gauges import GaugeFn, RadiiFamily
from lab.rational_census import ALGORITHMS, parse_mu
from lab.settings import DEFAULT_SEED, DEFAULT_THREADS

logger = logging.getLogger(__name__)

REQUIRED = object()
EXPERIMENTS = ("census", "base-b-census", "exponent", "gauge", "cover", "percolate")
SECTION_OF = {"base-b-census": "base_b"}
UNHASHED_KEYS = {"threads", "output", "checkpoint", "progress", "excel_report"}


# ----------------- VALUE PARSERS ----------------- #

def parse_bool(text: str) -> bool:
    token = text.strip().lower()
    if token in ("1", "true", "yes", "on"):
        return True
    if token in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def parse_levels(text: str) -> Tuple[int, ...]:
    """``6..13``, ``4`` or ``1,3,5``."""
    text = text.strip()
    if ".." in text:
        first, _, last = text.partition("..")
        return tuple(range(int(first), int(last) + 1))
    return tuple(int(part) for part in text.split(",") if part.strip())


def parse_list(item: Callable[[str], Any]) -> Callable[[str], Tuple[Any, ...]]:
    def parse(text: str) -> Tuple[Any, ...]:
        return tuple(item(part.strip()) for part in text.split(",") if part.strip())

    return parse


def parse_choice(*choices: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        token = text.strip()
        if token not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}, got {token!r}")
        return token

    return parse


def parse_optional(item: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        return item(text) if text.strip() else None

    return parse


def parse_dyadic_union(text: str) -> Tuple[Tuple[Fraction, Fraction], ...]:
    """``0,1/4; 1/2,3/4`` as a tuple of [a, b) pieces."""
    pieces = []
    for chunk in text.split(";"):
        if chunk.strip():
            a, b = chunk.split(",")
            pieces.append((Fraction(a.strip()), Fraction(b.strip())))
    return tuple(pieces)


def _positive(value) -> bool:
    return value > 0


def _nonnegative_mus(values) -> bool:
    return all(mu == math.inf or mu >= 0 for mu in values)


def _levels_ok(values) -> bool:
    return bool(values) and all(level >= 0 for level in values)


@dataclass(frozen=True)
class Option:
    parse: Callable[[str], Any]
    default: Any = REQUIRED
    check: Optional[Callable[[Any], bool]] = None
    expect: str = ""


SCHEMA: Dict[str, Dict[str, Option]] = {
    "experiment": {
        "name": Option(parse_choice(*EXPERIMENTS)),
        "seed": Option(int, str(DEFAULT_SEED), lambda v: 0 <= v < 2 ** 64, "a 64-bit unsigned integer"),
        "threads": Option(int, str(DEFAULT_THREADS), _positive, "at least 1"),
        "output": Option(str, ""),
        "checkpoint": Option(str, ""),
        "progress": Option(parse_bool, "true"),
        "excel_report": Option(str, ""),
        "record_timing": Option(parse_bool, "false"),
    },
    "census": {
        "levels": Option(parse_levels, "1..5", lambda v: bool(v) and min(v) >= 1, "levels of at least 1"),
        "mu": Option(parse_list(parse_mu), "inf", _nonnegative_mus, "nonnegative exponents"),
        "algorithm": Option(parse_choice(*ALGORITHMS), "walk"),
        "membership": Option(parse_bool, "true"),
    },
    "base_b": {
        "base": Option(int, "3", lambda v: v >= 2, "at least 2"),
        "levels": Option(parse_levels, "1..6", lambda v: bool(v) and min(v) >= 1, "levels of at least 1"),
    },
    "exponent": {
        "kind": Option(parse_choice("lsv", "convergents", "vb")),
        "mu": Option(Fraction, "3", lambda v: v >= 2, "at least 2"),
        "J": Option(int, "5", _positive, "at least 1"),
        "x": Option(Fraction, "1/4", lambda v: 0 <= v, "nonnegative"),
        "base": Option(int, "3", lambda v: v >= 2, "at least 2"),
    },
    "gauge": {
        "kind": Option(parse_choice("series", "precprec", "precphi", "doubling")),
        "series": Option(parse_choice("r/g", "hr/g"), "r/g"),
        "g": Option(GaugeFn.parse, "r^0.5"),
        "h": Option(parse_optional(GaugeFn.parse), ""),
        "phi": Option(parse_optional(GaugeFn.parse), ""),
        "radii": Option(RadiiFamily.parse, "power:1"),
        "N": Option(int, "10000", _positive, "at least 1"),
        "J": Option(int, "40", _positive, "at least 1"),
    },
    "cover": {
        "experiment": Option(
            parse_choice(
                "scale_census", "nested_depth", "coverage", "theta", "hit_cells",
                "mixed_model", "vb_model", "deterministic",
            ),
            "scale_census",
        ),
        "process": Option(str, "iid_circle"),
        "radii": Option(RadiiFamily.parse, "power:1"),
        "nu": Option(float, "1.5", _positive, "positive"),
        "target": Option(parse_choice("circle", "cantor"), "cantor"),
        "levels": Option(parse_levels, "6..13", _levels_ok, "nonnegative levels"),
        "trials": Option(int, "200", _positive, "at least 1"),
        "N": Option(int, "1000000", _positive, "at least 1"),
        "v": Option(int, "3", lambda v: 1 <= v <= 6, "between 1 and 6"),
        "path": Option(parse_list(int), "0,0,0"),
        "mode": Option(parse_choice("floor", "ceiling"), "ceiling"),
        "n_max": Option(int, "10000", _positive, "at least 1"),
        "mu": Option(parse_list(float), "2,2.5,3,4", lambda v: bool(v) and min(v) > 0, "positive exponents"),
        "rule": Option(parse_choice("triadic", "exact", "none"), "triadic"),
        "base": Option(int, "3", lambda v: v >= 2, "at least 2"),
        "count": Option(int, "1024", _positive, "at least 1"),
        "max_index": Option(int, "64", _positive, "at least 1"),
    },
    "percolate": {
        "mode": Option(parse_choice("trees", "summary", "product", "hit"), "trees"),
        "gauge": Option(GaugeFn.parse, "r^0.5"),
        "h": Option(GaugeFn.parse, "r^0.4"),
        "depth": Option(int, "12", lambda v: 0 <= v <= 40, "between 0 and 40"),
        "trials": Option(int, "1000", _positive, "at least 1"),
        "mass": Option(parse_choice("lebesgue", "cantor"), "lebesgue"),
        "hit_set": Option(parse_dyadic_union, "0,1/8"),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    threads: int
    output: str
    checkpoint: str
    progress: bool
    excel_report: str
    record_timing: bool
    params: Mapping[str, Any] = field(default_factory=dict)
    raw: Mapping[str, str] = field(default_factory=dict)

    @property
    def section(self) -> str:
        return SECTION_OF.get(self.name, self.name)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: Mapping[str, str]) -> str:
    """SHA-256 over sorted ``section.key=value`` lines, leaving out keys that do not change results."""
    lines = [
        f"{key}={value}"
        for key, value in sorted(raw.items())
        if key.partition(".")[2] not in UNHASHED_KEYS or not key.startswith("experiment.")
    ]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def _read_parser(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(strict=True, interpolation=None)
    parser.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as file:
            parser.read_file(file)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"{e.section}.{e.option}", "duplicate key") from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(e.section, "duplicate section") from None
    except configparser.Error as e:
        raise ConfigError("config", str(e)) from None
    return parser


def _parse_value(section: str, key: str, text: str) -> Any:
    option = SCHEMA[section][key]
    try:
        value = option.parse(text)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(key, f"cannot read {text!r}: {e}") from None
    except Exception as e:
        raise ConfigError(key, f"cannot read {text!r}: {e.__class__.__name__}: {e}") from None
    if option.check is not None and value is not None and not option.check(value):
        raise ConfigError(key, f"out of range: {text!r} (expected {option.expect})")
    return value


def validate_config(path: str, overrides: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Parse, default and range-check a config file; ``overrides`` map ``section.key`` to text."""
    parser = _read_parser(path)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")

    texts: Dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser[section].items():
            texts[f"{section}.{key}"] = value.strip()
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(dotted, "unknown key")
        texts[dotted] = str(value).strip()

    if "experiment.name" not in texts:
        raise ConfigError("name", "missing required key")
    name = _parse_value("experiment", "name", texts["experiment.name"])
    section = SECTION_OF.get(name, name)
    for other in SCHEMA:
        if other not in ("experiment", section) and any(key.startswith(other + ".") for key in texts):
            raise ConfigError(other, f"section does not apply to experiment {name!r}")

    raw: Dict[str, str] = {}
    values: Dict[str, Any] = {}
    for part in ("experiment", section):
        for key, option in SCHEMA[part].items():
            dotted = f"{part}.{key}"
            text = texts.get(dotted, option.default)
            if text is REQUIRED:
                raise ConfigError(key, "missing required key")
            raw[dotted] = text
            values[dotted] = _parse_value(part, key, text)

    output = values["experiment.output"] or os.path.join("results", f"{name}.csv")
    config = ExperimentConfig(
        name=name,
        seed=values["experiment.seed"],
        threads=values["experiment.threads"],
        output=output,
        checkpoint=values["experiment.checkpoint"],
        progress=values["experiment.progress"],
        excel_report=values["experiment.excel_report"],
        record_timing=values["experiment.record_timing"],
        params={key.partition(".")[2]: value for key, value in values.items() if key.startswith(section + ".")},
        raw=raw,
    )
    logger.debug("Loaded %s config from %s (hash %s)", name, path, config.config_hash)
    return config
