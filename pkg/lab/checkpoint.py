"""Census checkpoints: ``# config_hash: <hex>`` then one ``j mu q count`` line per finished denominator."""

import logging
import os
import tempfile
from typing import Dict, Tuple

from lab.errors import CheckpointMismatchError, ConfigError

logger = logging.getLogger(__name__)

UnitKey = Tuple[int, str, int]
HEADER_PREFIX = "# config_hash: "


def load_checkpoint(path: str, config_hash: str) -> Dict[UnitKey, int]:
    """Finished census units; a missing or empty file means nothing is done yet."""
    if not path or not os.path.exists(path):
        return {}
    with open(path, "r", encoding="utf-8") as file:
        lines = file.read().splitlines()
    if not lines:
        return {}
    if not lines[0].startswith(HEADER_PREFIX):
        raise ConfigError("checkpoint", f"{path} has no config hash header")
    found = lines[0][len(HEADER_PREFIX):].strip()
    if found != config_hash:
        raise CheckpointMismatchError(config_hash, found)
    done = {}
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise ConfigError("checkpoint", f"line {number} of {path} is malformed")
        j, mu, q, count = parts
        done[(int(j), mu, int(q))] = int(count)
    logger.info("Loaded %d finished units from %s", len(done), path)
    return done


def save_checkpoint(path: str, config_hash: str, done: Dict[UnitKey, int]):
    """Write the checkpoint to a temporary file next to ``path`` and move it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, temp_path = tempfile.mkstemp(prefix=".checkpoint-", dir=directory)
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="\n") as file:
            file.write(f"{HEADER_PREFIX}{config_hash}\n")
            for (j, mu, q), count in sorted(done.items(), key=lambda item: (item[0][0], item[0][1], item[0][2])):
                file.write(f"{j} {mu} {q} {count}\n")
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
