"""CSV results with a commented header block, and an optional Excel companion."""

import logging
import os
import tempfile
from typing import Dict, Mapping, Tuple

import pandas as pd
from openpyxl import Workbook

from lab.settings import CSV_FLOAT_FORMAT, CSV_LINE_TERMINATOR

logger = logging.getLogger(__name__)

HEADER_MARK = "# "


def write_csv(frame: pd.DataFrame, path: str, header: Mapping[str, object]):
    """Write ``# key: value`` lines, then the table; the final path only ever holds a complete file."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, temp_path = tempfile.mkstemp(prefix=".results-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as file:
            for key, value in header.items():
                file.write(f"{HEADER_MARK}{key}: {value}{CSV_LINE_TERMINATOR}")
            frame.to_csv(file, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator=CSV_LINE_TERMINATOR)
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
    logger.info("Wrote %d rows to %s", len(frame), path)


def read_results(path: str) -> Tuple[Dict[str, str], pd.DataFrame]:
    header = {}
    with open(path, "r", encoding="utf-8") as file:
        for line in file:
            if not line.startswith(HEADER_MARK):
                break
            key, _, value = line[len(HEADER_MARK):].rstrip("\n").partition(": ")
            header[key] = value
    return header, pd.read_csv(path, comment=None, skiprows=len(header))


def generate_excel_report(path: str, tables: Mapping[str, pd.DataFrame], header: Mapping[str, object]):
    if not tables:
        logger.info("No tables to save. Skipping Excel report.")
        return

    workbook = Workbook()

    run_sheet = workbook.active
    run_sheet.title = "Run"
    run_sheet.append(["key", "value"])
    for key, value in header.items():
        run_sheet.append([key, str(value)])

    for name, frame in tables.items():
        sheet = workbook.create_sheet(title=name[:31])
        sheet.append([str(column) for column in frame.columns])
        for row in frame.itertuples(index=False):
            sheet.append([_cell(value) for value in row])

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    workbook.save(path)
    logger.info("Excel report saved to: %s", path)


def _cell(value):
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and value != value:
        return None
    if isinstance(value, (int, float, str, bool)) or value is None:
        return value
    return str(value)
