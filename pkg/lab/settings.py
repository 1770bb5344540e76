import os

ARTIFACT_VERSION = "1.0.0"
TOOL_NAME = "cantorlab"

DEFAULT_SEED = 20240601
DEFAULT_THREADS = os.cpu_count() or 1

# tqdm look, shared by every progress bar
PROGRESS_NCOLS = 100
PROGRESS_COLOUR = "green"

CSV_FLOAT_FORMAT = "%.17g"
CSV_LINE_TERMINATOR = "\n"

# census checkpoint cadence in completed denominators
CHECKPOINT_EVERY = 256
