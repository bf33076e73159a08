from pathlib import Path

# Base directory of the project
BASE_DIR = Path(__file__).resolve().parent.parent

# Storage configuration
DATA_DIR = BASE_DIR / "data"
DB_PATH = DATA_DIR / "runs.db"
PACKAGE_DIR = BASE_DIR / "eigenmeasure"
TEMPLATE_DIR = PACKAGE_DIR / "templates" / "reports"
SPECS_DIR = BASE_DIR / "specs"

# Logging
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"

# Engine settings
ENGINE_CONFIG = {
    'budget': 10 ** 8,  # matrix entries (4 per matrix) held at once
    'jobs': 1,
    'chunk_rows': 1 << 16,
}

# Run store settings
STORE_CONFIG = {
    'retry_attempts': 3,
    'retry_min_wait': 0.1,
    'retry_max_wait': 2,
}

# Default sample ranges for measure and verify
DEFAULT_A_MAX = 2
DEFAULT_B_MAX = 3
