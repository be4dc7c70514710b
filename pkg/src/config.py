"""Configuration for ChoiMap"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
_repo_root = Path(__file__).parent.parent.resolve()
_env_file = _repo_root / ".env"
if _env_file.exists():
    load_dotenv(_env_file)

# Base directory
BASE_DIR = Path(__file__).parent.resolve()
REPO_ROOT = _repo_root

# Presets shipped in-repo (config/presets/*.yaml)
PRESETS_DIR = Path(os.getenv("CHOIMAP_PRESETS_DIR", str(_repo_root / "config" / "presets")))

# Output
OUTPUT_DIR = os.getenv("CHOIMAP_OUTPUT_DIR", "runs")
THREADS = int(os.getenv("CHOIMAP_THREADS", "1"))

# Numerical defaults
QUADRATURE_POINTS = int(os.getenv("CHOIMAP_QUADRATURE_POINTS", "20000"))  # per smooth panel
LR_SAFETY = float(os.getenv("CHOIMAP_LR_SAFETY", "1.5"))
KAPPA_MAX = float(os.getenv("CHOIMAP_KAPPA_MAX", "1e10"))
MEMORY_EPSILON = float(os.getenv("CHOIMAP_MEMORY_EPSILON", "1e-3"))
FIXED_POINT_GAP = 1e-10

# Dense many-body caps
ED_MAX_MODES = int(os.getenv("CHOIMAP_ED_MAX_MODES", "14"))
RDM_MAX_MODES = int(os.getenv("CHOIMAP_RDM_MAX_MODES", "12"))

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "logs/choimap.log")

# Debug
DEBUG = os.getenv("DEBUG", "false").lower() == "true"
