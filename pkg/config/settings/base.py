"""
Settings for the style-moments project.

Every value can be overridden through the environment or a `.env` file at the
repository root.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# Load environment variables from .env file
load_dotenv(BASE_DIR / '.env')

LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO').upper()
LOG_FORMAT = os.environ.get('LOG_FORMAT', 'text').lower()

# Intra-op threads for torch; fixed so reductions keep the same order across runs
TORCH_NUM_THREADS = int(os.environ.get('TORCH_NUM_THREADS', 4))

# Thread-pool width used to stylize the items of one batch
STYLIZE_WORKERS = int(os.environ.get('STYLIZE_WORKERS', 1))

# Query rows per block of the similarity kernel
EVAL_BLOCK_SIZE = int(os.environ.get('EVAL_BLOCK_SIZE', 512))

# Images per encoder forward pass when embedding a grid
EMBED_BATCH_SIZE = int(os.environ.get('EMBED_BATCH_SIZE', 64))

# Held-out grids start here unless told otherwise
DEFAULT_EVAL_SEED_BASE = int(os.environ.get('DEFAULT_EVAL_SEED_BASE', 1_000_000))

# Shuffles of the permutation oracle behind the chance levels in reports
CHANCE_SHUFFLES = int(os.environ.get('CHANCE_SHUFFLES', 10_000))
