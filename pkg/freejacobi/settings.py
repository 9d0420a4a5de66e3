"""
Runtime settings for the freejacobi toolkit.
Values are read from the environment, optionally seeded from a dotenv file.
"""

import logging
import logging.config
import os
from typing import Optional

from dotenv import load_dotenv

# Load environment variables based on debug mode
if os.getenv("DEBUG_MODE", "false").lower() == "true":
    load_dotenv('.env.development')
else:
    load_dotenv('.env')

DEBUG = os.getenv("DEBUG_MODE", "false").lower() == "true"

# Numerical defaults
GRID_SIZE = int(os.getenv("FREEJACOBI_GRID", "4096"))
# Grid steps on each side of a support edge covered by the graded zone
EDGE_REFINEMENT = int(os.getenv("FREEJACOBI_EDGE_REFINEMENT", "128"))
SERIES_ORDER = int(os.getenv("FREEJACOBI_SERIES_ORDER", "32"))
FAN_SIZE = int(os.getenv("FREEJACOBI_FAN", "512"))
MASS_TOLERANCE = float(os.getenv("FREEJACOBI_MASS_TOL", "1e-6"))

# Worker cap; the CLI --threads flag takes precedence
THREADS = max(1, int(os.getenv("FREEJACOBI_THREADS", str(os.cpu_count() or 1))))

LOG_LEVEL = os.getenv("FREEJACOBI_LOG_LEVEL", "DEBUG" if DEBUG else "INFO").upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}


def configure_logging(level: Optional[str] = None) -> None:
    """Apply the LOGGING config. Entry points call this, library modules never do."""
    config = dict(LOGGING)
    config['root'] = dict(LOGGING['root'], level=(level or LOG_LEVEL).upper())
    logging.config.dictConfig(config)
