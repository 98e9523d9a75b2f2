import os
import logging
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Predictor defaults
DATASET_ENV = 'PREDICTOR_DATASET_DIR'
DEFAULT_GAMMA = float(os.getenv('PREDICTOR_GAMMA', 0.1))
DEFAULT_PERCENTILE = float(os.getenv('PREDICTOR_PERCENTILE', 0.90))

# Operational boundaries measured on the reference quad-core platform
BOUNDARY_DEFAULTS = {
    'cpu_limit': float(os.getenv('PREDICTOR_CPU_LIMIT', 0.94)),
    'io_limit': float(os.getenv('PREDICTOR_IO_LIMIT', 1.00)),
    'llc_limit': float(os.getenv('PREDICTOR_LLC_LIMIT', 210000)),
}

LOG_LEVEL = os.getenv('PREDICTOR_LOG_LEVEL', 'INFO')
ADMISSION_WORKERS = int(os.getenv('PREDICTOR_WORKERS', 4))

# Guards for relative quantities
EPSILON = 1e-9
KKT_TOLERANCE = 1e-10

LOG_FORMAT = '%(asctime)s %(levelname)-7s %(name)s | %(message)s'


def configure_logging(level=None):
    """Configure root logging once for the command-line process"""
    level = (level or LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT, force=True)
    logging.getLogger(__name__).debug(f"⚙️ [Settings] Log level set to {level}")
    return level
