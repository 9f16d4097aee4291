"""
GeoGlimpse - command-line entry point
Vision-based geo-localization from first-person image sequences
"""
import logging.config
import sys

import torch

from src.cli import main
from src.config import LOGGING_CONFIG, get_env_config

env_config = get_env_config()
LOGGING_CONFIG['handlers']['console']['level'] = env_config['LOG_LEVEL']
LOGGING_CONFIG['handlers']['file']['filename'] = env_config['LOG_FILE']
logging.config.dictConfig(LOGGING_CONFIG)

logger = logging.getLogger('src')

if env_config['NUM_THREADS']:
    torch.set_num_threads(env_config['NUM_THREADS'])

if __name__ == '__main__':
    try:
        sys.exit(main(sys.argv[1:]))
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(130)
