import os
import logging
import logging.config
import yaml
from monotone_peridynamics.config.config import ENV, LOG_DIR

PACKAGE_LOGGER = 'monotone_peridynamics'


class ColorAwareFormatter(logging.Formatter):
    """Formatter that swaps in the coloured message variant on the console handler.

    File handlers use a plain formatter, so colour codes never reach log files.
    """

    def format(self, record):
        colored_text = getattr(record, 'colored_text', None)
        if colored_text is None:
            return super().format(record)

        original_msg, original_args = record.msg, record.args
        record.msg, record.args = colored_text, None
        try:
            return super().format(record)
        finally:
            record.msg, record.args = original_msg, original_args


def _configure_log_directory() -> tuple:
    """Create and return the package directory and the logs directory"""
    base_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    logs_dir = os.path.abspath(LOG_DIR)
    if ENV == 'production':
        os.makedirs(logs_dir, exist_ok=True)
    return base_dir, logs_dir


def _load_logging_config(config_path: str) -> dict:
    """Load the logging configuration from YAML file"""
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Logging configuration file not found at: {config_path}")

    with open(config_path, 'rt') as f:
        return yaml.safe_load(f)


def _configure_dev_logging(config: dict) -> dict:
    """Drop the file handler everywhere: development logs go to the console only"""
    config['handlers'].pop('file', None)

    for logger_config in config.get('loggers', {}).values():
        handlers = logger_config.get('handlers', [])
        logger_config['handlers'] = [h for h in handlers if h != 'file']

    if 'root' in config and 'handlers' in config['root']:
        config['root']['handlers'] = [h for h in config['root']['handlers'] if h != 'file']

    return config


def _configure_prod_logging(config: dict, logs_dir: str) -> dict:
    """Point the file handler at the environment's log file"""
    config['handlers']['file']['filename'] = os.path.join(logs_dir, f'{ENV}.log')
    return config


def setup_logging(verbosity: int = 0):
    """Initialize logging configuration for the current environment

    Args:
        verbosity: 0 keeps the configured INFO level, 1 or more switches the
            package logger to DEBUG
    """
    base_dir, logs_dir = _configure_log_directory()

    config_path = os.path.join(base_dir, 'config', 'logging', 'logging.yaml')
    config = _load_logging_config(config_path)

    if ENV == 'production':
        config = _configure_prod_logging(config, logs_dir)
    else:
        config = _configure_dev_logging(config)

    if verbosity > 0:
        config['loggers'][PACKAGE_LOGGER]['level'] = 'DEBUG'

    logging.config.dictConfig(config)


def get_logger(module_name: str) -> logging.Logger:
    """Get a logger with standardized naming"""
    if module_name == PACKAGE_LOGGER or module_name.startswith(f'{PACKAGE_LOGGER}.'):
        return logging.getLogger(module_name)
    return logging.getLogger(f'{PACKAGE_LOGGER}.{module_name}')
