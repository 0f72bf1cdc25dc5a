import os
from dotenv import load_dotenv

load_dotenv()


def _env_float(name, default):
    value = os.environ.get(name)
    return float(value) if value not in (None, '') else default


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value not in (None, '') else default


class Config:
    # Worker pool for sweep points and per-vertex cone reports
    THREADS = _env_int('NP_SPECTRA_THREADS', os.cpu_count() or 1)
    LOG_LEVEL = os.environ.get('NP_SPECTRA_LOG_LEVEL') or 'INFO'

    # Nystrom discretization
    PANELS_PER_ARC = 16
    REFINED_PANELS_PER_ARC = 24
    GAUSS_ORDER = 10
    GRADING_LEVELS = 4

    # Eigenvalue filtering
    TAU_IM = 1e-6
    TAU_MATCH = 1e-3
    FILTER_MARGIN = 0.05

    # xi sweep
    XI_MAX = _env_float('NP_SPECTRA_XI_MAX', 8.0)
    XI_STEPS = _env_int('NP_SPECTRA_XI_STEPS', 33)
    SLOPE_CAP = 0.25  # max |d lambda / d xi| accepted when stitching branches
    TERMINATION_BISECTIONS = 3

    # Weighted-space ladder used for mu estimation in energy mode
    ALPHA_LADDER = (0.8, 0.9)
    DEFAULT_ALPHA = 0.9

    # Mellin quadrature
    QUAD_TOL = 1e-11


class DevelopmentConfig(Config):
    LOG_LEVEL = os.environ.get('NP_SPECTRA_LOG_LEVEL') or 'DEBUG'


class ProductionConfig(Config):
    pass


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'default': ProductionConfig
}


def get_config(name=None):
    """Resolve a config class by name, falling back to NP_SPECTRA_ENV."""
    name = name or os.environ.get('NP_SPECTRA_ENV') or 'default'
    return config.get(name, config['default'])
