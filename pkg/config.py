import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

class Config:
    """Configuration settings for the trigonometric equivalence lab"""

    # Application Settings
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
    DEFAULT_SEED = int(os.getenv('DEFAULT_SEED', '20240601'))
    SCHEMA_VERSION = os.getenv('SCHEMA_VERSION', '1.0')

    # Numerical tolerances
    SERIES_TOLERANCE = float(os.getenv('SERIES_TOLERANCE', '1e-12'))

    # Block error law: eps_k <= K * 2^-k, truncation <= K' * 2^-(k+1)
    BLOCK_ERROR_CONSTANT = float(os.getenv('BLOCK_ERROR_CONSTANT', '1.5'))
    TRUNCATION_CONSTANT = float(os.getenv('TRUNCATION_CONSTANT', '2.0'))

    # Plan size limits
    MAX_EMITTED_TERMS = int(os.getenv('MAX_EMITTED_TERMS', '250000'))
    MAX_MATERIALIZED_TERMS = int(os.getenv('MAX_MATERIALIZED_TERMS', '2000000'))
    MAX_SCANNED_TERMS = int(os.getenv('MAX_SCANNED_TERMS', '50000000'))
    SMALL_BLOCK_TERMS = int(os.getenv('SMALL_BLOCK_TERMS', '4096'))

    # Exhaustive vs sampled cell checks
    EXHAUSTIVE_CELL_LIMIT = int(os.getenv('EXHAUSTIVE_CELL_LIMIT', '200000'))
    CELL_SAMPLE_SIZE = int(os.getenv('CELL_SAMPLE_SIZE', '4096'))

    # Convergence lab
    KS_ROUND_DECIMALS = int(os.getenv('KS_ROUND_DECIMALS', '9'))
    # weight_check flags C(N) above DOUBLING_FACTOR times the log^2 weight's C(N)
    DOUBLING_FACTOR = float(os.getenv('DOUBLING_FACTOR', '2.0'))

    # Testing Configuration
    TESTING = os.getenv('TESTING', 'False').lower() == 'true'

class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = 'DEBUG'

class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    LOG_LEVEL = 'WARNING'
    EXHAUSTIVE_CELL_LIMIT = 20000
    CELL_SAMPLE_SIZE = 512

class ProductionConfig(Config):
    """Production configuration"""
    LOG_LEVEL = 'INFO'

config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': Config
}

_DEFAULTS = {key: value for key, value in vars(Config).items() if key.isupper()}


def activate(name: str) -> type:
    """Make the overrides of a named profile current for this process"""
    if name not in config:
        raise KeyError(f"Unknown configuration profile '{name}'")
    profile = config[name]
    overrides = dict(_DEFAULTS)
    if profile is not Config:
        overrides.update({key: value for key, value in vars(profile).items() if key.isupper()})
    for key, value in overrides.items():
        setattr(Config, key, value)
    return profile
