"""pugil: rolling-horizon CMA-ES control of planar sparring characters."""

from pugil.config import Config, ConfigError, load_config

__all__ = ["Config", "ConfigError", "load_config"]
__version__ = "0.1.0"
