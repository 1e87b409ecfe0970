import copy
from typing import Dict, Optional

# Use default config but allow it to be overridden
_config: Optional[Dict] = None


def _deep_update(base: Dict, overrides: Dict) -> Dict:
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


def initialize_config():
    """Initialize the configuration with default values."""
    global _config
    if _config is None:
        import surfelreloc.default_config as default_config

        _config = copy.deepcopy(default_config.DEFAULT_CONFIG)


def set_config(config: Dict):
    """Update the configuration with custom values (nested sections are merged)."""
    global _config
    initialize_config()
    _deep_update(_config, config)


def reset_config():
    """Drop all overrides and return to the defaults."""
    global _config
    _config = None
    initialize_config()


def get_config() -> Dict:
    """Get a copy of the current configuration."""
    initialize_config()
    return copy.deepcopy(_config)


def merge_config(base: Dict, *overrides: Dict) -> Dict:
    """Deep copy of ``base`` with each override merged in order."""
    merged = copy.deepcopy(base)
    for override in overrides:
        _deep_update(merged, override or {})
    return merged
