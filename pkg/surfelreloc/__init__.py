"""Visual relocalization against surfel maps."""

__version__ = "0.1.0"
