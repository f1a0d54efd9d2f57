"""Static architecture metrics for block-diagram controllers and STL falsification."""

__version__ = "0.1.0"
