"""Dynamic test-time planning for sequential decision-making agents."""

__version__ = "0.1.0"
