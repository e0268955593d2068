"""Safety-aware informative motion planning for a LIP-model biped."""

__version__ = "0.1.0"
