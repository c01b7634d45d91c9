"""Dynamic trust calibration for human-AI teams via contextual bandits."""

__version__ = "0.1.0"
