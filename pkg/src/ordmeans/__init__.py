"""Order-restricted estimation and likelihood-ratio testing of monotone normal means."""

__version__ = "0.1.0"
