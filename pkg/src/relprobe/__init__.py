"""relprobe: relation-extraction sentence encoders and linguistic probing tasks."""

__version__ = "0.1.0"
