"""stepahead: learn procedural knowledge from recipe text and anticipate
future steps of unseen procedures, from text context or from precomputed
video-segment features."""

__version__ = "0.1.0"
