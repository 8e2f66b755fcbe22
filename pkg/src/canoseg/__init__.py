"""Toolkit for training and evaluating character-level canonical
morphological segmenters, optionally conditioned on fixed-length
representations of sentence translations."""

__version__ = "0.1.0"
