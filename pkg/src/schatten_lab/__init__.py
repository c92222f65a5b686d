"""Schatten-class ball geometry, random-matrix samplers and limit laws."""

__version__ = "0.1.0"
