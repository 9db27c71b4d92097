"""Spiking neural network classification of protein sequences."""

__version__ = "0.1.0"
