"""Sensor placement, loss landscapes and catastrophic interference for a
two-sensor phototaxis robot."""

__version__ = "0.1.0"
