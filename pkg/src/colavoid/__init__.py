"""Online controller synthesis for collision avoidance under distribution shift."""

__version__ = "0.1.0"
