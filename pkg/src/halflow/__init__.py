"""Half-harmonic gradient flow on the circle and a numerical verification lab."""

__version__ = "0.1.0"
