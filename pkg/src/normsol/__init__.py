"""Normalized radial solutions of -Lap u - g(u) = lambda u, |u|_2 = 1, for power-sum g."""
__version__ = "0.1.0"
