"""Fractional-linear first integrals of geodesic flows on surfaces."""

__version__ = "0.1.0"
