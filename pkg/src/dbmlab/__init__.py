"""Numerical laboratory for deformed GOE matrices and Dyson Brownian motion."""

from __future__ import annotations

__version__ = "0.1.0"
