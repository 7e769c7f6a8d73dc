"""Pseudospectral laboratory for i u_t + Lambda^k u = -|u|^2 u on periodic grids."""

__version__ = "0.1.0"
