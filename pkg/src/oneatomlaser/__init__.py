"""Strongly driven one-atom laser: effective two-level model, closed-form
solution and numerical checks against the full three-level Lambda atom."""

__version__ = "0.1.0"
