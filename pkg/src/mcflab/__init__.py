"""Numerical mean curvature flow laboratory."""
