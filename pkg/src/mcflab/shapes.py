"""Initial geometries that are not exact solutions."""

from __future__ import annotations

import numpy as np

from .frame import FlowFrame, build_curve_frame, build_rotational_frame, resample_arclength


def circle_points(radius=1.0, n=256, center=(0.0, 0.0)):
    th = np.arange(n) * (2 * np.pi / n)
    return np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])


def ellipse_points(a, b, n=256):
    th = np.arange(n) * (2 * np.pi / n)
    return np.column_stack([a * np.cos(th), b * np.sin(th)])


def semicircle_profile(radius=1.0, n=129):
    th = np.linspace(0.0, np.pi, n)
    return np.column_stack([-radius * np.cos(th), radius * np.sin(th)])


def ellipse_profile(a, b, n=129):
    """Meridian of the ellipsoid of revolution with semi-axis ``a`` along the axis."""
    th = np.linspace(0.0, np.pi, n)
    return np.column_stack([-a * np.cos(th), b * np.sin(th)])


def perturbed_profile(amplitude=0.1, n=129, mode=2):
    """Meridian of the polar curve ``rho = 1 + amplitude * cos(mode * theta)``."""
    th = np.linspace(0.0, np.pi, n)
    rho = 1.0 + amplitude * np.cos(mode * th)
    return np.column_stack([-rho * np.cos(th), rho * np.sin(th)])


def perturbed_sphere_frame(d=2, amplitude=0.1, n=81, t=0.0) -> FlowFrame:
    """Perturbed sphere, resampled to uniform meridian arclength."""
    frame = build_rotational_frame(perturbed_profile(amplitude, n), d, t)
    return resample_arclength(frame, n)


def perturbed_circle_frame(amplitude=0.1, n=128, mode=2, t=0.0) -> FlowFrame:
    th = np.arange(n) * (2 * np.pi / n)
    rho = 1.0 + amplitude * np.cos(mode * th)
    return build_curve_frame(np.column_stack([rho * np.cos(th), rho * np.sin(th)]), t)
