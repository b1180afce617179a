"""Compiled inner loops for the alignment stress (one moving cluster vs. the rest)."""
import numpy as np
from numba import njit


@njit(cache=True)
def partial_stress(p, z, target):
    """sum_{l,m} (target[l, m] - |p_l - z_m|)^2"""
    total = 0.0
    for l in range(p.shape[0]):
        px = p[l, 0]
        py = p[l, 1]
        for m in range(z.shape[0]):
            dx = px - z[m, 0]
            dy = py - z[m, 1]
            r = target[l, m] - np.sqrt(dx * dx + dy * dy)
            total += r * r
    return total


@njit(cache=True)
def partial_stress_grad(p, z, target):
    """Stress and its gradient with respect to a common translation of ``p``."""
    total = 0.0
    gx = 0.0
    gy = 0.0
    for l in range(p.shape[0]):
        px = p[l, 0]
        py = p[l, 1]
        for m in range(z.shape[0]):
            dx = px - z[m, 0]
            dy = py - z[m, 1]
            d = np.sqrt(dx * dx + dy * dy)
            r = target[l, m] - d
            total += r * r
            if d > 0.0:
                f = -2.0 * r / d
                gx += f * dx
                gy += f * dy
    return total, gx, gy


@njit(cache=True)
def rotated_stress(c, w, flip, theta, z, target):
    """Stress of centred coords ``c`` under rotation ``theta``, optional flip, shift ``w``."""
    cs = np.cos(theta)
    sn = np.sin(theta)
    sgn = -1.0 if flip else 1.0
    total = 0.0
    for l in range(c.shape[0]):
        px = cs * c[l, 0] + sn * c[l, 1] + w[0]
        py = sgn * (-sn * c[l, 0] + cs * c[l, 1]) + w[1]
        for m in range(z.shape[0]):
            dx = px - z[m, 0]
            dy = py - z[m, 1]
            r = target[l, m] - np.sqrt(dx * dx + dy * dy)
            total += r * r
    return total


@njit(cache=True)
def angle_scan(c, w, flip, angles, z, target):
    out = np.empty(angles.shape[0])
    for a in range(angles.shape[0]):
        out[a] = rotated_stress(c, w, flip, angles[a], z, target)
    return out
