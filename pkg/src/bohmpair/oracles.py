"""Independent cross-checks for the analytic guidance formulas.

Everything here differentiates the wavefunction or the phase numerically and
never touches the models' closed-form velocity expressions, so agreement is
a genuine two-route check rather than a tautology.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def _stencil_steps(points: np.ndarray, h) -> np.ndarray:
    if h is None:
        return np.maximum(1e-6, 1e-8 * np.abs(points))
    return np.broadcast_to(np.asarray(h, dtype=float), points.shape).copy()


def velocity_from_psi(model, points: np.ndarray, t=0.0, h=None) -> np.ndarray:
    """(hbar/m) Im(grad psi / psi) by central differences of the wavefunction.

    ``points`` is an (n, dim) array of flat configurations; returns (n, dim)
    velocities.  The model only needs ``psi_values`` plus the geometry of its
    configuration vector.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, dim = pts.shape
    steps = _stencil_steps(pts, h)
    psi0 = _psi_flat(model, pts, t)
    grad = np.empty((n, dim), dtype=complex)
    for i in range(dim):
        shift = np.zeros_like(pts)
        shift[:, i] = steps[:, i]
        grad[:, i] = (_psi_flat(model, pts + shift, t)
                      - _psi_flat(model, pts - shift, t)) / (2.0 * steps[:, i])
    return (model.hbar / model.mass) * np.imag(grad / psi0[:, None])


def _psi_flat(model, pts: np.ndarray, t):
    half = pts.shape[1] // 2
    if half == 1:
        return model.psi_values(pts[:, 0], pts[:, 1], t)
    return model.psi_values(pts[:, :half], pts[:, half:], t)


def phase_gradient(model, points: np.ndarray, t=0.0, h=None) -> np.ndarray:
    """Central differences of the phase with wrap handling.

    The phase is defined modulo 2 pi hbar, so each difference is reduced to
    the nearest equivalent before dividing; for small steps the true
    difference is far below the wrap scale and the reduction is exact.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, dim = pts.shape
    steps = _stencil_steps(pts, h)
    wrap = TWO_PI * model.hbar
    out = np.empty((n, dim), dtype=float)
    for i in range(dim):
        shift = np.zeros_like(pts)
        shift[:, i] = steps[:, i]
        diff = _phase_flat(model, pts + shift, t) - _phase_flat(model, pts - shift, t)
        diff -= wrap * np.round(diff / wrap)
        out[:, i] = diff / (2.0 * steps[:, i])
    return out


def _phase_flat(model, pts: np.ndarray, t):
    half = pts.shape[1] // 2
    if half == 1:
        states = [model.state_from_vector(row, t) for row in pts]
        return np.array([model.phase(s).S for s in states])
    r1a, r1b, r2a, r2b = model.distances_of(pts[:, :3], pts[:, 3:])
    return model.phase_from_distances(r1a, r1b, r2a, r2b, t=t)
