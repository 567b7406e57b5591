"""Arclength grids, tangent fields, and rotation kernels.

The stem is represented by its unit tangent field on a uniform arclength grid;
positions are recovered by quadrature from the base point. Rotations are applied
through the exponential map of a rotation vector (axis times angle), evaluated
in closed form with a series branch near zero angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch


def _rot_coeffs(theta):
    """Return (sin t / t, (1 - cos t) / t^2), series-expanded below 1e-6."""
    t2 = theta * theta
    small = theta < 1e-6
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    return a, b


def cross_matrix(w: np.ndarray) -> np.ndarray:
    """Matrix W with W v = w x v."""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def rodrigues(w: np.ndarray) -> np.ndarray:
    """Rotation matrix exp(W) for the rotation vector w.

    Solves v' = w x v over unit time: R = I + a(t) W + b(t) W^2 with t = |w|,
    a = sin t / t, b = (1 - cos t) / t^2.
    """
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    a, b = _rot_coeffs(np.float64(theta))
    mat = cross_matrix(w)
    return np.eye(3) + float(a) * mat + float(b) * (mat @ mat)


def rotate_vectors(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the rotation exp([w_i]) to v_i for every row i.

    Uses R v = v + a (w x v) + b (w x (w x v)) so zero rotation vectors need
    no branch. Rows with identical (w, v) produce bitwise identical output.
    """
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(w, axis=-1, keepdims=True)
    a, b = _rot_coeffs(theta)
    wxv = np.cross(w, v)
    wxwxv = np.cross(w, wxv)
    return v + a * wxv + b * wxwxv


@dataclass
class ArclengthGrid:
    """Uniform grid 0 = s_0 < s_1 < ... over the material parameter."""

    ds: float
    nodes: np.ndarray

    @classmethod
    def uniform(cls, ds: float, n_cells: int) -> "ArclengthGrid":
        if ds <= 0.0:
            raise ValueError(f"grid spacing must be positive, got {ds}")
        if n_cells < 0:
            raise ValueError(f"cell count must be >= 0, got {n_cells}")
        return cls(ds=ds, nodes=ds * np.arange(n_cells + 1, dtype=float))

    def validate(self) -> None:
        if self.nodes.ndim != 1 or self.nodes.size < 1:
            raise GridMismatch("grid needs at least one node")
        if self.nodes[0] != 0.0:
            raise GridMismatch(f"grid must start at 0, got {self.nodes[0]}")
        if self.nodes.size > 1:
            gaps = np.diff(self.nodes)
            if np.any(gaps <= 0.0):
                raise GridMismatch("grid nodes must be strictly increasing")
            if np.max(np.abs(gaps - self.ds)) > 1e-12 * max(1.0, self.ds):
                raise GridMismatch("grid spacing is not uniform")

    def node_at(self, s: float, tol: float = 1e-9) -> int:
        """Index of the node at arclength s; s must sit on the grid."""
        idx = int(round(s / self.ds))
        if idx < 0 or idx >= self.nodes.size:
            raise GridMismatch(f"arclength {s} outside grid [0, {self.nodes[-1]}]")
        if abs(idx * self.ds - s) > tol * max(1.0, abs(s)):
            raise GridMismatch(f"arclength {s} is not a grid node")
        return idx


@dataclass
class TangentField:
    """Unit tangent vectors attached to the nodes of an arclength grid."""

    grid: ArclengthGrid
    vectors: np.ndarray

    def validate(self, unit_tol: float = 1e-9) -> None:
        self.grid.validate()
        if self.vectors.shape != (self.grid.nodes.size, 3):
            raise GridMismatch(
                f"tangent array shape {self.vectors.shape} does not match "
                f"{self.grid.nodes.size} grid nodes"
            )
        norms = np.linalg.norm(self.vectors, axis=1)
        worst = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
        if worst > unit_tol:
            raise ValueError(f"tangents deviate from unit length by {worst:.3e}")


def chord_steps(k: np.ndarray, ds: float) -> np.ndarray:
    """Per-cell displacement ds * (k_i + k_{i+1}) / 2."""
    return (0.5 * ds) * (k[:-1] + k[1:])


def integrate_tangents(field: TangentField, base: np.ndarray | None = None) -> np.ndarray:
    """Positions from tangents: trapezoid accumulation from the base point.

    Exact for constant tangent fields; each chord has length at most the grid
    spacing because the averaged tangents have norm at most one.
    """
    k = field.vectors
    pos = np.zeros((k.shape[0], 3))
    if k.shape[0] > 1:
        np.cumsum(chord_steps(k, field.grid.ds), axis=0, out=pos[1:])
    if base is not None:
        pos += np.asarray(base, dtype=float)
    return pos


def angular_displacement_profile(omega: np.ndarray, ds: float) -> np.ndarray:
    """Left-endpoint cumulative integral of a rotation density at every node.

    Returns P with P_i = ds * sum_{l < i} omega_l, so P_0 = 0.
    """
    prof = np.zeros_like(omega)
    if omega.shape[0] > 1:
        np.cumsum(ds * omega[:-1], axis=0, out=prof[1:])
    return prof


def cumulative_angular_velocity(
    omega: np.ndarray, grid: ArclengthGrid, s: float
) -> np.ndarray:
    """Integral of the rotation density over [0, s] by left-endpoint rectangles.

    s may sit anywhere inside the grid; a trailing partial cell contributes
    its left-endpoint value times the leftover width.
    """
    grid.validate()
    if omega.shape != (grid.nodes.size, 3):
        raise GridMismatch(
            f"density shape {omega.shape} does not match {grid.nodes.size} nodes"
        )
    if s < -1e-12 or s > grid.nodes[-1] + 1e-9 * max(1.0, grid.nodes[-1]):
        raise GridMismatch(f"arclength {s} outside grid [0, {grid.nodes[-1]}]")
    s = min(max(s, 0.0), float(grid.nodes[-1]))
    whole = int(np.floor(s / grid.ds + 1e-12))
    whole = min(whole, omega.shape[0] - 1)
    total = grid.ds * np.sum(omega[:whole], axis=0)
    leftover = s - whole * grid.ds
    if leftover > 0.0:
        total = total + leftover * omega[whole]
    return total
