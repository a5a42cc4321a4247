"""Pedestrian routing field w = N(-grad phi)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .elliptic import PotentialSolution
from .geometry import Grid


def regularized_normalize(x, theta: float) -> np.ndarray:
    """``x / sqrt(theta**2 + |x|**2)`` along the last axis."""
    if not theta > 0:
        raise ValueError(f"theta must be > 0, got {theta}")
    x = np.asarray(x, dtype=float)
    norm2 = np.sum(x * x, axis=-1, keepdims=True)
    return x / np.sqrt(theta * theta + norm2)


@dataclass(frozen=True, eq=False)
class RoutingField:
    w: np.ndarray  # (ny, nx, 2); zero outside the domain
    theta: float
    exit_wn: np.ndarray | None = None  # w.nu per exit face (Grid.boundary order)
    wall_wn: np.ndarray | None = None  # w.nu per wall face, diagnostic only

    @property
    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.w, axis=-1)))

    def reversed(self) -> RoutingField:
        return RoutingField(-self.w, self.theta)


def face_normal_components(w: np.ndarray, g: Grid) -> tuple[np.ndarray, np.ndarray]:
    """w of the inside cell projected on the outward normal, per exit and wall face."""

    def proj(faces):
        out = np.empty(len(faces))
        for k, ((i, j), d) in enumerate(faces):
            nx_, ny_ = d.normal
            out[k] = w[j, i, 0] * nx_ + w[j, i, 1] * ny_
        return out

    bs = g.boundary
    return proj(bs.exit_faces), proj(bs.wall_faces)


def build_routing_field(sol: PotentialSolution, theta: float, g: Grid) -> RoutingField:
    w = regularized_normalize(-sol.grad_phi, theta)
    w[~g.inside] = 0.0
    exit_wn, wall_wn = face_normal_components(w, g)
    w.setflags(write=False)
    return RoutingField(w=w, theta=theta, exit_wn=exit_wn, wall_wn=wall_wn)


def extend_outside(values: np.ndarray, g: Grid) -> np.ndarray:
    """Pad to (ny + 2, nx + 2) and fill every non-INSIDE cell with its nearest INSIDE value."""
    inside = np.zeros((g.ny + 2, g.nx + 2), dtype=bool)
    inside[1:-1, 1:-1] = g.inside
    pad = np.zeros((g.ny + 2, g.nx + 2) + values.shape[2:])
    pad[1:-1, 1:-1] = np.where(
        g.inside.reshape(g.inside.shape + (1,) * (values.ndim - 2)), values, 0.0
    )
    _, (jj, ii) = ndimage.distance_transform_edt(
        ~inside, sampling=(g.hy, g.hx), return_distances=True, return_indices=True
    )
    return np.ascontiguousarray(pad[jj, ii])


class FieldSampler:
    """Bilinear sampling of cell-centered data with constant extension outside."""

    def __init__(self, values: np.ndarray, g: Grid):
        self.g = g
        self.ext = extend_outside(values, g)

    def __call__(self, x: float, y: float):
        g = self.g
        gx = x / g.hx + 0.5
        gy = y / g.hy + 0.5
        i0 = min(max(int(np.floor(gx)), 0), g.nx)
        j0 = min(max(int(np.floor(gy)), 0), g.ny)
        fx = min(max(gx - i0, 0.0), 1.0)
        fy = min(max(gy - j0, 0.0), 1.0)
        e = self.ext
        return (
            (1.0 - fy) * ((1.0 - fx) * e[j0, i0] + fx * e[j0, i0 + 1])
            + fy * ((1.0 - fx) * e[j0 + 1, i0] + fx * e[j0 + 1, i0 + 1])
        )
