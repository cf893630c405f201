"""
Coil-Ring Geometry
==================

Positions of the transmit and receive coils of a uniform circular coil ring
link, including lateral offset and tilt of the receive ring.

Conventions:
- The transmit ring lies in z = 0, centered on the origin, coil n (1-based)
  at angle 2*pi*n / N_t.
- The receive ring center sits at (d_x, d_y, D). Its tilt is a single
  rotation by theta = arctan(sqrt(tan^2 t_x + tan^2 t_y)) about the
  in-plane axis (-a_y, a_x, 0) with a_x = tan t_x / tan theta and
  a_y = tan t_y / tan theta.
- All lengths are meters and all angles radians.
"""

import numpy as np
from dataclasses import dataclass
from typing import Tuple

from .errors import GeometryError


@dataclass(frozen=True)
class LinkGeometry:
    """Both coil rings of one link plus the receive-ring misalignment."""
    n_tx: int
    n_rx: int
    ring_radius_tx: float
    ring_radius_rx: float
    coil_radius_tx: float
    coil_radius_rx: float
    turns_tx: int
    turns_rx: int
    axial_distance: float
    offset_x: float = 0.0
    offset_y: float = 0.0
    tilt_x: float = 0.0
    tilt_y: float = 0.0

    def __post_init__(self):
        for name in ('n_tx', 'n_rx', 'turns_tx', 'turns_rx'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise GeometryError(f"{name} must be a positive integer, got {value!r}")
        for name in ('ring_radius_tx', 'ring_radius_rx', 'coil_radius_tx', 'coil_radius_rx'):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise GeometryError(f"{name} must be positive, got {value!r}")
        if not np.isfinite(self.axial_distance) or self.axial_distance < 0:
            raise GeometryError(f"axial_distance must be >= 0, got {self.axial_distance!r}")
        for name in ('tilt_x', 'tilt_y'):
            value = getattr(self, name)
            if not np.isfinite(value) or abs(value) >= np.pi / 2:
                raise GeometryError(f"{name} must lie in (-pi/2, pi/2), got {value!r}")

        _check_ring(self.n_tx, self.ring_radius_tx, self.coil_radius_tx, 'transmit')
        _check_ring(self.n_rx, self.ring_radius_rx, self.coil_radius_rx, 'receive')

    @property
    def deflection(self) -> float:
        """Single tilt angle of the receive ring normal away from z."""
        return float(np.arctan(np.hypot(np.tan(self.tilt_x), np.tan(self.tilt_y))))

    @property
    def tilt_direction(self) -> Tuple[float, float]:
        """(a_x, a_y); (1, 0) when the ring is not tilted."""
        tx, ty = np.tan(self.tilt_x), np.tan(self.tilt_y)
        norm = np.hypot(tx, ty)
        if norm == 0.0:
            return 1.0, 0.0
        return float(tx / norm), float(ty / norm)

    @property
    def is_aligned(self) -> bool:
        return (self.offset_x == 0.0 and self.offset_y == 0.0
                and self.tilt_x == 0.0 and self.tilt_y == 0.0)

    @property
    def is_tilted(self) -> bool:
        return self.tilt_x != 0.0 or self.tilt_y != 0.0


def _check_ring(n: int, ring_radius: float, coil_radius: float, label: str):
    # Neighbouring coils on a ring of N sit 2 R sin(pi/N) apart.
    if n > 1 and coil_radius >= ring_radius * np.sin(np.pi / n):
        raise GeometryError(
            f"{label} coils overlap: coil radius {coil_radius:.4g} m >= "
            f"R sin(pi/N) = {ring_radius * np.sin(np.pi / n):.4g} m for N = {n}"
        )


def check_index(index: int, count: int, label: str):
    if int(index) != index or not 1 <= index <= count:
        raise GeometryError(f"{label} coil index {index!r} outside 1..{count}")


# ==============================================================================
# RING POSES
# ==============================================================================

def transmit_coil_pose(geom: LinkGeometry, n: int) -> np.ndarray:
    """Center of transmit coil n (1-based); the normal is always +z."""
    check_index(n, geom.n_tx, 'transmit')
    angle = 2 * np.pi * n / geom.n_tx
    return np.array([
        geom.ring_radius_tx * np.cos(angle),
        geom.ring_radius_tx * np.sin(angle),
        0.0,
    ])


def transmit_centers(geom: LinkGeometry) -> np.ndarray:
    """All transmit centers, shape (N_t, 3), row n-1 for coil n."""
    angles = 2 * np.pi * np.arange(1, geom.n_tx + 1) / geom.n_tx
    return np.column_stack([
        geom.ring_radius_tx * np.cos(angles),
        geom.ring_radius_tx * np.sin(angles),
        np.zeros(geom.n_tx),
    ])


def ring_rotation(geom: LinkGeometry) -> np.ndarray:
    """
    Rotation matrix taking the untilted receive ring to its tilted pose.

    Rodrigues form about the unit axis e = (-a_y, a_x, 0) by the deflection
    angle. Identity when the ring is not tilted.
    """
    if not geom.is_tilted:
        return np.eye(3)
    theta = geom.deflection
    ax, ay = geom.tilt_direction
    e = np.array([-ay, ax, 0.0])
    cross = np.array([
        [0.0, -e[2], e[1]],
        [e[2], 0.0, -e[0]],
        [-e[1], e[0], 0.0],
    ])
    return np.eye(3) + np.sin(theta) * cross + (1 - np.cos(theta)) * (cross @ cross)


def receive_coil_normal(geom: LinkGeometry) -> np.ndarray:
    """Common unit normal of the receive coils."""
    if not geom.is_tilted:
        return np.array([0.0, 0.0, 1.0])
    theta = geom.deflection
    ax, ay = geom.tilt_direction
    s = np.sin(theta)
    return np.array([s * ax, s * ay, np.cos(theta)])


def _receive_offsets(geom: LinkGeometry, alpha: np.ndarray) -> np.ndarray:
    """Coil offsets from the receive ring center for ring angles alpha."""
    r = geom.ring_radius_rx
    if not geom.is_tilted:
        return np.column_stack([r * np.cos(alpha), r * np.sin(alpha), np.zeros_like(alpha)])

    theta = geom.deflection
    ax, ay = geom.tilt_direction
    c, s = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    x = ca * (c + (1 - c) * ay ** 2) - (1 - c) * ax * ay * sa
    y = sa * (c + (1 - c) * ax ** 2) - (1 - c) * ax * ay * ca
    z = -s * (ax * ca + ay * sa)
    return r * np.column_stack([x, y, z])


def receive_coil_pose(geom: LinkGeometry, m: int) -> np.ndarray:
    """Center of receive coil m (1-based) after offset and tilt."""
    check_index(m, geom.n_rx, 'receive')
    alpha = np.array([2 * np.pi * m / geom.n_rx])
    center = np.array([geom.offset_x, geom.offset_y, geom.axial_distance])
    return center + _receive_offsets(geom, alpha)[0]


def receive_centers(geom: LinkGeometry) -> np.ndarray:
    """All receive centers, shape (N_r, 3), row m-1 for coil m."""
    alpha = 2 * np.pi * np.arange(1, geom.n_rx + 1) / geom.n_rx
    center = np.array([geom.offset_x, geom.offset_y, geom.axial_distance])
    return center + _receive_offsets(geom, alpha)


# ==============================================================================
# DISTANCES
# ==============================================================================

def pair_distance(geom: LinkGeometry, m: int, n: int) -> float:
    """Horizontal distance from receive coil m's center to transmit coil n's axis."""
    delta = receive_coil_pose(geom, m) - transmit_coil_pose(geom, n)
    return float(np.hypot(delta[0], delta[1]))


def tx_pair_distance(geom: LinkGeometry, n1: int, n2: int) -> float:
    """Center distance of two distinct transmit coils."""
    check_index(n1, geom.n_tx, 'transmit')
    check_index(n2, geom.n_tx, 'transmit')
    if n1 == n2:
        raise GeometryError(f"transmit pair distance needs two distinct coils, got n1 = n2 = {n1}")
    arg = 2 * np.pi * (n1 - n2) / geom.n_tx
    return float(geom.ring_radius_tx * np.sqrt(2 - 2 * np.cos(arg)))
