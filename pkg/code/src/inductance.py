"""
Mutual Inductance and Coil Electrical Model
===========================================

Mutual inductance between the filamentary coils of a link and the lumped
series R-L-C model of a single coil.

Key features:
- Single-integral elliptic form for any receive pose: the closed-form
  vector potential of the transmit loop, integrated around the receive loop
- Pair-local form for coaxial / coplanar pairs (transmit crosstalk, the
  simplified aligned capacity)
- Neumann double integral as a convention-free reference
- Series impedance Z = R + 1/(jwC) + jwL with C tuned to a resonance

The elliptic kernel is evaluated through psi(k)/k^4, which is finite at
k = 0, so coils passing over the transmit axis need no special casing.
"""

import numpy as np
from dataclasses import dataclass
from typing import Optional

from . import config
from .elliptic import EllipticConvention, adaptive_quad_2d, psi_over_m2
from .errors import ConfigError, EllipticDomainError, GeometryError
from .geometry import (
    LinkGeometry, ring_rotation, receive_centers, transmit_centers,
    transmit_coil_pose, receive_coil_pose, tx_pair_distance, check_index,
)


@dataclass(frozen=True)
class CoilElectrical:
    """Lumped series model shared by every transmit coil."""
    frequency: float            # Hz
    self_inductance: float      # H
    capacitance: float          # F
    resistance: float           # ohm
    resistivity: float = config.RESISTIVITY_OHM_M
    wire_cross_section: float = config.WIRE_SECTION_M2

    def __post_init__(self):
        for name in ('frequency', 'self_inductance', 'capacitance', 'resistance'):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be positive, got {value!r}", key=name)
        if abs(self.impedance) == 0:
            raise ConfigError("series impedance vanishes", key='impedance')

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.frequency

    @property
    def impedance(self) -> complex:
        w = self.omega
        return complex(self.resistance, w * self.self_inductance - 1 / (w * self.capacitance))

    @property
    def resonance_frequency(self) -> float:
        return 1 / (2 * np.pi * np.sqrt(self.self_inductance * self.capacitance))


@dataclass(frozen=True)
class MutualInductanceMatrix:
    """Transmit-to-receive coupling M (N_r x N_t) and transmit crosstalk M^t (N_t x N_t)."""
    tx_rx: np.ndarray
    tx_tx: np.ndarray

    def __post_init__(self):
        if self.tx_rx.ndim != 2 or self.tx_tx.ndim != 2:
            raise ValueError("inductance matrices must be 2-D")
        n_tx = self.tx_rx.shape[1]
        if self.tx_tx.shape != (n_tx, n_tx):
            raise ValueError(
                f"tx_tx shape {self.tx_tx.shape} does not match {n_tx} transmit coils"
            )
        if np.any(np.diag(self.tx_tx) != 0):
            raise ValueError("tx_tx diagonal must be zero")

    @property
    def n_rx(self) -> int:
        return self.tx_rx.shape[0]

    @property
    def n_tx(self) -> int:
        return self.tx_rx.shape[1]


@dataclass(frozen=True)
class LoopPose:
    """A filamentary loop: center, orthonormal in-plane axes u, v, radius, turns."""
    center: np.ndarray
    u: np.ndarray
    v: np.ndarray
    radius: float
    turns: int = 1

    def points(self, angle: np.ndarray) -> np.ndarray:
        angle = np.asarray(angle)[..., None]
        return self.center + self.radius * (np.cos(angle) * self.u + np.sin(angle) * self.v)

    def tangents(self, angle: np.ndarray) -> np.ndarray:
        angle = np.asarray(angle)[..., None]
        return self.radius * (-np.sin(angle) * self.u + np.cos(angle) * self.v)


# ==============================================================================
# ELECTRICAL MODEL
# ==============================================================================

def self_inductance(coil_radius: float, turns: int) -> float:
    """Small-loop self inductance mu0 K^2 pi r / 2."""
    return config.MU_0 * turns ** 2 * np.pi * coil_radius / 2


def coil_resistance(coil_radius: float, turns: int,
                    resistivity: float = config.RESISTIVITY_OHM_M,
                    wire_cross_section: float = config.WIRE_SECTION_M2) -> float:
    """DC resistance of K turns of wire of radius r: 2 pi r K R0 / S."""
    return 2 * np.pi * coil_radius * turns * resistivity / wire_cross_section


def coil_electrical(
    geom: LinkGeometry,
    frequency: float = config.FREQUENCY_HZ,
    resonance_frequency: float = config.RESONANCE_HZ,
    resistivity: float = config.RESISTIVITY_OHM_M,
    wire_cross_section: float = config.WIRE_SECTION_M2,
    self_inductance_h: Optional[float] = None,
    capacitance_f: Optional[float] = None,
    resistance_ohm: Optional[float] = None,
) -> CoilElectrical:
    """
    Build the transmit coil model for a geometry.

    L and R follow the closed forms unless overridden; C is chosen so the
    series branch resonates at resonance_frequency.

    Raises:
        ConfigError: non-positive frequency, resonance or material constants
    """
    for name, value in (('frequency', frequency), ('resonance_frequency', resonance_frequency),
                        ('resistivity', resistivity), ('wire_cross_section', wire_cross_section)):
        if not np.isfinite(value) or value <= 0:
            raise ConfigError(f"{name} must be positive, got {value!r}", key=name)

    inductance = (self_inductance_h if self_inductance_h is not None
                  else self_inductance(geom.coil_radius_tx, geom.turns_tx))
    resistance = (resistance_ohm if resistance_ohm is not None
                  else coil_resistance(geom.coil_radius_tx, geom.turns_tx,
                                       resistivity, wire_cross_section))
    if capacitance_f is not None:
        capacitance = capacitance_f
    else:
        capacitance = 1 / ((2 * np.pi * resonance_frequency) ** 2 * inductance)

    return CoilElectrical(
        frequency=frequency,
        self_inductance=inductance,
        capacitance=capacitance,
        resistance=resistance,
        resistivity=resistivity,
        wire_cross_section=wire_cross_section,
    )


# ==============================================================================
# ELLIPTIC KERNELS
# ==============================================================================

def _kernel(rho: np.ndarray, z: np.ndarray, r_t: float,
            convention: EllipticConvention) -> np.ndarray:
    """
    (psi(k)/k^4) / s^(3/2) with s = (r_t + rho)^2 + z^2, k^2 = 4 r_t rho / s.

    A_phi / rho of a unit-current loop is (8 mu0 r_t^2 / pi) times this.
    """
    s = (r_t + rho) ** 2 + z ** 2
    m = 4 * r_t * rho / s
    try:
        ratio = psi_over_m2(m, convention)
    except EllipticDomainError as exc:
        raise GeometryError(f"coil filaments intersect or touch: {exc}") from exc
    return ratio / s ** 1.5


def mutual_pair_local(
    r_t: float,
    r_r: float,
    d: np.ndarray,
    z: float,
    theta: float = 0.0,
    turns_tx: int = 1,
    turns_rx: int = 1,
    convention: EllipticConvention = EllipticConvention.STANDARD,
    nodes: int = config.PAIR_NODES,
) -> np.ndarray:
    """
    Mutual inductance of a pair in its own frame.

    The receive loop center sits at horizontal distance d from the transmit
    axis and height z; its normal is tipped by theta inside the plane that
    holds the transmit axis and the offset.

    Args:
        r_t, r_r: Loop radii (m)
        d: Horizontal offset(s) (m); arrays broadcast
        z: Axial separation (m)
        theta: Tilt of the receive normal (rad)
        turns_tx, turns_rx: Turn counts
        convention: Elliptic convention; STANDARD is the physical value
        nodes: Midpoint nodes on [0, pi]

    Returns:
        Mutual inductance (H), same shape as d

    Raises:
        GeometryError: filaments intersect
    """
    d = np.asarray(d, dtype=float)
    _check_separation(r_t, r_r, d, z, theta)

    phi = (np.arange(nodes) + 0.5) * np.pi / nodes
    cos_phi = np.cos(phi)
    ratio = d[..., None] / r_r
    v2 = 1 + ratio ** 2 - 2 * ratio * cos_phi * np.cos(theta) - cos_phi ** 2 * np.sin(theta) ** 2
    rho = r_r * np.sqrt(np.maximum(v2, 0.0))
    height = z - r_r * cos_phi * np.sin(theta)

    weight = np.cos(theta) - ratio * cos_phi
    integral = np.sum(weight * _kernel(rho, height, r_t, convention), axis=-1) * (np.pi / nodes)
    prefactor = 16 * config.MU_0 * turns_tx * turns_rx * (r_t * r_r) ** 2 / np.pi
    result = prefactor * integral
    return float(result) if result.ndim == 0 else result


def _check_separation(r_t: float, r_r: float, d: np.ndarray, z: float, theta: float):
    if theta == 0.0 and abs(z) < 1e-12:
        d = np.atleast_1d(d)
        touching = (d <= r_t + r_r) & (d >= abs(r_t - r_r))
        if np.any(touching):
            raise GeometryError(
                f"coplanar coils intersect: center distance {float(d[touching][0]):.4g} m "
                f"with radii {r_t:.4g} m and {r_r:.4g} m"
            )


def _loop_mutual(
    tx_centers: np.ndarray,
    r_t: float,
    rx: LoopPose,
    rx_centers: np.ndarray,
    convention: EllipticConvention,
    nodes: int,
) -> np.ndarray:
    """M for every (receive, transmit) pair, shape (N_r, N_t), per unit turn product."""
    psi_angle = 2 * np.pi * np.arange(nodes) / nodes
    ring = rx.radius * (np.cos(psi_angle)[:, None] * rx.u + np.sin(psi_angle)[:, None] * rx.v)
    tangent = rx.tangents(psi_angle)

    # (N_r, 1, Q, 3) - (1, N_t, 1, 3)
    points = rx_centers[:, None, None, :] + ring[None, None, :, :]
    rel = points - tx_centers[None, :, None, :]
    x, y, z = rel[..., 0], rel[..., 1], rel[..., 2]
    rho = np.hypot(x, y)
    # phi_hat . tangent * rho
    flux_weight = -y * tangent[:, 0] + x * tangent[:, 1]

    kernel = _kernel(rho, z, r_t, convention)
    loop_integral = np.sum(kernel * flux_weight, axis=-1) * (2 * np.pi / nodes)
    return 8 * config.MU_0 * r_t ** 2 / np.pi * loop_integral


def transmit_loop(geom: LinkGeometry, n: int) -> LoopPose:
    return LoopPose(
        center=transmit_coil_pose(geom, n),
        u=np.array([1.0, 0.0, 0.0]),
        v=np.array([0.0, 1.0, 0.0]),
        radius=geom.coil_radius_tx,
        turns=geom.turns_tx,
    )


def receive_loop(geom: LinkGeometry, m: int) -> LoopPose:
    rot = ring_rotation(geom)
    return LoopPose(
        center=receive_coil_pose(geom, m),
        u=rot[:, 0],
        v=rot[:, 1],
        radius=geom.coil_radius_rx,
        turns=geom.turns_rx,
    )


def _check_receive_clearance(geom: LinkGeometry, rx_centers: np.ndarray, tx_centers: np.ndarray):
    if geom.is_tilted:
        return
    z = rx_centers[:, 2]
    if np.all(np.abs(z) > 1e-12):
        return
    d = np.hypot(rx_centers[:, None, 0] - tx_centers[None, :, 0],
                 rx_centers[:, None, 1] - tx_centers[None, :, 1])
    _check_separation(geom.coil_radius_tx, geom.coil_radius_rx, d, 0.0, 0.0)


# ==============================================================================
# NEUMANN REFERENCE
# ==============================================================================

def neumann_mutual(loop_a: LoopPose, loop_b: LoopPose, tol: float = config.NEUMANN_RTOL) -> float:
    """
    Mutual inductance of two filamentary loops from the Neumann double integral.

    mu0 K_a K_b / (4 pi) * double-integral (dl_a . dl_b) / |P_a - P_b|,
    evaluated by adaptive cubature over [0, 2pi]^2.

    Raises:
        QuadratureError: tolerance not reached
    """
    def integrand(x: np.ndarray) -> np.ndarray:
        s, t = x[:, 0], x[:, 1]
        delta = loop_a.points(s) - loop_b.points(t)
        dots = np.sum(loop_a.tangents(s) * loop_b.tangents(t), axis=-1)
        return dots / np.linalg.norm(delta, axis=-1)

    spacing = np.linalg.norm(loop_a.center - loop_b.center) + loop_a.radius + loop_b.radius
    atol = 1e-6 * tol * 4 * np.pi ** 2 * loop_a.radius * loop_b.radius / spacing
    value = adaptive_quad_2d(integrand, tol=tol, atol=atol)
    return config.MU_0 * loop_a.turns * loop_b.turns / (4 * np.pi) * value


# ==============================================================================
# ENTRY-LEVEL AND MATRIX OPERATIONS
# ==============================================================================

def mutual_tx_rx(
    geom: LinkGeometry,
    m: int,
    n: int,
    method: str = 'elliptic',
    convention: EllipticConvention = EllipticConvention.STANDARD,
    nodes: int = config.LOOP_NODES,
    tol: float = config.NEUMANN_RTOL,
) -> float:
    """
    Mutual inductance between receive coil m and transmit coil n (1-based).

    Args:
        geom: Link geometry
        m, n: Coil indices
        method: 'elliptic' (single integral) or 'neumann' (double-integral reference)
        convention: Elliptic convention for the elliptic method
        nodes: Trapezoid nodes around the receive loop
        tol: Relative tolerance of the Neumann cubature

    Raises:
        GeometryError: indices out of range or intersecting filaments
        QuadratureError: Neumann cubature did not converge
    """
    check_index(m, geom.n_rx, 'receive')
    check_index(n, geom.n_tx, 'transmit')
    rx = receive_loop(geom, m)
    tx = transmit_loop(geom, n)
    _check_receive_clearance(geom, rx.center[None, :], tx.center[None, :])

    if method == 'neumann':
        return neumann_mutual(tx, rx, tol=tol)
    if method != 'elliptic':
        raise ValueError(f"unknown method {method!r}; expected 'elliptic' or 'neumann'")

    value = _loop_mutual(tx.center[None, :], tx.radius, rx, rx.center[None, :], convention, nodes)
    return float(value[0, 0]) * geom.turns_tx * geom.turns_rx


def mutual_tx_tx(
    geom: LinkGeometry,
    n1: int,
    n2: int,
    method: str = 'elliptic',
    convention: EllipticConvention = EllipticConvention.STANDARD,
    nodes: int = config.PAIR_NODES,
    tol: float = config.NEUMANN_RTOL,
) -> float:
    """Crosstalk inductance between two distinct coplanar transmit coils."""
    d = tx_pair_distance(geom, n1, n2)
    if method == 'neumann':
        return neumann_mutual(transmit_loop(geom, n1), transmit_loop(geom, n2), tol=tol)
    if method != 'elliptic':
        raise ValueError(f"unknown method {method!r}; expected 'elliptic' or 'neumann'")
    return mutual_pair_local(
        geom.coil_radius_tx, geom.coil_radius_tx, d, 0.0, 0.0,
        geom.turns_tx, geom.turns_tx, convention, nodes,
    )


def build_inductance_matrices(
    geom: LinkGeometry,
    convention: EllipticConvention = EllipticConvention.STANDARD,
    loop_nodes: int = config.LOOP_NODES,
    pair_nodes: int = config.PAIR_NODES,
) -> MutualInductanceMatrix:
    """
    All N_r x N_t transmit-receive and N_t x N_t crosstalk inductances.

    Crosstalk depends only on the ring separation n1 - n2 mod N_t, so one
    pair-local value per separation fills the circulant M^t.
    """
    tx_c = transmit_centers(geom)
    rx_c = receive_centers(geom)
    _check_receive_clearance(geom, rx_c, tx_c)

    rot = ring_rotation(geom)
    rx_template = LoopPose(center=np.zeros(3), u=rot[:, 0], v=rot[:, 1],
                           radius=geom.coil_radius_rx, turns=geom.turns_rx)
    tx_rx = _loop_mutual(tx_c, geom.coil_radius_tx, rx_template, rx_c, convention, loop_nodes)
    tx_rx = tx_rx * geom.turns_tx * geom.turns_rx

    n_tx = geom.n_tx
    tx_tx = np.zeros((n_tx, n_tx))
    if n_tx > 1:
        shifts = np.arange(1, n_tx)
        distances = geom.ring_radius_tx * np.sqrt(2 - 2 * np.cos(2 * np.pi * shifts / n_tx))
        per_shift = mutual_pair_local(
            geom.coil_radius_tx, geom.coil_radius_tx, distances, 0.0, 0.0,
            geom.turns_tx, geom.turns_tx, convention, pair_nodes,
        )
        per_shift = np.atleast_1d(per_shift)
        idx = np.arange(n_tx)
        sep = (idx[:, None] - idx[None, :]) % n_tx
        nonzero = sep > 0
        tx_tx[nonzero] = per_shift[sep[nonzero] - 1]

    return MutualInductanceMatrix(tx_rx=tx_rx, tx_tx=tx_tx)
