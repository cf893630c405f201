"""Coil-ring positions, tilt rotation and feasibility checks."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from conftest import make_geometry
from src.errors import GeometryError
from src.geometry import (
    check_index,
    pair_distance,
    receive_centers,
    receive_coil_normal,
    receive_coil_pose,
    ring_rotation,
    transmit_centers,
    transmit_coil_pose,
    tx_pair_distance,
)

tilts = st.floats(min_value=-1.2, max_value=1.2, allow_nan=False)


def test_transmit_ring_on_the_plane():
    geom = make_geometry()
    centers = transmit_centers(geom)
    assert centers.shape == (8, 3)
    np.testing.assert_allclose(np.linalg.norm(centers[:, :2], axis=1), 25e-3)
    np.testing.assert_allclose(centers[:, 2], 0.0)
    # Coil N sits on the +x axis.
    np.testing.assert_allclose(transmit_coil_pose(geom, 8), [25e-3, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(transmit_coil_pose(geom, 3), centers[2])


def test_aligned_receive_ring_is_a_lifted_copy():
    geom = make_geometry()
    np.testing.assert_allclose(receive_centers(geom), transmit_centers(geom) + [0, 0, 25e-3],
                               atol=1e-15)
    np.testing.assert_array_equal(ring_rotation(geom), np.eye(3))
    np.testing.assert_array_equal(receive_coil_normal(geom), [0.0, 0.0, 1.0])


@settings(deadline=None, max_examples=60)
@given(tx=tilts, ty=tilts)
def test_rotation_matches_rotation_vector(tx, ty):
    geom = make_geometry(tilt_x=tx, tilt_y=ty)
    rot = ring_rotation(geom)
    if geom.is_tilted:
        ax, ay = geom.tilt_direction
        expected = Rotation.from_rotvec(geom.deflection * np.array([-ay, ax, 0.0])).as_matrix()
        np.testing.assert_allclose(rot, expected, atol=1e-12)
    np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(receive_coil_normal(geom), rot @ [0.0, 0.0, 1.0], atol=1e-12)


@settings(deadline=None, max_examples=60)
@given(tx=tilts, ty=tilts,
       dx=st.floats(min_value=-0.02, max_value=0.02),
       dy=st.floats(min_value=-0.02, max_value=0.02))
def test_receive_offsets_are_rotated_ring(tx, ty, dx, dy):
    geom = make_geometry(tilt_x=tx, tilt_y=ty, offset_x=dx, offset_y=dy)
    flat = receive_centers(make_geometry()) - [0, 0, 25e-3]
    expected = (ring_rotation(geom) @ flat.T).T + [dx, dy, 25e-3]
    np.testing.assert_allclose(receive_centers(geom), expected, atol=1e-12)
    # Distance from the ring center is preserved.
    radial = receive_centers(geom) - [dx, dy, 25e-3]
    np.testing.assert_allclose(np.linalg.norm(radial, axis=1), 25e-3, rtol=1e-12)


def test_single_tilt_angle_combines_both_axes():
    geom = make_geometry(tilt_x=np.deg2rad(30), tilt_y=np.deg2rad(30))
    expected = np.arctan(np.sqrt(2) * np.tan(np.deg2rad(30)))
    assert geom.deflection == pytest.approx(expected)
    assert geom.tilt_direction == pytest.approx((np.sqrt(0.5), np.sqrt(0.5)))


def test_tilt_x_lowers_the_plus_x_side():
    geom = make_geometry(tilt_x=np.deg2rad(20))
    z = receive_coil_pose(geom, 8)[2]
    assert z < 25e-3
    assert receive_coil_pose(geom, 4)[2] > 25e-3
    assert receive_coil_normal(geom)[0] > 0


def test_pair_distance_aligned():
    geom = make_geometry()
    assert pair_distance(geom, 3, 3) == pytest.approx(0.0, abs=1e-15)
    assert pair_distance(geom, 1, 5) == pytest.approx(50e-3)
    assert pair_distance(geom, 2, 1) == pytest.approx(2 * 25e-3 * np.sin(np.pi / 8))


def test_pair_distance_with_offset():
    geom = make_geometry(offset_x=10e-3)
    assert pair_distance(geom, 8, 8) == pytest.approx(10e-3)


def test_tx_pair_distance():
    geom = make_geometry()
    assert tx_pair_distance(geom, 1, 2) == pytest.approx(2 * 25e-3 * np.sin(np.pi / 8))
    assert tx_pair_distance(geom, 2, 1) == pytest.approx(tx_pair_distance(geom, 1, 2))
    assert tx_pair_distance(geom, 1, 5) == pytest.approx(50e-3)
    with pytest.raises(GeometryError):
        tx_pair_distance(geom, 4, 4)


@pytest.mark.parametrize("index", [0, 9, -1, 2.5])
def test_index_out_of_range(index):
    with pytest.raises(GeometryError):
        check_index(index, 8, 'receive')


def test_overlapping_coils_rejected():
    with pytest.raises(GeometryError, match="overlap"):
        make_geometry(ring_radius_tx=10e-3)
    with pytest.raises(GeometryError, match="receive"):
        make_geometry(n_rx=20)


def test_single_coil_ring_skips_overlap_check():
    geom = make_geometry(n_tx=1, n_rx=1, ring_radius_tx=1e-3, ring_radius_rx=1e-3)
    assert transmit_centers(geom).shape == (1, 3)


@pytest.mark.parametrize("overrides", [
    {"coil_radius_tx": 0.0},
    {"ring_radius_rx": -1e-3},
    {"axial_distance": -1e-3},
    {"n_tx": 0},
    {"turns_rx": 1.5},
    {"tilt_x": np.pi / 2},
    {"tilt_y": float("nan")},
])
def test_invalid_parameters(overrides):
    with pytest.raises(GeometryError):
        make_geometry(**overrides)
