"""Mutual inductance kernels and the lumped coil model."""

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import special

from conftest import make_geometry
from src import config
from src.elliptic import EllipticConvention
from src.errors import ConfigError, GeometryError
from src.inductance import (
    CoilElectrical,
    LoopPose,
    MutualInductanceMatrix,
    build_inductance_matrices,
    coil_electrical,
    coil_resistance,
    mutual_pair_local,
    mutual_tx_rx,
    mutual_tx_tx,
    neumann_mutual,
    receive_loop,
    self_inductance,
    transmit_loop,
)


def maxwell_coaxial(a, b, z):
    """Coaxial filamentary loops, closed form."""
    k2 = 4 * a * b / ((a + b) ** 2 + z ** 2)
    k = np.sqrt(k2)
    return config.MU_0 * np.sqrt(a * b) * ((2 / k - k) * special.ellipk(k2)
                                           - 2 / k * special.ellipe(k2))


# ----------------------------------------------------------------------------
# Pair-local kernel
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("a,b,z", [(5e-3, 5e-3, 25e-3), (5e-3, 9e-3, 4e-3), (20e-3, 3e-3, 1e-3)])
def test_coaxial_pair_matches_closed_form(a, b, z):
    assert mutual_pair_local(a, b, 0.0, z) == pytest.approx(maxwell_coaxial(a, b, z), rel=1e-8)


@settings(deadline=None, max_examples=40)
@given(scale=st.floats(min_value=0.1, max_value=10.0),
       d=st.floats(min_value=0.0, max_value=30e-3),
       theta=st.floats(min_value=-0.5, max_value=0.5))
def test_pair_local_is_homogeneous_of_degree_one(scale, d, theta):
    base = mutual_pair_local(5e-3, 4e-3, d, 12e-3, theta)
    scaled = mutual_pair_local(5e-3 * scale, 4e-3 * scale, d * scale, 12e-3 * scale, theta)
    assert scaled == pytest.approx(scale * base, rel=1e-9, abs=1e-22)


def test_pair_local_scales_with_turns():
    one = mutual_pair_local(5e-3, 5e-3, 3e-3, 10e-3)
    assert mutual_pair_local(5e-3, 5e-3, 3e-3, 10e-3, turns_tx=5, turns_rx=3) == pytest.approx(15 * one)


def test_pair_local_accepts_arrays():
    d = np.array([0.0, 5e-3, 20e-3])
    out = mutual_pair_local(5e-3, 5e-3, d, 10e-3)
    assert out.shape == (3,)
    assert out[0] > out[1]
    assert out[2] < out[0]


def test_doubled_convention_is_twice_standard():
    std = mutual_pair_local(5e-3, 5e-3, 4e-3, 8e-3, 0.2)
    dbl = mutual_pair_local(5e-3, 5e-3, 4e-3, 8e-3, 0.2, convention=EllipticConvention.DOUBLED)
    assert dbl == pytest.approx(2 * std, rel=1e-12)


def test_coplanar_intersection_rejected():
    with pytest.raises(GeometryError, match="intersect"):
        mutual_pair_local(5e-3, 5e-3, 8e-3, 0.0)


def test_coplanar_separated_loops_couple_negatively():
    assert mutual_pair_local(5e-3, 5e-3, 19e-3, 0.0) < 0


# ----------------------------------------------------------------------------
# General pose and matrices
# ----------------------------------------------------------------------------

def test_aligned_coaxial_entry_matches_closed_form():
    geom = make_geometry()
    assert mutual_tx_rx(geom, 1, 1) == pytest.approx(maxwell_coaxial(5e-3, 5e-3, 25e-3), rel=1e-8)


def test_entry_matches_pair_local_for_offset_pair():
    geom = make_geometry(offset_x=7e-3)
    # Receive coil 8 sits 7 mm outward of transmit coil 8 along +x.
    assert mutual_tx_rx(geom, 8, 8) == pytest.approx(
        mutual_pair_local(5e-3, 5e-3, 7e-3, 25e-3), rel=1e-8)


def test_aligned_matrix_is_symmetric_circulant():
    mi = build_inductance_matrices(make_geometry())
    m = mi.tx_rx
    assert m.shape == (8, 8)
    np.testing.assert_allclose(m, m.T, rtol=1e-10, atol=1e-20)
    for shift in range(8):
        np.testing.assert_allclose(np.roll(np.roll(m, shift, 0), shift, 1), m,
                                   rtol=1e-10, atol=1e-20)
    assert np.argmax(m[0]) == 0


def test_matrix_matches_entries_under_misalignment():
    geom = make_geometry(n_rx=6, offset_x=4e-3, offset_y=-2e-3,
                         tilt_x=np.deg2rad(12), tilt_y=np.deg2rad(-7))
    mi = build_inductance_matrices(geom)
    assert mi.tx_rx.shape == (6, 8)
    for m, n in ((1, 1), (3, 5), (6, 2)):
        assert mi.tx_rx[m - 1, n - 1] == pytest.approx(mutual_tx_rx(geom, m, n), rel=1e-12)


def test_crosstalk_matrix():
    geom = make_geometry()
    mt = build_inductance_matrices(geom).tx_tx
    np.testing.assert_array_equal(np.diag(mt), 0.0)
    np.testing.assert_allclose(mt, mt.T, rtol=1e-12)
    assert mt[0, 1] == pytest.approx(mutual_tx_tx(geom, 1, 2), rel=1e-12)
    assert mt[0, 1] < 0
    assert abs(mt[0, 1]) > abs(mt[0, 4])


def test_single_transmit_coil_has_no_crosstalk():
    geom = make_geometry(n_tx=1, n_rx=1)
    mi = build_inductance_matrices(geom)
    np.testing.assert_array_equal(mi.tx_tx, [[0.0]])


def test_turns_scale_the_whole_matrix():
    one = build_inductance_matrices(make_geometry()).tx_rx
    five = build_inductance_matrices(make_geometry(turns_tx=5, turns_rx=5)).tx_rx
    np.testing.assert_allclose(five, 25 * one, rtol=1e-12)


def test_coincident_rings_rejected():
    geom = make_geometry(axial_distance=0.0)
    with pytest.raises(GeometryError):
        build_inductance_matrices(geom)


def test_bad_method():
    with pytest.raises(ValueError):
        mutual_tx_rx(make_geometry(), 1, 1, method='fem')


def test_matrix_shape_validation():
    with pytest.raises(ValueError):
        MutualInductanceMatrix(tx_rx=np.zeros((4, 3)), tx_tx=np.zeros((4, 4)))
    with pytest.raises(ValueError):
        MutualInductanceMatrix(tx_rx=np.zeros((4, 2)), tx_tx=np.ones((2, 2)))


# ----------------------------------------------------------------------------
# Neumann reference
# ----------------------------------------------------------------------------

def test_neumann_coaxial():
    geom = make_geometry()
    value = neumann_mutual(transmit_loop(geom, 1), receive_loop(geom, 1), tol=1e-8)
    assert value == pytest.approx(maxwell_coaxial(5e-3, 5e-3, 25e-3), rel=1e-6)


@pytest.mark.slow
@settings(deadline=None, max_examples=25)
@given(d=st.floats(min_value=20e-3, max_value=40e-3),
       tx=st.floats(min_value=-15.0, max_value=15.0),
       ty=st.floats(min_value=-15.0, max_value=15.0),
       ox=st.floats(min_value=-10e-3, max_value=10e-3),
       oy=st.floats(min_value=-10e-3, max_value=10e-3),
       m=st.integers(min_value=1, max_value=8),
       n=st.integers(min_value=1, max_value=8))
def test_elliptic_agrees_with_neumann(d, tx, ty, ox, oy, m, n):
    geom = make_geometry(axial_distance=d, tilt_x=np.deg2rad(tx), tilt_y=np.deg2rad(ty),
                         offset_x=ox, offset_y=oy)
    scale = maxwell_coaxial(5e-3, 5e-3, d)
    fast = mutual_tx_rx(geom, m, n)
    ref = mutual_tx_rx(geom, m, n, method='neumann')
    assert abs(fast - ref) <= 1e-4 * abs(ref) + 1e-6 * scale


@pytest.mark.slow
@settings(deadline=None, max_examples=100)
@given(r_t=st.floats(min_value=1e-3, max_value=10e-3),
       r_r=st.floats(min_value=1e-3, max_value=10e-3),
       z=st.floats(min_value=5e-3, max_value=100e-3),
       d=st.floats(min_value=0.0, max_value=20e-3),
       tilt=st.floats(min_value=0.0, max_value=30.0))
def test_pair_kernel_agrees_with_neumann(r_t, r_r, z, d, tilt):
    theta = np.deg2rad(tilt)
    # keep the tilted loop clear of the transmit plane
    assume(z - r_r * np.sin(theta) >= 3e-3)
    tx = LoopPose(center=np.zeros(3), u=np.array([1.0, 0.0, 0.0]),
                  v=np.array([0.0, 1.0, 0.0]), radius=r_t)
    rx = LoopPose(center=np.array([d, 0.0, z]), u=np.array([np.cos(theta), 0.0, np.sin(theta)]),
                  v=np.array([0.0, 1.0, 0.0]), radius=r_r)
    fast = mutual_pair_local(r_t, r_r, d, z, theta)
    ref = neumann_mutual(tx, rx, tol=1e-7)
    scale = maxwell_coaxial(r_t, r_r, z)
    assert abs(fast - ref) <= 1e-4 * abs(ref) + 1e-6 * scale


@settings(deadline=None, max_examples=50)
@given(r_t=st.floats(min_value=1e-3, max_value=10e-3),
       r_r=st.floats(min_value=1e-3, max_value=10e-3),
       z=st.floats(min_value=5e-3, max_value=100e-3),
       d=st.floats(min_value=0.0, max_value=30e-3))
def test_pair_kernel_is_reciprocal(r_t, r_r, z, d):
    assert mutual_pair_local(r_t, r_r, d, z) == pytest.approx(
        mutual_pair_local(r_r, r_t, d, z), rel=1e-8, abs=1e-22)


def test_swapping_rings_transposes_the_matrix():
    geom = make_geometry(ring_radius_rx=40e-3, coil_radius_rx=3e-3)
    swapped = make_geometry(ring_radius_tx=40e-3, coil_radius_tx=3e-3,
                            ring_radius_rx=25e-3, coil_radius_rx=5e-3)
    forward = build_inductance_matrices(geom).tx_rx
    backward = build_inductance_matrices(swapped).tx_rx
    np.testing.assert_allclose(forward, backward.T, rtol=1e-8)


@pytest.mark.parametrize("r_t,r_r", [(1e-3, 1e-3), (5e-3, 5e-3), (10e-3, 2e-3)])
def test_coupling_decays_with_distance(r_t, r_r):
    distances = np.linspace(5e-3, 100e-3, 40)
    coaxial = np.abs([mutual_pair_local(r_t, r_r, 0.0, z) for z in distances])
    assert np.all(np.diff(coaxial) < 0)
    entries = [abs(mutual_tx_rx(make_geometry(axial_distance=z), 1, 1)) for z in distances]
    assert np.all(np.diff(entries) < 0)


@pytest.mark.slow
def test_crosstalk_agrees_with_neumann():
    geom = make_geometry()
    for n2 in (2, 3, 5):
        fast = mutual_tx_tx(geom, 1, n2)
        ref = mutual_tx_tx(geom, 1, n2, method='neumann')
        assert fast == pytest.approx(ref, rel=1e-4)


# ----------------------------------------------------------------------------
# Electrical model
# ----------------------------------------------------------------------------

def test_closed_forms():
    assert self_inductance(5e-3, 1) == pytest.approx(config.MU_0 * np.pi * 5e-3 / 2)
    assert self_inductance(5e-3, 5) == pytest.approx(25 * self_inductance(5e-3, 1))
    assert coil_resistance(5e-3, 1) == pytest.approx(0.010996, rel=1e-4)


def test_capacitor_tunes_to_resonance():
    geom = make_geometry()
    elec = coil_electrical(geom, frequency=13.56e6, resonance_frequency=13.56e6)
    assert elec.resonance_frequency == pytest.approx(13.56e6)
    assert elec.impedance.real == pytest.approx(elec.resistance)
    assert abs(elec.impedance.imag) < 1e-9 * elec.omega * elec.self_inductance


def test_detuned_coil_is_reactive():
    elec = coil_electrical(make_geometry(), frequency=13.56e6, resonance_frequency=13.35e6)
    assert elec.impedance.imag > 0
    assert abs(elec.impedance) > elec.resistance


def test_overrides_win():
    elec = coil_electrical(make_geometry(), self_inductance_h=1e-6, capacitance_f=1e-10,
                           resistance_ohm=0.5)
    assert (elec.self_inductance, elec.capacitance, elec.resistance) == (1e-6, 1e-10, 0.5)


@pytest.mark.parametrize("kwargs", [
    {"frequency": 0.0},
    {"resonance_frequency": -1.0},
    {"resistivity": float("nan")},
])
def test_invalid_electrical(kwargs):
    with pytest.raises(ConfigError):
        coil_electrical(make_geometry(), **kwargs)


def test_coil_electrical_rejects_nonpositive_values():
    with pytest.raises(ConfigError):
        CoilElectrical(frequency=1e6, self_inductance=0.0, capacitance=1e-9, resistance=1.0)
