import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from desatlqr.errors import DomainError
from desatlqr.orbit_env import (
    OrbitEnvironment,
    SpacecraftParams,
    dipole_field,
    gravity_gradient_matrix,
    gravity_gradient_torque,
    lvlh_rate_in_body,
    orbital_rate,
    rotation_lvlh_to_body,
    skew,
)

from oracles import cross, dcm_from_quaternion

vec3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


@st.composite
def quaternions(draw, max_norm=0.99):
    v = np.array(draw(st.lists(st.floats(-1, 1), min_size=3, max_size=3)))
    r = draw(st.floats(0, max_norm))
    n = np.linalg.norm(v)
    return v * (r / n) if n > 1e-6 else np.zeros(3)


# orbital_rate ---------------------------------------------------------------

def test_reference_orbit():
    w0, P = orbital_rate(657e3)
    # values quoted for the reference orbit: period 5863 s, rate 0.0011 rad/s
    assert abs(P - 5863) < 1.0
    assert abs(w0 - 0.0011) < 0.00005
    assert OrbitEnvironment().radius == pytest.approx(7.028e6, rel=1e-12)


def test_orbit_rate_frozen_value():
    # sqrt(3.986005e14 / 7.028e6^3) evaluated independently
    w0, P = orbital_rate(657e3)
    assert w0 == pytest.approx(0.0010715718354093236, rel=1e-14)
    assert P == pytest.approx(5863.522257263796, rel=1e-14)


def test_rate_scales_with_sqrt_GM():
    w1, _ = orbital_rate(657e3)
    w4, _ = orbital_rate(657e3, GM=4 * 3.986005e14)
    assert w4 == pytest.approx(2 * w1, rel=1e-15)


def test_nonpositive_altitude():
    with pytest.raises(DomainError):
        orbital_rate(0.0)


# dipole_field ---------------------------------------------------------------

def test_zero_inclination_field_is_constant():
    env = OrbitEnvironment(magnetic_inclination=0.0)
    for t in (0.0, 100.0, 3000.0):
        np.testing.assert_allclose(dipole_field(t, env), [0.0, -env.field_scale, 0.0], atol=0)


def test_field_at_ascending_node():
    env = OrbitEnvironment()
    # mu_f / a^3 for a = 7.028e6 m, mu_f = 7.9e15 Wb m (direct evaluation)
    s = 2.275788155733825e-05
    assert env.field_scale == pytest.approx(2.2755e-5, rel=2e-4)
    im = math.radians(57.0)
    np.testing.assert_allclose(dipole_field(0.0, env), s * np.array([math.sin(im), -math.cos(im), 0.0]), rtol=1e-13, atol=1e-20)


@given(st.floats(-1e6, 1e6))
def test_field_periodic(t):
    env = OrbitEnvironment()
    b0 = dipole_field(t, env)
    b1 = dipole_field(t + env.period, env)
    np.testing.assert_allclose(b1, b0, rtol=0, atol=1e-12 * env.field_scale * (1 + abs(t) / env.period))


@given(st.floats(0, 1e5), st.floats(0, math.pi / 2))
def test_field_magnitude_bounds(t, im):
    env = OrbitEnvironment(magnetic_inclination=im)
    n = np.linalg.norm(dipole_field(t, env))
    s = env.field_scale
    assert s * (1 - 1e-12) <= n <= math.sqrt(1 + 3 * math.sin(im) ** 2) * s * (1 + 1e-12)


# skew -----------------------------------------------------------------------

def test_skew_zero_and_unit():
    np.testing.assert_array_equal(skew(np.zeros(3)), np.zeros((3, 3)))
    np.testing.assert_array_equal(skew([1.0, 0.0, 0.0]), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])


@given(vec3, vec3)
def test_skew_cross(v, w):
    S = skew(v)
    np.testing.assert_array_equal(S + S.T, np.zeros((3, 3)))
    np.testing.assert_allclose(S @ w, cross(v, w), atol=1e-12)


# rotation and LVLH rate ---------------------------------------------------

def test_lvlh_rate_identity():
    w0 = 0.0011
    np.testing.assert_allclose(lvlh_rate_in_body(np.zeros(3), w0), [0.0, w0, 0.0], atol=0)


def test_lvlh_rate_small_q_linear():
    w0 = 0.0011
    q = np.array([2e-4, -1e-4, 3e-4])
    approx = w0 * np.array([2 * q[2], 1.0, -2 * q[0]])
    assert np.linalg.norm(lvlh_rate_in_body(q, w0) - approx) <= 2 * w0 * (q @ q) * 3


def test_lvlh_rate_matches_rotation_matrix():
    w0 = 0.0011
    q = np.array([0.1, 0.05, -0.02])
    np.testing.assert_allclose(lvlh_rate_in_body(q, w0), dcm_from_quaternion(q) @ [0.0, w0, 0.0], rtol=1e-14, atol=1e-18)


@given(quaternions())
def test_rotation_orthogonal_and_matches_oracle(q):
    A = rotation_lvlh_to_body(q)
    np.testing.assert_allclose(A @ A.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(A, dcm_from_quaternion(q), atol=1e-13)
    assert np.linalg.det(A) == pytest.approx(1.0, abs=1e-12)


@given(quaternions(max_norm=1.0))
def test_lvlh_rate_norm(q):
    w0 = 0.0010715718
    assert np.linalg.norm(lvlh_rate_in_body(q, w0)) == pytest.approx(w0, rel=1e-12)


def test_quaternion_domain():
    with pytest.raises(DomainError):
        lvlh_rate_in_body([1.0, 1e-5, 0.0], 0.001)
    # roundoff above the unit sphere is clamped
    q = np.array([1.0 + 1e-13, 0.0, 0.0])
    assert np.all(np.isfinite(lvlh_rate_in_body(q, 0.001)))


# gravity gradient ----------------------------------------------------------

@given(st.lists(st.floats(1, 1000), min_size=3, max_size=3))
def test_gravity_gradient_zero_at_identity(J):
    np.testing.assert_array_equal(gravity_gradient_torque(np.zeros(3), J, 0.0011), np.zeros(3))


def test_gravity_gradient_linearization_matrix():
    w0 = 0.0011
    J = (250.0, 150.0, 100.0)
    T = gravity_gradient_matrix(J, w0)
    np.testing.assert_allclose(np.diag(T), [6 * w0**2 * (100 - 150), 6 * w0**2 * (100 - 250), 0.0])


def test_gravity_gradient_second_order_error():
    w0 = 0.0011
    J = (250.0, 150.0, 100.0)
    T = gravity_gradient_matrix(J, w0)
    q = np.array([0.05, 0.0, 0.0])
    err = np.linalg.norm(gravity_gradient_torque(q, J, w0) - T @ q)
    # O(|q|^2) with a constant of the size of the torque scale w0^2 |J|
    assert err <= 10 * w0**2 * 250 * (q @ q)
    # and the error genuinely shrinks quadratically
    q2 = q / 4
    err2 = np.linalg.norm(gravity_gradient_torque(q2, J, w0) - T @ q2)
    assert err2 <= err / 8


def test_gravity_gradient_formula_oracle():
    w0 = 0.0011
    J = np.array([250.0, 150.0, 100.0])
    q = np.array([0.1, -0.2, 0.15])
    c3 = dcm_from_quaternion(q)[:, 2]
    np.testing.assert_allclose(gravity_gradient_torque(q, J, w0), 3 * w0**2 * cross(c3, J * c3), rtol=1e-13, atol=1e-20)


# params ---------------------------------------------------------------------

def test_params_validation():
    with pytest.raises(DomainError):
        SpacecraftParams(J=(250.0, 0.0, 100.0))
    with pytest.raises(DomainError):
        SpacecraftParams(J_w=(0.05, -0.05, 0.05))
    with pytest.raises(DomainError):
        SpacecraftParams(max_dipole=(10.0, 0.0, 10.0))
    assert SpacecraftParams(max_dipole=50.0).max_dipole == (50.0, 50.0, 50.0)
