"""Orbit geometry and environment models.

Circular orbit rate and period, the tilted-dipole geomagnetic field seen in
the orbit (LVLH) frame, the rotation from LVLH to body coordinates built
from a reduced quaternion, and the gravity-gradient torque.

Frames: LVLH axes are ordered as in the attitude model, with the third axis
toward nadir and the orbit rate ``[0, w0, 0]``.  The reduced quaternion
``q = (q1, q2, q3)`` is the vector part of the body-from-LVLH rotation; the
scalar part is always ``+sqrt(1 - |q|^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

EARTH_RADIUS = 6.371e6  # m
GM_EARTH = 3.986005e14  # m^3/s^2
DIPOLE_STRENGTH = 7.9e15  # Wb m
# chart tolerance: |q| may exceed 1 by this much from roundoff
Q_NORM_SLACK = 1e-12

FieldModel = Callable[[float], np.ndarray]


def orbital_rate(altitude, GM=GM_EARTH):
    """Orbital rate and period of a circular orbit.

    Returns
    -------
    (w0, period) : tuple of float
        ``w0 = sqrt(GM / a^3)`` in rad/s with ``a = altitude + EARTH_RADIUS``,
        and ``period = 2 pi / w0`` in seconds.
    """
    if altitude <= 0:
        raise DomainError("altitude must be positive")
    a = altitude + EARTH_RADIUS
    w0 = math.sqrt(GM / a**3)
    return w0, 2.0 * math.pi / w0


@dataclass(frozen=True)
class OrbitEnvironment:
    """Circular-orbit environment for the design and truth models.

    ``epoch_offset`` shifts the clock: simulation time ``t`` corresponds to
    ``t + epoch_offset`` seconds after the ascending-node crossing of the
    magnetic equator.
    """

    altitude: float = 657e3
    magnetic_inclination: float = math.radians(57.0)
    dipole_strength: float = DIPOLE_STRENGTH
    GM: float = GM_EARTH
    epoch_offset: float = 0.0

    def __post_init__(self):
        if self.altitude <= 0:
            raise DomainError("altitude must be positive")
        if self.GM <= 0:
            raise DomainError("GM must be positive")

    @property
    def radius(self):
        return self.altitude + EARTH_RADIUS

    @property
    def rate(self):
        return orbital_rate(self.altitude, self.GM)[0]

    @property
    def period(self):
        return orbital_rate(self.altitude, self.GM)[1]

    @property
    def field_scale(self):
        """``mu_f / a^3`` in tesla."""
        return self.dipole_strength / self.radius**3

    def field(self, t):
        return dipole_field(t, self)


@dataclass(frozen=True)
class SpacecraftParams:
    """Principal spacecraft inertias, wheel inertias and optional actuator limits.

    The wheel inertias have no published value for the reference design;
    ``DEFAULT_WHEEL_INERTIA`` is a small-satellite placeholder.
    """

    J: tuple = (250.0, 150.0, 100.0)
    J_w: tuple = (0.05, 0.05, 0.05)
    max_dipole: Optional[tuple] = None
    max_wheel_torque: Optional[tuple] = None

    def __post_init__(self):
        for name in ("J", "J_w"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise DomainError(f"{name} must have three entries")
            if not np.all(v > 0):
                raise DomainError(f"{name} entries must be strictly positive")
            object.__setattr__(self, name, tuple(float(x) for x in v))
        for name in ("max_dipole", "max_wheel_torque"):
            lim = getattr(self, name)
            if lim is None:
                continue
            v = np.broadcast_to(np.asarray(lim, dtype=float), (3,))
            if not np.all(v > 0):
                raise DomainError(f"{name} must be positive")
            object.__setattr__(self, name, tuple(float(x) for x in v))

    @property
    def J_vec(self):
        return np.array(self.J)

    @property
    def Jw_vec(self):
        return np.array(self.J_w)


DEFAULT_WHEEL_INERTIA = (0.05, 0.05, 0.05)


def dipole_field(t, env: OrbitEnvironment):
    """Tilted-dipole field in LVLH coordinates, tesla.

    ``b = (mu_f / a^3) [cos(w0 t) sin(i_m), -cos(i_m), 2 sin(w0 t) sin(i_m)]``
    with ``t`` measured from the ascending-node crossing of the magnetic
    equator (shifted by ``env.epoch_offset``).
    """
    w0 = env.rate
    s = env.field_scale
    im = env.magnetic_inclination
    ph = w0 * (t + env.epoch_offset)
    return s * np.array([math.cos(ph) * math.sin(im), -math.cos(im), 2.0 * math.sin(ph) * math.sin(im)])


def offset_dipole(env: OrbitEnvironment, inclination_offset=0.0, phase_offset=0.0) -> FieldModel:
    """A dipole field with perturbed inclination and phase, used as a mismatched truth model.

    Any callable ``t -> b_lvlh`` can be used in place of this, e.g. a
    spherical-harmonic model evaluated along the orbit.
    """
    w0 = env.rate
    shifted = OrbitEnvironment(
        altitude=env.altitude,
        magnetic_inclination=env.magnetic_inclination + inclination_offset,
        dipole_strength=env.dipole_strength,
        GM=env.GM,
        epoch_offset=env.epoch_offset + phase_offset / w0,
    )
    return shifted.field


def skew(v):
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    v1, v2, v3 = (float(x) for x in v)
    return np.array([[0.0, -v3, v2], [v3, 0.0, -v1], [-v2, v1, 0.0]])


def quaternion_scalar(q):
    """Scalar part ``+sqrt(1 - |q|^2)`` of a reduced quaternion, clamping roundoff."""
    q = np.asarray(q, dtype=float)
    s = float(q @ q)
    if s > 1.0 + Q_NORM_SLACK:
        raise DomainError(f"|q| = {math.sqrt(s):.15g} exceeds 1")
    return math.sqrt(max(0.0, 1.0 - s))


def rotation_lvlh_to_body(q):
    """Rotation matrix from LVLH to body coordinates for reduced quaternion ``q``."""
    q0 = quaternion_scalar(q)
    q1, q2, q3 = (float(x) for x in q)
    c = 2.0 * q0 * q0 - 1.0
    return np.array([
        [c + 2 * q1 * q1, 2 * q1 * q2 + 2 * q0 * q3, 2 * q1 * q3 - 2 * q0 * q2],
        [2 * q1 * q2 - 2 * q0 * q3, c + 2 * q2 * q2, 2 * q2 * q3 + 2 * q0 * q1],
        [2 * q1 * q3 + 2 * q0 * q2, 2 * q2 * q3 - 2 * q0 * q1, c + 2 * q3 * q3],
    ])


def lvlh_rate_in_body(q, w0):
    """Rotation rate of the LVLH frame expressed in body coordinates, rad/s."""
    q0 = quaternion_scalar(q)
    q1, q2, q3 = (float(x) for x in q)
    return w0 * np.array([
        2 * q1 * q2 + 2 * q0 * q3,
        2 * q0 * q0 - 1 + 2 * q2 * q2,
        2 * q2 * q3 - 2 * q0 * q1,
    ])


def gravity_gradient_torque(q, J, w0):
    """Gravity-gradient torque ``3 w0^2 c3 x (J c3)``, with ``c3`` the nadir axis in body coordinates."""
    q0 = quaternion_scalar(q)
    q1, q2, q3 = (float(x) for x in q)
    c3 = np.array([2 * q1 * q3 - 2 * q0 * q2, 2 * q2 * q3 + 2 * q0 * q1, 2 * q0 * q0 - 1 + 2 * q3 * q3])
    Jc3 = np.asarray(J, dtype=float) * c3
    return 3.0 * w0 * w0 * np.cross(c3, Jc3)


def gravity_gradient_matrix(J, w0):
    """Linearization ``T`` of the gravity-gradient torque about ``q = 0``."""
    J1, J2, J3 = (float(x) for x in J)
    return np.diag([6 * w0**2 * (J3 - J2), 6 * w0**2 * (J3 - J1), 0.0])
