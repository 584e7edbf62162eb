"""Nonlinear spacecraft attitude and reaction-wheel model.

State ``x = [w, Om, q]``: body rate relative to LVLH (rad/s), wheel speeds
(rad/s) and the reduced quaternion of the body frame relative to LVLH.
Input ``u = [t_w, m]``: wheel torques (N m) and coil dipole moment (A m^2).

The right-hand side is written with scalar arithmetic because the
simulator evaluates it a few hundred thousand times per run; the public
vector-valued helpers (``coupling_torque_f`` and friends) share the same
formulas and are what the tests compare against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, IntegrationError
from .orbit_env import (
    OrbitEnvironment,
    SpacecraftParams,
    lvlh_rate_in_body,
    gravity_gradient_torque,
    quaternion_scalar,
    rotation_lvlh_to_body,
)

# after an RK4 step |q| may overshoot 1 by this much before the step is rejected
STEP_Q_SLACK = 1e-9


def _vec3(v, name):
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise DomainError(f"{name} must be a 3-vector")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class SystemState:
    """Spacecraft state at time ``t``."""

    w: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    Om: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    def __post_init__(self):
        for name in ("w", "Om", "q"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))
        if not math.isfinite(self.t):
            raise DomainError("t must be finite")
        quaternion_scalar(self.q)  # validates |q| <= 1

    @classmethod
    def from_vector(cls, x, t=0.0):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (9,):
            raise DomainError("state vector must have 9 entries")
        return cls(x[0:3], x[3:6], x[6:9], float(t))

    def as_vector(self):
        return np.concatenate([self.w, self.Om, self.q])


@dataclass(frozen=True)
class ControlInput:
    """Wheel torques ``t_w`` and coil dipole ``m``."""

    t_w: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    m: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "t_w", _vec3(self.t_w, "t_w"))
        object.__setattr__(self, "m", _vec3(self.m, "m"))

    @classmethod
    def from_vector(cls, u):
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape != (6,):
            raise DomainError("input vector must have 6 entries")
        return cls(u[0:3], u[3:6])

    def as_vector(self):
        return np.concatenate([self.t_w, self.m])

    def saturate(self, params: SpacecraftParams):
        """Clip componentwise to the configured actuator limits (no-op when unset)."""
        tw, m = self.t_w, self.m
        if params.max_wheel_torque is not None:
            lim = np.asarray(params.max_wheel_torque)
            tw = np.clip(tw, -lim, lim)
        if params.max_dipole is not None:
            lim = np.asarray(params.max_dipole)
            m = np.clip(m, -lim, lim)
        return ControlInput(tw, m)


# ---------------------------------------------------------------------------
# disturbance models

Disturbance = Callable[[float], np.ndarray]


def no_disturbance(t):
    return np.zeros(3)


def constant_disturbance(torque) -> Disturbance:
    tau = _vec3(torque, "torque")
    return lambda t: tau.copy()


def orbital_sinusoid_disturbance(amplitude, w0, phase=0.0, bias=None) -> Disturbance:
    """``bias + amplitude * sin(w0 t + phase)`` componentwise; ``phase`` may be per axis."""
    amp = _vec3(amplitude, "amplitude")
    ph = np.broadcast_to(np.asarray(phase, dtype=float), (3,)).copy()
    c = np.zeros(3) if bias is None else _vec3(bias, "bias")
    return lambda t: c + amp * np.sin(w0 * t + ph)


# ---------------------------------------------------------------------------
# model terms


def coupling_torque_f(w, Om, q, params: SpacecraftParams, env: OrbitEnvironment):
    """Gyroscopic and frame-rotation torque ``f(w, Om, q)``.

    ``f = J (w x w_l) - (w + w_l) x [J (w + w_l) + J_w Om]`` with ``w_l`` the
    LVLH rate in body coordinates.  The first term is the rotating-frame
    correction from ``dw_I/dt = dw/dt - w x w_l``, premultiplied by ``J``.
    """
    w = _vec3(w, "w")
    Om = _vec3(Om, "Om")
    J = params.J_vec
    wl = lvlh_rate_in_body(q, env.rate)
    wI = w + wl
    return J * np.cross(w, wl) - np.cross(wI, J * wI + params.Jw_vec * Om)


def quaternion_kinematics_g(q, w):
    """Reduced-quaternion kinematics ``dq/dt = 0.5 (q0 w + q x w)``."""
    q = _vec3(q, "q")
    w = _vec3(w, "w")
    q0 = quaternion_scalar(q)
    q1, q2, q3 = q
    M = np.array([[q0, -q3, q2], [q3, q0, -q1], [-q2, q1, q0]])
    return 0.5 * (M @ w)


def body_field(t, q, field: Callable[[float], np.ndarray]):
    """Geomagnetic field in body coordinates: ``A_l^b(q) b_lvlh(t)``."""
    return rotation_lvlh_to_body(q) @ np.asarray(field(t), dtype=float)


def _rhs(t, y, tw, m, J, Jw, w0, field, dist, gg):
    # scalar-arithmetic right-hand side; y is a length-9 sequence
    w1, w2, w3, O1, O2, O3, q1, q2, q3 = y
    s = q1 * q1 + q2 * q2 + q3 * q3
    # intermediate RK stages get the same slack as the step acceptance test
    if s > (1.0 + STEP_Q_SLACK) ** 2:
        raise DomainError(f"|q| = {math.sqrt(s):.15g} exceeds 1")
    q0 = math.sqrt(1.0 - s) if s < 1.0 else 0.0
    J1, J2, J3 = J
    # rotation LVLH -> body; only what is needed
    c = 2.0 * q0 * q0 - 1.0
    a11 = c + 2 * q1 * q1
    a12 = 2 * q1 * q2 + 2 * q0 * q3
    a13 = 2 * q1 * q3 - 2 * q0 * q2
    a21 = 2 * q1 * q2 - 2 * q0 * q3
    a22 = c + 2 * q2 * q2
    a23 = 2 * q2 * q3 + 2 * q0 * q1
    a31 = 2 * q1 * q3 + 2 * q0 * q2
    a32 = 2 * q2 * q3 - 2 * q0 * q1
    a33 = c + 2 * q3 * q3
    l1, l2, l3 = w0 * a12, w0 * a22, w0 * a32
    # f
    x1, x2, x3 = w2 * l3 - w3 * l2, w3 * l1 - w1 * l3, w1 * l2 - w2 * l1
    i1, i2, i3 = w1 + l1, w2 + l2, w3 + l3
    h1 = J1 * i1 + Jw[0] * O1
    h2 = J2 * i2 + Jw[1] * O2
    h3 = J3 * i3 + Jw[2] * O3
    T1 = J1 * x1 - (i2 * h3 - i3 * h2)
    T2 = J2 * x2 - (i3 * h1 - i1 * h3)
    T3 = J3 * x3 - (i1 * h2 - i2 * h1)
    if gg:
        k = 3.0 * w0 * w0
        T1 += k * (a23 * J3 * a33 - a33 * J2 * a23)
        T2 += k * (a33 * J1 * a13 - a13 * J3 * a33)
        T3 += k * (a13 * J2 * a23 - a23 * J1 * a13)
    m1, m2, m3 = m
    if m1 != 0.0 or m2 != 0.0 or m3 != 0.0:
        bl = field(t)
        b1 = a11 * bl[0] + a12 * bl[1] + a13 * bl[2]
        b2 = a21 * bl[0] + a22 * bl[1] + a23 * bl[2]
        b3 = a31 * bl[0] + a32 * bl[1] + a33 * bl[2]
        # m x b
        T1 += m2 * b3 - m3 * b2
        T2 += m3 * b1 - m1 * b3
        T3 += m1 * b2 - m2 * b1
    T1 -= tw[0]
    T2 -= tw[1]
    T3 -= tw[2]
    if dist is not None:
        d = dist(t)
        T1 += d[0]
        T2 += d[1]
        T3 += d[2]
    return (
        T1 / J1, T2 / J2, T3 / J3,
        tw[0] / Jw[0], tw[1] / Jw[1], tw[2] / Jw[2],
        0.5 * (q0 * w1 - q3 * w2 + q2 * w3),
        0.5 * (q3 * w1 + q0 * w2 - q1 * w3),
        0.5 * (-q2 * w1 + q1 * w2 + q0 * w3),
    )


def state_derivative(x: SystemState, u: ControlInput, t_d=None, env: Optional[OrbitEnvironment] = None,
                     params: Optional[SpacecraftParams] = None, field=None, gravity_gradient=True):
    """Time derivative of the state as a 9-vector ``[dw, dOm, dq]``.

    ``J dw/dt = f + tau_g - t_w - b x m + t_d``, ``J_w dOm/dt = t_w`` and
    ``dq/dt = g(q, w)``.  ``field`` maps time to the LVLH-frame field (the
    environment's dipole when omitted); it is rotated into body axes with
    the current attitude.  ``t_d`` is a constant 3-vector or a callable of
    time.  ``gravity_gradient=False`` drops the gravity-gradient torque.
    """
    env = env or OrbitEnvironment()
    params = params or SpacecraftParams()
    field = field or env.field
    if t_d is None:
        dist = None
    elif callable(t_d):
        dist = t_d
    else:
        tau = _vec3(t_d, "t_d")
        dist = lambda t: tau  # noqa: E731
    y = x.as_vector()
    d = _rhs(x.t, y, tuple(u.t_w), tuple(u.m), params.J, params.J_w, env.rate, field, dist, gravity_gradient)
    return np.array(d)


def rk4_step(x: SystemState, u: ControlInput, dt, params: Optional[SpacecraftParams] = None,
             env: Optional[OrbitEnvironment] = None, field=None, t_d=None, gravity_gradient=True):
    """One classical Runge-Kutta step with ``u`` held constant.

    Raises
    ------
    IntegrationError
        If the quaternion leaves the reduced chart (``|q| > 1 + 1e-9``).
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    env = env or OrbitEnvironment()
    params = params or SpacecraftParams()
    field = field or env.field
    if t_d is not None and not callable(t_d):
        tau = _vec3(t_d, "t_d")
        t_d = lambda t: tau  # noqa: E731
    y = tuple(float(v) for v in x.as_vector())
    y = _rk4(x.t, y, dt, tuple(u.t_w), tuple(u.m), params.J, params.J_w, env.rate, field, t_d, gravity_gradient)
    return SystemState.from_vector(y, x.t + dt)


def _rk4(t, y, h, tw, m, J, Jw, w0, field, dist, gg):
    def add(a, b, s):
        return tuple(ai + s * bi for ai, bi in zip(a, b))

    try:
        k1 = _rhs(t, y, tw, m, J, Jw, w0, field, dist, gg)
        k2 = _rhs(t + 0.5 * h, add(y, k1, 0.5 * h), tw, m, J, Jw, w0, field, dist, gg)
        k3 = _rhs(t + 0.5 * h, add(y, k2, 0.5 * h), tw, m, J, Jw, w0, field, dist, gg)
        k4 = _rhs(t + h, add(y, k3, h), tw, m, J, Jw, w0, field, dist, gg)
    except DomainError as exc:
        raise IntegrationError(f"state left the reduced-quaternion chart inside a step at t={t:.6g}: {exc}") from exc
    out = [yi + h / 6.0 * (a + 2 * b + 2 * c + d) for yi, a, b, c, d in zip(y, k1, k2, k3, k4)]
    nq = math.sqrt(out[6] ** 2 + out[7] ** 2 + out[8] ** 2)
    if nq > 1.0 + STEP_Q_SLACK:
        raise IntegrationError(f"|q| = {nq:.12g} after step at t={t:.6g}; attitude left the reduced chart")
    if nq > 1.0:
        r = 1.0 / nq
        out[6] *= r
        out[7] *= r
        out[8] *= r
    return tuple(out)


def inertial_momentum(x: SystemState, params: SpacecraftParams, env: OrbitEnvironment):
    """Total angular momentum ``J w_I + J_w Om`` in body coordinates."""
    wI = x.w + lvlh_rate_in_body(x.q, env.rate)
    return params.J_vec * wI + params.Jw_vec * x.Om
