"""Closed-loop simulation of a periodic gain schedule.

Two plants are supported: the sampled linear model (one matrix step per
sample) and the nonlinear spacecraft model integrated with fixed-step RK4
between samples.  In both the control is computed at sample instants from
the full state and held until the next sample.

Magnetometer duty cycle (nonlinear mode): each sample period starts with a
measurement window of length ``(1 - duty) ts`` in which the coils are off.
The coils then run for the remaining ``duty ts`` with the magnetic rows of
the gain scaled by ``1 / duty`` so that the delivered impulse matches the
full-period design.  Wheel torques are unaffected and act for the whole
period.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .attitude_dynamics import (
    ControlInput,
    SystemState,
    _rk4,
    constant_disturbance,
    orbital_sinusoid_disturbance,
)
from .errors import DomainError, FileFormatError, IntegrationError
from .linear_plant import PeriodicPlant
from .lqr_core import GainSchedule, gain_at
from .matkit import zoh_input_integral
from .orbit_env import OrbitEnvironment, SpacecraftParams, offset_dipole, rotation_lvlh_to_body

log = logging.getLogger(__name__)

CSV_HEADER = ("t", "w1", "w2", "w3", "Om1", "Om2", "Om3", "q1", "q2", "q3",
              "tw1", "tw2", "tw3", "m1", "m2", "m3", "b1", "b2", "b3")

# initial errors of the reference scenario
REFERENCE_INITIAL_STATE = SystemState(w=[1e-5] * 3, Om=[1e-5] * 3, q=[0.01] * 3)
MAGNETIC_ROWS = slice(3, 6)


@dataclass
class SimConfig:
    """Options for one closed-loop run.

    ``disturbance`` is ``None``, a callable ``t -> torque`` or a dict
    ``{"model": "constant", "torque": [..]}`` /
    ``{"model": "sinusoid", "amplitude": [..], "phase": .., "bias": [..]}``.
    ``field_model`` is ``"design-dipole"``, ``"truth-dipole-offset"`` (uses
    ``field_offset = (inclination rad, phase rad)``) or any callable
    ``t -> b_lvlh``.  ``ic_half_width`` > 0 randomizes the initial state
    (see `randomize_initial_state`).
    """

    mode: str = "linear"
    duration: float = 10.0  # orbits
    initial_state: SystemState = field(default_factory=lambda: REFERENCE_INITIAL_STATE)
    disturbance: Union[None, dict, Callable] = None
    field_model: Union[str, Callable] = "design-dipole"
    field_offset: tuple = (0.0, 0.0)
    duty_fraction: float = 1.0
    saturation: bool = False
    seed: Optional[int] = None
    ic_scale: float = 1.0
    ic_half_width: float = 0.0
    log_stride: int = 1
    substeps: int = 64
    runaway_bound: float = 1e4

    def __post_init__(self):
        if self.mode not in ("linear", "nonlinear"):
            raise DomainError(f"mode must be 'linear' or 'nonlinear', got {self.mode!r}")
        if not (0.0 < self.duty_fraction <= 1.0):
            raise DomainError("duty_fraction must lie in (0, 1]")
        if not self.duration >= 0:
            raise DomainError("duration must be non-negative")
        if int(self.log_stride) != self.log_stride or self.log_stride < 1:
            raise DomainError("log_stride must be a positive integer")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise DomainError("substeps must be a positive integer")
        if self.ic_half_width < 0:
            raise DomainError("ic_half_width must be non-negative")


@dataclass
class Trajectory:
    """Logged samples: ``t`` (N,), ``x`` (N, 9), ``u`` (N, 6), ``b`` (N, 3).

    ``u[i]`` is the input commanded at ``t[i]`` (held until the next
    sample); ``b[i]`` the body-frame field at ``t[i]``.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.x = np.asarray(self.x, dtype=float).reshape(-1, 9)
        self.u = np.asarray(self.u, dtype=float).reshape(-1, 6)
        self.b = np.asarray(self.b, dtype=float).reshape(-1, 3)
        N = self.t.shape[0]
        if not (self.x.shape[0] == self.u.shape[0] == self.b.shape[0] == N):
            raise DomainError("trajectory arrays must have the same number of rows")
        if N > 1 and not np.all(np.diff(self.t) > 0):
            raise DomainError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.t.shape[0]

    @property
    def w(self):
        return self.x[:, 0:3]

    @property
    def Om(self):
        return self.x[:, 3:6]

    @property
    def q(self):
        return self.x[:, 6:9]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CSV_HEADER)
            for i in range(len(self)):
                row = [self.t[i], *self.x[i], *self.u[i], *self.b[i]]
                wr.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        """Read a trajectory CSV, rejecting malformed content with its line number."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise FileFormatError(f"{path}: line 1: empty file, expected header")
        if tuple(c.strip() for c in rows[0]) != CSV_HEADER:
            raise FileFormatError(f"{path}: line 1: unexpected header")
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise FileFormatError(f"{path}: line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise FileFormatError(f"{path}: line {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise FileFormatError(f"{path}: line {lineno}: non-finite value")
            if data and vals[0] <= data[-1][0]:
                raise FileFormatError(f"{path}: line {lineno}: time is not increasing")
            data.append(vals)
        if not data:
            raise FileFormatError(f"{path}: line 2: no data rows after the header")
        a = np.array(data)
        return cls(t=a[:, 0], x=a[:, 1:10], u=a[:, 10:16], b=a[:, 16:19])


# ---------------------------------------------------------------------------
# helpers


def duty_scale_gain(K, duty_fraction, rows=None):
    """Gain compensated for a control duty cycle: ``K / duty_fraction``.

    ``rows`` restricts the scaling to a subset of input rows (a slice or
    index array); by default every row is scaled.
    """
    if not (0.0 < duty_fraction <= 1.0):
        raise DomainError("duty_fraction must lie in (0, 1]")
    K = np.array(K, dtype=float)
    if rows is None:
        return K / duty_fraction
    K[rows] = K[rows] / duty_fraction
    return K


def randomize_initial_state(base: SystemState, scale=1.0, half_width=0.0, seed=None) -> SystemState:
    """Scaled initial state, optionally perturbed uniformly in a box.

    Each component ``c`` of ``scale * base`` becomes
    ``c * (1 + half_width * U(-1, 1))`` with a seeded generator, i.e. the
    box is centred on the scaled state with a relative half-width.
    """
    x = scale * base.as_vector()
    if half_width > 0:
        rng = np.random.default_rng(seed)
        x = x * (1.0 + half_width * rng.uniform(-1.0, 1.0, size=x.shape))
    return SystemState.from_vector(x, base.t)


def make_disturbance(desc, w0):
    if desc is None or callable(desc):
        return desc
    if not isinstance(desc, dict):
        raise DomainError("disturbance must be None, a callable or a dict")
    model = desc.get("model", "none")
    if model == "none":
        return None
    if model == "constant":
        return constant_disturbance(desc["torque"])
    if model == "sinusoid":
        return orbital_sinusoid_disturbance(desc["amplitude"], w0, desc.get("phase", 0.0), desc.get("bias"))
    raise DomainError(f"unknown disturbance model {model!r}")


def make_field(config: SimConfig, env: OrbitEnvironment):
    fm = config.field_model
    if callable(fm):
        return fm
    if fm == "design-dipole":
        return env.field
    if fm == "truth-dipole-offset":
        di, dph = config.field_offset
        return offset_dipole(env, di, dph)
    raise DomainError(f"unknown field model {fm!r}")


def _n_samples(config: SimConfig, p):
    return int(round(config.duration * p))


def _initial(config: SimConfig):
    return randomize_initial_state(config.initial_state, config.ic_scale, config.ic_half_width, config.seed)


# ---------------------------------------------------------------------------
# runs


def run_linear(plant: PeriodicPlant, schedule: GainSchedule, config: SimConfig,
               env: Optional[OrbitEnvironment] = None, params: Optional[SpacecraftParams] = None) -> Trajectory:
    """Closed loop on the sampled linear plant.

    ``x_{k+1} = A x_k + B_k u_k + d_k`` with ``u_k = -K_k (x_k - x_bar)``.
    ``d_k`` is the disturbance torque sampled over the hold interval; it is
    zero unless ``config.disturbance`` is set.  The logged field is the
    design dipole from ``env``.
    """
    if schedule.p != plant.p:
        raise DomainError(f"schedule period {schedule.p} does not match plant period {plant.p}")
    if schedule.P[0].shape[0] != plant.n or schedule.K[0].shape != (plant.m, plant.n):
        raise DomainError("schedule dimensions do not match the plant")
    if abs(schedule.ts - plant.ts) > 1e-9 * plant.ts:
        raise DomainError(f"schedule ts {schedule.ts} does not match plant ts {plant.ts}")
    env = env or OrbitEnvironment()
    params = params or SpacecraftParams()
    if config.duty_fraction != 1.0:
        log.warning("duty_fraction is ignored by the linear simulation")
    dist = make_disturbance(config.disturbance, env.rate)
    D = np.zeros((plant.n, 3))
    D[0:3] = np.diag(1.0 / params.J_vec)

    x0 = _initial(config)
    t0 = x0.t
    x = x0.as_vector()
    N = _n_samples(config, plant.p)
    ts = plant.ts
    T, X, U, Bf = [], [], [], []
    for k in range(N + 1):
        u = schedule.control(k, x)
        if k % config.log_stride == 0 or k == N:
            T.append(t0 + k * ts)
            X.append(x.copy())
            U.append(u)
            Bf.append(env.field(t0 + k * ts))
        if k == N:
            break
        xn = plant.A @ x + plant.B[k % plant.p] @ u
        if dist is not None:
            if plant.Ac is not None:
                d = zoh_input_integral(plant.Ac, lambda t: (D @ dist(t))[:, None], t0 + k * ts, ts)[:, 0]
            else:
                d = ts * (D @ dist(t0 + k * ts))
            xn = xn + d
        x = xn
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > config.runaway_bound:
            raise IntegrationError(f"linear state norm exceeded {config.runaway_bound:g} at sample {k + 1}")
    return Trajectory(np.array(T), np.array(X), np.array(U), np.array(Bf))


def run_nonlinear(schedule: GainSchedule, config: SimConfig, params: Optional[SpacecraftParams] = None,
                  env: Optional[OrbitEnvironment] = None) -> Trajectory:
    """Closed loop on the nonlinear model with sampled, held feedback.

    At ``t_k = t0 + k ts`` the state is measured and
    ``u = -K_{k mod p} (x - x_bar)`` is computed; with a duty fraction below
    one the magnetic rows are scaled by ``1 / duty`` and the coils are off
    during the leading measurement window.  Saturation, when enabled, is
    applied after scaling.  Between samples the model is integrated with
    ``config.substeps`` RK4 steps per period, split between the windows in
    proportion to their lengths.

    Raises
    ------
    IntegrationError
        If the attitude leaves the reduced-quaternion chart or the state
        norm exceeds ``config.runaway_bound``.
    """
    params = params or SpacecraftParams()
    env = env or OrbitEnvironment()
    fieldf = make_field(config, env)
    dist = make_disturbance(config.disturbance, env.rate)
    duty = config.duty_fraction
    ts = schedule.ts
    p = schedule.p
    J, Jw, w0 = params.J, params.J_w, env.rate
    nsub = config.substeps
    if duty < 1.0:
        n_meas = min(nsub - 1, max(1, int(round(nsub * (1.0 - duty)))))
        windows = [((1.0 - duty) * ts, n_meas, False), (duty * ts, nsub - n_meas, True)]
    else:
        windows = [(ts, nsub, True)]
    zero3 = (0.0, 0.0, 0.0)

    x0 = _initial(config)
    t0 = x0.t
    y = tuple(float(v) for v in x0.as_vector())
    N = _n_samples(config, p)
    T, X, U, Bf = [], [], [], []
    for k in range(N + 1):
        tk = t0 + k * ts
        xv = np.array(y)
        K = gain_at(schedule, k)
        if duty < 1.0:
            K = duty_scale_gain(K, duty, rows=MAGNETIC_ROWS)
        u = ControlInput.from_vector(-K @ (xv - schedule.x_bar))
        if config.saturation:
            u = u.saturate(params)
        if k % config.log_stride == 0 or k == N:
            T.append(tk)
            X.append(xv)
            U.append(u.as_vector())
            Bf.append(rotation_lvlh_to_body(xv[6:9]) @ np.asarray(fieldf(tk), dtype=float))
        if k == N:
            break
        tw, m = tuple(u.t_w), tuple(u.m)
        t = tk
        for length, nsteps, coils_on in windows:
            h = length / nsteps
            mm = m if coils_on else zero3
            for j in range(nsteps):
                y = _rk4(t + j * h, y, h, tw, mm, J, Jw, w0, fieldf, dist, True)
            t += length
        nrm = math.sqrt(sum(v * v for v in y))
        if not math.isfinite(nrm) or nrm > config.runaway_bound:
            raise IntegrationError(f"state norm {nrm:.3g} exceeded {config.runaway_bound:g} at t={t:.6g}")
    return Trajectory(np.array(T), np.array(X), np.array(U), np.array(Bf))


def run(config: SimConfig, schedule: GainSchedule, plant: Optional[PeriodicPlant] = None,
        params: Optional[SpacecraftParams] = None, env: Optional[OrbitEnvironment] = None) -> Trajectory:
    """Dispatch on ``config.mode``; the linear mode needs ``plant``."""
    if config.mode == "linear":
        if plant is None:
            raise DomainError("linear mode requires a plant")
        return run_linear(plant, schedule, config, env, params)
    return run_nonlinear(schedule, config, params, env)


def momentum_bias_run(schedule: GainSchedule, config: SimConfig, plant: Optional[PeriodicPlant] = None,
                      params: Optional[SpacecraftParams] = None, env: Optional[OrbitEnvironment] = None,
                      wheel_bias=None) -> Trajectory:
    """Closed loop regulating the wheels toward a speed bias.

    The bias is ``schedule.x_bar`` (or ``wheel_bias``, which replaces it)
    and may only be nonzero in the wheel-speed slots.
    """
    if wheel_bias is not None:
        xb = np.zeros(schedule.P[0].shape[0])
        xb[3:6] = np.asarray(wheel_bias, dtype=float)
        schedule = schedule.with_bias(xb)
    xb = schedule.x_bar
    if np.any(xb[0:3] != 0) or np.any(xb[6:9] != 0):
        raise DomainError("the reference state may only be nonzero in the wheel-speed slots")
    return run(config, schedule, plant, params, env)


def orbit_averages(traj: Trajectory, samples_per_orbit, block=slice(None)):
    """Mean Euclidean norm of a state block over each complete orbit of logged samples."""
    norms = np.linalg.norm(traj.x[:, block], axis=1)
    n = len(norms) // samples_per_orbit
    return norms[: n * samples_per_orbit].reshape(n, samples_per_orbit).mean(axis=1)
