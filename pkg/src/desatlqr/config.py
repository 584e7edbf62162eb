"""Run configuration: a YAML (or JSON) document with SI units throughout.

Layout (every section optional except ``spacecraft.J_w``)::

    spacecraft:
      J: [250, 150, 100]            # principal inertias, kg m^2
      J_w: [0.05, 0.05, 0.05]       # wheel inertias, kg m^2 (required)
      max_dipole: null              # A m^2, scalar or per axis
      max_wheel_torque: null        # N m, scalar or per axis
    orbit:
      altitude: 657000.0            # m
      magnetic_inclination: 0.9948  # rad (or magnetic_inclination_deg)
      dipole_strength: 7.9e15       # Wb m
      GM: 3.986005e14               # m^3 / s^2
      epoch_offset: 0.0             # s
    weights:
      Q_diag: [0.001, 0.001, 0.001, 0.001, 0.001, 0.001, 0.02, 0.02, 0.02]
      R_diag: [1000, 1000, 1000, 100, 100, 100]
      # or full matrices Q: [[..]] (9x9) and R: [[..]] (6x6)
    design:
      p: 100                        # samples per orbit
      ts: null                      # s, default orbital period / p
      method: exact                 # exact | euler
      quad_steps: 16
      wheel_bias: [0, 0, 0]         # rad/s, momentum-bias reference
    simulation:
      mode: linear                  # linear | nonlinear
      duration: 10                  # orbits
      initial_state: {w: [..], Om: [..], q: [..]}   # rad/s, rad/s, -
      ic_scale: 1.0
      ic_half_width: 0.0
      seed: null
      duty_fraction: 1.0
      saturation: false
      field_model: design-dipole    # design-dipole | truth-dipole-offset
      field_offset: [0.0, 0.0]      # inclination rad, phase rad
      disturbance: {model: none}    # none | constant | sinusoid
      log_stride: 1
      substeps: 64
    output:
      dir: out                      # default for --out
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .attitude_dynamics import SystemState
from .errors import ConfigError, DesatError
from .linear_plant import DEFAULT_Q, DEFAULT_R, PeriodicPlant, sample_plant
from .orbit_env import OrbitEnvironment, SpacecraftParams
from .sim_engine import REFERENCE_INITIAL_STATE, SimConfig

_SECTIONS = ("spacecraft", "orbit", "weights", "design", "simulation", "output")


@dataclass
class RunConfig:
    params: SpacecraftParams
    env: OrbitEnvironment
    Q: np.ndarray
    R: np.ndarray
    p: int = 100
    ts: Optional[float] = None
    method: str = "exact"
    quad_steps: int = 16
    wheel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sim: SimConfig = field(default_factory=SimConfig)
    out_dir: Optional[str] = None

    @property
    def sample_time(self):
        return self.env.period / self.p if self.ts is None else self.ts

    def build_plant(self) -> PeriodicPlant:
        return sample_plant(self.params, self.env, ts=self.ts, p=self.p, Q=self.Q, R=self.R,
                            method=self.method, quad_steps=self.quad_steps)

    @property
    def x_bar(self):
        xb = np.zeros(9)
        xb[3:6] = self.wheel_bias
        return xb


def _section(doc, name):
    sec = doc.get(name, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be a mapping")
    return sec


def _number(sec, key, where, default=None, positive=False, required=False):
    if key not in sec or sec[key] is None:
        if required:
            raise ConfigError(f"{where}.{key}", "is required")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}", f"must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{where}.{key}", "must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key}", "must be positive")
    return v


def _vector(sec, key, where, n, default=None, positive=False, required=False, allow_scalar=False):
    if key not in sec or sec[key] is None:
        if required:
            raise ConfigError(f"{where}.{key}", "is required")
        return default
    v = sec[key]
    if allow_scalar and isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v] * n
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}", f"must be a list of {n} numbers") from None
    if a.shape != (n,):
        raise ConfigError(f"{where}.{key}", f"must have {n} entries, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{where}.{key}", "entries must be finite")
    if positive and not np.all(a > 0):
        raise ConfigError(f"{where}.{key}", "entries must be strictly positive")
    return a


def _matrix(sec, key, where, n):
    try:
        a = np.asarray(sec[key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}", f"must be a {n}x{n} matrix") from None
    if a.shape != (n, n):
        raise ConfigError(f"{where}.{key}", f"must be {n}x{n}, got shape {a.shape}")
    return a


def parse_config(doc) -> RunConfig:
    """Validate a configuration mapping; `ConfigError` names the offending field."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")

    sc = _section(doc, "spacecraft")
    J = _vector(sc, "J", "spacecraft", 3, default=np.array([250.0, 150.0, 100.0]), positive=True)
    Jw = _vector(sc, "J_w", "spacecraft", 3, positive=True, required=True)
    md = _vector(sc, "max_dipole", "spacecraft", 3, positive=True, allow_scalar=True)
    mt = _vector(sc, "max_wheel_torque", "spacecraft", 3, positive=True, allow_scalar=True)
    params = SpacecraftParams(J=tuple(J), J_w=tuple(Jw),
                              max_dipole=None if md is None else tuple(md),
                              max_wheel_torque=None if mt is None else tuple(mt))

    ob = _section(doc, "orbit")
    alt = _number(ob, "altitude", "orbit", default=657e3, positive=True)
    if "magnetic_inclination" in ob and "magnetic_inclination_deg" in ob:
        raise ConfigError("orbit.magnetic_inclination", "give either radians or _deg, not both")
    if "magnetic_inclination_deg" in ob:
        im = math.radians(_number(ob, "magnetic_inclination_deg", "orbit"))
    else:
        im = _number(ob, "magnetic_inclination", "orbit", default=math.radians(57.0))
    env = OrbitEnvironment(altitude=alt, magnetic_inclination=im,
                           dipole_strength=_number(ob, "dipole_strength", "orbit", default=7.9e15, positive=True),
                           GM=_number(ob, "GM", "orbit", default=3.986005e14, positive=True),
                           epoch_offset=_number(ob, "epoch_offset", "orbit", default=0.0))

    wt = _section(doc, "weights")
    if "Q" in wt and "Q_diag" in wt:
        raise ConfigError("weights.Q", "give either Q or Q_diag, not both")
    if "R" in wt and "R_diag" in wt:
        raise ConfigError("weights.R", "give either R or R_diag, not both")
    Q = _matrix(wt, "Q", "weights", 9) if "Q" in wt else None
    R = _matrix(wt, "R", "weights", 6) if "R" in wt else None
    if "Q_diag" in wt:
        qd = _vector(wt, "Q_diag", "weights", 9)
        if np.any(qd < 0):
            raise ConfigError("weights.Q_diag", "entries must be non-negative")
        Q = np.diag(qd)
    if "R_diag" in wt:
        R = np.diag(_vector(wt, "R_diag", "weights", 6, positive=True))
    Q = DEFAULT_Q.copy() if Q is None else Q
    R = DEFAULT_R.copy() if R is None else R
    if np.max(np.abs(Q - Q.T)) > 1e-12 * max(1.0, np.max(np.abs(Q))) or np.linalg.eigvalsh(0.5 * (Q + Q.T))[0] < -1e-12:
        raise ConfigError("weights.Q", "must be symmetric positive semidefinite")
    if np.max(np.abs(R - R.T)) > 1e-12 * max(1.0, np.max(np.abs(R))) or np.linalg.eigvalsh(0.5 * (R + R.T))[0] <= 0:
        raise ConfigError("weights.R", "must be symmetric positive definite")

    ds = _section(doc, "design")
    p = ds.get("p", 100)
    if isinstance(p, bool) or not isinstance(p, (int, float)) or int(p) != p or p < 1:
        raise ConfigError("design.p", f"must be an integer >= 1, got {p!r}")
    ts = _number(ds, "ts", "design", positive=True)
    method = ds.get("method", "exact")
    if method not in ("exact", "euler"):
        raise ConfigError("design.method", f"must be 'exact' or 'euler', got {method!r}")
    qs = ds.get("quad_steps", 16)
    if isinstance(qs, bool) or not isinstance(qs, int) or qs < 2 or qs % 2:
        raise ConfigError("design.quad_steps", "must be an even integer >= 2")
    bias = _vector(ds, "wheel_bias", "design", 3, default=np.zeros(3))

    sm = _section(doc, "simulation")
    ic = sm.get("initial_state")
    if ic is None:
        x0 = REFERENCE_INITIAL_STATE
    else:
        if not isinstance(ic, dict):
            raise ConfigError("simulation.initial_state", "must be a mapping with w, Om, q")
        w = _vector(ic, "w", "simulation.initial_state", 3, default=REFERENCE_INITIAL_STATE.w)
        Om = _vector(ic, "Om", "simulation.initial_state", 3, default=REFERENCE_INITIAL_STATE.Om)
        q = _vector(ic, "q", "simulation.initial_state", 3, default=REFERENCE_INITIAL_STATE.q)
        if float(q @ q) > 1.0:
            raise ConfigError("simulation.initial_state.q", "|q| must not exceed 1")
        x0 = SystemState(w, Om, q)
    seed = sm.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ConfigError("simulation.seed", "must be an integer")
    duty = _number(sm, "duty_fraction", "simulation", default=1.0)
    if not (0.0 < duty <= 1.0):
        raise ConfigError("simulation.duty_fraction", "must lie in (0, 1]")
    duration = _number(sm, "duration", "simulation", default=10.0)
    if duration < 0:
        raise ConfigError("simulation.duration", "must be non-negative")
    fo = _vector(sm, "field_offset", "simulation", 2, default=np.zeros(2))
    try:
        sim = SimConfig(
            mode=sm.get("mode", "linear"),
            duration=duration,
            initial_state=x0,
            disturbance=sm.get("disturbance"),
            field_model=sm.get("field_model", "design-dipole"),
            field_offset=(float(fo[0]), float(fo[1])),
            duty_fraction=duty,
            saturation=bool(sm.get("saturation", False)),
            seed=seed,
            ic_scale=_number(sm, "ic_scale", "simulation", default=1.0),
            ic_half_width=_number(sm, "ic_half_width", "simulation", default=0.0),
            log_stride=sm.get("log_stride", 1),
            substeps=sm.get("substeps", 64),
        )
    except DesatError as exc:
        raise ConfigError("simulation", str(exc)) from None
    if sim.field_model not in ("design-dipole", "truth-dipole-offset"):
        raise ConfigError("simulation.field_model", f"unknown model {sim.field_model!r}")
    dist = sim.disturbance
    if dist is not None and (not isinstance(dist, dict) or dist.get("model", "none") not in ("none", "constant", "sinusoid")):
        raise ConfigError("simulation.disturbance", "must be {model: none|constant|sinusoid, ...}")

    out = _section(doc, "output").get("dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output.dir", "must be a path string")

    return RunConfig(params=params, env=env, Q=Q, R=R, p=int(p), ts=ts, method=method, quad_steps=qs,
                     wheel_bias=bias, sim=sim, out_dir=out)


def load_config(path) -> RunConfig:
    """Read and validate a configuration file (YAML; JSON is accepted as a subset)."""
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return parse_config(doc)


def reference_config_dict():
    """The reference design configuration as a plain mapping."""
    return {
        "spacecraft": {"J": [250.0, 150.0, 100.0], "J_w": [0.05, 0.05, 0.05]},
        "orbit": {"altitude": 657e3, "magnetic_inclination_deg": 57.0},
        "weights": {"Q_diag": [0.001] * 6 + [0.02] * 3, "R_diag": [1e3] * 3 + [1e2] * 3},
        "design": {"p": 100, "method": "exact"},
        "simulation": {"mode": "linear", "duration": 10},
    }
