"""Linearized 9-state attitude/wheel model and its sampled-data forms.

Continuous model ``dx/dt = A x + B(t) u + d`` about nadir pointing
(``x = 0``), with state ``[w1 w2 w3 Om1 Om2 Om3 q1 q2 q3]`` and input
``[tw1 tw2 tw3 m1 m2 m3]``.  ``B(t)`` is periodic through the dipole
field; it is constant when the magnetic inclination is zero.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .errors import DomainError, FileFormatError
from .matkit import as_matrix, mat_exp, zoh_input_integral
from .orbit_env import OrbitEnvironment, SpacecraftParams, dipole_field, skew

log = logging.getLogger(__name__)

N_STATE = 9
N_INPUT = 6
STATE_NAMES = ("w1", "w2", "w3", "Om1", "Om2", "Om3", "q1", "q2", "q3")
INPUT_NAMES = ("tw1", "tw2", "tw3", "m1", "m2", "m3")

# reference weights
DEFAULT_Q = np.diag([0.001] * 6 + [0.02] * 3)
DEFAULT_R = np.diag([1e3] * 3 + [1e2] * 3)

PLANT_SCHEMA = "desatlqr.plant/1"
# tolerated relative mismatch between p * ts and the orbital period
PERIOD_TOL = 1e-3


def build_A_continuous(params: SpacecraftParams, w0):
    """State matrix of the linearized model about nadir pointing."""
    J1, J2, J3 = params.J
    Jw1, _, Jw3 = params.J_w
    A = np.zeros((N_STATE, N_STATE))
    A[0, 2] = w0 * (J1 - J2 + J3) / (-J1)
    A[2, 0] = w0 * (J1 - J2 + J3) / J3
    A[0, 5] = -w0 * Jw3 / J1
    A[2, 3] = w0 * Jw1 / J3
    # gravity gradient (6 w0^2) plus kinematic coupling (2 w0^2) on the roll row
    A[0, 6] = 8 * w0**2 * (J3 - J2) / J1
    A[1, 7] = 6 * w0**2 * (J3 - J1) / J2
    A[2, 8] = 2 * w0**2 * (J1 - J2) / J3
    A[6, 0] = A[7, 1] = A[8, 2] = 0.5
    return A


def build_B_continuous(t, params: SpacecraftParams, env: OrbitEnvironment):
    """Input matrix ``B(t)``: wheel block ``[-J^-1; J_w^-1; 0]``, magnetic block ``[-J^-1 b(t)^x; 0; 0]``."""
    Jinv = 1.0 / params.J_vec
    B = np.zeros((N_STATE, N_INPUT))
    B[0:3, 0:3] = -np.diag(Jinv)
    B[3:6, 0:3] = np.diag(1.0 / params.Jw_vec)
    B[0:3, 3:6] = -Jinv[:, None] * skew(dipole_field(t, env))
    return B


def discretize_euler(A, B_of_t: Callable, ts, k):
    """Forward-Euler sample: ``(I + ts A, ts B(k ts))``."""
    if not ts > 0:
        raise DomainError("ts must be positive")
    A = as_matrix(A, "A", square=True)
    return np.eye(A.shape[0]) + ts * A, ts * as_matrix(B_of_t(k * ts), "B")


def discretize_exact(A, B_of_t: Callable, ts, k, quad_steps=16):
    """Zero-order-hold sample: ``(exp(A ts), int_0^ts exp(A tau) B(k ts + tau) dtau)``."""
    if not ts > 0:
        raise DomainError("ts must be positive")
    A = as_matrix(A, "A", square=True)
    return mat_exp(A, ts), zoh_input_integral(A, B_of_t, k * ts, ts, quad_steps)


def _check_weights(Q, R):
    Q = as_matrix(Q, "Q", square=True)
    R = as_matrix(R, "R", square=True)
    if Q.shape != (N_STATE, N_STATE) or R.shape != (N_INPUT, N_INPUT):
        raise DomainError(f"Q must be {N_STATE}x{N_STATE} and R {N_INPUT}x{N_INPUT}")
    for name, W in (("Q", Q), ("R", R)):
        if np.max(np.abs(W - W.T)) > 1e-12 * max(1.0, np.max(np.abs(W))):
            raise DomainError(f"{name} must be symmetric")
    qmin = np.linalg.eigvalsh(Q)[0]
    if qmin < -1e-12 * max(1.0, np.max(np.abs(Q))):
        raise DomainError("Q must be positive semidefinite")
    if np.linalg.eigvalsh(R)[0] <= 0:
        raise DomainError("R must be positive definite")
    return Q, R


@dataclass(frozen=True)
class PeriodicPlant:
    """Sampled periodic plant ``x_{k+1} = A x_k + B_k u_k`` with LQR weights.

    ``A`` is the same for every sample; ``B[k]`` for ``k = 0..p-1``.  Use
    `B_at` for wrapped indexing.
    """

    A: np.ndarray
    B: tuple
    ts: float
    Q: np.ndarray
    R: np.ndarray
    method: str = "exact"
    Ac: Optional[np.ndarray] = None  # continuous state matrix, used to sample disturbances

    def __post_init__(self):
        A = as_matrix(self.A, "A", square=True)
        Bs = tuple(as_matrix(b, f"B[{k}]") for k, b in enumerate(self.B))
        if not Bs:
            raise DomainError("at least one B_k is required")
        n = A.shape[0]
        m = Bs[0].shape[1]
        if any(b.shape != (n, m) for b in Bs):
            raise DomainError("every B_k must have shape (n, m) matching A")
        if not self.ts > 0:
            raise DomainError("ts must be positive")
        Q = as_matrix(self.Q, "Q", square=True)
        R = as_matrix(self.R, "R", square=True)
        if Q.shape != (n, n) or R.shape != (m, m):
            raise DomainError("weight shapes do not match the plant")
        Q, R = np.array(Q), np.array(R)
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise DomainError("R must be positive definite")
        object.__setattr__(self, "A", np.array(A))
        object.__setattr__(self, "B", Bs)
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "R", 0.5 * (R + R.T))
        object.__setattr__(self, "ts", float(self.ts))
        if self.Ac is not None:
            Ac = np.array(as_matrix(self.Ac, "Ac", square=True))
            if Ac.shape != A.shape:
                raise DomainError("Ac must match the shape of A")
            object.__setattr__(self, "Ac", Ac)

    @property
    def p(self):
        return len(self.B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B[0].shape[1]

    def A_at(self, k):
        return self.A

    def B_at(self, k):
        return self.B[k % self.p]

    # JSON: {"schema", "n", "m", "p", "ts", "method", "A", "B", "Q", "R", "Ac" (may be null)}
    # matrices are nested row-major lists, floats written with repr precision
    def to_dict(self):
        return {
            "schema": PLANT_SCHEMA,
            "n": self.n,
            "m": self.m,
            "p": self.p,
            "ts": self.ts,
            "method": self.method,
            "A": self.A.tolist(),
            "B": [b.tolist() for b in self.B],
            "Q": self.Q.tolist(),
            "R": self.R.tolist(),
            "Ac": None if self.Ac is None else self.Ac.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != PLANT_SCHEMA:
            raise FileFormatError(f"unsupported plant schema {d.get('schema')!r}")
        plant = cls(A=np.array(d["A"], dtype=float), B=tuple(np.array(b, dtype=float) for b in d["B"]),
                    ts=float(d["ts"]), Q=np.array(d["Q"], dtype=float), R=np.array(d["R"], dtype=float),
                    method=d.get("method", "exact"),
                    Ac=None if d.get("Ac") is None else np.array(d["Ac"], dtype=float))
        if (plant.n, plant.m, plant.p) != (d["n"], d["m"], d["p"]):
            raise DomainError("plant dimensions disagree with the stored header")
        return plant

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = text_or_path
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"invalid JSON: {exc}") from None
        try:
            return cls.from_dict(d)
        except (KeyError, TypeError) as exc:
            raise FileFormatError(f"missing or malformed field: {exc}") from None


def sample_plant(params: SpacecraftParams, env: OrbitEnvironment, ts=None, p=100, Q=None, R=None,
                 method="exact", quad_steps=16, strict_period=False) -> PeriodicPlant:
    """Sample the linearized model at ``t_k = k ts``, ``k = 0..p-1``.

    ``ts`` defaults to ``P / p``.  If ``p ts`` differs from the orbital period
    by more than 0.1 % a warning is logged, or `DomainError` raised when
    ``strict_period`` is set.
    """
    if int(p) != p or p < 1:
        raise DomainError("p must be a positive integer")
    p = int(p)
    P = env.period
    if ts is None:
        ts = P / p
    if not ts > 0:
        raise DomainError("ts must be positive")
    mismatch = abs(p * ts - P) / P
    if mismatch > PERIOD_TOL:
        msg = f"p*ts = {p * ts:.6g} s differs from the orbital period {P:.6g} s by {100 * mismatch:.3g}%"
        if strict_period:
            raise DomainError(msg)
        log.warning(msg)
    Q, R = _check_weights(DEFAULT_Q if Q is None else Q, DEFAULT_R if R is None else R)
    A = build_A_continuous(params, env.rate)

    def B_of_t(t):
        return build_B_continuous(t, params, env)

    constant = env.magnetic_inclination == 0.0
    Bs: List[np.ndarray] = []
    for k in range(p):
        if constant and Bs:
            Bs.append(Bs[0])
            continue
        if method == "exact":
            Ad, Bd = discretize_exact(A, B_of_t, ts, k, quad_steps)
        elif method == "euler":
            Ad, Bd = discretize_euler(A, B_of_t, ts, k)
        else:
            raise DomainError(f"unknown discretization method {method!r}")
        Bs.append(Bd)
    if method == "exact":
        Ad = mat_exp(A, ts)
    else:
        Ad = np.eye(N_STATE) + ts * A
    return PeriodicPlant(A=Ad, B=tuple(Bs), ts=ts, Q=Q, R=R, method=method, Ac=A)
