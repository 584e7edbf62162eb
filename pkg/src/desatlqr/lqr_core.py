"""Periodic and constant discrete-time LQR design.

The periodic Riccati solution is read off the symplectic pencil pairs

    E_k = [[I, B_k R^-1 B_k^T], [0, A^T]],     F = [[A, 0], [-Q, I]]

through the period product ``Gamma_k = F^-1 E_k F^-1 E_{k+1} ... F^-1 E_{k+p-1}``.
One LU factorization of the constant ``F`` serves every sample.  For the
reference spacecraft the eigenvalues of ``Gamma_k`` span about 1e-48 to
1e+48, so forming the product in floating point destroys the subspace we
need.  The default method never forms it: a periodic real Schur form of the
factors ``M_k = F^-1 E_k`` yields an orthogonal basis ``W_k`` of the
required invariant subspace of every cyclic product at once, and
``P_k = W21_k W11_k^-1``.

``Gamma_k`` maps the costate-augmented vector at sample ``k + p`` back to
sample ``k``, so the stabilizing solution lives in the invariant subspace
of the eigenvalues *outside* the unit circle (the reciprocals of the
closed-loop monodromy eigenvalues).
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import (
    ResidualError,
    SingularMatrixError,
    SubspaceExtractionError,
    DomainError,
    FileFormatError,
)
from .linear_plant import PeriodicPlant
from .matkit import LUFactor, as_matrix, ordered_real_schur, periodic_schur

log = logging.getLogger(__name__)

SCHEDULE_SCHEMA = "desatlqr.schedule/1"
RESIDUAL_TOL = 1e-6
COND_LIMIT = 1e12


@dataclass(frozen=True)
class GainSchedule:
    """Periodic Riccati solutions ``P[k]`` and gains ``K[k]``, ``k = 0..p-1``.

    The feedback is ``u_k = -K[k mod p] (x_k - x_bar)``.  ``info`` carries
    design diagnostics (residuals, monodromy radius, fallbacks used).
    """

    P: tuple
    K: tuple
    ts: float
    x_bar: np.ndarray = field(default_factory=lambda: np.zeros(9))
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        P = tuple(np.array(as_matrix(x, f"P[{k}]", square=True)) for k, x in enumerate(self.P))
        K = tuple(np.array(as_matrix(x, f"K[{k}]")) for k, x in enumerate(self.K))
        if len(P) != len(K) or not P:
            raise DomainError("P and K must be non-empty and of equal length")
        n = P[0].shape[0]
        xb = np.asarray(self.x_bar, dtype=float).reshape(-1)
        if xb.shape != (n,):
            raise DomainError(f"x_bar must have {n} entries")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "x_bar", xb)
        object.__setattr__(self, "ts", float(self.ts))

    @property
    def p(self):
        return len(self.P)

    def control(self, k, x):
        """Feedback ``-K_k (x - x_bar)`` for the state vector ``x`` at sample ``k``."""
        return -gain_at(self, k) @ (np.asarray(x, dtype=float) - self.x_bar)

    def with_bias(self, x_bar):
        return GainSchedule(self.P, self.K, self.ts, np.asarray(x_bar, dtype=float), dict(self.info))

    # JSON: {"schema", "n", "m", "p", "ts", "x_bar", "P": [n x n]*p, "K": [m x n]*p, "info"}
    def to_dict(self):
        return {
            "schema": SCHEDULE_SCHEMA,
            "n": self.P[0].shape[0],
            "m": self.K[0].shape[0],
            "p": self.p,
            "ts": self.ts,
            "x_bar": self.x_bar.tolist(),
            "P": [x.tolist() for x in self.P],
            "K": [x.tolist() for x in self.K],
            "info": _jsonable(self.info),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEDULE_SCHEMA:
            raise FileFormatError(f"unsupported schedule schema {d.get('schema')!r}")
        s = cls(P=tuple(np.array(x, dtype=float) for x in d["P"]), K=tuple(np.array(x, dtype=float) for x in d["K"]),
                ts=float(d["ts"]), x_bar=np.array(d.get("x_bar", [0.0] * d["n"]), dtype=float),
                info=d.get("info", {}))
        if s.p != d["p"] or s.P[0].shape[0] != d["n"] or s.K[0].shape[0] != d["m"]:
            raise DomainError("schedule dimensions disagree with the stored header")
        return s

    def to_json(self, path=None):
        # json writes floats with repr, which round-trips doubles exactly
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


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def gain_at(schedule: GainSchedule, k):
    """Gain for sample ``k``, wrapped modulo the period."""
    return schedule.K[k % schedule.p]


# ---------------------------------------------------------------------------
# Riccati building blocks


def riccati_step(P_next, A, B, Q, R):
    """One backward step ``P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA`` with ``P = P_next``."""
    PA = P_next @ A
    PB = P_next @ B
    S = R + B.T @ PB
    P = Q + A.T @ PA - (A.T @ PB) @ np.linalg.solve(S, PB.T @ A)
    return 0.5 * (P + P.T)


def feedback_gain(P_next, A, B, R):
    """``K = (R + B'P_next B)^-1 B'P_next A``."""
    P_next, A, B, R = (np.asarray(v, dtype=float) for v in (P_next, A, B, R))
    PB = P_next @ B
    return np.linalg.solve(R + B.T @ PB, PB.T @ A)


def build_pencil_pair(A, B, Q, R):
    """Pencil matrices ``(E_k, F)`` for one sample of the periodic plant.

    Raises
    ------
    SingularMatrixError
        If ``R`` is singular.
    """
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    n = A.shape[0]
    G = B @ LUFactor(R).solve(B.T)
    E = np.block([[np.eye(n), G], [np.zeros((n, n)), A.T]])
    F = np.block([[A, np.zeros((n, n))], [-as_matrix(Q, "Q"), np.eye(n)]])
    return E, F


def riccati_residuals(plant: PeriodicPlant, P):
    """Relative residuals ``|P_k - step(P_{k+1})|_F / (1 + |P_k|_F)`` for every ``k``."""
    p = plant.p
    out = np.empty(p)
    for k in range(p):
        Pk = riccati_step(P[(k + 1) % p], plant.A, plant.B[k], plant.Q, plant.R)
        out[k] = np.linalg.norm(P[k] - Pk) / (1.0 + np.linalg.norm(P[k]))
    return out


def closed_loop_matrices(plant: PeriodicPlant, K):
    return [plant.A - plant.B[k] @ K[k] for k in range(plant.p)]


def monodromy(plant: PeriodicPlant, K):
    """Closed-loop transition over one period, ``(A - B_{p-1}K_{p-1}) ... (A - B_0 K_0)``."""
    M = np.eye(plant.n)
    for Acl in closed_loop_matrices(plant, K):
        M = Acl @ M
    return M


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _graph_basis(W, n):
    """``W21 W11^-1`` and ``cond(W11)`` for a 2n x n basis ``W``; ``inf`` condition if singular."""
    W11, W21 = W[:n], W[n:]
    c = np.linalg.cond(W11)
    if not np.isfinite(c):
        return None, np.inf
    try:
        P = LUFactor(W11.T).solve(W21.T).T
    except SingularMatrixError:
        return None, np.inf
    return 0.5 * (P + P.T), c


def _repair(P, conds, plant, cond_limit):
    """Replace badly conditioned ``P_k`` by backward steps from a good neighbour."""
    p = plant.p
    bad = [k for k in range(p) if P[k] is None or conds[k] > cond_limit]
    if not bad:
        return P, []
    if len(bad) == p:
        raise SubspaceExtractionError(f"W11 is ill conditioned (cond > {cond_limit:g}) at every sample")
    good = [k for k in range(p) if k not in bad]
    # walk backwards from the first good index so every repaired P_k has a valid P_{k+1}
    start = good[0]
    for j in range(1, p):
        k = (start - j) % p
        if k in bad:
            P[k] = riccati_step(P[(k + 1) % p], plant.A, plant.B[k], plant.Q, plant.R)
    return P, bad


def _pencil_factors(plant: PeriodicPlant):
    n = plant.n
    E0, F = build_pencil_pair(plant.A, plant.B[0], plant.Q, plant.R)
    Flu = LUFactor(F)  # factored once, reused for every sample
    Rlu = LUFactor(plant.R)
    Ms = []
    for k in range(plant.p):
        B = plant.B[k]
        E = np.block([[np.eye(n), B @ Rlu.solve(B.T)], [np.zeros((n, n)), plant.A.T]])
        Ms.append(Flu.solve(E))
    return Ms


def _explicit_P(Ms, k, n):
    p = len(Ms)
    G = np.eye(2 * n)
    for j in range(p):
        G = G @ Ms[(k + j) % p]
    W, _ = ordered_real_schur(G, select="outside")
    return _graph_basis(W[:, :n], n)


def periodic_riccati(plant: PeriodicPlant, x_bar=None, method="periodic", cond_limit=COND_LIMIT,
                     residual_tol=RESIDUAL_TOL, workers=None) -> GainSchedule:
    """Stabilizing periodic solution of the discrete periodic Riccati equation.

    Parameters
    ----------
    plant : PeriodicPlant
    x_bar : array_like, optional
        Reference state stored in the schedule (wheel-speed bias).
    method : {'periodic', 'explicit'}
        ``'periodic'`` extracts every ``P_k`` from one periodic Schur form of
        the factors ``F^-1 E_k``.  ``'explicit'`` multiplies out each
        ``Gamma_k`` and takes an ordered Schur form of the product; it is
        only reliable when the eigenvalue spread of ``Gamma_k`` is modest
        (short periods, well-damped plants).
    cond_limit : float
        ``P_k`` whose ``W11`` is worse conditioned than this is recomputed
        by a backward Riccati step from its successor.
    residual_tol : float
        Largest accepted relative Riccati residual.
    workers : int, optional
        Thread count for the independent per-sample Schur forms of the
        explicit method.

    Raises
    ------
    SubspaceExtractionError, ResidualError, SchurConvergenceError
    """
    n, p = plant.n, plant.p
    try:
        Ms = _pencil_factors(plant)
    except SingularMatrixError:
        log.info("F is singular (A singular); using value iteration")
        P = value_iteration(plant, periods=40, tol=1e-15, max_periods=100000)
        return _finish(plant, list(P), x_bar, {"method": "value-iteration", "fallback": []}, residual_tol)

    info = {"method": method}
    if method == "periodic":
        ps = periodic_schur(Ms, select="outside")
        if ps.n_selected != n:
            raise SubspaceExtractionError(f"{ps.n_selected} eigenvalues outside the unit circle, expected {n}")
        pairs = [_graph_basis(ps.Z[k][:, :n], n) for k in range(p)]
        info["qr_sweeps"] = ps.sweeps
        info["swap_residual"] = ps.swap_residual
        info["log10_moduli"] = np.sort(ps.log_moduli / np.log(10.0))[::-1].tolist()
    elif method == "explicit":
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                pairs = list(pool.map(lambda k: _explicit_P(Ms, k, n), range(p)))
        else:
            pairs = [_explicit_P(Ms, k, n) for k in range(p)]
    else:
        raise DomainError(f"unknown method {method!r}")

    P = [pk for pk, _ in pairs]
    conds = np.array([c for _, c in pairs])
    P, repaired = _repair(P, conds, plant, cond_limit)
    info["cond_W11_max"] = float(np.max(conds))
    info["fallback"] = repaired
    return _finish(plant, P, x_bar, info, residual_tol)


def _finish(plant, P, x_bar, info, residual_tol):
    p = plant.p
    for k, Pk in enumerate(P):
        lam = np.linalg.eigvalsh(Pk)
        if lam[0] < -1e-9 * max(1.0, np.linalg.norm(Pk, 2)):
            raise SubspaceExtractionError(f"P_{k} is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    res = riccati_residuals(plant, P)
    if np.max(res) > residual_tol:
        k = int(np.argmax(res))
        raise ResidualError(f"Riccati residual {res[k]:.3e} at k={k} exceeds {residual_tol:g}")
    K = [feedback_gain(P[(k + 1) % p], plant.A, plant.B[k], plant.R) for k in range(p)]
    info["residual_max"] = float(np.max(res))
    info["monodromy_radius"] = spectral_radius(monodromy(plant, K))
    info["p"] = p
    xb = np.zeros(plant.n) if x_bar is None else np.asarray(x_bar, dtype=float)
    return GainSchedule(P=tuple(P), K=tuple(K), ts=plant.ts, x_bar=xb, info=info)


def solve_dare(A, B, Q, R, residual_tol=1e-8, refine_steps=2):
    """Stabilizing solution of ``P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA``.

    Uses the same pencil and Schur machinery as the periodic solver with a
    single sample.  A singular ``A`` (so ``F`` singular) is handled by value
    iteration; for ``A = 0`` this returns ``Q`` after one step.

    With one sample the stable and unstable eigenvalues of the pencil can
    crowd the unit circle (slow orbital modes), which limits the accuracy of
    the Schur subspace; ``refine_steps`` Newton corrections recover it.

    Raises
    ------
    SubspaceExtractionError, ResidualError
    """
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    Q = as_matrix(Q, "Q", square=True)
    R = as_matrix(R, "R", square=True)
    n = A.shape[0]
    plant = PeriodicPlant(A=A, B=(B,), ts=1.0, Q=Q, R=R)
    try:
        Ms = _pencil_factors(plant)
    except SingularMatrixError:
        P = value_iteration(plant, periods=1, tol=1e-15, max_periods=100000)[0]
    else:
        W, _ = ordered_real_schur(Ms[0], select="outside")
        P, c = _graph_basis(W[:, :n], n)
        if P is None:
            raise SubspaceExtractionError("W11 is singular; no stabilizing solution")
    P = newton_refine(P, A, B, Q, R, steps=refine_steps)
    r = np.linalg.norm(P - riccati_step(P, A, B, Q, R)) / (1.0 + np.linalg.norm(P))
    if r > residual_tol:
        raise ResidualError(f"DARE residual {r:.3e} exceeds {residual_tol:g}")
    return P


def newton_refine(P, A, B, Q, R, steps=2):
    """Newton corrections of a DARE solution, kept only while the residual drops.

    Each step solves the Stein equation ``D - Acl' D Acl = step(P) - P`` for
    the closed loop ``Acl = A - B K(P)``.
    """
    def resid(X):
        return np.linalg.norm(riccati_step(X, A, B, Q, R) - X)

    r = resid(P)
    for _ in range(steps):
        Acl = A - B @ feedback_gain(P, A, B, R)
        if spectral_radius(Acl) >= 1.0:
            break
        D = sla.solve_discrete_lyapunov(Acl.T, riccati_step(P, A, B, Q, R) - P)
        Pn = P + 0.5 * (D + D.T)
        rn = resid(Pn)
        if not rn < r:
            break
        P, r = Pn, rn
    return P


def value_iteration(plant: PeriodicPlant, periods=40, tol=1e-13, max_periods=20000, P_init=None):
    """Backward Riccati recursion from ``P = Q`` until the periodic orbit settles.

    Runs at least ``periods`` full periods and then until the relative change
    of ``P_0`` over one period falls below ``tol``.

    Returns
    -------
    list of ndarray
        ``P_0 .. P_{p-1}`` of the limiting periodic orbit.
    """
    p = plant.p
    P = plant.Q.copy() if P_init is None else np.array(P_init, dtype=float)
    out = [None] * p
    for it in range(max_periods):
        P_start = P
        for k in reversed(range(p)):
            P = riccati_step(P, plant.A, plant.B[k], plant.Q, plant.R)
            out[k] = P
        change = np.linalg.norm(P - P_start) / max(np.linalg.norm(P), 1e-300)
        if it + 1 >= periods and change < tol:
            break
    else:
        log.warning("value iteration stopped after %d periods (change %.3e)", max_periods, change)
    return out


def controllability_gramian_rank(plant: PeriodicPlant, rtol=None):
    """Rank and 2-norm condition number of the one-period reachability Gramian.

    ``W = sum_k Phi_k B_k B_k' Phi_k'`` with ``Phi_k = A^(p-1-k)``.  States
    are scaled by the Gramian diagonal before the rank test so that the
    very different units of rates, wheel speeds and attitude do not mask
    reachable directions.
    """
    n, p = plant.n, plant.p
    W = np.zeros((n, n))
    Phi = np.eye(n)
    for k in reversed(range(p)):
        v = Phi @ plant.B[k]
        W += v @ v.T
        Phi = Phi @ plant.A
    d = np.sqrt(np.diag(W))
    if not np.any(d > 0):
        return 0, np.inf
    d[d == 0] = 1.0
    Ws = W / np.outer(d, d)
    s = np.linalg.svd(Ws, compute_uv=False)
    tol = s[0] * n * np.finfo(float).eps if rtol is None else rtol * s[0]
    rank = int(np.sum(s > tol))
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    return rank, cond


def verify_schedule(plant: PeriodicPlant, schedule: GainSchedule, residual_tol=RESIDUAL_TOL,
                    oracle=True, oracle_tol=1e-6):
    """Recheck every schedule invariant against a plant.

    Returns
    -------
    dict
        ``{name: (passed, value)}`` for symmetry, semidefiniteness, Riccati
        residual, gain consistency, monodromy stability and (optionally)
        agreement with the value-iteration oracle.
    """
    if schedule.p != plant.p:
        return {"period": (False, f"schedule p={schedule.p}, plant p={plant.p}")}
    p = plant.p
    P, K = schedule.P, schedule.K
    out = {}
    asym = max(np.max(np.abs(x - x.T)) / max(1.0, np.max(np.abs(x))) for x in P)
    out["symmetry"] = (asym <= 1e-9, asym)
    psd = min(np.linalg.eigvalsh(0.5 * (x + x.T))[0] / max(1.0, np.linalg.norm(x, 2)) for x in P)
    out["psd"] = (psd >= -1e-9, psd)
    res = float(np.max(riccati_residuals(plant, P)))
    out["riccati_residual"] = (res <= residual_tol, res)
    kerr = max(np.linalg.norm(K[k] - feedback_gain(P[(k + 1) % p], plant.A, plant.B[k], plant.R))
               / max(1e-300, np.linalg.norm(K[k])) for k in range(p))
    out["gain_consistency"] = (kerr <= 1e-8, kerr)
    rho = spectral_radius(monodromy(plant, K))
    out["monodromy_radius"] = (rho < 1.0, rho)
    if oracle:
        Pv = value_iteration(plant)
        err = max(np.linalg.norm(P[k] - Pv[k]) / np.linalg.norm(Pv[k]) for k in range(p))
        out["value_iteration"] = (err <= oracle_tol, err)
    return out
