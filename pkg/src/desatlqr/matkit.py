"""Dense small-matrix kernels.

Linear solves, the matrix exponential, zero-order-hold input integrals and
ordered real Schur forms.  The Schur machinery works on *formal products*
``M_0 M_1 ... M_{p-1}`` without ever multiplying the factors together
(periodic Hessenberg reduction, Francis double-shift QR chased through every
factor, and block swapping through periodic Sylvester equations).  A single
matrix is the case ``p = 1``, which is the classic dense real Schur
algorithm.

All functions are pure; inputs are never modified.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.linalg as sla

from .errors import (
    EigenvalueSplitError,
    MatrixOverflowError,
    SchurConvergenceError,
    SingularMatrixError,
)

__all__ = [
    "as_matrix",
    "LUFactor",
    "solve_linear",
    "mat_exp",
    "zoh_input_integral",
    "PeriodicSchur",
    "periodic_schur",
    "ordered_real_schur",
]

_EPS = np.finfo(float).eps

Selector = Union[str, Callable[[complex], bool], None]


def as_matrix(a, name="matrix", square=False):
    """Return ``a`` as a finite 2-D float array, raising ``ValueError`` otherwise."""
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


class LUFactor:
    """LU factorization with partial pivoting, reusable for many right-hand sides.

    Raises `SingularMatrixError` at construction when a pivot is below
    ``tol * max|A|``.
    """

    def __init__(self, A, tol=1e-12):
        A = as_matrix(A, "A", square=True)
        self.n = A.shape[0]
        scale = np.max(np.abs(A)) if A.size else 0.0
        if scale == 0.0:
            raise SingularMatrixError("matrix is identically zero")
        with warnings.catch_warnings():
            # exact singularity is reported below as SingularMatrixError
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            self._lu, self._piv = sla.lu_factor(A, check_finite=False)
        pivots = np.abs(np.diag(self._lu))
        if pivots.min() < tol * scale:
            raise SingularMatrixError(
                f"pivot {pivots.min():.3e} below tolerance {tol * scale:.3e}"
            )

    def solve(self, B):
        B = np.asarray(B, dtype=float)
        if B.shape[0] != self.n:
            raise ValueError(f"right-hand side has {B.shape[0]} rows, expected {self.n}")
        return sla.lu_solve((self._lu, self._piv), B, check_finite=False)


def solve_linear(A, B, tol=1e-12):
    """Solve ``A X = B`` for square ``A``.

    Parameters
    ----------
    A : (n, n) array_like
    B : (n,) or (n, k) array_like
    tol : float
        Relative pivot tolerance; a pivot below ``tol * max|A|`` is treated
        as singular.

    Returns
    -------
    X : ndarray with the shape of ``B``
    """
    B = np.asarray(B, dtype=float)
    return LUFactor(A, tol).solve(B)


def mat_exp(A, t=1.0):
    """Matrix exponential ``exp(A t)`` by scaling and squaring with a Pade core."""
    A = as_matrix(A, "A", square=True)
    At = A * float(t)
    with np.errstate(over="raise", invalid="raise"):
        try:
            E = sla.expm(At)
        except FloatingPointError as exc:
            raise MatrixOverflowError(f"exp(A t) overflowed (|At|_1 = {np.abs(At).sum(0).max():.3e})") from exc
    if not np.all(np.isfinite(E)):
        raise MatrixOverflowError("exp(A t) is not finite")
    return E


def zoh_input_integral(A, b_of_t, t0, ts, quad_steps=16):
    """Integral ``int_0^ts exp(A tau) B(t0 + tau) dtau`` by composite Simpson.

    ``b_of_t`` maps a time to the input matrix.  ``quad_steps`` is the number
    of panels and must be even.  The nodal exponentials are powers of one
    step exponential, so only a single ``expm`` is evaluated.
    """
    A = as_matrix(A, "A", square=True)
    if ts <= 0:
        raise ValueError("ts must be positive")
    if quad_steps < 2 or quad_steps % 2:
        raise ValueError("quad_steps must be an even integer >= 2")
    h = ts / quad_steps
    step = mat_exp(A, h)
    phi = np.eye(A.shape[0])
    total = None
    for i in range(quad_steps + 1):
        w = 1.0 if i in (0, quad_steps) else (4.0 if i % 2 else 2.0)
        term = w * (phi @ as_matrix(b_of_t(t0 + i * h), "B(t)"))
        total = term if total is None else total + term
        phi = phi @ step
    return total * (h / 3.0)


# ----------------------------------------------------------------------------
# Periodic real Schur form
# ----------------------------------------------------------------------------

@dataclass
class PeriodicSchur:
    """Ordered periodic real Schur form of ``M_0 M_1 ... M_{p-1}``.

    ``Z[j].T @ M_j @ Z[(j+1) % p] == T[j]`` with ``T[0]`` upper
    quasi-triangular and the other ``T[j]`` upper triangular.  Consequently
    ``Z[k]`` is a real Schur basis of the cyclically shifted product
    ``M_k ... M_{p-1} M_0 ... M_{k-1}`` for every ``k``.
    """

    Z: list
    T: list
    blocks: list  # (start, size) pairs along the diagonal
    eigenvalues: np.ndarray  # complex, possibly 0 or inf when out of range
    log_moduli: np.ndarray
    n_selected: int = 0
    sweeps: int = 0
    swap_residual: float = 0.0
    selected: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def p(self):
        return len(self.T)


def _house(x):
    """Orthogonal symmetric ``H`` with ``H @ x`` a multiple of ``e_1``."""
    x = np.asarray(x, dtype=float)
    k = x.size
    alpha = np.linalg.norm(x)
    H = np.eye(k)
    if alpha == 0.0:
        return H
    v = x.copy()
    v[0] += math.copysign(alpha, x[0])
    vv = v @ v
    if vv == 0.0:
        return H
    return H - (2.0 / vv) * np.outer(v, v)


def _push(T, Z, r, Q):
    """Carry a transformation applied on the left of ``T[0]`` around the cycle.

    ``Q`` has already been applied to rows ``r`` of ``T[0]`` (and columns
    ``r`` of ``Z[0]``).  It is applied to the columns of ``T[p-1]``, whose
    triangularity is restored by a QR step whose orthogonal factor in turn
    acts on ``T[p-2]``, and so on down to ``T[1]``; ``T[0]`` finally absorbs
    the last factor on the right.
    """
    p = len(T)
    for j in range(p - 1, 0, -1):
        T[j][:, r] = T[j][:, r] @ Q
        q, _ = np.linalg.qr(T[j][r, r])
        T[j][r, :] = q.T @ T[j][r, :]
        Z[j][:, r] = Z[j][:, r] @ q
        blk = T[j][r, r]
        T[j][r, r] = np.triu(blk)
        Q = q
    T[0][:, r] = T[0][:, r] @ Q


def _left0(T, Z, r, Q):
    T[0][r, :] = Q.T @ T[0][r, :]
    Z[0][:, r] = Z[0][:, r] @ Q


def _hessenberg_triangular(factors):
    p = len(factors)
    n = factors[0].shape[0]
    T = [np.array(M, dtype=float, copy=True) for M in factors]
    Z = [np.eye(n) for _ in range(p)]
    for j in range(p - 1, 0, -1):
        q, r = np.linalg.qr(T[j])
        T[j] = np.triu(r)
        Z[j] = Z[j] @ q
        T[j - 1] = T[j - 1] @ q
    for c in range(n - 2):
        r = slice(c + 1, n)
        x = T[0][r, c]
        if np.all(x[1:] == 0.0):
            continue
        H = _house(x)
        _left0(T, Z, r, H)
        T[0][c + 2:, c] = 0.0
        _push(T, Z, r, H)
    T[0] = np.triu(T[0], -1)
    return T, Z


def _scaled_block_product(T, r):
    """Product of the diagonal blocks ``T[j][r, r]`` as ``(C, L)`` with value ``C * e**L``."""
    k = r.stop - r.start
    C = np.eye(k)
    L = 0.0
    for Tj in T:
        C = C @ Tj[r, r]
        s = np.abs(C).max()
        if s == 0.0:
            return C, -np.inf
        C /= s
        L += math.log(s)
    return C, L


def _scaled_apply(T, r, v):
    """``prod(T[j][r, r]) @ v`` as ``(w, L)`` meaning ``w * e**L`` (right factor first)."""
    L = 0.0
    for Tj in reversed(T):
        v = Tj[r, r] @ v
        s = np.abs(v).max()
        if s == 0.0:
            return v, -np.inf
        v = v / s
        L += math.log(s)
    return v, L


def _francis_sweep(T, Z, lo, hi, exceptional=0):
    """One implicit double-shift sweep on the active window ``lo..hi``."""
    n = T[0].shape[0]
    # trailing 2x2 of the window product; the 3x3 block carries the Hessenberg coupling
    C, Lc = _scaled_block_product(T, slice(hi - 2, hi + 1))
    C = C[1:, 1:]
    tr, det = C[0, 0] + C[1, 1], C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0]
    if exceptional:
        # ad hoc shifts breaking a stagnating cycle
        w = abs(C[1, 0]) + abs(C[0, 0]) + abs(C[1, 1])
        tr = 1.5 * w * (1.0 if exceptional % 2 else -0.75)
        det = w * w
    lead = slice(lo, min(lo + 3, hi + 1))
    k = lead.stop - lead.start
    e = np.zeros(k)
    e[0] = 1.0
    u, Lu = _scaled_apply(T, lead, e)
    w2, Lw = _scaled_apply(T, lead, u)
    exps = np.array([Lw + Lu, Lc + Lu, 2.0 * Lc])
    top = exps[np.isfinite(exps)].max() if np.any(np.isfinite(exps)) else 0.0
    scale = np.where(np.isfinite(exps), np.exp(np.minimum(exps - top, 0.0)), 0.0)
    x = w2 * scale[0] - tr * u * scale[1] + det * e * scale[2]
    if not np.any(x):
        x = e + u
    H = _house(x)
    r = lead
    _left0(T, Z, r, H)
    _push(T, Z, r, H)
    for c in range(lo, hi - 1):
        r = slice(c + 1, min(c + 4, hi + 1))
        x = T[0][r, c].copy()
        H = _house(x)
        _left0(T, Z, r, H)
        T[0][r.start + 1:r.stop, c] = 0.0
        _push(T, Z, r, H)
    T[0][np.tril_indices(n, -2)] = 0.0


def _split_real_pair(T, Z, i):
    """Triangularize a 2x2 block with real product eigenvalues; no-op for complex pairs."""
    r = slice(i, i + 2)
    C, _ = _scaled_block_product(T, r)
    a, b, c, d = C[0, 0], C[0, 1], C[1, 0], C[1, 1]
    half = 0.5 * (a - d)
    disc = half * half + b * c
    if disc < 0.0:
        return False
    mid = 0.5 * (a + d)
    lam = mid + math.copysign(math.sqrt(disc), mid if mid != 0.0 else 1.0)
    v1 = np.array([b, lam - a])
    v2 = np.array([lam - d, c])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = np.array([1.0, 0.0])
    else:
        v = v / nv
    Q = np.array([[v[0], -v[1]], [v[1], v[0]]])
    _left0(T, Z, r, Q)
    _push(T, Z, r, Q)
    T[0][i + 1, i] = 0.0
    return True


def _periodic_qr(T, Z, max_sweeps):
    n = T[0].shape[0]
    hi = n - 1
    stall = 0
    sweeps = 0
    while hi >= 0:
        lo = hi
        while lo > 0:
            s = abs(T[0][lo - 1, lo - 1]) + abs(T[0][lo, lo])
            if s == 0.0:
                s = np.abs(T[0][:hi + 1, :hi + 1]).max()
            if abs(T[0][lo, lo - 1]) <= _EPS * s:
                T[0][lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            stall = 0
            continue
        if lo == hi - 1:
            _split_real_pair(T, Z, lo)
            hi -= 2
            stall = 0
            continue
        if sweeps >= max_sweeps:
            raise SchurConvergenceError(f"no convergence after {sweeps} QR sweeps")
        stall += 1
        exceptional = stall // 10 if stall % 10 == 0 else 0
        _francis_sweep(T, Z, lo, hi, exceptional)
        sweeps += 1
    return sweeps


def _blocks(T0):
    n = T0.shape[0]
    out = []
    i = 0
    while i < n:
        if i + 1 < n and T0[i + 1, i] != 0.0:
            out.append((i, 2))
            i += 2
        else:
            out.append((i, 1))
            i += 1
    return out


def _block_eigs(T, start, size):
    """Eigenvalues of one diagonal block of the product, as ``(log|lam|, lam)`` pairs."""
    if size == 1:
        d = np.array([Tj[start, start] for Tj in T])
        if np.any(d == 0.0):
            return [(-np.inf, 0.0 + 0.0j)]
        logm = float(np.sum(np.log(np.abs(d))))
        sign = float(np.prod(np.sign(d)))
        with np.errstate(over="ignore", under="ignore"):
            lam = sign * math.exp(logm) if logm < 709 else sign * math.inf
        return [(logm, complex(lam))]
    r = slice(start, start + size)
    C, L = _scaled_block_product(T, r)
    mu = np.linalg.eigvals(C)
    out = []
    for m in mu:
        logm = math.log(abs(m)) + L if m != 0 else -np.inf
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            mod = math.exp(logm) if logm < 709 else math.inf
        ang = np.angle(m)
        out.append((logm, complex(mod * math.cos(ang), mod * math.sin(ang))))
    return out


def _selector(select, tol):
    """Return ``(predicate(logm, lam) -> bool, has_unit_circle_boundary)``."""
    if select is None or select == "inside":
        return (lambda logm, lam: logm < 0.0), True
    if select == "outside":
        return (lambda logm, lam: logm > 0.0), True
    if callable(select):
        return (lambda logm, lam: bool(select(lam))), False
    raise ValueError(f"unknown selection {select!r}; use 'inside', 'outside' or a callable")


def _periodic_sylvester(A11, A12, A22):
    """Solve ``A11[j] X[j+1] - X[j] A22[j] = -A12[j]`` cyclically for all ``j``."""
    p = len(A11)
    n1 = A11[0].shape[0]
    n2 = A22[0].shape[0]
    k = n1 * n2
    N = p * k
    M = np.zeros((N, N))
    rhs = np.zeros(N)
    I1, I2 = np.eye(n1), np.eye(n2)
    for j in range(p):
        rows = slice(j * k, (j + 1) * k)
        nxt = (j + 1) % p
        M[rows, nxt * k:(nxt + 1) * k] += np.kron(I2, A11[j])
        M[rows, j * k:(j + 1) * k] -= np.kron(A22[j].T, I1)
        rhs[rows] = -A12[j].flatten(order="F")
    scale = np.abs(M).max(axis=1)
    scale[scale == 0.0] = 1.0
    M /= scale[:, None]
    rhs /= scale
    try:
        x = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueSplitError("blocks share an eigenvalue; swap impossible") from exc
    return [x[j * k:(j + 1) * k].reshape((n1, n2), order="F") for j in range(p)]


def _swap(T, Z, start, n1, n2, tol):
    """Exchange adjacent diagonal blocks of sizes ``n1`` then ``n2`` at ``start``."""
    p = len(T)
    a = slice(start, start + n1)
    b = slice(start + n1, start + n1 + n2)
    s = slice(start, start + n1 + n2)
    X = _periodic_sylvester([Tj[a, a] for Tj in T], [Tj[a, b] for Tj in T], [Tj[b, b] for Tj in T])
    Qs = []
    for Xj in X:
        q, _ = np.linalg.qr(np.vstack([Xj, np.eye(n2)]), mode="complete")
        Qs.append(q)
    worst = 0.0
    for j in range(p):
        T[j][s, :] = Qs[j].T @ T[j][s, :]
        T[j][:, s] = T[j][:, s] @ Qs[(j + 1) % p]
        Z[j][:, s] = Z[j][:, s] @ Qs[j]
        low = T[j][start + n2:start + n1 + n2, start:start + n2]
        ref = np.abs(T[j][s, s]).max()
        worst = max(worst, np.abs(low).max() / ref if ref > 0 else 0.0)
        low[...] = 0.0
    if worst > tol:
        raise EigenvalueSplitError(f"block swap rejected: residual {worst:.2e} exceeds {tol:.1e}")
    for st, sz in ((start, n2), (start + n2, n1)):
        if sz == 2:
            # retriangularize the 2x2 blocks of the triangular factors
            _push(T, Z, slice(st, st + 2), np.eye(2))
    return worst


def _eigen_table(T):
    blocks = _blocks(T[0])
    logs, lams = [], []
    for st, sz in blocks:
        for logm, lam in _block_eigs(T, st, sz):
            logs.append(logm)
            lams.append(lam)
    return blocks, np.array(logs), np.array(lams, dtype=complex)


def periodic_schur(factors: Sequence, select: Selector = "inside", boundary_tol=1e-9,
                   max_sweeps=None, swap_tol=1e-8):
    """Ordered periodic real Schur form of the formal product ``M_0 M_1 ... M_{p-1}``.

    Parameters
    ----------
    factors : sequence of (n, n) array_like
        The factors, leftmost first.  They are never multiplied together,
        so products whose eigenvalues span hundreds of orders of magnitude
        keep full accuracy in every invariant subspace.
    select : {'inside', 'outside'} or callable
        Eigenvalues of the product to move into the leading blocks:
        ``'inside'`` the open unit disc, ``'outside'`` its exterior, or a
        predicate on the complex eigenvalue (which may be ``0`` or ``inf``
        when the product's eigenvalue is outside the float range).
    boundary_tol : float
        For the unit-circle selections, an eigenvalue with
        ``|log|lam|| <= boundary_tol`` raises `EigenvalueSplitError`.
    max_sweeps : int, optional
        QR sweep budget, default ``30 n``.
    swap_tol : float
        Largest relative residual accepted when exchanging two blocks.

    Returns
    -------
    PeriodicSchur
    """
    mats = [as_matrix(M, f"factor {j}", square=True) for j, M in enumerate(factors)]
    if not mats:
        raise ValueError("at least one factor is required")
    n = mats[0].shape[0]
    if any(M.shape != (n, n) for M in mats):
        raise ValueError("all factors must share the same square shape")
    if max_sweeps is None:
        max_sweeps = 30 * n
    T, Z = _hessenberg_triangular(mats)
    sweeps = _periodic_qr(T, Z, max_sweeps)

    pred, circle = _selector(select, boundary_tol)
    blocks, logs, lams = _eigen_table(T)
    if circle and np.any(np.abs(logs) <= boundary_tol):
        bad = lams[np.abs(logs) <= boundary_tol]
        raise EigenvalueSplitError(f"eigenvalues {bad} lie on the unit circle within {boundary_tol:g}")

    def block_selected(st, sz):
        return all(pred(lm, lam) for lm, lam in _block_eigs(T, st, sz))

    worst = 0.0
    order = [(st, sz, block_selected(st, sz)) for st, sz in blocks]
    ks = 0  # index in ``order`` of the first non-selected block
    for idx in range(len(order)):
        if not order[idx][2]:
            continue
        pos = idx
        while pos > ks:
            st_prev, sz_prev, sel_prev = order[pos - 1]
            st_cur, sz_cur, _ = order[pos]
            worst = max(worst, _swap(T, Z, st_prev, sz_prev, sz_cur, swap_tol))
            order[pos - 1] = (st_prev, sz_cur, True)
            order[pos] = (st_prev + sz_cur, sz_prev, sel_prev)
            pos -= 1
        ks += 1

    blocks, logs, lams = _eigen_table(T)
    selected = np.array([pred(lm, lam) for lm, lam in zip(logs, lams)], dtype=bool)
    n_sel = int(selected.sum())
    if n_sel and not np.all(selected[:n_sel]):
        raise EigenvalueSplitError("reordering failed to bring the selected eigenvalues to the front")
    return PeriodicSchur(Z=Z, T=T, blocks=blocks, eigenvalues=lams, log_moduli=logs,
                         n_selected=n_sel, sweeps=sweeps, swap_residual=worst, selected=selected)


def ordered_real_schur(M, select: Selector = "inside", boundary_tol=1e-9, max_sweeps=None):
    """Real Schur form ``W.T @ M @ W = S`` with the selected eigenvalues leading.

    ``S`` is quasi-upper-triangular (2x2 bumps for complex pairs) and ``W``
    orthogonal.  See `periodic_schur` for the parameters; this is its
    single-factor case.

    Returns
    -------
    W, S : ndarray
    """
    res = periodic_schur([M], select=select, boundary_tol=boundary_tol, max_sweeps=max_sweeps)
    return res.Z[0], res.T[0]
