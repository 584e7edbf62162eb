import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from desatlqr.errors import EigenvalueSplitError, MatrixOverflowError, SingularMatrixError
from desatlqr.lqr_core import build_pencil_pair
from desatlqr.matkit import (
    LUFactor,
    mat_exp,
    ordered_real_schur,
    periodic_schur,
    solve_linear,
    zoh_input_integral,
)

from oracles import random_periodic_plant, trapezoid_zoh


def random_orthogonal(rng, n):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q


def check_real_schur(M, W, S, tol=1e-9):
    n = M.shape[0]
    assert np.linalg.norm(W.T @ W - np.eye(n)) <= 1e-10
    assert np.linalg.norm(W.T @ M @ W - S) <= tol * max(np.linalg.norm(M), 1e-300)
    # quasi-triangular: no two consecutive nonzero subdiagonals, nothing below the first
    assert np.all(np.tril(S, -2) == 0)
    sub = np.abs(np.diag(S, -1))
    assert not np.any((sub[:-1] != 0) & (sub[1:] != 0))


# solve_linear ---------------------------------------------------------------

def test_solve_identity():
    M = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(solve_linear(np.eye(3), M), M)


def test_solve_diagonal():
    X = solve_linear(np.diag([2.0, 4.0]), np.array([[2.0], [8.0]]))
    np.testing.assert_allclose(X, [[1.0], [2.0]], rtol=0, atol=1e-15)


def test_solve_multiply_back(rng):
    A = rng.standard_normal((6, 6)) + 6 * np.eye(6)
    B = rng.standard_normal((6, 4))
    X = solve_linear(A, B)
    assert np.linalg.norm(A @ X - B) <= 1e-10 * np.linalg.norm(B)


def test_solve_singular_raises():
    with pytest.raises(SingularMatrixError):
        solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), np.eye(2))


def test_singular_tolerance_is_configurable():
    A = np.diag([1.0, 1e-9])
    with pytest.raises(SingularMatrixError):
        LUFactor(A, tol=1e-6)
    np.testing.assert_allclose(LUFactor(A, tol=1e-12).solve(np.ones(2)), [1.0, 1e9])


# mat_exp --------------------------------------------------------------------

def test_exp_zero():
    np.testing.assert_array_equal(mat_exp(np.zeros((4, 4)), 3.0), np.eye(4))


def test_exp_diagonal():
    E = mat_exp(np.diag([0.3, -1.2]), 1.0)
    np.testing.assert_allclose(E, np.diag([math.exp(0.3), math.exp(-1.2)]), rtol=1e-14)


def test_exp_nilpotent():
    tau = 7.5
    np.testing.assert_allclose(mat_exp(np.array([[0.0, 1.0], [0.0, 0.0]]), tau), [[1.0, tau], [0.0, 1.0]], rtol=1e-15)


def test_exp_overflow():
    with pytest.raises(MatrixOverflowError):
        mat_exp(np.array([[800.0]]), 1.0)


@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.floats(0.05, 0.95))
def test_exp_semigroup(seed, n, frac):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A *= 5.0 / max(np.linalg.norm(A, 2), 1e-12)  # |A (t1 + t2)| <= 5 with t1 + t2 = 1
    t1, t2 = frac, 1.0 - frac
    lhs = mat_exp(A, t1 + t2)
    rhs = mat_exp(A, t1) @ mat_exp(A, t2)
    assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(lhs)


# zoh_input_integral ---------------------------------------------------------

def test_zoh_constant_integrand():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(zoh_input_integral(np.zeros((2, 2)), lambda t: B, 0.0, 2.5, 4), 2.5 * B, rtol=1e-15)


def test_zoh_scalar_closed_form():
    val = zoh_input_integral(np.array([[-1.0]]), lambda t: np.array([[1.0]]), 0.0, 1.0, 16)
    np.testing.assert_allclose(val, [[1.0 - math.exp(-1.0)]], rtol=5e-7)


def test_zoh_time_varying_against_fine_trapezoid():
    # the spacecraft plant: B(t) varies as sin/cos of the orbit rate
    from desatlqr.linear_plant import build_A_continuous, build_B_continuous
    from desatlqr.orbit_env import OrbitEnvironment, SpacecraftParams
    env, sc = OrbitEnvironment(), SpacecraftParams()
    A = build_A_continuous(sc, env.rate)
    Bf = lambda t: build_B_continuous(t, sc, env)  # noqa: E731
    ts = 58.6352
    for t0 in (0.0, 1234.5):
        simpson = zoh_input_integral(A, Bf, t0, ts, 16)
        ref = trapezoid_zoh(A, Bf, t0, ts, 160)
        assert np.linalg.norm(simpson - ref) <= 1e-8 * np.linalg.norm(ref)


def test_zoh_sinusoidal_column_against_finer_trapezoid(rng):
    # a generic A curves exp(A tau) more than the plant does; the second-order
    # trapezoid reference needs 100x the panels to resolve 1e-8
    w0 = 0.0010715718
    A = 1e-3 * rng.standard_normal((4, 4))
    col = rng.standard_normal((4, 1))
    Bf = lambda t: math.sin(w0 * t) * col  # noqa: E731
    simpson = zoh_input_integral(A, Bf, 100.0, 58.6352, 16)
    ref = trapezoid_zoh(A, Bf, 100.0, 58.6352, 1600)
    assert np.linalg.norm(simpson - ref) <= 1e-8 * np.linalg.norm(ref)


def test_zoh_fourth_order_convergence(rng):
    A = 0.3 * rng.standard_normal((3, 3))
    Bf = lambda t: np.array([[math.cos(2 * t)], [math.sin(t)], [t * t]])  # noqa: E731
    ref = trapezoid_zoh(A, Bf, 0.0, 2.0, 20000)
    errs = [np.linalg.norm(zoh_input_integral(A, Bf, 0.0, 2.0, n) - ref) for n in (4, 8, 16)]
    assert 12 < errs[0] / errs[1] < 20 and 12 < errs[1] / errs[2] < 20


def test_zoh_rejects_odd_panels():
    with pytest.raises(ValueError):
        zoh_input_integral(np.eye(2), lambda t: np.eye(2), 0.0, 1.0, 3)


# ordered_real_schur ---------------------------------------------------------

def test_schur_diagonal_reorder():
    W, S = ordered_real_schur(np.diag([2.0, 0.5]))
    assert abs(S[0, 0] - 0.5) < 1e-15 and abs(S[1, 1] - 2.0) < 1e-15
    W, S = ordered_real_schur(np.diag([0.5, 2.0]))
    assert S[0, 0] == 0.5 and S[1, 1] == 2.0


def test_schur_known_spectrum(rng):
    U = random_orthogonal(rng, 3)
    M = U @ np.diag([0.1, 0.9, 3.0]) @ U.T
    W, S = ordered_real_schur(M)
    check_real_schur(M, W, S)
    d = np.diag(S)
    np.testing.assert_allclose(sorted(d[:2]), [0.1, 0.9], atol=1e-10)
    np.testing.assert_allclose(d[2], 3.0, atol=1e-10)


def test_schur_identity():
    # all eigenvalues on the boundary: the split is refused, but "outside" of
    # a shrunken identity selects nothing and leaves W = I, S = I
    with pytest.raises(EigenvalueSplitError):
        ordered_real_schur(np.eye(2))
    W, S = ordered_real_schur(np.eye(2), select=lambda lam: False)
    np.testing.assert_array_equal(W, np.eye(2))
    np.testing.assert_array_equal(S, np.eye(2))


def test_schur_boundary_split_error():
    with pytest.raises(EigenvalueSplitError):
        ordered_real_schur(np.diag([0.5, 1.0 + 1e-12, 3.0]))


def test_schur_complex_pairs_lead(rng):
    # rotation blocks with moduli 0.6 and 1.7 plus real eigenvalues
    def rot(r, th):
        return r * np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    D = sla.block_diag(rot(1.7, 0.4), rot(0.6, 1.1), np.diag([2.5, -0.3]))
    U = random_orthogonal(rng, 6)
    M = U @ D @ U.T
    W, S = ordered_real_schur(M)
    check_real_schur(M, W, S)
    lead = np.linalg.eigvals(S[:3, :3])
    assert np.all(np.abs(lead) < 1)
    assert np.all(np.abs(np.linalg.eigvals(S[3:, 3:])) > 1)
    np.testing.assert_allclose(sorted(np.abs(lead)), [0.3, 0.6, 0.6], atol=1e-12)


@given(st.integers(0, 2**31 - 1), st.integers(1, 14), st.sampled_from(["inside", "outside"]))
def test_schur_properties(seed, n, select):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    ev = np.linalg.eigvals(M)
    if np.min(np.abs(np.abs(ev) - 1.0)) < 1e-6:
        return
    W, S = ordered_real_schur(M, select=select)
    check_real_schur(M, W, S)
    k = int(np.sum(np.abs(ev) < 1)) if select == "inside" else int(np.sum(np.abs(ev) > 1))
    lead = np.linalg.eigvals(S[:k, :k]) if k else np.array([])
    if select == "inside":
        assert np.all(np.abs(lead) < 1)
    else:
        assert np.all(np.abs(lead) > 1)
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(S)), np.sort_complex(ev), atol=1e-8 * max(1, np.abs(ev).max()))


def test_schur_sweep_cap():
    from desatlqr.errors import SchurConvergenceError
    rng = np.random.default_rng(3)
    M = rng.standard_normal((8, 8))
    with pytest.raises(SchurConvergenceError):
        ordered_real_schur(M, max_sweeps=1)


# periodic form --------------------------------------------------------------

@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.integers(1, 9))
def test_periodic_schur_factorization(seed, n, p):
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((n, n)) for _ in range(p)]
    prod = np.linalg.multi_dot(mats) if p > 1 else mats[0]
    ev = np.linalg.eigvals(prod)
    if np.min(np.abs(np.log(np.abs(ev) + 1e-300))) < 1e-6:
        return
    ps = periodic_schur(mats, select="outside")
    for j in range(p):
        Zj, Zn = ps.Z[j], ps.Z[(j + 1) % p]
        assert np.linalg.norm(Zj.T @ Zj - np.eye(n)) < 1e-10
        assert np.linalg.norm(Zj.T @ mats[j] @ Zn - ps.T[j]) <= 1e-10 * np.linalg.norm(mats[j])
        if j:
            assert np.all(np.tril(ps.T[j], -1) == 0)
    k = int(np.sum(np.abs(ev) > 1))
    assert ps.n_selected == k
    # the leading k columns of Z_0 span the invariant subspace of the product
    if 0 < k < n:
        V = ps.Z[0][:, :k]
        resid = prod @ V - V @ np.linalg.lstsq(V, prod @ V, rcond=None)[0]
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(prod)


@given(st.integers(0, 2**31 - 1), st.integers(2, 5), st.sampled_from([1, 2, 5]))
def test_symplectic_eigenvalue_pairs(seed, n, p):
    rng = np.random.default_rng(seed)
    A, Bs, Q, R = random_periodic_plant(rng, n, 2, p)
    Ms = []
    for B in Bs:
        E, F = build_pencil_pair(A, B, Q, R)
        Ms.append(np.linalg.solve(F, E))
    ps = periodic_schur(Ms, select="outside")
    logs = np.sort(ps.log_moduli)
    # |lambda| and 1/|lambda| pair up
    assert np.max(np.abs(logs + logs[::-1])) <= 1e-6 * max(1.0, np.max(np.abs(logs)))
    assert ps.n_selected == n
