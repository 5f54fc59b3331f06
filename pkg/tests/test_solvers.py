"""Linear solver kernels: PCG, flexible GMRES, banded direct with Woodbury."""

import numpy as np
import pytest

from sisdc.errors import SingularMatrixError, SolverBreakdownError
from sisdc.solvers import (
    BandStorage,
    LinearSystem,
    band_from_dense,
    banded_factorize,
    banded_solve,
    fgmres,
    pcg,
)


def dense_system(A, symmetric=False):
    A = np.asarray(A, dtype=float)
    return LinearSystem(A.shape[0], lambda x: A @ x, symmetric=symmetric)


def random_spd(rng, n):
    C = rng.standard_normal((n, n))
    return C @ C.T + n * np.eye(n)


# ----------------------------------------------------------------- pcg


def test_pcg_identity(rng):
    b = rng.standard_normal(8)
    x, rep = pcg(dense_system(np.eye(8), True), b)
    assert x == pytest.approx(b, rel=1e-14)
    assert rep.converged and rep.method == "pcg"


def test_pcg_small_exact():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    x, rep = pcg(dense_system(A, True), np.array([3.0, 3.0]))
    assert x == pytest.approx([1.0, 1.0], rel=1e-13)
    assert rep.converged
    assert rep.iterations <= 2  # CG is exact in n steps


def test_pcg_random_spd_matches_direct(rng):
    A = random_spd(rng, 50)
    b = rng.standard_normal(50)
    x, rep = pcg(dense_system(A, True), b, tol=1e-13)
    assert rep.converged
    assert x == pytest.approx(np.linalg.solve(A, b), rel=1e-10, abs=1e-10)


def test_pcg_jacobi_preconditioner_fixes_bad_scaling():
    d = 10.0 ** np.arange(12)
    A = np.diag(d)
    b = np.ones(12)
    dinv = 1.0 / d
    x, rep = pcg(dense_system(A, True), b, precond=lambda r: dinv * r)
    assert rep.converged and rep.iterations == 1
    assert x == pytest.approx(dinv, rel=1e-12)


def test_pcg_rejects_indefinite_operator():
    A = np.diag([1.0, -1.0])
    with pytest.raises(SolverBreakdownError) as ei:
        pcg(dense_system(A, True), np.array([1.0, 1.0]))
    assert ei.value.report is not None
    assert not ei.value.report.converged


def test_pcg_zero_rhs_short_circuits():
    x, rep = pcg(dense_system(np.eye(4), True), np.zeros(4))
    assert np.all(x == 0.0)
    assert rep.converged and rep.iterations == 0


def test_pcg_budget_exhaustion_reports_failure(rng):
    A = random_spd(rng, 40)
    b = rng.standard_normal(40)
    _, rep = pcg(dense_system(A, True), b, tol=1e-14, maxit=2)
    assert not rep.converged
    assert rep.iterations == 2


# -------------------------------------------------------------- fgmres


def test_fgmres_identity(rng):
    b = rng.standard_normal(6)
    x, rep = fgmres(dense_system(np.eye(6)), b)
    assert x == pytest.approx(b, rel=1e-13)
    assert rep.converged and rep.method == "fgmres"


def test_fgmres_frozen_3x3():
    A = np.array([[2.0, 1.0, 0.0], [0.0, 3.0, 1.0], [1.0, 0.0, 4.0]])
    b = np.array([1.0, 2.0, 3.0])
    x, rep = fgmres(dense_system(A), b, tol=1e-14)
    assert rep.converged
    assert x == pytest.approx([0.28, 0.44, 0.68], rel=1e-12)


def test_fgmres_random_nonsymmetric(rng):
    A = rng.standard_normal((40, 40)) + 8.0 * np.eye(40)
    b = rng.standard_normal(40)
    x, rep = fgmres(dense_system(A), b, tol=1e-13)
    assert rep.converged
    assert x == pytest.approx(np.linalg.solve(A, b), rel=1e-9, abs=1e-9)


def test_fgmres_restart_still_converges(rng):
    A = rng.standard_normal((30, 30)) + 8.0 * np.eye(30)
    b = rng.standard_normal(30)
    x, rep = fgmres(dense_system(A), b, tol=1e-12, restart=5, maxit=400)
    assert rep.converged
    assert rep.iterations > 5  # must have crossed at least one restart
    assert x == pytest.approx(np.linalg.solve(A, b), rel=1e-8, abs=1e-8)


def test_fgmres_exact_preconditioner_converges_immediately(rng):
    A = rng.standard_normal((15, 15)) + 6.0 * np.eye(15)
    Ainv = np.linalg.inv(A)
    b = rng.standard_normal(15)
    x, rep = fgmres(dense_system(A), b, precond=lambda r: Ainv @ r)
    assert rep.converged
    assert rep.iterations <= 2
    assert x == pytest.approx(Ainv @ b, rel=1e-10, abs=1e-10)


def test_fgmres_zero_rhs_short_circuits():
    x, rep = fgmres(dense_system(np.eye(5)), np.zeros(5))
    assert np.all(x == 0.0)
    assert rep.converged and rep.iterations == 0


def test_fgmres_budget_exhaustion_reports_failure(rng):
    A = rng.standard_normal((25, 25)) + 6.0 * np.eye(25)
    b = rng.standard_normal(25)
    _, rep = fgmres(dense_system(A), b, tol=1e-14, maxit=2, restart=2)
    assert not rep.converged


# ------------------------------------------------------- banded direct


def tridiag(n, lo, di, up):
    return np.diag(np.full(n, di)) + np.diag(np.full(n - 1, lo), -1) + np.diag(np.full(n - 1, up), 1)


def test_band_from_dense_layout():
    K = tridiag(4, -1.0, 2.0, -1.0)
    ab = band_from_dense(K, 1)
    assert ab.shape == (2, 4)
    assert ab[1] == pytest.approx([2.0, 2.0, 2.0, 2.0])
    assert ab[0] == pytest.approx([0.0, -1.0, -1.0, -1.0])  # leading pad


def test_banded_green_function():
    K = tridiag(5, -1.0, 2.0, -1.0)
    fact = banded_factorize(BandStorage(band_from_dense(K, 1)))
    x = banded_solve(fact, np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
    assert x == pytest.approx([0.5, 1.0, 1.5, 1.0, 0.5], rel=1e-14)


def test_banded_matches_dense_solve(rng):
    n, p = 30, 3
    K = np.zeros((n, n))
    for k in range(1, p + 1):
        off = rng.uniform(-1.0, 1.0, n - k)
        K += np.diag(off, k) + np.diag(off, -k)
    K += np.diag(np.abs(K).sum(axis=1) + 1.0)  # diagonal dominance => SPD
    b = rng.standard_normal(n)
    fact = banded_factorize(BandStorage(band_from_dense(K, p)))
    assert banded_solve(fact, b) == pytest.approx(np.linalg.solve(K, b), rel=1e-11, abs=1e-11)


def test_banded_woodbury_low_rank_update(rng):
    n, p, r = 24, 2, 2
    K = tridiag(n, -1.0, 4.0, -1.0)
    U = 0.3 * rng.standard_normal((n, r))
    V = 0.3 * rng.standard_normal((n, r))
    full = K + U @ V.T
    b = rng.standard_normal(n)
    fact = banded_factorize(BandStorage(band_from_dense(K, p), U=U, V=V))
    assert banded_solve(fact, b) == pytest.approx(np.linalg.solve(full, b), rel=1e-10, abs=1e-10)


def test_banded_rejects_indefinite_core():
    K = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
    with pytest.raises(SingularMatrixError):
        banded_factorize(BandStorage(band_from_dense(K, 1)))


def test_band_storage_properties():
    store = BandStorage(band_from_dense(tridiag(7, -1.0, 2.0, -1.0), 1))
    assert store.n == 7
    assert store.half_bandwidth == 1
