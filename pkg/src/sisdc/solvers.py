"""Linear solvers for the implicit stages.

Three routes, matching how the stage operators present themselves:

* :func:`pcg` for symmetric positive definite operators (scalar models),
* :func:`fgmres` for the nonsymmetric systems of the gas models,
* :func:`banded_factorize` / :func:`banded_solve` for assembled
  constant-coefficient operators, with an optional low-rank Woodbury
  correction carrying the periodic wrap couplings so the core stays
  banded and SPD.

Operators are wrapped in :class:`LinearSystem`; every solve returns a
:class:`SolveReport` next to the solution vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import SingularMatrixError, SolverBreakdownError

__all__ = [
    "LinearSystem",
    "SolveReport",
    "BandStorage",
    "BandedFactorization",
    "pcg",
    "fgmres",
    "banded_factorize",
    "banded_solve",
    "band_from_dense",
]


@dataclass
class SolveReport:
    """Outcome of one linear solve."""

    iterations: int
    residual: float
    converged: bool
    factorization_reused: bool = False
    method: str = ""


@dataclass
class BandStorage:
    """Symmetric band in upper form plus an optional low-rank correction.

    ``ab[p + i - j, j] = K[i, j]`` for ``j - p <= i <= j`` (scipy's
    upper banded layout) describes the banded core B; the full operator
    is K = B + U @ V.T with U, V of shape (n, r). r = 0 means K = B.
    """

    ab: np.ndarray
    U: np.ndarray = None
    V: np.ndarray = None

    @property
    def n(self):
        return self.ab.shape[1]

    @property
    def half_bandwidth(self):
        return self.ab.shape[0] - 1


class LinearSystem:
    """A linear operator ``x -> K x`` with optional assembled storage.

    Parameters
    ----------
    n : dimension
    matvec : callable(x) -> K x
    symmetric : whether K is symmetric (enables pcg)
    band : optional :class:`BandStorage` for the direct solver
    """

    def __init__(self, n, matvec, symmetric=False, band=None):
        self.n = int(n)
        self.matvec = matvec
        self.symmetric = bool(symmetric)
        self.band = band

    def apply(self, x):
        return self.matvec(x)


def _norm(x):
    return float(np.linalg.norm(x))


def pcg(system, b, tol=1e-12, maxit=None, precond=None):
    """Preconditioned conjugate gradients for an SPD system.

    ``precond`` is a callable r -> M^{-1} r (identity when None;
    callers with element structure pass a block-Jacobi inverse).
    Returns ``(x, SolveReport)``; the report's ``converged`` flag is
    False when the iteration budget ran out. Nonpositive curvature
    raises :class:`SolverBreakdownError` since it disproves SPD.
    """
    b = np.asarray(b)
    n = b.size
    maxit = n if maxit is None else int(maxit)
    bnorm = _norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True, method="pcg")
    x = np.zeros_like(b)
    r = b.copy()
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = np.vdot(r, z).real
    res = _norm(r) / bnorm
    it = 0
    while res > tol and it < maxit:
        Ap = system.apply(p)
        pAp = np.vdot(p, Ap).real
        if pAp <= 0.0:
            rep = SolveReport(it, res, False, method="pcg")
            raise SolverBreakdownError(
                f"nonpositive curvature p.Kp={pAp:.3e} at iteration {it}", rep)
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        res = _norm(r) / bnorm
        it += 1
        if res <= tol:
            break
        z = precond(r) if precond is not None else r
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(it, res, res <= tol, method="pcg")


def fgmres(system, b, tol=1e-12, maxit=None, restart=30, precond=None):
    """Flexible GMRES with restarts.

    The preconditioner may change between iterations (flexible variant:
    the preconditioned directions are stored explicitly). Returns
    ``(x, SolveReport)`` with ``converged=False`` on stagnation, i.e.
    when the iteration budget is exhausted above tolerance.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    maxit = 10 * max(restart, 1) if maxit is None else int(maxit)
    bnorm = _norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True, method="fgmres")
    x = np.zeros_like(b)
    total = 0
    res = 1.0
    while total < maxit:
        r = b - system.apply(x)
        beta = _norm(r)
        res = beta / bnorm
        if res <= tol:
            break
        m = min(restart, maxit - total)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[0] = r / beta
        g[0] = beta
        j_used = 0
        lucky = False
        for j in range(m):
            Z[j] = precond(V[j]) if precond is not None else V[j]
            w = system.apply(Z[j])
            for i in range(j + 1):
                H[i, j] = np.dot(V[i], w)
                w = w - H[i, j] * V[i]
            hnext = _norm(w)
            H[j + 1, j] = hnext
            lucky = hnext <= 1e-300
            if not lucky and j + 1 < m:
                V[j + 1] = w / hnext
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            rho = np.hypot(H[j, j], H[j + 1, j])
            if rho == 0.0:
                rho, H[j, j] = 1.0, 1.0  # degenerate column; rotation is identity
            cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_used = j + 1
            res = abs(g[j + 1]) / bnorm
            if res <= tol or lucky:
                break
        if j_used > 0:
            y = sla.solve_triangular(H[:j_used, :j_used], g[:j_used], lower=False)
            x = x + y @ Z[:j_used]
        r = b - system.apply(x)
        res = _norm(r) / bnorm
        if res <= tol or lucky:
            break
    return x, SolveReport(total, res, res <= tol, method="fgmres")


def band_from_dense(K, p):
    """Extract scipy upper-banded storage with half-bandwidth ``p`` from dense K."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    ab = np.zeros((p + 1, n))
    for j in range(n):
        for i in range(max(0, j - p), j + 1):
            ab[p + i - j, j] = K[i, j]
    return ab


@dataclass
class BandedFactorization:
    """Cholesky factor of the banded core plus Woodbury data for K = B + U V^T."""

    cho: np.ndarray
    U: np.ndarray = None
    W: np.ndarray = field(default=None, repr=False)  # B^{-1} U
    S_lu: tuple = field(default=None, repr=False)    # LU of I + V^T W
    V: np.ndarray = None


def banded_factorize(band: BandStorage):
    """Factor the SPD banded core (and prepare the low-rank correction).

    Zero or negative pivots (the matrix is not positive definite)
    raise :class:`SingularMatrixError`.
    """
    try:
        cho = sla.cholesky_banded(band.ab, lower=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"banded Cholesky failed: {exc}") from exc
    except ValueError as exc:
        raise SingularMatrixError(f"banded Cholesky rejected input: {exc}") from exc
    fact = BandedFactorization(cho=cho, U=band.U, V=band.V)
    if band.U is not None and band.U.size:
        W = np.column_stack([
            sla.cho_solve_banded((cho, False), band.U[:, k])
            for k in range(band.U.shape[1])
        ])
        S = np.eye(band.U.shape[1]) + band.V.T @ W
        try:
            fact.S_lu = sla.lu_factor(S)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"Woodbury capacitance singular: {exc}") from exc
        fact.W = W
    return fact


def banded_solve(fact: BandedFactorization, b):
    """Solve K x = b with a prepared :class:`BandedFactorization`."""
    y = sla.cho_solve_banded((fact.cho, False), np.asarray(b, dtype=float))
    if fact.U is None or fact.W is None:
        return y
    t = fact.V.T @ y
    s = sla.lu_solve(fact.S_lu, t)
    return y - fact.W @ s
