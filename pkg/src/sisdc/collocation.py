"""Collocation nodes, quadrature rules, and nodal bases.

Two point families are provided:

* right-Radau nodes on (0, 1], used as collocation points in time.
  The left endpoint 0 is not a node; the right endpoint 1 always is.
  Together with the subinterval integrals w_{i,m} of the Lagrange
  basis they reproduce the Radau IIA coefficients
  a_{m,n} = sum_{k<=m} w_{n,k} = int_0^{tau_m} l_n(tau) dtau.

* Gauss-Lobatto-Legendre (GLL) points on [-1, 1], used as the nodal
  grid and quadrature of the spatial discretization.

All outputs are plain numpy arrays and immutable by convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_legendre, roots_jacobi, roots_legendre

from .errors import InvalidArgumentError

__all__ = [
    "CollocationSet",
    "QuadratureRule",
    "CflScale",
    "barycentric_weights",
    "lagrange_matrix",
    "diff_matrix",
    "radau_nodes",
    "sdc_weights",
    "collocation_set",
    "lagrange_interpolate",
    "gll_rule",
    "legendre_vandermonde",
    "modal_transform_matrices",
    "legendre_modal_transform",
    "cfl_scale",
]


def barycentric_weights(x):
    """Barycentric weights of the interpolation nodes ``x``.

    Scaled by the max to keep them O(1); scaling cancels in all uses.
    """
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.max(np.abs(w))


def lagrange_matrix(x_src, x_eval):
    """Matrix L with L[e, j] = l_j(x_eval[e]) for the basis on ``x_src``.

    Uses the barycentric form; evaluation points coinciding with a
    source node reproduce the cardinal property exactly.
    """
    x_src = np.asarray(x_src, dtype=float)
    x_eval = np.asarray(x_eval, dtype=float)
    w = barycentric_weights(x_src)
    d = x_eval[:, None] - x_src[None, :]
    exact = d == 0.0
    hit = exact.any(axis=1)
    d[hit, :] = 1.0  # avoid 0/0; rows are overwritten below
    m = (w[None, :] / d)
    s = m.sum(axis=1, keepdims=True)
    s[hit] = 1.0  # weights of symmetric node sets sum to zero
    L = m / s
    if hit.any():
        L[hit, :] = exact[hit, :].astype(float)
    return L


def diff_matrix(x):
    """Nodal differentiation matrix: D[i, j] = l_j'(x_i)."""
    x = np.asarray(x, dtype=float)
    w = barycentric_weights(x)
    n = x.size
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (w[j] / w[i]) / (x[i] - x[j])
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def _legendre_deriv(n, x):
    # P_n'(x) for |x| < 1 via the standard three-term relation
    return n * (x * eval_legendre(n, x) - eval_legendre(n - 1, x)) / (x * x - 1.0)


def radau_nodes(M):
    """Right-Radau nodes on (0, 1], ascending, last node exactly 1.

    The M-1 interior nodes are the roots of the Jacobi polynomial
    P_{M-1}^{(1,0)}, seeded with companion-matrix eigenvalues and
    polished by Newton iteration on r(x) = P_{M-1}(x) - P_M(x).
    Convergence is declared when the Newton update stalls at rounding
    level; the residual itself bottoms out near 2e-14 for M >= 14
    because the polynomial evaluation noise exceeds 1e-14 there while
    the nodes are already correct to machine precision.
    """
    if not isinstance(M, (int, np.integer)) or not 1 <= M <= 16:
        raise InvalidArgumentError(f"node count M={M!r} outside 1..16")
    if M == 1:
        return np.array([1.0])
    x, _ = roots_jacobi(M - 1, 1.0, 0.0)
    update = np.inf
    for _ in range(50):
        r = eval_legendre(M - 1, x) - eval_legendre(M, x)
        if np.max(np.abs(r)) < 1e-15:
            break
        dr = _legendre_deriv(M - 1, x) - _legendre_deriv(M, x)
        dx = r / dr
        x = x - dx
        update = np.max(np.abs(dx))
        if update < 4e-16:
            break
    r = eval_legendre(M - 1, x) - eval_legendre(M, x)
    if np.max(np.abs(r)) >= 1e-13 and update >= 1e-15:
        raise RuntimeError(f"Radau node refinement stalled at residual {np.max(np.abs(r)):.3e}")
    tau = np.empty(M)
    tau[: M - 1] = 0.5 * (x + 1.0)
    tau[M - 1] = 1.0
    return tau


def sdc_weights(tau):
    """Subinterval integrals w and cumulative coefficients a for nodes ``tau``.

    w[i, m] = int_{tau_{m-1}}^{tau_m} l_i(tau) dtau  (tau_0 := 0)
    a[m, n] = sum_{k<=m} w[n, k] = int_0^{tau_m} l_n(tau) dtau

    Each subinterval integral uses a Gauss-Legendre rule with
    ceil((M+1)/2) + 1 points, exact for the degree-(M-1) integrands.
    """
    tau = np.asarray(tau, dtype=float)
    M = tau.size
    ngl = int(np.ceil((M + 1) / 2)) + 1
    xg, wg = roots_legendre(ngl)
    edges = np.concatenate(([0.0], tau))
    w = np.empty((M, M))
    for m in range(M):
        lo, hi = edges[m], edges[m + 1]
        pts = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        L = lagrange_matrix(tau, pts)  # (ngl, M)
        w[:, m] = 0.5 * (hi - lo) * (wg @ L)
    a = np.cumsum(w, axis=1).T.copy()
    return w, a


@dataclass(frozen=True)
class CollocationSet:
    """Right-Radau collocation data on the unit interval.

    Attributes
    ----------
    family : str
    M : int
    tau : (M,) nodes in (0, 1]
    dtau : (M,) subinterval lengths, dtau[m] = tau[m] - tau[m-1]
    w : (M, M) subinterval integrals w[i, m]
    a : (M, M) Radau IIA coefficients a[m, n]
    """

    family: str
    M: int
    tau: np.ndarray
    dtau: np.ndarray
    w: np.ndarray
    a: np.ndarray
    _bary: np.ndarray = field(repr=False, default=None)

    def ell_eval(self, t):
        """Evaluate all M Lagrange basis polynomials at points ``t``."""
        return lagrange_matrix(self.tau, np.atleast_1d(np.asarray(t, dtype=float)))


def collocation_set(M):
    """Build the right-Radau :class:`CollocationSet` with ``M`` nodes."""
    tau = radau_nodes(M)
    w, a = sdc_weights(tau)
    dtau = np.diff(np.concatenate(([0.0], tau)))
    return CollocationSet(
        family="right-Radau", M=M, tau=tau, dtau=dtau, w=w, a=a,
        _bary=barycentric_weights(tau),
    )


def lagrange_interpolate(cset, values, t):
    """Interpolate node ``values`` of a :class:`CollocationSet` at ``t``.

    ``values`` is a sequence of M arrays (or scalars); returns the
    barycentric interpolant sum_m values[m] * l_m(t) for scalar ``t``.
    """
    tau = cset.tau if isinstance(cset, CollocationSet) else np.asarray(cset, float)
    L = lagrange_matrix(tau, np.array([float(t)]))[0]
    out = L[0] * np.asarray(values[0])
    for m in range(1, tau.size):
        out = out + L[m] * np.asarray(values[m])
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Lobatto rule with Q+1 points on [-1, 1]; exact to degree 2Q-1."""

    Q: int
    points: np.ndarray
    weights: np.ndarray


def gll_rule(Q):
    """Gauss-Lobatto-Legendre rule with ``Q + 1`` points on [-1, 1]."""
    if Q < 1:
        raise InvalidArgumentError(f"GLL rule needs Q >= 1, got {Q}")
    x = np.empty(Q + 1)
    x[0], x[-1] = -1.0, 1.0
    if Q > 1:
        xi, _ = roots_jacobi(Q - 1, 1.0, 1.0)  # roots of P_Q'
        x[1:-1] = xi
    lp = eval_legendre(Q, x)
    w = 2.0 / (Q * (Q + 1) * lp * lp)
    return QuadratureRule(Q=Q, points=x, weights=w)


def legendre_vandermonde(P, x):
    """V[q, i] = L_i(x_q) for Legendre polynomials up to degree P."""
    x = np.asarray(x, dtype=float)
    V = np.empty((x.size, P + 1))
    for i in range(P + 1):
        V[:, i] = eval_legendre(i, x)
    return V


def modal_transform_matrices(P):
    """Nodal-to-modal and modal-to-nodal maps on the degree-P GLL grid.

    Returns (T, V, gamma): modal = T @ nodal, nodal = V @ modal, and
    gamma[i] = sum_q w_q L_i(x_q)^2 the discrete norms. GLL quadrature
    is inexact for L_P^2, so normalizing by the discrete norm (not the
    analytic 2/(2P+1)) is what makes T an exact inverse of V.
    """
    rule = gll_rule(P)
    V = legendre_vandermonde(P, rule.points)
    gamma = rule.weights @ (V * V)
    T = (V * rule.weights[:, None]).T / gamma[:, None]
    return T, V, gamma


def legendre_modal_transform(nodal):
    """Legendre coefficients of nodal values on the matching GLL grid.

    Operates along the last axis; inverse of evaluating the modal
    expansion at the GLL points.
    """
    nodal = np.asarray(nodal, dtype=float)
    T, _, _ = modal_transform_matrices(nodal.shape[-1] - 1)
    return nodal @ T.T


@dataclass(frozen=True)
class CflScale:
    """Largest advection eigenvalue magnitude of the degree-P element."""

    P: int
    delta: float


def cfl_scale(P):
    """Spectral advection scale delta for the CFL definition.

    delta is the spectral radius of the GLL nodal differentiation
    matrix on [-1, 1] with the inflow row and column (node x = -1,
    unit velocity) removed, computed by a dense nonsymmetric
    eigensolve. Grows like P^2.
    """
    if P < 1:
        raise InvalidArgumentError(f"cfl_scale needs P >= 1, got {P}")
    rule = gll_rule(P)
    D = diff_matrix(rule.points)
    Dred = D[1:, 1:]
    ev = np.linalg.eigvals(Dred)
    return CflScale(P=P, delta=float(np.max(np.abs(ev))))
