"""Nodal discontinuous Galerkin semi-discretization on 1D meshes.

Elementwise Lagrange bases on Gauss-Lobatto-Legendre (GLL) points with
the diagonal (collocation) mass matrix. The semi-discrete right-hand
side splits into

* an explicit convection functional with upwind/Godunov/Roe interface
  fluxes and over-integration against aliasing,
* an implicit functional realized by the symmetric interior penalty
  (SIP) form acting with a frozen matrix field
  (theta/2) A_c(u^alpha)^2 + A_d(u^alpha) + nu_s I,
* a solution-independent source treated implicitly.

The artificial diffusivity nu_s comes from a modal smoothness sensor
(log ratio of the top Legendre mode energy to the total) and is
constant per element.

Values are stored component-first: (d, E, P+1). All term evaluations
are vectorized over elements; interface fluxes are computed once per
face so conservation holds to round-off on periodic meshes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collocation import diff_matrix, gll_rule, lagrange_matrix, modal_transform_matrices
from .errors import InvalidArgumentError, NonConvergenceError
from .solvers import (
    BandStorage,
    LinearSystem,
    SolveReport,
    band_from_dense,
    banded_factorize,
    banded_solve,
    fgmres,
    pcg,
)

__all__ = [
    "Mesh1D",
    "GridFunction",
    "DgSpaceOps",
    "ShockCaptureParams",
    "BoundaryGhosts",
    "project",
    "convection_term",
    "rhs_explicit",
    "diffusion_term",
    "shock_sensor",
    "rhs_implicit_operator",
    "DgRhs",
    "write_gridfunction_csv",
]


@dataclass(frozen=True)
class Mesh1D:
    """Uniformly ordered 1D mesh with one boundary-condition kind.

    bc is one of 'periodic', 'dirichlet-exact', 'frozen-ghost'.
    """

    vertices: np.ndarray
    bc: str = "periodic"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 1 or v.size < 2 or np.any(np.diff(v) <= 0.0):
            raise InvalidArgumentError("mesh vertices must be strictly increasing")
        if self.bc not in ("periodic", "dirichlet-exact", "frozen-ghost"):
            raise InvalidArgumentError(f"unknown boundary kind {self.bc!r}")
        object.__setattr__(self, "vertices", v)

    @classmethod
    def uniform(cls, x_left, x_right, E, bc="periodic"):
        return cls(np.linspace(x_left, x_right, E + 1), bc)

    @property
    def E(self):
        return self.vertices.size - 1

    @property
    def widths(self):
        return np.diff(self.vertices)

    @property
    def periodic(self):
        return self.bc == "periodic"


@dataclass
class GridFunction:
    """Nodal DG field: values of shape (d, E, P+1)."""

    mesh: Mesh1D
    P: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.shape[1:] != (self.mesh.E, self.P + 1):
            raise InvalidArgumentError(
                f"values shape {v.shape} does not match mesh ({self.mesh.E} elements, degree {self.P})")
        self.values = v

    @property
    def d(self):
        return self.values.shape[0]

    def copy(self):
        return GridFunction(self.mesh, self.P, self.values.copy())


@dataclass(frozen=True)
class ShockCaptureParams:
    """Artificial-diffusivity parameters.

    c_s scales the maximum diffusivity nu_hat = c_s * lam_max * dx / P;
    kappa_s is the activation half-width around s_0 = -4 (log10 P + 1);
    variable selects the sensed component (0: scalar u or gas density);
    refresh is 'per-stage' (with every new u^alpha) or 'per-step'.
    """

    c_s: float
    kappa_s: float
    variable: int = 0
    refresh: str = "per-stage"

    def __post_init__(self):
        if self.c_s < 0.0 or self.kappa_s <= 0.0:
            raise InvalidArgumentError("need c_s >= 0 and kappa_s > 0")
        if self.refresh not in ("per-stage", "per-step"):
            raise InvalidArgumentError(f"unknown refresh policy {self.refresh!r}")


class BoundaryGhosts:
    """Ghost-state provider for non-periodic meshes.

    left(t) and right(t) return (d,) states. Dirichlet-exact cases wrap
    the exact solution; frozen-ghost cases return stored constants.
    """

    def __init__(self, left, right):
        self.left = left
        self.right = right

    @classmethod
    def frozen(cls, left_state, right_state):
        ls = np.asarray(left_state, dtype=float).reshape(-1)
        rs = np.asarray(right_state, dtype=float).reshape(-1)
        return cls(lambda t: ls, lambda t: rs)


class DgSpaceOps:
    """Precomputed element operators for one (mesh, P, Q_conv) triple."""

    def __init__(self, mesh: Mesh1D, P, Q_conv=None):
        if P < 1:
            raise InvalidArgumentError(f"degree P={P} must be >= 1")
        self.mesh = mesh
        self.P = int(P)
        rule = gll_rule(P)
        self.xg = rule.points
        self.wg = rule.weights
        self.D = diff_matrix(self.xg)
        dx = mesh.widths
        self.dx = dx
        self.two_over_dx = 2.0 / dx
        # physical node coordinates (E, P+1) and mass weights
        mid = 0.5 * (mesh.vertices[:-1] + mesh.vertices[1:])
        self.x = mid[:, None] + 0.5 * dx[:, None] * self.xg[None, :]
        self.mass = 0.5 * dx[:, None] * self.wg[None, :]
        # convection quadrature (>= P to control aliasing)
        self.Q_conv = self.P if Q_conv is None else int(Q_conv)
        if self.Q_conv < self.P:
            raise InvalidArgumentError("convection quadrature must satisfy Q >= P")
        crule = gll_rule(self.Q_conv)
        self.wq = crule.weights
        self.B = lagrange_matrix(self.xg, crule.points)
        self.Bd = self.B @ self.D
        self.xq = mid[:, None] + 0.5 * dx[:, None] * crule.points[None, :]
        # modal transform for the smoothness sensor
        self._Tmod, _, self._gam = modal_transform_matrices(P)

    def quadrature_grid(self, Q):
        """Interpolation matrix and physical points/weights of a GLL(Q) grid."""
        rule = gll_rule(Q)
        Bq = lagrange_matrix(self.xg, rule.points)
        mid = 0.5 * (self.mesh.vertices[:-1] + self.mesh.vertices[1:])
        xq = mid[:, None] + 0.5 * self.dx[:, None] * rule.points[None, :]
        wq = 0.5 * self.dx[:, None] * rule.weights[None, :]
        return Bq, xq, wq

    def integrate(self, nodal):
        """Mass-weighted global sum over all nodes, per component."""
        return np.einsum("ep,...ep->...", self.mass, np.asarray(nodal))


def project(ops: DgSpaceOps, fn):
    """Collocation projection: evaluate ``fn`` on the GLL nodes.

    With the diagonal mass matrix this is the L2 projection the
    discretization sees.
    """
    vals = np.asarray(fn(ops.x), dtype=float)
    if vals.shape == ops.x.shape:
        vals = vals[None]
    return GridFunction(ops.mesh, ops.P, vals)


# ----------------------------------------------------------------------
# convection
# ----------------------------------------------------------------------

def _convection_rhs(ops: DgSpaceOps, model, v, t=0.0, ghosts: BoundaryGhosts = None):
    """Mass-inverted convection RHS for raw values ``v`` of shape (d, E, P+1)."""
    uq = v @ ops.B.T
    fq = model.flux_c(uq)
    r = (fq * ops.wq) @ ops.Bd
    um = v[:, :, -1]
    up = v[:, :, 0]
    if ops.mesh.periodic:
        fh = model.interface_flux(um, np.roll(up, -1, axis=1), 1)
        r[:, :, -1] -= fh
        r[:, :, 0] += np.roll(fh, 1, axis=1)
    else:
        if ghosts is None:
            raise InvalidArgumentError("non-periodic mesh needs ghost states")
        if ops.mesh.E > 1:
            fh = model.interface_flux(um[:, :-1], up[:, 1:], 1)
            r[:, :-1, -1] -= fh
            r[:, 1:, 0] += fh
        gl = np.asarray(ghosts.left(t), dtype=float)[:, None]
        gr = np.asarray(ghosts.right(t), dtype=float)[:, None]
        r[:, 0, 0] += model.interface_flux(gl, up[:, :1], 1)[:, 0]
        r[:, -1, -1] -= model.interface_flux(um[:, -1:], gr, 1)[:, 0]
    return r / ops.mass


def convection_term(ops, model, u: GridFunction, t=0.0, ghosts=None):
    """Weak-form convection RHS (mass-inverted)."""
    return GridFunction(u.mesh, u.P, _convection_rhs(ops, model, u.values, t, ghosts))


def rhs_explicit(ops, model, u: GridFunction, t=0.0, ghosts=None):
    """The explicit RHS part: identical to :func:`convection_term`."""
    return convection_term(ops, model, u, t, ghosts)


# ----------------------------------------------------------------------
# SIP diffusion
# ----------------------------------------------------------------------

def _lam_apply(lam, vec, scalar):
    # lam: (E-likes,) scalar field or (d, d, ...) matrix field on faces/nodes
    if scalar:
        return lam * vec
    return np.einsum("ck...,k...->c...", lam, vec)


def _ahat(lm, lp, scalar):
    # interface diffusion matrix: max on the diagonal, average off it
    if scalar:
        return np.maximum(lm, lp)
    Ah = 0.5 * (lm + lp)
    for i in range(lm.shape[0]):
        Ah[i, i] = np.maximum(lm[i, i], lp[i, i])
    return Ah


def _diffusion_residual(ops: DgSpaceOps, v, lam, c_mu, ghost_states=None, ghost_lam=None):
    """SIP residual (not mass-inverted): volume, consistency, and penalty terms.

    ``lam`` is the nodal matrix field: (E, P+1) for scalar problems,
    (d, d, E, P+1) otherwise. For non-periodic meshes ``ghost_states``
    gives (left, right) boundary states (already evaluated, shape (d,))
    and ``ghost_lam`` the corresponding field values; ghost gradients
    are zero so the operator stays symmetric in the unknown.
    """
    d, E, _ = v.shape
    scalar = lam.ndim == 2
    P = ops.P
    D = ops.D
    tdx = ops.two_over_dx
    g = (v @ D.T) * tdx[None, :, None]
    Fq = _lam_apply(lam, g if scalar is False else g[0], scalar)
    if scalar:
        res = -((Fq * ops.wg) @ D)[None]
    else:
        res = -(Fq * ops.wg) @ D
    pen = 0.25 * P * (P + 1) * tdx  # P(P+1)/(2 dx^e) per element

    def face_terms(em, ep, um, up, gm, gp, lm, lp, mu):
        """Accumulate one batch of faces: minus elements em, plus elements ep."""
        jump = um - up
        lj_m = _lam_apply(lm, jump if scalar is False else jump[0], scalar)
        lj_p = _lam_apply(lp, jump if scalar is False else jump[0], scalar)
        if scalar:
            lj_m, lj_p = lj_m[None], lj_p[None]
        avg = 0.5 * (_lam_apply(lm, gm if scalar is False else gm[0], scalar)
                     + _lam_apply(lp, gp if scalar is False else gp[0], scalar))
        if scalar:
            avg = avg[None]
        aj = _ahat(lm, lp, scalar)
        aj = _lam_apply(aj, jump if scalar is False else jump[0], scalar)
        if scalar:
            aj = aj[None]
        # consistency in the test gradient, both sides of the face
        np.add.at(res, (slice(None), em),
                  0.5 * tdx[em][None, :, None] * lj_m[:, :, None] * D[-1, :][None, None, :])
        np.add.at(res, (slice(None), ep),
                  0.5 * tdx[ep][None, :, None] * lj_p[:, :, None] * D[0, :][None, None, :])
        # consistency in the solution gradient
        np.add.at(res, (slice(None), em, -1), avg)
        np.add.at(res, (slice(None), ep, 0), -avg)
        # jump penalty
        np.add.at(res, (slice(None), em, -1), -mu * aj)
        np.add.at(res, (slice(None), ep, 0), mu * aj)

    def lam_trace(idx_e, node):
        if scalar:
            return lam[idx_e, node]
        return lam[:, :, idx_e, node]

    um_all = v[:, :, -1]
    up_all = v[:, :, 0]
    gm_all = g[:, :, -1]
    gp_all = g[:, :, 0]

    if ops.mesh.periodic:
        em = np.arange(E)
        ep = (em + 1) % E
        mu = c_mu * 0.5 * (pen[em] + pen[ep])
        face_terms(em, ep, um_all[:, em], up_all[:, ep], gm_all[:, em], gp_all[:, ep],
                   lam_trace(em, -1), lam_trace(ep, 0), mu)
    else:
        if E > 1:
            em = np.arange(E - 1)
            ep = em + 1
            mu = c_mu * 0.5 * (pen[em] + pen[ep])
            face_terms(em, ep, um_all[:, em], up_all[:, ep], gm_all[:, em], gp_all[:, ep],
                       lam_trace(em, -1), lam_trace(ep, 0), mu)
        gL = np.zeros((d,)) if ghost_states is None else np.asarray(ghost_states[0], float)
        gR = np.zeros((d,)) if ghost_states is None else np.asarray(ghost_states[1], float)
        lamL = lam_trace(np.array([0]), 0) if ghost_lam is None else _expand_face_lam(ghost_lam[0], scalar)
        lamR = lam_trace(np.array([E - 1]), -1) if ghost_lam is None else _expand_face_lam(ghost_lam[1], scalar)
        zero_g = np.zeros((d, 1))
        # left boundary: ghost is the minus side, gradient trace zero
        face_terms(np.array([], dtype=int), np.array([0]),
                   gL[:, None], up_all[:, :1], zero_g, gp_all[:, :1],
                   lamL, lam_trace(np.array([0]), 0), c_mu * pen[0])
        # right boundary: ghost is the plus side
        face_terms(np.array([E - 1]), np.array([], dtype=int),
                   um_all[:, -1:], gR[:, None], gm_all[:, -1:], zero_g,
                   lam_trace(np.array([E - 1]), -1), lamR, c_mu * pen[E - 1])
    return res


def _expand_face_lam(lam_val, scalar):
    lam_val = np.asarray(lam_val, dtype=float)
    if scalar:
        return lam_val.reshape(1)
    return lam_val.reshape(lam_val.shape[0], lam_val.shape[1], 1)


def diffusion_term(ops, u: GridFunction, A_field, c_mu=2.0, ghosts=None, t=0.0, ghost_lam=None):
    """Mass-inverted SIP diffusion RHS with the given nodal matrix field.

    ``A_field`` has shape (E, P+1) for scalar problems or (d, d, E, P+1)
    otherwise. Requires c_mu > 1 for coercivity.
    """
    if c_mu <= 1.0:
        raise InvalidArgumentError(f"penalty constant c_mu={c_mu} must exceed 1")
    lam = np.asarray(A_field, dtype=float)
    gst = None
    if not ops.mesh.periodic:
        if ghosts is None:
            raise InvalidArgumentError("non-periodic mesh needs ghost states")
        gst = (ghosts.left(t), ghosts.right(t))
    res = _diffusion_residual(ops, u.values, lam, c_mu, gst, ghost_lam)
    return GridFunction(u.mesh, u.P, res / ops.mass)


# ----------------------------------------------------------------------
# shock sensor
# ----------------------------------------------------------------------

def shock_sensor(ops: DgSpaceOps, u: GridFunction, params: ShockCaptureParams, model):
    """Per-element artificial diffusivity from the modal smoothness sensor.

    s^e = log10( top-mode energy / total energy ) of the sensed
    variable, in discrete GLL norms; the diffusivity ramps from 0 to
    nu_hat = c_s lam_max dx / P over [s_0 - kappa_s, s_0 + kappa_s].
    """
    P = ops.P
    if P < 2:
        raise InvalidArgumentError("smoothness sensor needs P >= 2")
    q = u.values[params.variable]
    modal = q @ ops._Tmod.T
    energy = (modal * modal) * ops._gam[None, :]
    tot = energy.sum(axis=1)
    top = energy[:, -1]
    s = np.full(ops.mesh.E, -np.inf)
    ok = (tot > 0.0) & (top > 0.0)
    s[ok] = np.log10(top[ok] / tot[ok])
    s0 = -4.0 * (np.log10(P) + 1.0)
    lam_max = model.max_wave_speed(u.values).max(axis=1)
    nu_hat = params.c_s * lam_max * ops.dx / P
    nu = np.zeros(ops.mesh.E)
    full = s > s0 + params.kappa_s
    ramp = (~full) & (s >= s0 - params.kappa_s)
    nu[full] = nu_hat[full]
    nu[ramp] = 0.5 * nu_hat[ramp] * (1.0 + np.sin(0.5 * np.pi * (s[ramp] - s0) / params.kappa_s))
    return nu


# ----------------------------------------------------------------------
# implicit operator
# ----------------------------------------------------------------------

def _assemble_element_blocks(ops: DgSpaceOps, lam, c_mu, ghost_lam=None):
    """Per-element self-coupling blocks of the SIP residual.

    Returns (E, d(P+1), d(P+1)) arrays (component-major local index
    c*(P+1)+i). Used for block-Jacobi preconditioning; neighbor
    couplings are not included.
    """
    scalar = lam.ndim == 2
    d = 1 if scalar else lam.shape[0]
    E, P = ops.mesh.E, ops.P
    n1 = P + 1
    D, wg, tdx = ops.D, ops.wg, ops.two_over_dx
    if scalar:
        lam4 = lam[None, None]
    else:
        lam4 = lam
    # volume: -(2/dx) D^T diag(w lam) D per component pair
    blocks = -np.einsum("qi,ckeq,qj,e->ecikj", D, lam4 * wg, D, tdx)
    pen = 0.25 * P * (P + 1) * tdx

    def lam_face(e_idx, node):
        return lam4[:, :, e_idx, node]

    def add_face_self(e_idx, node, lm_own, lam_other, mu, sgn):
        # sgn +1 for the element's right face, -1 for its left face;
        # only the couplings among this element's own dofs.
        row = D[node, :][None, :] / ops.dx[e_idx][:, None]  # (ne, n1)
        t2a = sgn * np.einsum("ei,cke->ecik", row, lm_own)  # (ne, d, n1, d)
        blocks[e_idx, :, :, :, node] += t2a
        t2b = sgn * np.einsum("cke,ej->eckj", lm_own, row)  # (ne, d, d, n1)
        blocks[e_idx, :, node, :, :] += t2b
        ah = _ahat(lm_own, lam_other, False)                # (d, d, ne)
        blocks[e_idx, :, node, :, node] -= np.asarray(mu).reshape(-1, 1, 1) * np.moveaxis(ah, -1, 0)

    e_all = np.arange(E)
    if ops.mesh.periodic:
        mu_r = c_mu * 0.5 * (pen + pen[(e_all + 1) % E])
        mu_l = np.roll(mu_r, 1)
        add_face_self(e_all, -1, lam_face(e_all, -1), lam_face((e_all + 1) % E, 0), mu_r, +1)
        add_face_self(e_all, 0, lam_face(e_all, 0), lam_face((e_all - 1) % E, -1), mu_l, -1)
    else:
        def ghost_face_lam(side, like):
            if ghost_lam is None:
                return like
            gv = np.asarray(ghost_lam[side], dtype=float).reshape(d, d)
            return np.repeat(gv[:, :, None], like.shape[-1], axis=2)

        if E > 1:
            em = e_all[:-1]
            mu_i = c_mu * 0.5 * (pen[em] + pen[em + 1])
            add_face_self(em, -1, lam_face(em, -1), lam_face(em + 1, 0), mu_i, +1)
            add_face_self(em + 1, 0, lam_face(em + 1, 0), lam_face(em, -1), mu_i, -1)
        eL, eR = np.array([0]), np.array([E - 1])
        add_face_self(eR, -1, lam_face(eR, -1), ghost_face_lam(1, lam_face(eR, -1)),
                      c_mu * pen[eR], +1)
        add_face_self(eL, 0, lam_face(eL, 0), ghost_face_lam(0, lam_face(eL, 0)),
                      c_mu * pen[eL], -1)
    return blocks.reshape(E, d * n1, d * n1)


def _assemble_dense_scalar(ops: DgSpaceOps, lam_const, c_mu):
    """Dense scalar SIP residual matrix for a constant field (oracle/direct path)."""
    E, P = ops.mesh.E, ops.P
    n1 = P + 1
    n = E * n1
    lam = np.full((E, n1), lam_const)
    K = np.zeros((n, n))
    blocks = _assemble_element_blocks(ops, lam, c_mu)
    for e in range(E):
        K[e * n1:(e + 1) * n1, e * n1:(e + 1) * n1] = blocks[e]
    # neighbor couplings
    D, dx = ops.D, ops.dx
    pen = 0.25 * P * (P + 1) * ops.two_over_dx

    def couple(em, ep):
        mu = c_mu * 0.5 * (pen[em] + pen[ep])
        C = np.zeros((n1, n1))
        C[:, 0] -= (1.0 / dx[em]) * D[-1, :] * lam_const
        C[-1, :] += (1.0 / dx[ep]) * lam_const * D[0, :]
        C[-1, 0] += mu * lam_const
        return C

    faces = [(e, e + 1) for e in range(E - 1)]
    if ops.mesh.periodic and E > 1:
        faces.append((E - 1, 0))
    for em, ep in faces:
        C = couple(em, ep)
        K[em * n1:(em + 1) * n1, ep * n1:(ep + 1) * n1] += C
        K[ep * n1:(ep + 1) * n1, em * n1:(em + 1) * n1] += C.T
    return K


class ImplicitOperator:
    """Frozen-field implicit RHS: f_im(beta) = M^{-1} F_d[lam] beta + source.

    apply(beta) evaluates the functional; solve(b, c) solves
    beta = b + c * f_im(beta) for beta. The linear solve happens in
    residual space, where the SIP operator is symmetric for scalar
    fields (PCG or the banded direct path) and nonsymmetric for the
    gas models (FGMRES with a block-Jacobi preconditioner).
    """

    def __init__(self, rhs, lam, t, theta, ghost_states=None, ghost_lam=None):
        self.rhs = rhs
        self.ops = rhs.ops
        self.lam = lam
        self.t = t
        self.theta = theta
        self.ghost_states = ghost_states
        self.ghost_lam = ghost_lam
        self.scalar = lam.ndim == 2
        self.is_zero = not np.any(lam)
        ops = self.ops
        if rhs.model.source is not None:
            self.src = np.asarray(rhs.model.source(ops.x, t), dtype=float)
            if self.src.shape == ops.x.shape:
                self.src = self.src[None]
        else:
            self.src = None
        if self.is_zero:
            self.affine = 0.0
        else:
            zt = np.zeros((rhs.model.d, ops.mesh.E, ops.P + 1))
            if ghost_states is None:
                self.affine = 0.0
            else:
                self.affine = _diffusion_residual(ops, zt, lam, rhs.c_mu, ghost_states, ghost_lam)
        self._blocks_inv = None
        self._band_key = None

    # -- functional evaluation ------------------------------------------

    def _lin_res(self, v):
        if self.is_zero:
            return np.zeros_like(v)
        return _diffusion_residual(self.ops, v, self.lam, self.rhs.c_mu,
                                   None if self.ghost_states is None else
                                   (np.zeros_like(self.ghost_states[0]), np.zeros_like(self.ghost_states[1])),
                                   self.ghost_lam)

    def apply(self, v):
        """Evaluate f_im at ``v`` (mass-inverted, including source and ghosts)."""
        out = (self._lin_res(v) + self.affine) / self.ops.mass
        if self.src is not None:
            out = out + self.src
        return out

    # -- stage solve -----------------------------------------------------

    def _residual_rhs(self, b, c):
        rr = self.ops.mass * b + c * self.affine
        if self.src is not None:
            rr = rr + c * self.ops.mass * self.src
        return rr

    def _precond(self, c):
        if self._blocks_inv is None or self._blocks_inv[0] != c:
            F = _assemble_element_blocks(self.ops, self.lam, self.rhs.c_mu, self.ghost_lam)
            nloc = F.shape[1]
            d = self.rhs.model.d
            # component-major local ordering: (c, i) -> c*(P+1)+i
            mloc = np.repeat(self.ops.mass[:, None, :], d, axis=1).reshape(self.ops.mesh.E, nloc)
            K = -c * F
            K[:, np.arange(nloc), np.arange(nloc)] += mloc
            self._blocks_inv = (c, np.linalg.inv(K))
        inv = self._blocks_inv[1]
        E = self.ops.mesh.E
        d = self.rhs.model.d
        n1 = self.ops.P + 1

        def pc(r):
            rl = r.reshape(d, E, n1).transpose(1, 0, 2).reshape(E, d * n1)
            z = np.einsum("eij,ej->ei", inv, rl)
            return z.reshape(E, d, n1).transpose(1, 0, 2).ravel()

        return pc

    def solve(self, b, c):
        """Solve beta = b + c * f_im(beta); returns (beta, SolveReport)."""
        rhs = self.rhs
        if self.is_zero or c == 0.0:
            out = b + (c * self.src if self.src is not None else 0.0)
            return np.asarray(out, dtype=float), SolveReport(0, 0.0, True, method="direct")
        d = rhs.model.d
        ops = self.ops
        shape = (d, ops.mesh.E, ops.P + 1)
        rr = self._residual_rhs(np.asarray(b, dtype=float), c)
        method = rhs.solver
        if method == "auto":
            if d == 1 and rhs.model.constant_coefficients and (not ops.mesh.periodic or ops.mesh.E >= 3):
                method = "banded"
            elif d == 1:
                method = "pcg"
            else:
                method = "fgmres"
        if method == "banded":
            if d != 1 or not rhs.model.constant_coefficients:
                raise InvalidArgumentError("banded path needs a scalar constant-coefficient field")
            if ops.mesh.periodic and ops.mesh.E < 3:
                raise InvalidArgumentError("periodic banded path needs at least 3 elements")
            fact, reused = rhs._banded_factorization(self, c)
            x = banded_solve(fact, rr.ravel())
            rep = SolveReport(0, 0.0, True, factorization_reused=reused, method="banded")
            rhs._count(rep)
            return x.reshape(shape), rep

        mass = ops.mass

        def matvec(xf):
            xr = xf.reshape(shape)
            return (mass * xr - c * self._lin_res(xr)).ravel()

        system = LinearSystem(rr.size, matvec, symmetric=(d == 1))
        pc = self._precond(c)
        if method == "pcg":
            x, rep = pcg(system, rr.ravel(), tol=rhs.tol, maxit=rhs.maxit, precond=pc)
        else:
            x, rep = fgmres(system, rr.ravel(), tol=rhs.tol, maxit=rhs.maxit,
                            restart=rhs.restart, precond=pc)
        rhs._count(rep)
        if not rep.converged:
            raise NonConvergenceError(
                f"implicit stage solve ({rep.method}) stalled at rel. residual "
                f"{rep.residual:.3e} after {rep.iterations} iterations", rep)
        return x.reshape(shape), rep


def rhs_implicit_operator(ops, model, u_alpha: GridFunction, t, theta, nu_s=None,
                          c_mu=2.0, ghosts=None, solver="auto", tol=1e-12):
    """Build the frozen-coefficient implicit operator at state ``u_alpha``.

    Field: (theta/2) A_c(u_alpha)^2 + A_d(u_alpha) + nu_s I, with nu_s
    a per-element artificial diffusivity (or None).
    """
    rhs = DgRhs(ops, model, ghosts=ghosts, c_mu=c_mu, solver=solver, tol=tol)
    return rhs.f_im_with_viscosity(u_alpha.values, t, theta, nu_s)


def write_gridfunction_csv(ops: DgSpaceOps, gf: GridFunction, path, names=None):
    """Write nodal values as CSV columns: x, then one column per variable."""
    d = gf.d
    names = names or [f"u{i}" for i in range(d)]
    cols = [ops.x.ravel()] + [gf.values[i].ravel() for i in range(d)]
    with open(path, "w") as fh:
        fh.write(",".join(["x"] + list(names)) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{val:.17e}" for val in row) + "\n")


# ----------------------------------------------------------------------
# split RHS adapter
# ----------------------------------------------------------------------

class DgRhs:
    """Split right-hand side of a DG-discretized conservation law.

    Implements the interface the time integrators expect:
    f_ex (convection), f_im (frozen-field SIP diffusion plus source,
    returning an :class:`ImplicitOperator`), and the unsplit f_full.
    Carries the solver configuration, the factorization cache, and the
    artificial-viscosity refresh policy.
    """

    def __init__(self, ops: DgSpaceOps, model, ghosts: BoundaryGhosts = None,
                 c_mu=2.0, shock: ShockCaptureParams = None,
                 solver="auto", tol=1e-12, maxit=None, restart=30):
        if not ops.mesh.periodic and ghosts is None:
            raise InvalidArgumentError("non-periodic mesh needs ghost states")
        if c_mu <= 1.0:
            raise InvalidArgumentError(f"penalty constant c_mu={c_mu} must exceed 1")
        if solver not in ("auto", "banded", "pcg", "fgmres"):
            raise InvalidArgumentError(f"unknown solver {solver!r}")
        self.ops = ops
        self.model = model
        self.ghosts = ghosts
        self.c_mu = float(c_mu)
        self.shock = shock
        self.solver = solver
        self.tol = tol
        self.maxit = maxit
        self.restart = restart
        self._band_cache = {}
        self._frozen_nus = None
        self.solve_count = 0
        self.iteration_total = 0

    # -- bookkeeping ------------------------------------------------------

    def _count(self, report):
        self.solve_count += 1
        self.iteration_total += report.iterations

    def begin_step(self, u_values):
        """Freeze the artificial viscosity for this step (per-step policy)."""
        if self.shock is not None and self.shock.refresh == "per-step":
            gf = GridFunction(self.ops.mesh, self.ops.P, np.asarray(u_values))
            self._frozen_nus = shock_sensor(self.ops, gf, self.shock, self.model)

    def _nu_s(self, u_values):
        if self.shock is None:
            return None
        if self.shock.refresh == "per-step" and self._frozen_nus is not None:
            return self._frozen_nus
        gf = GridFunction(self.ops.mesh, self.ops.P, np.asarray(u_values))
        return shock_sensor(self.ops, gf, self.shock, self.model)

    # -- ghosts -----------------------------------------------------------

    def _ghost_states(self, t):
        if self.ops.mesh.periodic:
            return None
        return (np.asarray(self.ghosts.left(t), dtype=float),
                np.asarray(self.ghosts.right(t), dtype=float))

    # -- field construction -------------------------------------------------

    def _field(self, values, theta, nu_s):
        """Nodal implicit matrix field (theta/2) A_c^2 + A_d + nu_s I."""
        model = self.model
        d = model.d
        if d == 1:
            ac = model.jac_c(values)[0, 0]
            ad = model.diff_matrix(values)[0, 0]
            lam = 0.5 * theta * ac * ac + ad
            if nu_s is not None:
                lam = lam + nu_s[:, None]
            return lam
        Ac = model.jac_c(values)
        Ad = model.diff_matrix(values)
        lam = 0.5 * theta * np.einsum("ck...,kl...->cl...", Ac, Ac) + Ad
        if nu_s is not None:
            idx = np.arange(d)
            lam[idx, idx] += nu_s[None, :, None]
        return lam

    def _ghost_field(self, ghost_states, theta):
        if ghost_states is None:
            return None
        out = []
        for gs in ghost_states:
            gs = gs.reshape(-1, 1)
            lam = self._field(gs, theta, None)
            out.append(lam.reshape(self.model.d, self.model.d) if self.model.d > 1
                       else float(np.ravel(lam)[0]))
        if self.model.d == 1:
            return (np.array([[out[0]]]), np.array([[out[1]]]))
        return tuple(out)

    # -- split interface ----------------------------------------------------

    def f_ex(self, u, t):
        """Explicit RHS: the convection functional."""
        return _convection_rhs(self.ops, self.model, np.asarray(u), t, self.ghosts)

    def f_im(self, u_alpha, t, theta):
        """Implicit operator frozen at ``u_alpha`` with interval ``theta``."""
        values = np.asarray(u_alpha)
        return self.f_im_with_viscosity(values, t, theta, self._nu_s(values))

    def f_im_corrector(self, u_alpha, u_node_old, t, theta):
        """Implicit operator for a correction-sweep node update.

        Frozen at ``u_alpha`` like :meth:`f_im`, but the artificial
        viscosity is the elementwise max of the fields sensed at
        ``u_alpha`` and at ``u_node_old``, the previous iterate of the
        node being updated. The quadrature term of a correction carries
        the viscous response of the old iterate; the implicit side must
        majorize that stiffness or the update is left effectively
        explicit in it (near a fresh discontinuity, u_alpha alone can
        look smooth while the old node value does not).
        """
        values = np.asarray(u_alpha)
        nv = self._nu_s(values)
        if nv is not None:
            nv = np.maximum(nv, self._nu_s(np.asarray(u_node_old)))
        return self.f_im_with_viscosity(values, t, theta, nv)

    def f_im_with_viscosity(self, values, t, theta, nu_s):
        lam = self._field(values, theta, nu_s)
        gst = self._ghost_states(t)
        glam = self._ghost_field(gst, theta)
        return ImplicitOperator(self, lam, t, theta, gst, glam)

    def f_full(self, u, t):
        """Unsplit RHS: convection + physical and artificial diffusion + source."""
        values = np.asarray(u)
        out = self.f_ex(values, t)
        part = self.f_im(values, t, 0.0)
        return out + part.apply(values)

    # -- banded direct path ---------------------------------------------------

    def _banded_factorization(self, op: ImplicitOperator, c):
        lam_const = float(op.lam.flat[0])
        key = (lam_const, float(c))
        hit = key in self._band_cache
        if not hit:
            ops = self.ops
            n1 = ops.P + 1
            n = ops.mesh.E * n1
            F = _assemble_dense_scalar(ops, lam_const, self.c_mu)
            K = -c * F
            K[np.arange(n), np.arange(n)] += ops.mass.ravel()
            U = V = None
            if ops.mesh.periodic:
                rows = slice((ops.mesh.E - 1) * n1, ops.mesh.E * n1)
                cols = slice(0, n1)
                C1 = K[rows, cols].copy()
                K[rows, cols] = 0.0
                K[cols, rows] = 0.0
                avec = np.zeros(n)
                avec[rows] = C1[:, 0]
                bvec = np.zeros(n)
                bcol = C1[-1, :].copy()
                bcol[0] = 0.0
                bvec[cols] = bcol
                eP = np.zeros(n)
                eP[(ops.mesh.E - 1) * n1 + n1 - 1] = 1.0
                e0 = np.zeros(n)
                e0[0] = 1.0
                U = np.column_stack([avec, eP, e0, bvec])
                V = np.column_stack([e0, bvec, avec, eP])
            band = BandStorage(band_from_dense(K, n1), U, V)
            self._band_cache[key] = banded_factorize(band)
        return self._band_cache[key], hit
