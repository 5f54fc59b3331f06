"""Spatial discretization: projection, convection, SIP diffusion, sensor,
implicit operator, and the split RHS adapter."""

import numpy as np
import pytest

from sisdc.collocation import modal_transform_matrices
from sisdc.dg import (
    BoundaryGhosts,
    DgRhs,
    DgSpaceOps,
    GridFunction,
    Mesh1D,
    ShockCaptureParams,
    convection_term,
    diffusion_term,
    project,
    rhs_explicit,
    rhs_implicit_operator,
    shock_sensor,
    write_gridfunction_csv,
)
from sisdc.errors import InvalidArgumentError
from sisdc.models import GasParams, burgers_model, convdiff_model, euler_ns_model

GAS = GasParams(R=1.0, gamma=1.4, eta=1e-3, Pr=0.75)


def periodic_ops(E=8, P=4, Q=None, lo=0.0, hi=1.0):
    return DgSpaceOps(Mesh1D.uniform(lo, hi, E), P, Q_conv=Q)


# ------------------------------------------------------- mesh and fields


def test_uniform_mesh_vertices():
    m = Mesh1D.uniform(0.0, 1.0, 4)
    assert m.vertices == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert m.E == 4
    assert m.widths == pytest.approx([0.25] * 4)
    assert m.periodic


def test_mesh_rejects_unsorted_vertices():
    with pytest.raises(InvalidArgumentError):
        Mesh1D(np.array([0.0, 0.5, 0.5, 1.0]))


def test_mesh_rejects_unknown_bc():
    with pytest.raises(InvalidArgumentError):
        Mesh1D.uniform(0.0, 1.0, 2, bc="outflow")


def test_gridfunction_promotes_scalar_layout():
    m = Mesh1D.uniform(0.0, 1.0, 3)
    gf = GridFunction(m, 2, np.zeros((3, 3)))
    assert gf.values.shape == (1, 3, 3)
    assert gf.d == 1


def test_gridfunction_rejects_shape_mismatch():
    m = Mesh1D.uniform(0.0, 1.0, 3)
    with pytest.raises(InvalidArgumentError):
        GridFunction(m, 2, np.zeros((2, 4, 3)))


def test_gridfunction_copy_is_independent():
    m = Mesh1D.uniform(0.0, 1.0, 2)
    a = GridFunction(m, 1, np.ones((2, 2)))
    b = a.copy()
    b.values[...] = 5.0
    assert np.all(a.values == 1.0)


def test_degree_zero_rejected():
    with pytest.raises(InvalidArgumentError):
        DgSpaceOps(Mesh1D.uniform(0.0, 1.0, 2), 0)


def test_quadrature_below_degree_rejected():
    with pytest.raises(InvalidArgumentError):
        DgSpaceOps(Mesh1D.uniform(0.0, 1.0, 2), 4, Q_conv=3)


# ------------------------------------------------------------ projection


def test_project_constant():
    ops = periodic_ops()
    gf = project(ops, lambda x: np.full_like(x, 3.25))
    assert np.all(gf.values == 3.25)


def test_project_reproduces_polynomials():
    ops = periodic_ops(E=3, P=5)
    gf = project(ops, lambda x: x**5 - 2 * x**2 + 1)
    want = ops.x**5 - 2 * ops.x**2 + 1
    assert gf.values[0] == pytest.approx(want, rel=1e-13)


def test_integrate_linear_exactly():
    ops = periodic_ops(E=7, P=3)
    gf = project(ops, lambda x: x)
    assert float(ops.integrate(gf.values[0])) == pytest.approx(0.5, rel=1e-13)


def test_integrate_per_component():
    ops = periodic_ops(E=4, P=2)
    vals = np.stack([np.ones((4, 3)), 2 * np.ones((4, 3))])
    assert ops.integrate(vals) == pytest.approx([1.0, 2.0], rel=1e-14)


# ------------------------------------------------------------ convection


def test_convection_of_constant_vanishes():
    ops = periodic_ops(E=6, P=5)
    m = convdiff_model(1.3, 0.0)
    u = project(ops, lambda x: np.full_like(x, 2.0))
    r = convection_term(ops, m, u)
    assert np.max(np.abs(r.values)) < 1e-13


def test_convection_differentiates_smooth_field():
    ops = periodic_ops(E=64, P=15)
    m = convdiff_model(1.0, 0.0)
    u = project(ops, lambda x: np.sin(2 * np.pi * x))
    r = convection_term(ops, m, u)
    want = -2 * np.pi * np.cos(2 * np.pi * ops.x)
    assert np.max(np.abs(r.values[0] - want)) < 1e-10


def test_convection_conserves_mass(rng):
    ops = periodic_ops(E=16, P=6)
    m = burgers_model(0.0)
    u = project(ops, lambda x: np.sin(2 * np.pi * x) + 0.2 * np.cos(4 * np.pi * x))
    r = convection_term(ops, m, u)
    assert abs(float(ops.integrate(r.values[0]))) < 1e-12


def test_overintegration_is_exact_beyond_three_halves():
    # Burgers flux of a degree-P interpolant is degree 2P; the weak-form
    # integrand is degree 3P-1, integrated exactly once Q >= 3P/2
    E, P = 8, 6
    mesh = Mesh1D.uniform(0.0, 1.0, E)
    lo = DgSpaceOps(mesh, P, Q_conv=(3 * P + 1) // 2)
    hi = DgSpaceOps(mesh, P, Q_conv=3 * P)
    m = burgers_model(0.0)
    u_fn = lambda x: np.sin(2 * np.pi * x)
    r_lo = convection_term(lo, m, project(lo, u_fn))
    r_hi = convection_term(hi, m, project(hi, u_fn))
    assert r_lo.values == pytest.approx(r_hi.values, abs=1e-12)


def test_nonperiodic_convection_requires_ghosts():
    ops = DgSpaceOps(Mesh1D.uniform(0.0, 1.0, 4, bc="frozen-ghost"), 3)
    m = convdiff_model(1.0, 0.0)
    u = project(ops, lambda x: np.full_like(x, 1.0))
    with pytest.raises(InvalidArgumentError):
        convection_term(ops, m, u)


def test_constant_passes_through_frozen_boundaries():
    ops = DgSpaceOps(Mesh1D.uniform(0.0, 1.0, 4, bc="frozen-ghost"), 3)
    m = convdiff_model(1.0, 0.0)
    u = project(ops, lambda x: np.full_like(x, 2.5))
    g = BoundaryGhosts.frozen([2.5], [2.5])
    r = convection_term(ops, m, u, ghosts=g)
    assert np.max(np.abs(r.values)) < 1e-13


def test_rhs_explicit_aliases_convection():
    ops = periodic_ops(E=6, P=4)
    m = burgers_model(0.0)
    u = project(ops, lambda x: np.cos(2 * np.pi * x))
    a = rhs_explicit(ops, m, u)
    b = convection_term(ops, m, u)
    assert np.all(a.values == b.values)


# ------------------------------------------------------------- diffusion


def nu_field(ops, nu):
    return np.full((ops.mesh.E, ops.P + 1), nu)


def test_diffusion_of_constant_vanishes():
    ops = periodic_ops(E=5, P=4)
    u = project(ops, lambda x: np.full_like(x, 1.7))
    r = diffusion_term(ops, u, nu_field(ops, 0.5))
    assert np.max(np.abs(r.values)) < 1e-12


def test_diffusion_of_linear_profile_vanishes_away_from_ghosts():
    # interior: jumps and second derivatives of linear data both vanish.
    # Ghost states carry boundary values only (their one-sided gradient
    # is zero), so the two outermost nodes keep a consistency penalty;
    # the boundary kinds that use ghosts sit in flat far-field regions.
    ops = DgSpaceOps(Mesh1D.uniform(0.0, 1.0, 4, bc="frozen-ghost"), 3)
    u = project(ops, lambda x: x)
    g = BoundaryGhosts.frozen([0.0], [1.0])
    r = diffusion_term(ops, u, nu_field(ops, 1.0), ghosts=g).values[0]
    inner = r.copy()
    inner[0, 0] = 0.0
    inner[-1, -1] = 0.0
    assert np.max(np.abs(inner)) < 1e-11
    assert abs(r[0, 0]) > 1.0  # boundary face sees the gradient mismatch


def test_diffusion_approximates_laplacian():
    ops = periodic_ops(E=16, P=10)
    u = project(ops, lambda x: np.sin(2 * np.pi * x))
    r = diffusion_term(ops, u, nu_field(ops, 1.0))
    want = -4 * np.pi**2 * np.sin(2 * np.pi * ops.x)
    rel = np.max(np.abs(r.values[0] - want)) / np.max(np.abs(want))
    assert rel < 1e-8


def test_diffusion_operator_is_symmetric(rng):
    ops = periodic_ops(E=4, P=3)
    lam = nu_field(ops, 1.0)
    u = GridFunction(ops.mesh, ops.P, rng.standard_normal((4, 4)))
    w = GridFunction(ops.mesh, ops.P, rng.standard_normal((4, 4)))
    fu = diffusion_term(ops, u, lam)
    fw = diffusion_term(ops, w, lam)
    left = float(ops.integrate(fu.values[0] * w.values[0]))
    right = float(ops.integrate(fw.values[0] * u.values[0]))
    assert left == pytest.approx(right, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("c_mu", [1.5, 2.0, 4.0])
def test_diffusion_operator_is_dissipative(rng, c_mu):
    ops = periodic_ops(E=4, P=3)
    lam = nu_field(ops, 1.0)
    for _ in range(10):
        u = GridFunction(ops.mesh, ops.P, rng.standard_normal((4, 4)))
        fu = diffusion_term(ops, u, lam, c_mu=c_mu)
        quad = float(ops.integrate(fu.values[0] * u.values[0]))
        assert quad <= 1e-10


def test_penalty_constant_must_exceed_one():
    ops = periodic_ops(E=4, P=3)
    u = project(ops, lambda x: x * 0.0)
    with pytest.raises(InvalidArgumentError):
        diffusion_term(ops, u, nu_field(ops, 1.0), c_mu=1.0)


def test_diffusion_conserves_mass(rng):
    ops = periodic_ops(E=6, P=5)
    u = GridFunction(ops.mesh, ops.P, rng.standard_normal((6, 6)))
    r = diffusion_term(ops, u, nu_field(ops, 0.3))
    assert abs(float(ops.integrate(r.values[0]))) < 1e-12


# ----------------------------------------------------------- shock sensor


PARAMS = ShockCaptureParams(c_s=0.4, kappa_s=2.0)


def modal_to_nodal(P, coeffs):
    T, V, _ = modal_transform_matrices(P)
    return np.asarray(coeffs) @ V.T


def test_sensor_silent_on_smooth_data():
    ops = periodic_ops(E=4, P=6)
    u = project(ops, lambda x: 1.0 + 0.3 * x)
    nu = shock_sensor(ops, u, PARAMS, burgers_model(0.0))
    assert np.all(nu == 0.0)


def test_sensor_saturates_on_pure_top_mode():
    E, P = 3, 6
    ops = periodic_ops(E=E, P=P)
    coeffs = np.zeros(P + 1)
    coeffs[-1] = 0.7
    row = modal_to_nodal(P, coeffs)
    u = GridFunction(ops.mesh, ops.P, np.tile(row, (E, 1)))
    nu = shock_sensor(ops, u, PARAMS, burgers_model(0.0))
    lam = np.abs(u.values[0]).max(axis=1)
    want = PARAMS.c_s * lam * ops.dx / P
    assert nu == pytest.approx(want, rel=1e-12)


def test_sensor_half_activation_at_threshold():
    E, P = 1, 8
    ops = periodic_ops(E=E, P=P)
    _, _, gam = modal_transform_matrices(P)
    s0 = -4.0 * (np.log10(P) + 1.0)
    ratio = 10.0**s0
    eps = np.sqrt(ratio * gam[0] / (gam[-1] * (1.0 - ratio)))
    coeffs = np.zeros(P + 1)
    coeffs[0] = 1.0
    coeffs[-1] = eps
    u = GridFunction(ops.mesh, ops.P, modal_to_nodal(P, coeffs)[None, :])
    nu = shock_sensor(ops, u, PARAMS, burgers_model(0.0))
    lam = np.abs(u.values[0]).max()
    nu_hat = PARAMS.c_s * lam * ops.dx[0] / P
    assert float(nu[0]) == pytest.approx(0.5 * nu_hat, rel=1e-6)


def test_sensor_ramp_is_monotone_and_continuous():
    P = 8
    E = 9
    ops = periodic_ops(E=E, P=P)
    _, _, gam = modal_transform_matrices(P)
    s0 = -4.0 * (np.log10(P) + 1.0)
    kappa = PARAMS.kappa_s
    targets = s0 + kappa * np.array([-1.5, -1.0 + 1e-6, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0 - 1e-6, 1.5])
    rows = []
    for s in targets:
        ratio = 10.0**s
        eps = np.sqrt(ratio * gam[0] / (gam[-1] * (1.0 - ratio)))
        coeffs = np.zeros(P + 1)
        coeffs[0] = 1.0
        coeffs[-1] = eps
        rows.append(modal_to_nodal(P, coeffs))
    u = GridFunction(ops.mesh, ops.P, np.stack(rows))
    nu = shock_sensor(ops, u, PARAMS, convdiff_model(1.0, 0.0))
    nu_hat = PARAMS.c_s * 1.0 * ops.dx / P  # constant wave speed 1
    assert np.all(np.diff(nu) >= -1e-12)  # monotone in the sensed smoothness
    assert nu[0] == 0.0
    assert abs(nu[1]) < 1e-3 * nu_hat[1]  # continuous at the lower edge
    assert nu[-1] == pytest.approx(nu_hat[-1], rel=1e-12)
    assert nu[-2] == pytest.approx(nu_hat[-2], rel=1e-3)  # continuous at the upper edge


def test_sensor_requires_quadratic_space():
    ops = periodic_ops(E=4, P=1)
    u = project(ops, lambda x: x)
    with pytest.raises(InvalidArgumentError):
        shock_sensor(ops, u, PARAMS, burgers_model(0.0))


@pytest.mark.parametrize(
    "kwargs",
    [dict(c_s=-0.1, kappa_s=2.0), dict(c_s=0.4, kappa_s=0.0),
     dict(c_s=0.4, kappa_s=2.0, refresh="sometimes")],
)
def test_shock_params_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        ShockCaptureParams(**kwargs)


# ------------------------------------------------------ implicit operator


def test_zero_field_operator_short_circuits():
    ops = periodic_ops(E=4, P=3)
    m = convdiff_model(1.0, 0.0)  # no physical diffusion
    u = project(ops, lambda x: np.sin(2 * np.pi * x))
    op = rhs_implicit_operator(ops, m, u, t=0.0, theta=0.0)
    assert op.is_zero
    assert np.max(np.abs(op.apply(u.values))) == 0.0
    b = u.values + 0.5
    out, rep = op.solve(b, 0.125)
    assert np.all(out == b)
    assert rep.method == "direct"


def test_split_parts_recompose_full_rhs():
    ops = periodic_ops(E=8, P=5)
    m = convdiff_model(1.0, 1e-3)
    rhs = DgRhs(ops, m)
    u = project(ops, lambda x: np.sin(2 * np.pi * x)).values
    full = rhs.f_full(u, 0.0)
    split = rhs.f_ex(u, 0.0) + rhs.f_im(u, 0.0, 0.0).apply(u)
    assert full == pytest.approx(split, abs=1e-13)


def test_solve_satisfies_residual_identity(rng):
    ops = periodic_ops(E=8, P=4)
    m = convdiff_model(1.0, 1e-3)
    rhs = DgRhs(ops, m, solver="pcg")
    u = project(ops, lambda x: np.sin(2 * np.pi * x))
    op = rhs.f_im(u.values, 0.0, 0.2)
    b = rng.standard_normal(u.values.shape)
    beta, rep = op.solve(b, 0.01)
    assert rep.converged
    back = beta - 0.01 * op.apply(beta)
    assert np.max(np.abs(back - b)) < 1e-9


def test_banded_and_pcg_agree(rng):
    ops = periodic_ops(E=8, P=4)
    m = convdiff_model(1.0, 1e-3)
    u = project(ops, lambda x: np.sin(2 * np.pi * x))
    b = rng.standard_normal(u.values.shape)
    out = {}
    for solver in ("banded", "pcg"):
        rhs = DgRhs(ops, m, solver=solver)
        op = rhs.f_im(u.values, 0.0, 0.2)
        x, rep = op.solve(b, 0.01)
        assert rep.method == solver
        out[solver] = x
    assert np.max(np.abs(out["banded"] - out["pcg"])) < 1e-11


def test_auto_routing_by_model():
    u_fn = lambda x: 1.0 + 0.1 * np.sin(2 * np.pi * x)
    ops = periodic_ops(E=6, P=3)

    rhs = DgRhs(ops, convdiff_model(1.0, 1e-3))
    u = project(ops, u_fn)
    _, rep = rhs.f_im(u.values, 0.0, 0.1).solve(u.values, 1e-3)
    assert rep.method == "banded"

    rhs = DgRhs(ops, burgers_model(1e-3))
    _, rep = rhs.f_im(u.values, 0.0, 0.1).solve(u.values, 1e-3)
    assert rep.method == "pcg"

    gas_ops = periodic_ops(E=6, P=3)
    m = euler_ns_model(GAS)
    state = project(gas_ops, lambda x: np.stack(
        [1.0 + 0.1 * np.sin(2 * np.pi * x),
         0.1 * np.cos(2 * np.pi * x),
         2.5 + 0.1 * np.sin(2 * np.pi * x)]))
    rhs = DgRhs(gas_ops, m)
    _, rep = rhs.f_im(state.values, 0.0, 0.1).solve(state.values, 1e-3)
    assert rep.method == "fgmres"


def test_banded_factorization_is_reused():
    ops = periodic_ops(E=8, P=4)
    m = convdiff_model(1.0, 1e-3)
    rhs = DgRhs(ops, m, solver="banded")
    u = project(ops, lambda x: np.sin(2 * np.pi * x))
    op = rhs.f_im(u.values, 0.0, 0.2)
    _, first = op.solve(u.values, 0.01)
    _, second = op.solve(u.values + 1.0, 0.01)
    assert not first.factorization_reused
    assert second.factorization_reused
    assert rhs.solve_count == 2


def test_implicit_euler_solve_closes_residual(rng):
    ops = periodic_ops(E=6, P=3)
    m = euler_ns_model(GAS)
    state = project(ops, lambda x: np.stack(
        [1.0 + 0.1 * np.sin(2 * np.pi * x),
         0.1 * np.cos(2 * np.pi * x),
         2.5 + 0.1 * np.sin(2 * np.pi * x)]))
    rhs = DgRhs(ops, m)
    op = rhs.f_im(state.values, 0.0, 0.1)
    beta, rep = op.solve(state.values, 1e-3)
    assert rep.converged
    back = beta - 1e-3 * op.apply(beta)
    assert np.max(np.abs(back - state.values)) < 1e-8


def test_implicit_term_conserves_mass(rng):
    ops = periodic_ops(E=6, P=4)
    m = convdiff_model(1.0, 1e-3)
    rhs = DgRhs(ops, m)
    v = rng.standard_normal((1, 6, 5))
    op = rhs.f_im(v, 0.0, 0.3)
    r = op.apply(v)
    assert abs(float(ops.integrate(r[0]))) < 1e-12


def test_corrector_viscosity_majorizes_old_iterate():
    E, P = 4, 8
    ops = periodic_ops(E=E, P=P)
    shock = ShockCaptureParams(c_s=0.4, kappa_s=2.0)
    m = burgers_model(0.0)
    rhs = DgRhs(ops, m, shock=shock)
    smooth = project(ops, lambda x: 1.0 + 0.1 * np.sin(2 * np.pi * x))
    coeffs = np.zeros(P + 1)
    coeffs[0] = 1.0
    coeffs[-1] = 0.5
    rough_row = modal_to_nodal(P, coeffs)
    rough = GridFunction(ops.mesh, ops.P, np.tile(rough_row, (E, 1)))

    nu_smooth = rhs._nu_s(smooth.values)
    nu_rough = rhs._nu_s(rough.values)
    assert np.all(nu_smooth == 0.0) and np.any(nu_rough > 0.0)

    op = rhs.f_im_corrector(smooth.values, rough.values, 0.0, 0.1)
    want = rhs.f_im_with_viscosity(smooth.values, 0.0, 0.1, np.maximum(nu_smooth, nu_rough))
    probe = rough.values
    assert op.apply(probe) == pytest.approx(want.apply(probe), abs=1e-14)
    # and it differs from the operator sensed at u_alpha alone
    plain = rhs.f_im(smooth.values, 0.0, 0.1)
    assert np.max(np.abs(op.apply(probe) - plain.apply(probe))) > 1e-8


# ----------------------------------------------------------------- output


def test_write_gridfunction_csv_roundtrip(tmp_path):
    ops = periodic_ops(E=3, P=2)
    u = project(ops, lambda x: np.sin(x))
    path = tmp_path / "field.csv"
    write_gridfunction_csv(ops, u, path, names=["u"])
    with open(path) as fh:
        assert fh.readline().strip() == "x,u"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (9, 2)
    assert data[:, 0] == pytest.approx(ops.x.ravel(), rel=1e-15)
    assert data[:, 1] == pytest.approx(np.sin(ops.x).ravel(), rel=1e-15)
