"""Benchmark case definitions.

Each case bundles a mesh, a model, initial data, boundary treatment,
the split right-hand side, and either an exact solution or a recipe
for computing a fine reference solution:

* ``cd-wave``: linear convection-diffusion of a seven-mode sine packet
  on the periodic unit interval (exact solution known).
* ``bu-wave``: viscous Burgers forced so the same packet is the exact
  solution (manufactured source).
* ``bu-front``: viscous Burgers traveling front 1 - tanh((x+1/2-t)/2nu)
  on [-1, 1] with exact Dirichlet boundary data.
* ``ns-acoustic``: 1D compressible Navier-Stokes, a right-running
  acoustic simple wave seeded on a Mach 0.1 mean flow.
* ``ns-sod``: Euler shock tube (frozen ghost states, modal shock
  capture).
* ``ns-shu-osher``: shock / sine-entropy-wave interaction (frozen
  ghosts, shock capture); the advertised CFL number for this case is
  conventionally evaluated from the mid-run state, after the shock has
  accelerated the flow.

The CFL convention is CFL = dt * lam_max * 2 delta / dx, where delta is
the spectral radius of the inflow-stripped first-derivative operator on
the reference element and lam_max the largest convective wave speed of
the initial data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .collocation import cfl_scale
from .dg import BoundaryGhosts, DgRhs, DgSpaceOps, GridFunction, Mesh1D, ShockCaptureParams, project
from .errors import ConfigError
from .models import GasParams, burgers_model, convdiff_model, euler_ns_model

__all__ = [
    "Case",
    "build_case",
    "CASE_NAMES",
    "compute_cfl",
    "dt_from_cfl",
    "steps_for_cfl",
]


# seven-mode packet: wavenumbers, amplitudes, phase shifts
_PACKET_K = 2.0 * np.pi * np.array([1.0, 3.0, 5.0, 7.0, 9.0, 12.0, 15.0])
_PACKET_A = np.array([1.00, 1.50, 1.80, 1.70, 1.50, 1.30, 1.15])
_PACKET_S = np.array([0.00, 0.05, 0.10, 0.15, 0.20, 0.30, 0.18])


def _packet(x, t, v, nu):
    x = np.asarray(x, dtype=float)
    xi = x[..., None] - _PACKET_S - v * t
    decay = np.exp(-_PACKET_K ** 2 * nu * t)
    return np.sum(_PACKET_A * decay * np.sin(_PACKET_K * xi), axis=-1)


def _packet_source_burgers(x, t, nu):
    """u_t + u u_x - nu u_xx for the packet with unit drift speed."""
    x = np.asarray(x, dtype=float)
    xi = x[..., None] - _PACKET_S - t
    decay = _PACKET_A * np.exp(-_PACKET_K ** 2 * nu * t)
    S = np.sin(_PACKET_K * xi)
    C = np.cos(_PACKET_K * xi)
    u = np.sum(decay * S, axis=-1)
    u_t = np.sum(decay * (-_PACKET_K * C - nu * _PACKET_K ** 2 * S), axis=-1)
    u_x = np.sum(decay * _PACKET_K * C, axis=-1)
    u_xx = np.sum(-decay * _PACKET_K ** 2 * S, axis=-1)
    return u_t + u * u_x - nu * u_xx


@dataclass
class Case:
    """A ready-to-run benchmark configuration."""

    name: str
    ops: DgSpaceOps
    model: object
    rhs: DgRhs
    u0: GridFunction
    t_end: float
    exact: object = None          # callable (x, t) -> (d, ...) values, or None
    error_kind: str = "relative"
    var_names: tuple = ("u",)
    lam_max: float = 0.0          # largest convective speed of the initial data
    cfl_report: str = "initial"   # 'initial' or 'midrun'
    reference: dict = None        # recipe when no exact solution exists
    params: dict = field(default_factory=dict)

    @property
    def mesh(self):
        return self.ops.mesh

    def exact_values(self, t):
        vals = np.asarray(self.exact(self.ops.x, t), dtype=float)
        if vals.shape == self.ops.x.shape:
            vals = vals[None]
        return vals


def compute_cfl(ops: DgSpaceOps, dt, lam_max):
    """CFL = dt lam 2 delta / dx, maximized over elements."""
    delta = cfl_scale(ops.P).delta
    return float(dt * lam_max * 2.0 * delta / ops.dx.min())


def dt_from_cfl(ops: DgSpaceOps, lam_max, cfl):
    """Largest dt with the given CFL number."""
    delta = cfl_scale(ops.P).delta
    return float(cfl * ops.dx.min() / (lam_max * 2.0 * delta))


def steps_for_cfl(ops: DgSpaceOps, lam_max, cfl, t_end):
    """Step count and size hitting t_end exactly at (at most) the given CFL."""
    dt_max = dt_from_cfl(ops, lam_max, cfl)
    n = max(1, int(math.ceil(t_end / dt_max - 1e-12)))
    return n, t_end / n


def _pop(over, key, default):
    return over.pop(key, default)


def _shock_from(value, default_cs, default_ks):
    if value is None:
        return None
    if value is False:
        return None
    if value is True:
        return ShockCaptureParams(c_s=default_cs, kappa_s=default_ks)
    if isinstance(value, ShockCaptureParams):
        return value
    if isinstance(value, dict):
        return ShockCaptureParams(
            c_s=float(value.get("c_s", default_cs)),
            kappa_s=float(value.get("kappa_s", default_ks)),
            variable=int(value.get("variable", 0)),
            refresh=value.get("refresh", "per-stage"),
        )
    raise ConfigError(f"cannot interpret shock-capture setting {value!r}")


def _finish(over, name):
    if over:
        raise ConfigError(f"unknown option(s) for case {name}: {', '.join(sorted(over))}")


def _solver_opts(over):
    return {
        "solver": _pop(over, "solver", "auto"),
        "tol": float(_pop(over, "tol", 1e-12)),
        "c_mu": float(_pop(over, "c_mu", 2.0)),
    }


def _case_cd_wave(over):
    E = int(_pop(over, "E", 64))
    P = int(_pop(over, "P", 15))
    nu = float(_pop(over, "nu", 1e-3))
    v = float(_pop(over, "v", 1.0))
    t_end = float(_pop(over, "t_end", 10.0))
    sol = _solver_opts(over)
    _finish(over, "cd-wave")
    mesh = Mesh1D.uniform(0.0, 1.0, E, "periodic")
    model = convdiff_model(v, nu)
    ops = DgSpaceOps(mesh, P, Q_conv=P)
    rhs = DgRhs(ops, model, **sol)
    exact = lambda x, t: _packet(x, t, v, nu)
    u0 = project(ops, lambda x: exact(x, 0.0))
    lam = float(np.max(model.max_wave_speed(u0.values)))
    return Case("cd-wave", ops, model, rhs, u0, t_end, exact=exact,
                error_kind="relative", lam_max=lam,
                params={"E": E, "P": P, "nu": nu, "v": v})


def _case_bu_wave(over):
    E = int(_pop(over, "E", 64))
    P = int(_pop(over, "P", 15))
    nu = float(_pop(over, "nu", 1e-3))
    t_end = float(_pop(over, "t_end", 2.0))
    sol = _solver_opts(over)
    _finish(over, "bu-wave")
    mesh = Mesh1D.uniform(0.0, 1.0, E, "periodic")
    model = burgers_model(nu, source=lambda x, t: _packet_source_burgers(x, t, nu))
    ops = DgSpaceOps(mesh, P, Q_conv=int(math.ceil(1.5 * P)))
    rhs = DgRhs(ops, model, **sol)
    exact = lambda x, t: _packet(x, t, 1.0, nu)
    u0 = project(ops, lambda x: exact(x, 0.0))
    lam = float(np.max(model.max_wave_speed(u0.values)))
    return Case("bu-wave", ops, model, rhs, u0, t_end, exact=exact,
                error_kind="relative", lam_max=lam,
                params={"E": E, "P": P, "nu": nu})


def _case_bu_front(over):
    E = int(_pop(over, "E", 50))
    P = int(_pop(over, "P", 15))
    nu = float(_pop(over, "nu", 1e-3))
    t_end = float(_pop(over, "t_end", 0.5))
    shock = _shock_from(_pop(over, "shock", None), 0.4, 2.0)
    sol = _solver_opts(over)
    _finish(over, "bu-front")

    def exact(x, t):
        return 1.0 - np.tanh((np.asarray(x) + 0.5 - t) / (2.0 * nu))

    mesh = Mesh1D.uniform(-1.0, 1.0, E, "dirichlet-exact")
    model = burgers_model(nu)
    ops = DgSpaceOps(mesh, P, Q_conv=int(math.ceil(1.5 * P)))
    ghosts = BoundaryGhosts(lambda t: np.atleast_1d(exact(-1.0, t)),
                            lambda t: np.atleast_1d(exact(1.0, t)))
    rhs = DgRhs(ops, model, ghosts=ghosts, shock=shock, **sol)
    u0 = project(ops, lambda x: exact(x, 0.0))
    lam = float(np.max(model.max_wave_speed(u0.values)))
    return Case("bu-front", ops, model, rhs, u0, t_end, exact=exact,
                error_kind="relative", lam_max=lam,
                params={"E": E, "P": P, "nu": nu})


def _euler_state(gas: GasParams, rho, v, p):
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    E = p / ((gas.gamma - 1.0) * rho) + 0.5 * v * v
    return np.stack(np.broadcast_arrays(rho, rho * v, rho * E))


def _left_of(x, xj):
    """Side selector for a jump at the element interface ``xj``.

    On nodal (E, P+1) grids the branch is chosen per element, so the two
    elements meeting at ``xj`` each take their one-sided state and the
    discontinuity is represented exactly. Pointwise grids fall back to
    a plain coordinate test.
    """
    x = np.asarray(x)
    if x.ndim == 2:
        side = x.mean(axis=-1, keepdims=True) < xj
        return np.broadcast_to(side, x.shape)
    return x < xj


def _case_ns_acoustic(over):
    E = int(_pop(over, "E", 10))
    P = int(_pop(over, "P", 15))
    t_end = float(_pop(over, "t_end", 2.619e-2))
    mach = float(_pop(over, "mach", 0.1))
    ref_steps = int(_pop(over, "reference_steps", 30000))
    sol = _solver_opts(over)
    _finish(over, "ns-acoustic")
    gas = GasParams(R=287.28, gamma=1.4, eta=1e-5, Pr=0.75)
    p_inf, T_inf = 1000.0, 300.0
    a_inf = math.sqrt(gas.gamma * gas.R * T_inf)

    def init(x):
        vp = 1e-2 * a_inf * np.sin(2.0 * np.pi * np.asarray(x))
        T0 = (a_inf + 0.5 * (gas.gamma - 1.0) * vp) ** 2 / (gas.gamma * gas.R)
        p0 = p_inf * (T0 / T_inf) ** (gas.gamma / (gas.gamma - 1.0))
        v0 = mach * a_inf + vp
        rho0 = p0 / (gas.R * T0)
        return _euler_state(gas, rho0, v0, p0)

    mesh = Mesh1D.uniform(0.0, 1.0, E, "periodic")
    model = euler_ns_model(gas)
    ops = DgSpaceOps(mesh, P, Q_conv=2 * P)
    rhs = DgRhs(ops, model, **sol)
    u0 = project(ops, init)
    lam = float(np.max(model.max_wave_speed(u0.values)))
    return Case("ns-acoustic", ops, model, rhs, u0, t_end,
                error_kind="relative", var_names=("rho", "mom", "energy"), lam_max=lam,
                reference={"scheme": "tvdrk3", "n_steps": ref_steps},
                params={"E": E, "P": P, "mach": mach, "gas": gas, "c_mu": sol["c_mu"]})


def _case_ns_sod(over):
    E = int(_pop(over, "E", 80))
    P = int(_pop(over, "P", 5))
    t_end = float(_pop(over, "t_end", 0.2))
    shock = _shock_from(_pop(over, "shock", True), 0.4, 6.0)
    ref_steps = int(_pop(over, "reference_steps", 10000))
    sol = _solver_opts(over)
    _finish(over, "ns-sod")
    gas = GasParams(R=1.0, gamma=1.4, eta=0.0)
    model = euler_ns_model(gas)
    mesh = Mesh1D.uniform(0.0, 1.0, E, "frozen-ghost")
    ops = DgSpaceOps(mesh, P, Q_conv=2 * P)
    left = _euler_state(gas, 1.0, 0.0, 1.0)
    right = _euler_state(gas, 0.125, 0.0, 0.1)

    def init(x):
        # branch on element centers: the jump sits on an interface, where
        # the adjacent elements hold separate one-sided values
        x = np.asarray(x)
        mask = _left_of(x, 0.5)
        out = np.empty((3,) + x.shape)
        for c in range(3):
            out[c] = np.where(mask, left[c], right[c])
        return out

    ghosts = BoundaryGhosts.frozen(left, right)
    rhs = DgRhs(ops, model, ghosts=ghosts, shock=shock, **sol)
    u0 = project(ops, init)
    lam = float(np.max(model.max_wave_speed(u0.values)))
    shock_rec = None if shock is None else {
        "c_s": shock.c_s, "kappa_s": shock.kappa_s,
        "variable": shock.variable, "refresh": shock.refresh}
    return Case("ns-sod", ops, model, rhs, u0, t_end,
                error_kind="absolute", var_names=("rho", "mom", "energy"), lam_max=lam,
                reference={"scheme": "tvdrk3", "n_steps": ref_steps},
                params={"E": E, "P": P, "gas": gas, "shock": shock_rec,
                        "c_mu": sol["c_mu"]})


def _case_ns_shu_osher(over):
    E = int(_pop(over, "E", 160))
    P = int(_pop(over, "P", 5))
    t_end = float(_pop(over, "t_end", 1.8))
    shock = _shock_from(_pop(over, "shock", True), 0.4, 2.0)
    ref_steps = int(_pop(over, "reference_steps", 18000))
    sol = _solver_opts(over)
    _finish(over, "ns-shu-osher")
    gas = GasParams(R=1.0, gamma=1.4, eta=0.0)
    model = euler_ns_model(gas)
    mesh = Mesh1D.uniform(-5.0, 5.0, E, "frozen-ghost")
    ops = DgSpaceOps(mesh, P, Q_conv=2 * P)
    rho_l, v_l, p_l = 3.857143, 2.629369, 10.33333

    def init(x):
        x = np.asarray(x)
        mask = _left_of(x, -4.0)
        rho = np.where(mask, rho_l, 1.0 + 0.2 * np.sin(5.0 * x))
        v = np.where(mask, v_l, 0.0)
        p = np.where(mask, p_l, 1.0)
        return _euler_state(gas, rho, v, p)

    left = _euler_state(gas, rho_l, v_l, p_l)
    right = _euler_state(gas, 1.0 + 0.2 * math.sin(25.0), 0.0, 1.0)
    ghosts = BoundaryGhosts.frozen(left, right)
    rhs = DgRhs(ops, model, ghosts=ghosts, shock=shock, **sol)
    u0 = project(ops, init)
    lam = float(np.max(model.max_wave_speed(u0.values)))
    shock_rec = None if shock is None else {
        "c_s": shock.c_s, "kappa_s": shock.kappa_s,
        "variable": shock.variable, "refresh": shock.refresh}
    return Case("ns-shu-osher", ops, model, rhs, u0, t_end,
                error_kind="absolute", var_names=("rho", "mom", "energy"), lam_max=lam,
                cfl_report="midrun",
                reference={"scheme": "tvdrk3", "n_steps": ref_steps},
                params={"E": E, "P": P, "gas": gas, "shock": shock_rec,
                        "c_mu": sol["c_mu"]})


_BUILDERS = {
    "cd-wave": _case_cd_wave,
    "bu-wave": _case_bu_wave,
    "bu-front": _case_bu_front,
    "ns-acoustic": _case_ns_acoustic,
    "ns-sod": _case_ns_sod,
    "ns-shu-osher": _case_ns_shu_osher,
}

CASE_NAMES = tuple(sorted(_BUILDERS))


def build_case(name, **overrides):
    """Construct a benchmark case by name, applying keyword overrides."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ConfigError(
            f"unknown case {name!r}; available: {', '.join(CASE_NAMES)}") from None
    return builder(dict(overrides))
