"""Conservation-law model descriptors.

Each model bundles the pieces the discretization needs: conserved
variables, convective flux f_c and its Jacobian A_c, the diffusion
matrix A_d with f_d = A_d du/dx, an optional solution-independent
source, interface (numerical) fluxes, and wave speeds.

State arrays are component-first: shape (d, ...) with any trailing
layout; all evaluations broadcast over the trailing axes.

Available models:

* linear convection-diffusion (exact upwind interface flux),
* Burgers with viscosity and an optional manufactured source
  (Godunov interface flux for the convex flux u^2/2),
* compressible Euler / Navier-Stokes of a perfect gas
  (Roe interface flux with the Harten-Hyman sonic entropy fix).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NonphysicalStateError

__all__ = [
    "GasParams",
    "ModelDescriptor",
    "convdiff_model",
    "burgers_model",
    "euler_ns_model",
    "eigen_structure",
]


@dataclass(frozen=True)
class GasParams:
    """Perfect-gas parameters.

    R : specific gas constant (J/(kg K))
    gamma : heat-capacity ratio
    eta : dynamic viscosity (Pa s)
    Pr : Prandtl number
    """

    R: float
    gamma: float
    eta: float = 0.0
    Pr: float = 0.75

    def __post_init__(self):
        if self.gamma <= 1.0 or self.R <= 0.0 or self.eta < 0.0 or self.Pr <= 0.0:
            raise InvalidArgumentError(f"invalid gas parameters {self!r}")

    @property
    def c_p(self):
        return self.gamma * self.R / (self.gamma - 1.0)

    @property
    def c_v(self):
        return self.R / (self.gamma - 1.0)

    @property
    def lam_heat(self):
        """Heat conductivity eta * c_p / Pr."""
        return self.eta * self.c_p / self.Pr


class ModelDescriptor:
    """Base interface; concrete models fill in the evaluations."""

    name = "abstract"
    d = 0
    #: constant-coefficient A_c and A_d (enables the banded direct solver)
    constant_coefficients = False

    source = None  # callable(x, t) -> (d, ...) or None

    def flux_c(self, u):
        raise NotImplementedError

    def jac_c(self, u):
        """Convective Jacobian A_c(u), shape (d, d, ...)."""
        raise NotImplementedError

    def diff_matrix(self, u):
        """Diffusion matrix A_d(u), shape (d, d, ...)."""
        raise NotImplementedError

    def flux_d(self, u, du):
        """Diffusive flux f_d = A_d(u) du."""
        A = self.diff_matrix(u)
        return np.einsum("ck...,k...->c...", A, du)

    def max_wave_speed(self, u):
        """Largest convective eigenvalue magnitude, shape (...)."""
        raise NotImplementedError

    def interface_flux(self, ul, ur, n):
        """Numerical flux at a face with outward normal ``n`` of the minus side."""
        raise NotImplementedError

    def check_state(self, u, t=None):
        """Raise NonphysicalStateError for inadmissible states (no-op for scalars)."""


class _ConvDiff(ModelDescriptor):
    """Linear scalar convection-diffusion: f_c = v u, f_d = nu du/dx."""

    name = "convdiff"
    d = 1
    constant_coefficients = True

    def __init__(self, v, nu):
        if nu < 0.0:
            raise InvalidArgumentError(f"diffusivity nu={nu} must be >= 0")
        self.v = float(v)
        self.nu = float(nu)

    def flux_c(self, u):
        return self.v * u

    def jac_c(self, u):
        u = np.asarray(u)
        return np.full((1, 1) + u.shape[1:], self.v)

    def diff_matrix(self, u):
        u = np.asarray(u)
        return np.full((1, 1) + u.shape[1:], self.nu)

    def max_wave_speed(self, u):
        u = np.asarray(u)
        return np.full(u.shape[1:], abs(self.v))

    def interface_flux(self, ul, ur, n):
        if n == -1:
            return -self.interface_flux(ur, ul, 1)
        upwind = ul if self.v >= 0.0 else ur
        return self.v * np.asarray(upwind)


def convdiff_model(v, nu):
    """Linear convection-diffusion with constant velocity and diffusivity."""
    return _ConvDiff(v, nu)


class _Burgers(ModelDescriptor):
    """Viscous Burgers: f_c = u^2/2, A_c = u, f_d = nu du/dx."""

    name = "burgers"
    d = 1

    def __init__(self, nu, source=None):
        if nu < 0.0:
            raise InvalidArgumentError(f"diffusivity nu={nu} must be >= 0")
        self.nu = float(nu)
        self.source = source

    def flux_c(self, u):
        return 0.5 * u * u

    def jac_c(self, u):
        return np.asarray(u)[None, ...]

    def diff_matrix(self, u):
        u = np.asarray(u)
        return np.full((1, 1) + u.shape[1:], self.nu)

    def max_wave_speed(self, u):
        return np.abs(np.asarray(u)[0])

    def interface_flux(self, ul, ur, n):
        if n == -1:
            return -self.interface_flux(ur, ul, 1)
        ul = np.asarray(ul, dtype=float)
        ur = np.asarray(ur, dtype=float)
        fl, fr = 0.5 * ul * ul, 0.5 * ur * ur
        # Godunov flux of the convex flux u^2/2:
        # shock (ul > ur): max of the endpoint fluxes;
        # rarefaction: min over [ul, ur], which is 0 across the sonic point.
        shock = np.maximum(fl, fr)
        sonic = (ul < 0.0) & (ur > 0.0)
        raref = np.where(sonic, 0.0, np.minimum(fl, fr))
        return np.where(ul > ur, shock, raref)


def burgers_model(nu, source=None):
    """Viscous Burgers model; ``source(x, t)`` is a solution-independent forcing."""
    return _Burgers(nu, source)


class _EulerNS(ModelDescriptor):
    """Compressible Euler / Navier-Stokes of a perfect gas.

    Conserved state u = (rho, rho v, rho E). With eta = 0 the model
    degenerates to the Euler equations (A_d = 0).
    """

    name = "euler-ns"
    d = 3

    def __init__(self, gas: GasParams):
        self.gas = gas

    # -- thermodynamics ------------------------------------------------

    def _primitives(self, u, t=None):
        """(rho, v, e_int, p, a); raises on rho <= 0 or e_int <= 0."""
        u = np.asarray(u, dtype=float)
        rho = u[0]
        bad = ~(rho > 0.0)
        if np.any(bad):
            idx = np.unravel_index(np.argmax(bad), rho.shape) if rho.ndim else ()
            raise NonphysicalStateError("density", idx, float(np.min(rho)), t)
        v = u[1] / rho
        e_int = u[2] / rho - 0.5 * v * v
        bad = ~(e_int > 0.0)
        if np.any(bad):
            idx = np.unravel_index(np.argmax(bad), np.shape(e_int)) if np.ndim(e_int) else ()
            raise NonphysicalStateError("internal-energy", idx, float(np.min(e_int)), t)
        g = self.gas
        T = e_int / g.c_v
        p = rho * g.R * T
        a = np.sqrt(g.gamma * g.R * T)
        return rho, v, e_int, p, a

    def check_state(self, u, t=None):
        self._primitives(u, t)

    def sound_speed(self, u):
        return self._primitives(u)[4]

    # -- fluxes and matrices -------------------------------------------

    def flux_c(self, u):
        rho, v, _, p, _ = self._primitives(u)
        u = np.asarray(u, dtype=float)
        return np.stack([u[1], u[1] * v + p, v * (u[2] + p)])

    def jac_c(self, u):
        rho, v, _, p, _ = self._primitives(u)
        g = self.gas.gamma
        u = np.asarray(u, dtype=float)
        h_tot = u[2] / rho + p / rho
        z = np.zeros_like(v)
        A = np.empty((3, 3) + v.shape)
        A[0] = np.stack([z, np.ones_like(v), z])
        A[1] = np.stack([0.5 * (g - 3.0) * v * v, (3.0 - g) * v, np.full_like(v, g - 1.0)])
        A[2] = np.stack([
            0.5 * (g - 1.0) * v ** 3 - v * h_tot,
            h_tot - (g - 1.0) * v * v,
            g * v,
        ])
        return A

    def diff_matrix(self, u):
        rho, v, e_int, _, _ = self._primitives(u)
        g = self.gas
        nu = g.eta / rho
        kap = g.lam_heat / (rho * g.c_p)
        E = np.asarray(u, dtype=float)[2] / rho
        z = np.zeros_like(v)
        gk = g.gamma * kap
        A = np.empty((3, 3) + v.shape)
        A[0] = np.stack([z, z, z])
        A[1] = np.stack([-(4.0 / 3.0) * nu * v, (4.0 / 3.0) * nu + z, z])
        A[2] = np.stack([
            -((4.0 / 3.0) * nu - gk) * v * v - gk * E,
            ((4.0 / 3.0) * nu - gk) * v,
            gk + z,
        ])
        return A

    def max_wave_speed(self, u):
        _, v, _, _, a = self._primitives(u)
        return np.abs(v) + a

    # -- Roe interface flux --------------------------------------------

    def _roe_waves(self, ul, ur):
        """Roe-average eigensystem and wave strengths for a face batch."""
        g = self.gas.gamma
        rl, vl, _, pl, _ = self._primitives(ul)
        rr, vr, _, pr, _ = self._primitives(ur)
        hl = (np.asarray(ul)[2] + pl) / rl
        hr = (np.asarray(ur)[2] + pr) / rr
        sl, sr = np.sqrt(rl), np.sqrt(rr)
        vbar = (sl * vl + sr * vr) / (sl + sr)
        hbar = (sl * hl + sr * hr) / (sl + sr)
        a2 = (g - 1.0) * (hbar - 0.5 * vbar * vbar)
        abar = np.sqrt(a2)
        du = np.asarray(ur, dtype=float) - np.asarray(ul, dtype=float)
        alpha2 = (g - 1.0) / a2 * (du[0] * (hbar - vbar * vbar) + vbar * du[1] - du[2])
        alpha1 = 0.5 / abar * (du[0] * (vbar + abar) - du[1] - abar * alpha2)
        alpha3 = du[0] - alpha1 - alpha2
        lam = np.stack([vbar - abar, vbar, vbar + abar])
        alpha = np.stack([alpha1, alpha2, alpha3])
        rvec = np.stack([
            np.stack([np.ones_like(vbar), vbar - abar, hbar - vbar * abar]),
            np.stack([np.ones_like(vbar), vbar, 0.5 * vbar * vbar]),
            np.stack([np.ones_like(vbar), vbar + abar, hbar + vbar * abar]),
        ])
        return lam, alpha, rvec, vbar, abar

    def interface_flux(self, ul, ur, n):
        if n == -1:
            return -self.interface_flux(ur, ul, 1)
        ul = np.asarray(ul, dtype=float)
        ur = np.asarray(ur, dtype=float)
        lam, alpha, rvec, vbar, abar = self._roe_waves(ul, ur)
        # Harten-Hyman fix on the acoustic fields: where an eigenvalue
        # changes sign across the wave, replace |lam| by the spread.
        _, vl, _, _, al = self._primitives(ul)
        _, vr, _, _, ar = self._primitives(ur)
        lam_abs = np.abs(lam)
        for k, (ll, lr) in ((0, (vl - al, vr - ar)), (2, (vl + al, vr + ar))):
            eps = np.maximum(0.0, np.maximum(lam[k] - ll, lr - lam[k]))
            lam_abs[k] = np.where(lam_abs[k] < eps, eps, lam_abs[k])
        flux = 0.5 * (self.flux_c(ul) + self.flux_c(ur))
        flux -= 0.5 * np.einsum("k...,k...,kc...->c...", alpha, lam_abs, rvec)
        return flux


def euler_ns_model(gas: GasParams):
    """Euler / Navier-Stokes model for the given perfect-gas parameters."""
    return _EulerNS(gas)


def eigen_structure(u, gas: GasParams):
    """Eigendecomposition A_c = R diag(lam) L of the convective Jacobian.

    Returns (lam, R, L) for a single state ``u`` (shape (3,)), with
    eigenvalues sorted ascending: v - a, v, v + a.
    """
    model = _EulerNS(gas)
    u = np.asarray(u, dtype=float)
    rho, v, _, p, a = model._primitives(u)
    h_tot = (u[2] + p) / rho
    lam = np.array([v - a, v, v + a])
    R = np.array([
        [1.0, 1.0, 1.0],
        [v - a, v, v + a],
        [h_tot - v * a, 0.5 * v * v, h_tot + v * a],
    ])
    L = np.linalg.inv(R)
    return lam, R, L
