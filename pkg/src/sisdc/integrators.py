"""One-step integrators for additively split systems u' = f_ex(u) + f_im(u).

The implicit part is handled through frozen-coefficient operators: a
split right-hand side exposes

* ``f_ex(u, t)``: the explicit functional,
* ``f_im(alpha, t, theta)``: an operator frozen at the state ``alpha``
  with linearization interval ``theta``, carrying ``apply(beta)`` (the
  functional value) and ``solve(b, c)`` (solve beta = b + c*f_im(beta)),
* ``f_full(u, t)``: the unsplit right-hand side.

The two-way splitting satisfies f_full(u, t) = f_ex(u, t) +
f_im(u, t, 0).apply(u).

The semi-implicit schemes below freeze the operator at the step start
and default to theta = dt, which folds the leading linearization error
of the convective flux into the operator. Classical IMEX-RK tableaux
and the explicit three-stage TVD-RK are provided as references.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "si11_step",
    "si12_step",
    "si22_step",
    "imex_euler_step",
    "tvdrk3_step",
    "ImexTableau",
    "imex_rk_step",
    "ars443_step",
    "cb2_step",
    "get_stepper",
    "STEPPERS",
]


def si11_step(rhs, u, t, dt, theta=None):
    """One-stage first-order semi-implicit step.

    u_{n+1} = u_n + dt [ f_ex(u_n, t_n) + f_im(u_n; u_{n+1}, t_{n+1}) ].
    """
    th = dt if theta is None else theta
    part = rhs.f_im(u, t + dt, th)
    b = u + dt * rhs.f_ex(u, t)
    unew, _ = part.solve(b, dt)
    return unew


def si12_step(rhs, u, t, dt, theta=None):
    """Two-stage stiffly accurate variant of :func:`si11_step`.

    The first stage is an si11 step; the second re-evaluates the
    explicit part at the stage value and solves with the same frozen
    operator:

    u_{n+1} = u_n + dt [ f_ex(u^(1), t_{n+1}) + f_im(u_n; u_{n+1}, t_{n+1}) ].
    """
    th = dt if theta is None else theta
    part = rhs.f_im(u, t + dt, th)
    u1, _ = part.solve(u + dt * rhs.f_ex(u, t), dt)
    u2, _ = part.solve(u + dt * rhs.f_ex(u1, t + dt), dt)
    return u2


def si22_step(rhs, u, t, dt, theta=None):
    """Two-stage second-order semi-implicit step (midpoint based).

    Two half-interval solves against the operator frozen at u_n build a
    midpoint state; the update is a full-step evaluation of the unsplit
    right-hand side there:

    u^(1)  = u_n + dt/2 [ f_ex(u_n, t_n)       + f_im(u_n; u^(1), t_m) ]
    u^(2)  = u_n + dt/2 [ f_ex(u^(1), t_m)     + f_im(u_n; u^(2), t_m) ]
    u_{n+1} = u_n + dt f_full(u^(2), t_m),   t_m = t_n + dt/2.
    """
    th = dt if theta is None else theta
    half = 0.5 * dt
    tm = t + half
    part = rhs.f_im(u, tm, th)
    u1, _ = part.solve(u + half * rhs.f_ex(u, t), half)
    u2, _ = part.solve(u + half * rhs.f_ex(u1, tm), half)
    return u + dt * rhs.f_full(u2, tm)


def imex_euler_step(rhs, u, t, dt):
    """First-order IMEX Euler: :func:`si11_step` with theta = 0."""
    return si11_step(rhs, u, t, dt, theta=0.0)


def tvdrk3_step(rhs, u, t, dt):
    """Three-stage third-order TVD Runge-Kutta on the unsplit RHS."""
    u1 = u + dt * rhs.f_full(u, t)
    u2 = 0.75 * u + 0.25 * (u1 + dt * rhs.f_full(u1, t + dt))
    return u / 3.0 + (2.0 / 3.0) * (u2 + dt * rhs.f_full(u2, t + 0.5 * dt))


@dataclass(frozen=True)
class ImexTableau:
    """Paired explicit/implicit Butcher tableaux sharing abscissae c."""

    name: str
    c: np.ndarray
    a_ex: np.ndarray
    a_im: np.ndarray
    b_ex: np.ndarray
    b_im: np.ndarray

    def __post_init__(self):
        s = len(self.c)
        for mat, strict in ((self.a_ex, True), (self.a_im, False)):
            if mat.shape != (s, s):
                raise InvalidArgumentError(f"{self.name}: tableau shape mismatch")
            k = -1 if strict else 0
            if np.any(np.triu(mat, k + 1) != 0.0):
                raise InvalidArgumentError(f"{self.name}: tableau is not lower triangular")
        if self.b_ex.shape != (s,) or self.b_im.shape != (s,):
            raise InvalidArgumentError(f"{self.name}: weight shape mismatch")

    @property
    def stages(self):
        return len(self.c)


def _arr(rows):
    return np.array(rows, dtype=float)


# third-order, four implicit stages, L-stable DIRK part with gamma = 1/2
ARS443 = ImexTableau(
    name="ars443",
    c=_arr([0.0, 0.5, 2.0 / 3.0, 0.5, 1.0]),
    a_ex=_arr([
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.5, 0.0, 0.0, 0.0, 0.0],
        [11.0 / 18.0, 1.0 / 18.0, 0.0, 0.0, 0.0],
        [5.0 / 6.0, -5.0 / 6.0, 0.5, 0.0, 0.0],
        [0.25, 7.0 / 4.0, 0.75, -7.0 / 4.0, 0.0],
    ]),
    a_im=_arr([
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.0, 0.0, 0.0],
        [0.0, 1.0 / 6.0, 0.5, 0.0, 0.0],
        [0.0, -0.5, 0.5, 0.5, 0.0],
        [0.0, 1.5, -1.5, 0.5, 0.5],
    ]),
    b_ex=_arr([0.25, 7.0 / 4.0, 0.75, -7.0 / 4.0, 0.0]),
    b_im=_arr([0.0, 1.5, -1.5, 0.5, 0.5]),
)

# second-order, two implicit stages
CB2 = ImexTableau(
    name="cb2",
    c=_arr([0.0, 0.4, 1.0]),
    a_ex=_arr([
        [0.0, 0.0, 0.0],
        [0.4, 0.0, 0.0],
        [0.0, 1.0, 0.0],
    ]),
    a_im=_arr([
        [0.0, 0.0, 0.0],
        [0.0, 0.4, 0.0],
        [0.0, 5.0 / 6.0, 1.0 / 6.0],
    ]),
    b_ex=_arr([0.0, 5.0 / 6.0, 1.0 / 6.0]),
    b_im=_arr([0.0, 5.0 / 6.0, 1.0 / 6.0]),
)


def imex_rk_step(rhs, u, t, dt, tableau: ImexTableau):
    """One step of a paired-tableau IMEX Runge-Kutta scheme.

    Stage solves use the operator frozen at u_n with theta = 0 (plain
    implicit treatment, no convective linearization folded in).
    """
    s = tableau.stages
    fex = [None] * s
    fim = [None] * s
    for i in range(s):
        ti = t + tableau.c[i] * dt
        acc = u.copy()
        for j in range(i):
            if tableau.a_ex[i, j] != 0.0:
                acc = acc + (dt * tableau.a_ex[i, j]) * fex[j]
            if tableau.a_im[i, j] != 0.0:
                acc = acc + (dt * tableau.a_im[i, j]) * fim[j]
        part = rhs.f_im(u, ti, 0.0)
        if tableau.a_im[i, i] != 0.0:
            ui, _ = part.solve(acc, dt * tableau.a_im[i, i])
        else:
            ui = acc
        fim[i] = part.apply(ui)
        fex[i] = rhs.f_ex(ui, ti)
    out = u.copy()
    for j in range(s):
        if tableau.b_ex[j] != 0.0:
            out = out + (dt * tableau.b_ex[j]) * fex[j]
        if tableau.b_im[j] != 0.0:
            out = out + (dt * tableau.b_im[j]) * fim[j]
    return out


def ars443_step(rhs, u, t, dt):
    """Third-order IMEX-RK reference scheme (four implicit stages)."""
    return imex_rk_step(rhs, u, t, dt, ARS443)


def cb2_step(rhs, u, t, dt):
    """Second-order IMEX-RK reference scheme (two implicit stages)."""
    return imex_rk_step(rhs, u, t, dt, CB2)


STEPPERS = {
    "si1(1)": si11_step,
    "si1(2)": si12_step,
    "si2(2)": si22_step,
    "imex-euler": imex_euler_step,
    "tvdrk3": tvdrk3_step,
    "ars443": ars443_step,
    "cb2": cb2_step,
}


def get_stepper(name):
    """Look up a stepper by its scheme name."""
    try:
        return STEPPERS[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown scheme {name!r}; available: {', '.join(sorted(STEPPERS))}") from None
