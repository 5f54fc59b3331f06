"""Spectral deferred corrections (SDC) on right-Radau nodes.

One step advances through M Radau nodes tau_1 < ... < tau_M = 1 of the
unit interval (the left endpoint is not a node). A predictor chains
semi-implicit single-stage steps across the subintervals; each of the
K-1 correction sweeps then relaxes the node values toward the Radau
collocation solution, whose limit is the L-stable order-2M-1 fully
implicit Radau method.

Sweeps use the same frozen-coefficient splitting as the one-step
schemes: within the update for node m the implicit operator is frozen
at the new previous-node value u_{m-1}^{k+1}, with linearization
interval theta equal to the subinterval length (or zero for the plain
IMEX-Euler corrector). Right-hand sides may provide f_im_corrector to
widen what the correction operator's dissipative coefficient is sensed
from (see dg.DgRhs); the choice of operator shapes only the iteration,
not its fixed point. The correction subtracts the matching terms of
the previous iterate and adds the spectral quadrature of the full
right-hand side,

    S_m^k = dt * sum_i w_{i,m} f(u_i^k, t_i),

where w_{i,m} integrates the i-th Lagrange cardinal over the m-th
subinterval (tau_{m-1}, tau_m).

The module is dtype-agnostic: node values may be real or complex and
any array shape, which the linear stability analysis relies on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .collocation import collocation_set
from .errors import (
    InvalidArgumentError,
    NonConvergenceError,
    NonphysicalStateError,
    SolverError,
    SweepFailureError,
)

__all__ = [
    "SdcConfig",
    "sdc_step",
    "sdc_stepper",
    "sdc_node_iterates",
    "sdc_fixed_point",
    "TUNED_CONFIGS",
]


# tuned (s1, s2, K) per node count M: minimal sweep counts for which the
# scheme keeps the imaginary axis inside (or within round-off of) the
# stability region
TUNED_CONFIGS = {
    2: (1, 1, 3),
    3: (1, 2, 5),
    4: (1, 2, 8),
    5: (2, 2, 13),
    6: (2, 2, 15),
    7: (2, 2, 16),
    8: (2, 2, 17),
}


@dataclass(frozen=True)
class SdcConfig:
    """SDC scheme parameters.

    M: number of Radau nodes; K: total sweeps (predictor plus K-1
    corrections); s1/s2: stage counts of the predictor and corrector
    updates; corrector: 'si' (semi-implicit, theta = subinterval) or
    'euler' (theta = 0).
    """

    M: int
    K: int
    s1: int = 1
    s2: int = 1
    corrector: str = "si"

    def __post_init__(self):
        if not (isinstance(self.M, int) and self.M >= 1):
            raise InvalidArgumentError(f"node count M={self.M} must be a positive integer")
        if not (isinstance(self.K, int) and self.K >= 1):
            raise InvalidArgumentError(f"sweep count K={self.K} must be a positive integer")
        if self.s1 not in (1, 2) or self.s2 not in (1, 2):
            raise InvalidArgumentError("stage counts s1, s2 must be 1 or 2")
        if self.corrector not in ("si", "euler"):
            raise InvalidArgumentError(f"unknown corrector {self.corrector!r}")

    @classmethod
    def tuned(cls, M):
        """Tuned semi-implicit configuration SDC-SI(s1,s2)_M^K."""
        try:
            s1, s2, K = TUNED_CONFIGS[M]
        except KeyError:
            raise InvalidArgumentError(
                f"no tuned configuration for M={M}; have M in {sorted(TUNED_CONFIGS)}") from None
        return cls(M=M, K=K, s1=s1, s2=s2, corrector="si")

    @classmethod
    def euler(cls, M):
        """IMEX-Euler sweeps, K = 2M-1 (enough for the formal order)."""
        return cls(M=M, K=2 * M - 1, s1=1, s2=1, corrector="euler")

    @property
    def label(self):
        if self.corrector == "euler":
            return f"sdc-eu_{self.M}^{self.K}"
        return f"sdc-si({self.s1},{self.s2})_{self.M}^{self.K}"

    _LABEL = re.compile(
        r"^sdc-si\((\d+),(\d+)\)_(\d+)\^(\d+)$|^sdc-eu_(\d+)\^(\d+)$"
        r"|^sdc-si_(\d+)$|^sdc-eu_(\d+)$")

    @classmethod
    def parse(cls, name):
        """Configuration from a label string, or None if it is not one.

        Accepts the full forms ``sdc-si(s1,s2)_M^K`` / ``sdc-eu_M^K`` and
        the short forms ``sdc-si_M`` (tuned stage and sweep counts) /
        ``sdc-eu_M`` (K = 2M-1).
        """
        m = cls._LABEL.match(name)
        if m is None:
            return None
        g = m.groups()
        if g[0] is not None:
            return cls(M=int(g[2]), K=int(g[3]), s1=int(g[0]), s2=int(g[1]))
        if g[4] is not None:
            return cls(M=int(g[4]), K=int(g[5]), s1=1, s2=1, corrector="euler")
        if g[6] is not None:
            return cls.tuned(int(g[6]))
        return cls.euler(int(g[7]))


@lru_cache(maxsize=None)
def _cset(M):
    return collocation_set(M)


def _predict(rhs, u0, t, dt, cset, s1, th_scale, sweep=0):
    """Chain s1-stage semi-implicit steps across the subintervals.

    Returns node lists (u, F, fex, fim) indexed 0..M; F[m] is the full
    RHS at node m, fex[m] the explicit part, fim[m] the implicit-part
    value the node-m update equation used.
    """
    dts = dt * cset.dtau
    times = t + dt * cset.tau
    u = [u0]
    fex = [rhs.f_ex(u0, t)]
    F = [None]
    fim = [None]
    for m in range(1, cset.M + 1):
        dtm = dts[m - 1]
        tm = times[m - 1]
        try:
            part = rhs.f_im(u[m - 1], tm, th_scale * dtm)
            um, _ = part.solve(u[m - 1] + dtm * fex[m - 1], dtm)
            if s1 == 2:
                um, _ = part.solve(u[m - 1] + dtm * rhs.f_ex(um, tm), dtm)
            fim.append(part.apply(um))
            fex.append(rhs.f_ex(um, tm))
            F.append(rhs.f_full(um, tm))
        except (SolverError, NonphysicalStateError) as exc:
            raise SweepFailureError(sweep, m, exc) from exc
        u.append(um)
    return u, F, fex, fim


def _quadrature(dt, w, F):
    """Subinterval quadrature sums S[m], m = 1..M, of the stored full RHS."""
    M = w.shape[0]
    return [dt * sum(w[i, m] * F[i + 1] for i in range(M)) for m in range(M)]


def _correct(rhs, state, t, dt, cset, s2, th_scale, sweep):
    """One correction sweep; takes and returns node lists as in _predict.

    The node-update operator comes from rhs.f_im_corrector when the RHS
    provides it (it may then sense stiffness from the old node iterate
    as well); the frozen-coefficient state is u_{m-1}^{k+1} either way.
    """
    u_old, F_old, fex_old, fim_old = state
    S = _quadrature(dt, cset.w, F_old)
    dts = dt * cset.dtau
    times = t + dt * cset.tau
    f_im_corr = getattr(rhs, "f_im_corrector", None)
    u = [u_old[0]]
    fex = [fex_old[0]]
    F = [None]
    fim = [None]
    for m in range(1, cset.M + 1):
        dtm = dts[m - 1]
        tm = times[m - 1]
        try:
            if f_im_corr is None:
                part = rhs.f_im(u[m - 1], tm, th_scale * dtm)
            else:
                part = f_im_corr(u[m - 1], u_old[m], tm, th_scale * dtm)
            base = u[m - 1] + S[m - 1] - dtm * fim_old[m]
            um, _ = part.solve(base + dtm * (fex[m - 1] - fex_old[m - 1]), dtm)
            if s2 == 2:
                um, _ = part.solve(base + dtm * (rhs.f_ex(um, tm) - fex_old[m]), dtm)
            fim.append(part.apply(um))
            fex.append(rhs.f_ex(um, tm))
            F.append(rhs.f_full(um, tm))
        except (SolverError, NonphysicalStateError) as exc:
            raise SweepFailureError(sweep, m, exc) from exc
        u.append(um)
    return u, F, fex, fim


def sdc_step(rhs, u, t, dt, config: SdcConfig):
    """Advance one step of size dt; returns the value at the right endpoint.

    Raises :class:`SweepFailureError` when a node update fails
    (non-convergent stage solve or inadmissible state).
    """
    cset = _cset(config.M)
    th_scale = 1.0 if config.corrector == "si" else 0.0
    state = _predict(rhs, u, t, dt, cset, config.s1, th_scale)
    for k in range(1, config.K):
        state = _correct(rhs, state, t, dt, cset, config.s2, th_scale, sweep=k)
    return state[0][cset.M]


def sdc_node_iterates(rhs, u, t, dt, config: SdcConfig):
    """Like :func:`sdc_step` but returns all node values u_1..u_M."""
    cset = _cset(config.M)
    th_scale = 1.0 if config.corrector == "si" else 0.0
    state = _predict(rhs, u, t, dt, cset, config.s1, th_scale)
    for k in range(1, config.K):
        state = _correct(rhs, state, t, dt, cset, config.s2, th_scale, sweep=k)
    return state[0][1:]


def sdc_fixed_point(rhs, u, t, dt, M, tol=1e-13, max_sweeps=400, s1=1, s2=1,
                    corrector="si"):
    """Sweep until the node values stop changing: the collocation solution.

    Convergence is measured as the largest absolute node update between
    consecutive sweeps. Returns (node values u_1..u_M, sweeps used).
    """
    cset = _cset(M)
    th_scale = 1.0 if corrector == "si" else 0.0
    state = _predict(rhs, u, t, dt, cset, s1, th_scale)
    for k in range(1, max_sweeps + 1):
        new = _correct(rhs, state, t, dt, cset, s2, th_scale, sweep=k)
        delta = max(float(np.max(np.abs(np.asarray(new[0][m]) - np.asarray(state[0][m]))))
                    for m in range(1, M + 1))
        state = new
        if delta < tol:
            return state[0][1:], k
    raise NonConvergenceError(
        f"node values still moving by {delta:.3e} after {max_sweeps} sweeps", None)


def sdc_stepper(config: SdcConfig):
    """Bind a configuration into the common stepper signature."""

    def step(rhs, u, t, dt):
        return sdc_step(rhs, u, t, dt, config)

    step.__name__ = f"sdc_step_{config.label}"
    return step
