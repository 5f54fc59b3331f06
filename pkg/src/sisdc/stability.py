"""Linear stability analysis on the split scalar test problem.

The schemes are probed on u' = lambda u with lambda dt = z = z_r + i z_i,
split so that the explicit part carries the oscillation and the
implicit part the damping plus the linearization term:

    f_ex(u)        = i z_i u,
    f_im(u; theta) = (z_r - (theta/2) z_i^2) u.

One step of size dt = 1 from u = 1 then yields the amplification
factor R(z). Closed forms are provided for the one-step schemes; the
SDC factors are evaluated by running the actual sweep code on this
right-hand side (which vectorizes over arrays of z), with the dense
Radau collocation factor as the fixed-point reference.

The domain tools scan |R| on rectangles, trace neutral curves
(|R| = 1) with an edge-bisected marching-squares pass, and locate the
real-part stability margin z_r,max: the most negative z_r whose
vertical line still intersects the unstable set near the imaginary
axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collocation import collocation_set
from .errors import InconclusiveSearchError, InvalidArgumentError
from .sdc import SdcConfig, sdc_step
from .solvers import SolveReport

__all__ = [
    "r_si11",
    "r_si12",
    "r_si21",
    "r_si22",
    "r_imex_euler",
    "DahlquistSplitRhs",
    "r_numeric",
    "r_sdc",
    "r_collocation",
    "sdc_collocation_gap",
    "StabilityGrid",
    "scan_domain",
    "extract_neutral",
    "ZrMaxResult",
    "find_zr_max",
    "amplification_for",
    "write_grid_csv",
    "write_neutral_csv",
]


# ----------------------------------------------------------------------
# closed-form amplification factors
# ----------------------------------------------------------------------

def r_si11(z):
    """Amplification of the one-stage semi-implicit scheme (theta = dt)."""
    z = np.asarray(z, dtype=complex)
    zr, zi = z.real, z.imag
    return (1.0 + 1j * zi) / (1.0 - zr + 0.5 * zi * zi)


def r_si12(z):
    """Amplification of the two-stage stiffly accurate variant."""
    z = np.asarray(z, dtype=complex)
    zr, zi = z.real, z.imag
    return (1.0 + 1j * zi * r_si11(z)) / (1.0 - zr + 0.5 * zi * zi)


def r_si21(z):
    """First stage factor of the midpoint scheme (half-interval step)."""
    z = np.asarray(z, dtype=complex)
    zr, zi = z.real, z.imag
    return (1.0 + 0.5j * zi) / (1.0 - 0.5 * zr + 0.25 * zi * zi)


def r_si22(z):
    """Amplification of the two-stage midpoint scheme."""
    z = np.asarray(z, dtype=complex)
    zr, zi = z.real, z.imag
    u2 = (1.0 + 0.5j * zi * r_si21(z)) / (1.0 - 0.5 * zr + 0.25 * zi * zi)
    return 1.0 + z * u2


def r_imex_euler(z):
    """Amplification of forward/backward Euler splitting (theta = 0)."""
    z = np.asarray(z, dtype=complex)
    zr, zi = z.real, z.imag
    return (1.0 + 1j * zi) / (1.0 - zr)


# ----------------------------------------------------------------------
# the split test problem as a right-hand side
# ----------------------------------------------------------------------

class _DahlquistPart:
    """Implicit operator of the split test problem: multiplication by phi."""

    def __init__(self, phi):
        self.phi = phi

    def apply(self, beta):
        return self.phi * beta

    def solve(self, b, c):
        return b / (1.0 - c * self.phi), SolveReport(0, 0.0, True, method="direct")


class DahlquistSplitRhs:
    """Split right-hand side for an array of test values z (with dt = 1)."""

    def __init__(self, z):
        z = np.asarray(z, dtype=complex)
        self.z = z
        self.zi = z.imag

    def f_ex(self, u, t):
        return 1j * self.zi * u

    def f_im(self, alpha, t, theta):
        return _DahlquistPart(self.z.real - 0.5 * theta * self.zi * self.zi)

    def f_full(self, u, t):
        return self.z * u


def r_numeric(stepper, z, dt=1.0):
    """Amplification factor measured by running ``stepper`` one step."""
    z = np.asarray(z, dtype=complex)
    rhs = DahlquistSplitRhs(z / dt)
    u0 = np.ones_like(z)
    return stepper(rhs, u0, 0.0, dt)


def r_sdc(z, config: SdcConfig):
    """Amplification factor of an SDC configuration (vectorized over z)."""
    z = np.asarray(z, dtype=complex)
    rhs = DahlquistSplitRhs(z)
    u0 = np.ones_like(z)
    return sdc_step(rhs, u0, 0.0, 1.0, config)


def r_collocation(z, M):
    """Radau collocation amplification factor: the SDC fixed point."""
    z = np.asarray(z, dtype=complex)
    a = collocation_set(M).a
    A = np.eye(M) - z[..., None, None] * a
    rhs = np.ones(z.shape + (M,), dtype=complex)
    return np.linalg.solve(A, rhs[..., None])[..., M - 1, 0]


def sdc_collocation_gap(z, config: SdcConfig):
    """|R_sdc - R_collocation| at the given z values (convergence probe)."""
    return np.abs(r_sdc(z, config) - r_collocation(z, config.M))


# ----------------------------------------------------------------------
# domain scans
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityGrid:
    """Sampled amplification factors R on a z_r x z_i rectangle."""

    zr: np.ndarray
    zi: np.ndarray
    R: np.ndarray  # shape (len(zi), len(zr))

    @property
    def abs_R(self):
        return np.abs(self.R)


def scan_domain(fn, zr_range, zi_range, n_zr=201, n_zi=201):
    """Evaluate an amplification function on a rectangular grid."""
    zr = np.linspace(zr_range[0], zr_range[1], n_zr)
    zi = np.linspace(zi_range[0], zi_range[1], n_zi)
    Z = zr[None, :] + 1j * zi[:, None]
    return StabilityGrid(zr, zi, np.asarray(fn(Z)))


def _edge_bisect(fn, p0, p1, g0, g1, tol, max_iter=80):
    """Root of |R|-1 on the segment p0-p1 (complex endpoints, g of opposite sign)."""
    a, b = p0, p1
    ga, gb = g0, g1
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        gm = float(np.abs(fn(np.array([mid]))[0])) - 1.0
        if abs(gm) < tol:
            return mid
        if (gm > 0.0) == (ga > 0.0):
            a, ga = mid, gm
        else:
            b, gb = mid, gm
    return 0.5 * (a + b)


def extract_neutral(fn, grid: StabilityGrid, tol=1e-6):
    """Trace the neutral curves |R| = 1 through a scanned grid.

    Sign changes of |R|-1 along cell edges are refined by bisection to
    ``tol``; the crossing points are then chained cell by cell into
    ordered polylines. Returns a list of (n, 2) arrays of (z_r, z_i).
    """
    G = grid.abs_R - 1.0
    zr, zi = grid.zr, grid.zi
    ni, nr = G.shape
    pos = G > 0.0

    # crossing points keyed by edge id: ('h', r, c) joins (r,c)-(r,c+1),
    # ('v', r, c) joins (r,c)-(r+1,c)
    points = {}

    def crossing(kind, r, c):
        key = (kind, r, c)
        if key in points:
            return key
        if kind == "h":
            p0 = zr[c] + 1j * zi[r]
            p1 = zr[c + 1] + 1j * zi[r]
            g0, g1 = G[r, c], G[r, c + 1]
        else:
            p0 = zr[c] + 1j * zi[r]
            p1 = zr[c] + 1j * zi[r + 1]
            g0, g1 = G[r, c], G[r + 1, c]
        points[key] = _edge_bisect(fn, p0, p1, g0, g1, tol)
        return key

    segments = []
    for r in range(ni - 1):
        for c in range(nr - 1):
            edges = []
            if pos[r, c] != pos[r, c + 1]:
                edges.append(("h", r, c))
            if pos[r, c + 1] != pos[r + 1, c + 1]:
                edges.append(("v", r, c + 1))
            if pos[r + 1, c] != pos[r + 1, c + 1]:
                edges.append(("h", r + 1, c))
            if pos[r, c] != pos[r + 1, c]:
                edges.append(("v", r, c))
            if not edges:
                continue
            keys = [crossing(*e) for e in edges]
            if len(keys) == 2:
                segments.append((keys[0], keys[1]))
            elif len(keys) == 4:
                # saddle cell: split by the sign at the cell center
                zc = 0.5 * (zr[c] + zr[c + 1]) + 0.5j * (zi[r] + zi[r + 1])
                gc = float(np.abs(fn(np.array([zc]))[0])) - 1.0
                # edges listed bottom, right, top, left
                if (gc > 0.0) == bool(pos[r, c]):
                    segments.append((keys[0], keys[1]))
                    segments.append((keys[2], keys[3]))
                else:
                    segments.append((keys[3], keys[0]))
                    segments.append((keys[1], keys[2]))

    # chain segments into polylines
    adj = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    unused = set()
    for a, b in segments:
        unused.add((a, b))
        unused.add((b, a))

    def take(a, b):
        unused.discard((a, b))
        unused.discard((b, a))

    curves = []
    # open chains first (endpoints with odd degree), then closed loops
    order = sorted(adj, key=lambda k: (len(adj[k]) % 2 == 0, k))
    for start in order:
        while any((start, nb) in unused for nb in adj[start]):
            chain = [start]
            cur = start
            while True:
                nxt = next((nb for nb in adj[cur] if (cur, nb) in unused), None)
                if nxt is None:
                    break
                take(cur, nxt)
                chain.append(nxt)
                cur = nxt
            if len(chain) > 1:
                pts = np.array([[points[k].real, points[k].imag] for k in chain])
                curves.append(pts)
    return curves


# ----------------------------------------------------------------------
# real-part stability margin
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ZrMaxResult:
    """Most negative unstable z_r and the z_i where |R| peaks there."""

    zr_max: float
    zi_peak: float
    sup_abs_R: float


def _sup_abs(fn, zr, zi_max, rounds=6, n_refine=400, step=1e-3, asymptotic_zi=1e6):
    """sup over z_i in [0, zi_max] of |R(zr + i z_i)|, adaptively refined.

    The base grid resolves ``step`` uniformly plus a logarithmic band
    near the real axis; the maximum is then polished by bracketing
    refinement. ``asymptotic_zi`` adds a single far-field probe standing
    in for the z_i -> infinity limit.
    """
    n_base = max(4001, min(int(zi_max / step) + 1, 400001))
    samples = [np.linspace(0.0, zi_max, n_base)]
    if zi_max > 1e-4:
        samples.append(np.logspace(-4.0, np.log10(zi_max), 2000))
    zi = np.unique(np.concatenate(samples))
    vals = np.abs(fn(zr + 1j * zi))
    k = int(np.argmax(vals))
    best, best_zi = float(vals[k]), float(zi[k])
    lo = zi[max(k - 1, 0)]
    hi = zi[min(k + 1, zi.size - 1)]
    for _ in range(rounds):
        zi_f = np.linspace(lo, hi, n_refine)
        vals = np.abs(fn(zr + 1j * zi_f))
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, best_zi = float(vals[k]), float(zi_f[k])
        lo = zi_f[max(k - 1, 0)]
        hi = zi_f[min(k + 1, zi_f.size - 1)]
    if asymptotic_zi is not None and asymptotic_zi > zi_max:
        far = float(np.abs(fn(np.array([zr + 1j * asymptotic_zi]))[0]))
        if far > best:
            best, best_zi = far, float(asymptotic_zi)
    return best, best_zi


def find_zr_max(fn, zi_max, zr_floor=-1e-2, excess_tol=1e-12, bisect_tol=1e-9):
    """Locate the real-part stability margin of an amplification function.

    A vertical line Re z = z_r counts as unstable when
    sup_{0 <= z_i <= zi_max} |R| exceeds 1 + ``excess_tol`` (the sup
    includes a far-field probe at z_i = 1e6). When the imaginary axis
    itself is stable the margin is 0. Otherwise the margin is bisected
    between ``zr_floor`` (which must be stable, else
    :class:`InconclusiveSearchError`) and 0; ``bisect_tol`` is the
    relative width at which the bisection stops.

    ``fn`` may be anything :func:`amplification_for` accepts.
    """
    fn = amplification_for(fn)
    sup0, zi0 = _sup_abs(fn, 0.0, zi_max)
    if sup0 <= 1.0 + excess_tol:
        return ZrMaxResult(0.0, zi0, sup0)
    supf, _ = _sup_abs(fn, zr_floor, zi_max)
    if supf > 1.0 + excess_tol:
        raise InconclusiveSearchError(
            f"line Re z = {zr_floor} is still unstable (sup |R| = {supf:.12f}); "
            "widen the bracket", bracket=(zr_floor, 0.0))
    lo, hi = zr_floor, 0.0  # lo stable, hi unstable
    peak_zi, peak_sup = zi0, sup0
    while (hi - lo) > bisect_tol * max(abs(lo), abs(hi), 1e-300):
        mid = 0.5 * (lo + hi)
        sup, ziq = _sup_abs(fn, mid, zi_max)
        if sup > 1.0 + excess_tol:
            hi, peak_zi, peak_sup = mid, ziq, sup
        else:
            lo = mid
    return ZrMaxResult(hi, peak_zi, peak_sup)


# ----------------------------------------------------------------------
# lookup and output
# ----------------------------------------------------------------------

_ANALYTIC = {
    "si1(1)": r_si11,
    "si1(2)": r_si12,
    "si2(1)": r_si21,
    "si2(2)": r_si22,
    "imex-euler": r_imex_euler,
}


def amplification_for(scheme):
    """Amplification function for a scheme name, SDC label, or configuration."""
    if isinstance(scheme, SdcConfig):
        cfg = scheme
        return lambda z: r_sdc(z, cfg)
    if callable(scheme):
        return scheme
    if isinstance(scheme, str):
        if scheme in _ANALYTIC:
            return _ANALYTIC[scheme]
        cfg = SdcConfig.parse(scheme)
        if cfg is not None:
            return lambda z: r_sdc(z, cfg)
    raise InvalidArgumentError(
        f"unknown scheme {scheme!r}; analytic factors exist for "
        f"{', '.join(sorted(_ANALYTIC))}; SDC labels like 'sdc-si(1,1)_2^3' "
        "or an SdcConfig run the sweeps numerically")


def write_grid_csv(path, grid: StabilityGrid):
    """Write a scanned grid as rows of z_r, z_i, abs_R."""
    A = grid.abs_R
    with open(path, "w") as fh:
        fh.write("z_r,z_i,abs_R\n")
        for r, b in enumerate(grid.zi):
            for c, a in enumerate(grid.zr):
                fh.write(f"{a:.17e},{b:.17e},{A[r, c]:.17e}\n")


def write_neutral_csv(path, curves):
    """Write neutral curves as rows of curve index, z_r, z_i."""
    with open(path, "w") as fh:
        fh.write("curve,z_r,z_i\n")
        for i, pts in enumerate(curves):
            for a, b in pts:
                fh.write(f"{i},{a:.17e},{b:.17e}\n")
