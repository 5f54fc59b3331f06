"""Benchmark driver: time loops, error norms, convergence and CFL studies.

Time-step selection follows an exact-hit policy: given a target CFL
number or step size, the step count is rounded up and dt = t_end / N_t
recomputed, so runs always land on t_end exactly (avoiding spurious
phase-error floors in convergence studies).

Errors are measured in over-integrated (Q = 2P) elementwise GLL norms,
per component, both absolute and relative; each case states which kind
its headline numbers use.

Cases without an exact solution compare against a stored fine-grid
explicit reference run, cached on disk keyed by a hash of every
parameter that enters it (directory: $SISDC_CACHE or
~/.cache/sisdc/refs).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cases import Case, build_case, compute_cfl, steps_for_cfl
from .errors import ConfigError, NonphysicalStateError, SisdcError, StepFailureError
from .integrators import STEPPERS
from .models import GasParams
from .sdc import SdcConfig, sdc_stepper

__all__ = [
    "resolve_scheme",
    "ErrorReport",
    "RunResult",
    "run_case",
    "get_reference",
    "run_sweep",
    "EocRow",
    "run_eoc",
    "eoc_rates",
    "write_runs_csv",
    "write_eoc_csv",
]


def resolve_scheme(spec):
    """Turn a scheme spec (name, SDC label, SdcConfig, or dict) into (label, stepper)."""
    if isinstance(spec, str):
        if spec in STEPPERS:
            return spec, STEPPERS[spec]
        cfg = SdcConfig.parse(spec)
        if cfg is not None:
            return cfg.label, sdc_stepper(cfg)
        raise ConfigError(
            f"unknown scheme {spec!r}; named steppers: {', '.join(sorted(STEPPERS))}, "
            "or an SDC label like 'sdc-si(1,2)_3^5', 'sdc-si_3', 'sdc-eu_2^3'")
    if isinstance(spec, SdcConfig):
        return spec.label, sdc_stepper(spec)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"scheme spec must be a name or a mapping with 'kind', got {spec!r}")
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        if kind in STEPPERS:
            if spec:
                raise ConfigError(f"scheme {kind!r} takes no parameters, got {spec}")
            return kind, STEPPERS[kind]
        if kind == "sdc-si":
            cfg = SdcConfig.tuned(int(spec.pop("M")))
        elif kind == "sdc-eu":
            cfg = SdcConfig.euler(int(spec.pop("M")))
        elif kind == "sdc":
            cfg = SdcConfig(M=int(spec.pop("M")), K=int(spec.pop("K")),
                            s1=int(spec.pop("s1", 1)), s2=int(spec.pop("s2", 1)),
                            corrector=spec.pop("corrector", "si"))
        else:
            raise ConfigError(f"unknown scheme kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"scheme {kind!r} is missing parameter {exc}") from None
    if spec:
        raise ConfigError(f"unknown scheme parameter(s): {', '.join(sorted(spec))}")
    return cfg.label, sdc_stepper(cfg)


@dataclass(frozen=True)
class ErrorReport:
    """Per-component L2/Linf errors in over-integrated GLL norms."""

    var_names: tuple
    l2_abs: np.ndarray
    l2_rel: np.ndarray
    linf_abs: np.ndarray
    kind: str      # which of the two the case headlines
    Q: int

    def headline(self, component=0):
        arr = self.l2_rel if self.kind == "relative" else self.l2_abs
        return float(arr[component])


def compute_errors(case: Case, values, t, reference_values=None):
    """Errors of nodal values against the exact or reference solution."""
    ops = case.ops
    Q = 2 * ops.P
    Bq, xq, wq = ops.quadrature_grid(Q)
    num_q = values @ Bq.T
    if reference_values is not None:
        ref_q = np.asarray(reference_values) @ Bq.T
    elif case.exact is not None:
        ref_q = np.asarray(case.exact(xq, t), dtype=float)
        if ref_q.shape == xq.shape:
            ref_q = ref_q[None]
    else:
        raise ConfigError(f"case {case.name} has neither exact nor reference values")
    diff = num_q - ref_q
    # marginally unstable runs reach ~1e160 without tripping the finite
    # check; the squared norms then overflow to inf, which is the right
    # answer, so suppress the warning rather than the value
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        l2_abs = np.sqrt(np.einsum("eq,ceq->c", wq, diff * diff))
        denom = np.sqrt(np.einsum("eq,ceq->c", wq, ref_q * ref_q))
        l2_rel = np.where(denom > 0.0, l2_abs / denom, np.inf)
    linf = np.max(np.abs(diff), axis=(1, 2))
    return ErrorReport(case.var_names, l2_abs, l2_rel, linf, case.error_kind, Q)


@dataclass
class RunResult:
    """Outcome of one benchmark run."""

    case: str
    scheme: str
    status: str                  # 'ok' | 'failed' | 'nonfinite'
    n_steps: int
    steps_done: int
    dt: float
    t_reached: float
    cfl_nominal: float = math.nan
    cfl_measured: float = math.nan
    errors: ErrorReport = None
    solve_count: int = 0
    iteration_total: int = 0
    wall_time: float = 0.0
    failure: str = None
    final_values: np.ndarray = field(default=None, repr=False)

    @property
    def ok(self):
        return self.status == "ok"

    def row(self):
        out = {
            "case": self.case,
            "scheme": self.scheme,
            "status": self.status,
            "n_steps": self.n_steps,
            "steps_done": self.steps_done,
            "dt": self.dt,
            "t_reached": self.t_reached,
            "cfl_nominal": self.cfl_nominal,
            "cfl_measured": self.cfl_measured,
            "solve_count": self.solve_count,
            "iteration_total": self.iteration_total,
            "wall_time": self.wall_time,
            "error_norm": "",
            "failure": self.failure or "",
        }
        if self.errors is not None:
            out["error_norm"] = self.errors.kind
            for i, name in enumerate(self.errors.var_names):
                out[f"l2_{name}"] = float((self.errors.l2_rel if self.errors.kind == "relative"
                                           else self.errors.l2_abs)[i])
        return out


def _steps_from(case: Case, cfl, dt, n_steps):
    given = [x is not None for x in (cfl, dt, n_steps)]
    if sum(given) != 1:
        raise ConfigError("specify exactly one of cfl, dt, n_steps")
    if cfl is not None:
        n, step = steps_for_cfl(case.ops, case.lam_max, cfl, case.t_end)
    elif dt is not None:
        n = max(1, int(math.ceil(case.t_end / dt - 1e-12)))
        step = case.t_end / n
    else:
        n = int(n_steps)
        if n < 1:
            raise ConfigError(f"n_steps={n_steps} must be >= 1")
        step = case.t_end / n
    return n, step


def run_case(case: Case, scheme, cfl=None, dt=None, n_steps=None,
             compare=True, keep_final=True):
    """Advance a case to t_end and measure errors.

    Failures (non-convergent solves, inadmissible states, overflow to
    non-finite values) are captured in the result rather than raised.
    """
    label, stepper = resolve_scheme(scheme)
    n, step = _steps_from(case, cfl, dt, n_steps)
    rhs = case.rhs
    solve0, iter0 = rhs.solve_count, rhs.iteration_total
    u = case.u0.values.copy()
    t = 0.0
    status, failure = "ok", None
    lam_report = case.lam_max
    t0 = time.perf_counter()
    done = 0
    # overflow of a diverging run is reported through the isfinite check,
    # not as a numpy warning mid-step
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(n):
            try:
                rhs.begin_step(u)
                u = stepper(rhs, u, t, step)
            except (StepFailureError, NonphysicalStateError, SisdcError) as exc:
                status, failure = "failed", f"step {k + 1}: {exc}"
                break
            if not np.all(np.isfinite(u)):
                status, failure = "nonfinite", f"step {k + 1}: non-finite values"
                done = k + 1
                break
            done = k + 1
            t = (k + 1) * step
            if case.cfl_report == "midrun" and done == max(1, n // 2):
                lam_report = float(np.max(case.model.max_wave_speed(u)))
    wall = time.perf_counter() - t0
    result = RunResult(
        case=case.name, scheme=label, status=status, n_steps=n, steps_done=done,
        dt=step, t_reached=t,
        cfl_nominal=cfl if cfl is not None else compute_cfl(case.ops, step, case.lam_max),
        cfl_measured=compute_cfl(case.ops, step, lam_report),
        solve_count=rhs.solve_count - solve0,
        iteration_total=rhs.iteration_total - iter0,
        wall_time=wall, failure=failure,
        final_values=u if keep_final else None,
    )
    if status == "ok" and compare:
        ref = None
        if case.exact is None:
            ref = get_reference(case)
        try:
            result.errors = compute_errors(case, u, t, reference_values=ref)
        except SisdcError as exc:
            result.failure = f"error evaluation: {exc}"
    return result


# ----------------------------------------------------------------------
# reference solutions
# ----------------------------------------------------------------------

def _canon(obj):
    if isinstance(obj, GasParams):
        return {"R": obj.R, "gamma": obj.gamma, "eta": obj.eta, "Pr": obj.Pr}
    if isinstance(obj, dict):
        return {k: _canon(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _cache_dir():
    root = os.environ.get("SISDC_CACHE")
    if root:
        return Path(root)
    return Path.home() / ".cache" / "sisdc" / "refs"


def reference_key(case: Case):
    payload = {
        "case": case.name,
        "t_end": case.t_end,
        "params": _canon(case.params),
        "reference": _canon(case.reference),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


def get_reference(case: Case, force=False):
    """Nodal reference values at t_end (computed once, cached on disk)."""
    if case.reference is None:
        raise ConfigError(f"case {case.name} defines no reference recipe")
    key = reference_key(case)
    path = _cache_dir() / f"{case.name}-{key}.npz"
    if path.exists() and not force:
        with np.load(path) as data:
            return data["u"]
    scheme = case.reference["scheme"]
    n_steps = int(case.reference["n_steps"])
    # fresh case so the run under test keeps its own counters/caches
    twin = build_case(case.name, **{k: v for k, v in case.params.items() if k != "gas"},
                      t_end=case.t_end)
    res = run_case(twin, scheme, n_steps=n_steps, compare=False)
    if not res.ok:
        raise StepFailureError(
            f"reference run for {case.name} failed: {res.failure}")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, u=res.final_values, t_end=case.t_end, scheme=scheme, n_steps=n_steps)
    return res.final_values


# ----------------------------------------------------------------------
# studies
# ----------------------------------------------------------------------

def run_sweep(case_name, overrides, schemes, cfls):
    """Run a grid of schemes x CFL numbers; returns a list of RunResult."""
    results = []
    for spec in schemes:
        for cfl in cfls:
            case = build_case(case_name, **overrides)
            results.append(run_case(case, spec, cfl=float(cfl), keep_final=False))
    return results


@dataclass(frozen=True)
class EocRow:
    cfl: float
    n_steps: int
    dt: float
    error: float
    rate: float  # NaN on the first row


def eoc_rates(dts, errors):
    """Observed orders log(e_c/e_f) / log(dt_c/dt_f) between levels."""
    rates = [math.nan]
    for i in range(1, len(dts)):
        if errors[i] > 0.0 and errors[i - 1] > 0.0:
            rates.append(math.log(errors[i - 1] / errors[i]) / math.log(dts[i - 1] / dts[i]))
        else:
            rates.append(math.nan)
    return rates


def run_eoc(case_name, overrides, scheme, cfl_start=2.0, halvings=4, component=0):
    """Temporal convergence study: halve the CFL number repeatedly.

    Returns (rows, results). The error is the case's headline norm of
    the selected component.
    """
    rows, results = [], []
    dts, errs, metas = [], [], []
    for j in range(halvings + 1):
        cfl = cfl_start / (2.0 ** j)
        case = build_case(case_name, **overrides)
        res = run_case(case, scheme, cfl=cfl, keep_final=False)
        results.append(res)
        if not res.ok or res.errors is None:
            raise StepFailureError(
                f"convergence study run at CFL={cfl} failed: {res.failure}")
        dts.append(res.dt)
        errs.append(res.errors.headline(component))
        metas.append((cfl, res.n_steps))
    rates = eoc_rates(dts, errs)
    for (cfl, nst), dt_j, e_j, r_j in zip(metas, dts, errs, rates):
        rows.append(EocRow(cfl=cfl, n_steps=nst, dt=dt_j, error=e_j, rate=r_j))
    return rows, results


# ----------------------------------------------------------------------
# output
# ----------------------------------------------------------------------

def write_runs_csv(path, results):
    """One row per run; columns unioned across results."""
    rows = [r.row() for r in results]
    cols = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(col, "")) for col in cols) + "\n")
    return path


def _fmt(val):
    if isinstance(val, float):
        return f"{val:.17e}"
    return str(val)


def write_eoc_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("cfl,n_steps,dt,error,rate\n")
        for r in rows:
            fh.write(f"{r.cfl:.17e},{r.n_steps},{r.dt:.17e},{r.error:.17e},{r.rate:.17e}\n")
    return path
