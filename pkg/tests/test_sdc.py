"""Deferred-correction sweeps: configuration, predictor chain, quadrature,
fixed point against dense collocation, sweep accounting, failure paths."""

import numpy as np
import pytest

from sisdc.collocation import collocation_set
from sisdc.errors import (
    InvalidArgumentError,
    NonConvergenceError,
    NonphysicalStateError,
    SweepFailureError,
)
from sisdc.sdc import (
    SdcConfig,
    TUNED_CONFIGS,
    _quadrature,
    sdc_fixed_point,
    sdc_node_iterates,
    sdc_step,
    sdc_stepper,
)
from sisdc.stability import DahlquistSplitRhs

ONE = 1.0 + 0.0j


# ------------------------------------------------------------ configuration


def test_tuned_table():
    assert TUNED_CONFIGS == {
        2: (1, 1, 3), 3: (1, 2, 5), 4: (1, 2, 8), 5: (2, 2, 13),
        6: (2, 2, 15), 7: (2, 2, 16), 8: (2, 2, 17)}


def test_tuned_config():
    c = SdcConfig.tuned(4)
    assert (c.M, c.s1, c.s2, c.K, c.corrector) == (4, 1, 2, 8, "si")


def test_euler_config_sweep_count():
    c = SdcConfig.euler(3)
    assert (c.M, c.s1, c.s2, c.K, c.corrector) == (3, 1, 1, 5, "euler")


def test_tuned_unknown_node_count():
    with pytest.raises(InvalidArgumentError):
        SdcConfig.tuned(9)


@pytest.mark.parametrize(
    "kwargs",
    [dict(M=0, K=3), dict(M=2, K=0), dict(M=2, K=3, s1=3),
     dict(M=2, K=3, s2=0), dict(M=2, K=3, corrector="rk")],
)
def test_config_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        SdcConfig(**kwargs)


def test_labels():
    assert SdcConfig.tuned(2).label == "sdc-si(1,1)_2^3"
    assert SdcConfig.tuned(6).label == "sdc-si(2,2)_6^15"
    assert SdcConfig.euler(2).label == "sdc-eu_2^3"
    assert SdcConfig(M=6, K=11, s1=2, s2=2).label == "sdc-si(2,2)_6^11"


def test_parse_roundtrips():
    for c in (SdcConfig.tuned(3), SdcConfig.euler(4),
              SdcConfig(M=6, K=11, s1=2, s2=2)):
        assert SdcConfig.parse(c.label) == c


def test_parse_short_forms():
    assert SdcConfig.parse("sdc-si_4") == SdcConfig.tuned(4)
    assert SdcConfig.parse("sdc-eu_3") == SdcConfig.euler(3)


def test_parse_rejects_other_names():
    assert SdcConfig.parse("tvdrk3") is None
    assert SdcConfig.parse("si1(1)") is None


def test_parse_short_form_without_tuning_data():
    with pytest.raises(InvalidArgumentError):
        SdcConfig.parse("sdc-si_9")


# ------------------------------------------------------------ predictor


def test_zero_rhs_keeps_node_values():
    rhs = DahlquistSplitRhs(0.0)
    nodes = sdc_node_iterates(rhs, ONE, 0.0, 1.0, SdcConfig(M=3, K=1))
    assert [complex(v) for v in nodes] == pytest.approx([1.0, 1.0, 1.0], abs=1e-15)


def test_predictor_hand_chain_m2():
    # single-stage semi-implicit chain: each subinterval multiplies by
    # (1 + i zi h) / (1 - h (zr - h zi^2 / 2)), h the subinterval length
    z = -0.8 + 1.3j
    rhs = DahlquistSplitRhs(z)
    cset = collocation_set(2)
    want = ONE
    hand = []
    for h in cset.dtau:
        want = want * (1.0 + 1j * z.imag * h) / (1.0 - h * (z.real - 0.5 * h * z.imag**2))
        hand.append(want)
    got = sdc_node_iterates(rhs, ONE, 0.0, 1.0, SdcConfig(M=2, K=1))
    assert [complex(v) for v in got] == pytest.approx(hand, rel=1e-14)


def test_euler_predictor_hand_chain_m2():
    # theta = 0: plain IMEX factor (1 + i zi h) / (1 - h zr)
    z = -0.8 + 1.3j
    rhs = DahlquistSplitRhs(z)
    cset = collocation_set(2)
    want = ONE
    hand = []
    for h in cset.dtau:
        want = want * (1.0 + 1j * z.imag * h) / (1.0 - h * z.real)
        hand.append(want)
    got = sdc_node_iterates(rhs, ONE, 0.0, 1.0, SdcConfig(M=2, K=1, corrector="euler"))
    assert [complex(v) for v in got] == pytest.approx(hand, rel=1e-14)


# ------------------------------------------------------------ quadrature


def test_quadrature_of_constant():
    cset = collocation_set(4)
    F = [None] + [2.5] * 4
    S = _quadrature(0.7, cset.w, F)
    assert S == pytest.approx(2.5 * 0.7 * cset.dtau, rel=1e-13)


def test_quadrature_exact_for_low_degree():
    # M nodes integrate polynomials of degree M-1 exactly per subinterval
    cset = collocation_set(3)
    F = [None] + [t**2 for t in cset.tau]
    S = _quadrature(1.0, cset.w, F)
    edges = np.concatenate(([0.0], cset.tau))
    want = np.diff(edges**3) / 3.0
    assert S == pytest.approx(want, rel=1e-13)


def test_quadrature_of_zero():
    cset = collocation_set(2)
    S = _quadrature(1.0, cset.w, [None, 0.0, 0.0])
    assert S == pytest.approx([0.0, 0.0], abs=0.0)


# ----------------------------------------------- fixed point = collocation


@pytest.mark.parametrize("M", [1, 2, 3, 4])
@pytest.mark.parametrize("z", [-0.5, -1.0 + 1.0j, -2.0 + 3.0j, 0.3j])
def test_fixed_point_matches_dense_collocation(M, z):
    rhs = DahlquistSplitRhs(z)
    nodes, sweeps = sdc_fixed_point(rhs, ONE, 0.0, 1.0, M)
    cset = collocation_set(M)
    want = np.linalg.solve(np.eye(M) - z * cset.a, np.ones(M))
    assert np.asarray(nodes, dtype=complex) == pytest.approx(want, abs=1e-12)
    assert sweeps >= 1


def test_fixed_point_euler_corrector_same_limit():
    # the corrector splitting shapes the iteration, not its limit
    z = -1.0 + 0.5j
    rhs = DahlquistSplitRhs(z)
    si, _ = sdc_fixed_point(rhs, ONE, 0.0, 1.0, 3, corrector="si")
    eu, _ = sdc_fixed_point(rhs, ONE, 0.0, 1.0, 3, corrector="euler")
    assert np.asarray(si) == pytest.approx(np.asarray(eu), abs=1e-11)


def test_fixed_point_divergence_reported():
    rhs = DahlquistSplitRhs(100.0j)
    with pytest.raises(NonConvergenceError):
        sdc_fixed_point(rhs, ONE, 0.0, 1.0, 3, max_sweeps=5)


# ------------------------------------------------------------ convergence


def run_to_one(config, z, n):
    rhs = DahlquistSplitRhs(z)
    step = sdc_stepper(config)
    u = ONE
    dt = 1.0 / n
    for k in range(n):
        u = step(rhs, u, k * dt, dt)
    return complex(u)


@pytest.mark.parametrize("K,lo,hi", [(1, 0.8, 1.3), (2, 1.8, 2.3), (3, 2.7, 3.4)])
def test_each_sweep_gains_an_order(K, lo, hi):
    z = -1.0
    e1 = abs(run_to_one(SdcConfig(M=3, K=K), z, 16) - np.exp(z))
    e2 = abs(run_to_one(SdcConfig(M=3, K=K), z, 32) - np.exp(z))
    slope = np.log2(e1 / e2)
    assert lo < slope < hi


def test_small_step_consistency():
    z = -1.0 + 0.5j
    dt = 1e-3
    rhs = DahlquistSplitRhs(z)
    u = sdc_step(rhs, ONE, 0.0, dt, SdcConfig.tuned(2))
    assert abs(complex(u) - np.exp(z * dt)) < dt**2


def test_stepper_binds_label():
    step = sdc_stepper(SdcConfig.tuned(2))
    assert step.__name__ == "sdc_step_sdc-si(1,1)_2^3"


# --------------------------------------------------------- solve accounting


class CountingRhs:
    """Dahlquist-like split RHS that counts implicit stage solves and can
    be armed to fail on a chosen solve."""

    def __init__(self, lam=-1.0, fail_at=None):
        self.lam = lam
        self.solves = 0
        self.fail_at = fail_at

    def f_ex(self, u, t):
        return 0.0 * u

    def f_full(self, u, t):
        return self.lam * u

    def f_im(self, alpha, t, theta):
        outer = self

        class Part:
            def solve(self, b, c):
                outer.solves += 1
                if outer.fail_at is not None and outer.solves == outer.fail_at:
                    raise NonphysicalStateError("density", (0,), -1.0, t)
                return b / (1.0 - c * outer.lam), None

            def apply(self, v):
                return outer.lam * v

        return Part()


@pytest.mark.parametrize("M,s1,s2,K", [(2, 1, 1, 3), (3, 2, 2, 4), (4, 1, 2, 8)])
def test_stage_solve_count(M, s1, s2, K):
    rhs = CountingRhs()
    sdc_step(rhs, 1.0, 0.0, 0.5, SdcConfig(M=M, K=K, s1=s1, s2=s2))
    assert rhs.solves == M * (s1 + (K - 1) * s2)


def test_predictor_failure_attribution():
    rhs = CountingRhs(fail_at=1)
    with pytest.raises(SweepFailureError) as ei:
        sdc_step(rhs, 1.0, 0.0, 0.5, SdcConfig(M=2, K=3))
    assert ei.value.sweep == 0
    assert ei.value.node == 1
    assert "predictor" in str(ei.value)
    assert isinstance(ei.value.cause, NonphysicalStateError)


def test_correction_failure_attribution():
    # M=2, s1=s2=1: predictor solves 1-2, first sweep 3-4, second sweep 5
    rhs = CountingRhs(fail_at=5)
    with pytest.raises(SweepFailureError) as ei:
        sdc_step(rhs, 1.0, 0.0, 0.5, SdcConfig(M=2, K=3))
    assert ei.value.sweep == 2
    assert ei.value.node == 1
    assert "sweep 2" in str(ei.value)


def test_tuned_configs_run_on_dahlquist():
    for M in sorted(TUNED_CONFIGS):
        u = sdc_step(DahlquistSplitRhs(-2.0 + 1.0j), ONE, 0.0, 1.0, SdcConfig.tuned(M))
        assert np.isfinite(complex(u).real) and abs(complex(u)) < 1.0
