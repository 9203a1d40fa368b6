import math

import numpy as np
import pytest

from ettrack.core import ComparisonFunction, LyapunovCertificate
from ettrack.errors import NumericalBlowup, ZenoSuspected
from ettrack.scenarios import builtin_scenario
from ettrack.sim import (FIRST_ARMING, THRESHOLD_CROSSING, Scenario, SimConfig, rk4_step, run,
                         runtime_invariant_check, step)
from ettrack.systems import (LipschitzVectorProvider, ReferenceSignal, SystemModel, case1_reference,
                             nonlinear_spring_model)
from ettrack.trigger import TriggerParams


def test_simconfig_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, zeno_window=0.01)
    with pytest.raises(ValueError):
        SimConfig(dt=1e-3, horizon=1e-4)
    assert SimConfig(dt=1e-4, horizon=10.0).steps == 100_000


class TestStep:
    def test_zero_dynamics_constant(self):
        model = SystemModel(2, 1, 1, f=lambda x, u: np.zeros(2), f_r=lambda xd, v: np.zeros(2),
                            gamma=lambda xi: np.zeros(1))
        ref = ReferenceSignal("analytic", np.zeros(2), np.zeros(1), d=1.0, d1=1.0,
                              v_of_t=lambda t: np.zeros(1))
        z = np.array([1.0, -2.0, 0.5, 0.25])
        np.testing.assert_array_equal(step(z, 0.0, np.zeros(1), model, ref, 1e-3), z)

    def test_held_update_decreases_V(self, case1, rng):
        """With e = 0 at the start of a step, V falls over one step outside the r-ball."""
        model, cert, ref = case1.model, case1.cert, case1.reference
        for _ in range(200):
            xt = rng.standard_normal(2)
            xt *= 10 ** rng.uniform(math.log10(0.0154), 0.7) / np.linalg.norm(xt)
            xd = rng.uniform(-1.5, 1.5, 2)
            v = rng.uniform(-1, 1, 1)
            u = model.gamma(np.concatenate([xt, xd, v]))
            z = np.concatenate([xt + xd, xd, v])
            z1 = step(z, rng.uniform(0, 10), u, model, ref, 1e-4)
            assert cert.value(z1[:2] - z1[2:4]) < cert.value(xt)

    def test_rk4_order(self):
        """Richardson estimate of the local error order on the spring model with held u."""
        model = nonlinear_spring_model([-20, -20])
        ref = case1_reference()
        z0 = np.array([5.0, -1.0, math.pi / 3, 1.0, 0.0])
        u = np.array([3.0])

        def gap(h):
            one = step(z0, 0.0, u, model, ref, h)
            two = step(step(z0, 0.0, u, model, ref, h / 2), h / 2, u, model, ref, h / 2)
            return np.linalg.norm(one - two)

        hs = [0.04, 0.02, 0.01]
        gaps = [gap(h) for h in hs]
        orders = [math.log2(a / b) for a, b in zip(gaps, gaps[1:])]
        assert min(orders) >= 4.5, orders

    def test_rk4_exact_for_cubic_polynomial(self):
        rhs = lambda t, z, u: np.array([3 * t * t])
        assert rk4_step(rhs, 0.0, np.array([0.0]), None, 0.5)[0] == pytest.approx(0.125, rel=1e-14)

    def test_blowup(self):
        model = SystemModel(1, 1, 1, f=lambda x, u: x * x + u, f_r=lambda xd, v: 0.0 * xd,
                            gamma=lambda xi: np.zeros(1))
        sq = ComparisonFunction.power_law(1, 2)
        cert = LyapunovCertificate(lambda x: float(x @ x), lambda x: 2 * x, sq, sq, sq, lambda s: 2 * s)
        ref = ReferenceSignal("analytic", np.zeros(1), np.zeros(1), d=1.0, d1=1.0, v_of_t=lambda t: np.zeros(1))
        sc = Scenario("blowup", model, cert, LipschitzVectorProvider(lambda R: np.ones(3), 2),
                      TriggerParams(0.5, 1e6), ref, np.array([2.0]), SimConfig(dt=1e-3, horizon=2.0))
        with pytest.raises(NumericalBlowup):
            run(sc)


class TestRunBehaviour:
    def test_zeno_guard(self):
        sc = builtin_scenario("case1", sigma=1e-9)
        with pytest.raises(ZenoSuspected):
            run(sc)

    def test_unarmed_phase(self):
        sc = builtin_scenario("case1", x0=(math.pi / 3, 1.0), sim=SimConfig(horizon=1.0))
        res = run(sc)
        tr, first = res.trajectory, res.events[0]
        assert first.reason == FIRST_ARMING and first.t > 0
        before = tr.t < first.t
        assert np.all(tr.u[before] == 0.0) and not tr.armed[before].any()
        assert tr.norm_xt[first.step] >= sc.params.r > tr.norm_xt[first.step - 1]
        # unarmed steps are exempt even though V grows there
        assert np.any(np.diff(tr.V[: first.step + 1]) > 0)
        assert runtime_invariant_check(tr, sc.params, sc.cert, sc.sim.dt) == []

    def test_short_run_deterministic(self):
        sc = builtin_scenario("case2", sim=SimConfig(horizon=0.5))
        a, b = run(sc), run(sc)
        np.testing.assert_array_equal(a.trajectory.x, b.trajectory.x)
        assert [e.t for e in a.events] == [e.t for e in b.events]


class TestCase1Log:
    """Property scans over the full Case I log."""

    def test_time_grid(self, case1, case1_run):
        tr = case1_run.trajectory
        np.testing.assert_allclose(np.diff(tr.t), case1.sim.dt, rtol=1e-9)
        assert np.all(np.isfinite(tr.V))

    def test_event_records(self, case1, case1_run):
        tr, events = case1_run.trajectory, case1_run.events
        assert events[0].reason == FIRST_ARMING
        assert all(ev.reason == THRESHOLD_CROSSING for ev in events[1:])
        times = np.array([ev.t for ev in events])
        assert np.all(np.diff(times) >= case1.sim.dt * (1 - 1e-9))
        for ev in events:
            np.testing.assert_array_equal(tr.e[ev.step], 0.0)
            assert tr.norm_xt[ev.step] >= case1.params.r

    def test_sample_and_hold(self, case1_run):
        tr, events = case1_run.trajectory, case1_run.events
        steps = {ev.step for ev in events}
        changed = np.flatnonzero(np.any(np.diff(tr.u, axis=0) != 0, axis=1)) + 1
        assert set(changed.tolist()) <= steps

    def test_no_pending_event(self, case1, case1_run):
        tr = case1_run.trajectory
        armed = tr.armed
        assert np.all((tr.g[armed] < 0) | (tr.norm_xt[armed] < case1.params.r))

    def test_ledger_non_increasing(self, case1_run):
        Ls = np.array([ev.L for ev in case1_run.events])
        assert np.all(np.diff(Ls, axis=0) <= 0)
        assert Ls[-1][0] < Ls[0][0]

    def test_initial_level_set_invariant(self, case1, case1_run):
        tr, cert = case1_run.trajectory, case1.cert
        R0 = case1_run.events[0].norm_xt
        level = cert.alpha2(R0)
        assert np.all(tr.V <= level * (1 + 1e-12))
        assert np.all(np.linalg.norm(np.hstack([tr.x_d, tr.v]), axis=1) <= case1.reference.d)

    def test_interval_level_sets(self, case1, case1_run):
        tr, cert, events = case1_run.trajectory, case1.cert, case1_run.events
        bounds = [ev.step for ev in events] + [len(tr)]
        for ev, stop in zip(events, bounds[1:]):
            level = cert.alpha2(ev.norm_xt)
            assert np.all(tr.V[ev.step:stop] <= level * (1 + 1e-6))

    def test_invariants_and_negative_control(self, case1, case1_run):
        tr = case1_run.trajectory
        assert runtime_invariant_check(tr, case1.params, case1.cert, case1.sim.dt) == []
        # demanding a decay rate of 2 alpha3 cannot be met
        bad = runtime_invariant_check(tr, case1.params, case1.cert, case1.sim.dt, sigma=-1.0)
        assert len(bad) > 100
        assert all(v.kind == "lyapunov-decrease" for v in bad)

    def test_metrics_consistent(self, case1, case1_run):
        m, events = case1_run.metrics, case1_run.events
        assert m.total_updates == len(events)
        assert m.min_inter_exec >= case1.sim.dt * (1 - 1e-9)
        assert m.transient_updates == sum(ev.t < m.first_entry_time for ev in events)
        assert m.avg_freq_total == pytest.approx(len(events) / 10.0)
        assert m.settled and m.ultimate_bound_observed >= 0


def test_frozen_run_respects_bound(case1, case1_frozen_run):
    tr = case1_frozen_run.trajectory
    Ls = np.array([ev.L for ev in case1_frozen_run.events])
    assert np.all(Ls == Ls[0])
    assert runtime_invariant_check(tr, case1.params, case1.cert, case1.sim.dt) == []
    assert case1_frozen_run.metrics.ultimate_bound_observed <= case1.r1


def test_case2_log(case2, case2_run):
    tr, events = case2_run.trajectory, case2_run.events
    assert all(tr.norm_xt[ev.step] >= case2.params.r for ev in events)
    assert np.all(np.diff([ev.t for ev in events]) > 0)
    Ls = np.array([ev.L for ev in events])
    assert np.all(np.diff(Ls, axis=0) <= 0)
