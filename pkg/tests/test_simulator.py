import math

import numpy as np
import pytest
import scipy.linalg

from conftest import twocycle_system
from obsnet import Digraph, ObserverNetworkSystem
from obsnet.simulator import (
    GainSet,
    HeldNoise,
    SimulationConfig,
    SimulationDiverged,
    Sinusoid,
    closed_loop_matrix,
    error_solution,
    is_hurwitz,
    simulate,
)

HURWITZ = GainSet(L=[[[3.0]], [[0.0]]], K=[[[3.0]], [[3.0]]])
MARGINAL = GainSet(L=[[[3.0]], [[0.0]]], K=[[[2.0]], [[2.0]]])


def scalar_node(A=0.0, B=None, C=1.0, D=None, Dbar=None):
    return ObserverNetworkSystem(
        A=[[A]], B=B, C=[[[C]]], D=None if D is None else [D], Dbar=None if Dbar is None else [Dbar],
        H=[[[0.0]]], graph=Digraph(1, frozenset()),
    )


class TestClosedLoop:
    def test_hurwitz_fixture(self):
        acl = closed_loop_matrix(twocycle_system(), HURWITZ)
        assert acl.tolist() == [[-5, 3], [3, -2]]
        ok, abscissa = is_hurwitz(acl)
        # Characteristic polynomial s^2 + 7 s + 1.
        assert ok and abscissa == pytest.approx((-7 + math.sqrt(45)) / 2, abs=1e-12)
        assert abscissa == pytest.approx(-0.1459, abs=1e-4)

    def test_marginal_fixture(self):
        acl = closed_loop_matrix(twocycle_system(), MARGINAL)
        assert acl.tolist() == [[-4, 2], [2, -1]]
        ok, abscissa = is_hurwitz(acl)
        assert not ok and abscissa == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(sorted(np.linalg.eigvals(acl).real), [-5, 0], atol=1e-12)

    def test_zero_gains_keep_plant(self):
        sys = twocycle_system(A=-2.0)
        zero = GainSet(L=[[[0.0]], [[0.0]]], K=[[[0.0]], [[0.0]]])
        acl = closed_loop_matrix(sys, zero)
        assert acl.tolist() == [[-2, 0], [0, -2]] and is_hurwitz(acl)[0]

    def test_gain_shape_checked(self):
        with pytest.raises(ValueError, match="nodes"):
            closed_loop_matrix(twocycle_system(), GainSet(L=[[[1.0]]], K=[[[1.0]]]))
        with pytest.raises(ValueError, match=r"nodes\[0\]\.L"):
            closed_loop_matrix(twocycle_system(), GainSet(L=[[[1.0, 1.0]], [[0.0]]], K=[[[1.0]], [[1.0]]]))


class TestSimulate:
    def cfg(self, **kw):
        base = dict(t_final=10.0, dt=1e-3, x0=[1.0])
        base.update(kw)
        return SimulationConfig(**base)

    def test_matches_matrix_exponential(self):
        sys = twocycle_system()
        trace = simulate(sys, HURWITZ, self.cfg(decimate=1000))
        e0 = -np.ones(2)
        for t in (1, 5, 10):
            k = int(np.argmin(np.abs(trace.times - t)))
            exact = error_solution(sys, HURWITZ, e0, t)
            assert np.linalg.norm(trace.errors[k, :, 0] - exact) <= 1e-6 * np.linalg.norm(exact)

    def test_plant_matches_exponential(self):
        trace = simulate(twocycle_system(), HURWITZ, self.cfg(decimate=1000))
        np.testing.assert_allclose(trace.states[:, 0], np.exp(trace.times), rtol=1e-9)
        np.testing.assert_allclose(trace.estimates[:, :, 0] - trace.states, trace.errors[:, :, 0], atol=1e-6)

    def test_terminal_decay(self):
        trace = simulate(twocycle_system(), HURWITZ, self.cfg(t_final=60.0, decimate=1000))
        assert trace.error_norms[-1].max() <= 1e-3 * np.linalg.norm(trace.errors[0])

    def test_marginal_keeps_consensus_offset(self):
        sys = twocycle_system()
        trace = simulate(sys, MARGINAL, self.cfg(t_final=60.0, decimate=1000))
        acl = closed_loop_matrix(sys, MARGINAL)
        w, vl, vr = scipy.linalg.eig(acl, left=True)
        k = int(np.argmin(np.abs(w)))
        right, left = vr[:, k].real, vl[:, k].real
        offset = right * (left @ -np.ones(2)) / (left @ right)
        # Symmetric closed loop: zero mode (1, 2)/sqrt(5), so the offset is (-3/5, -6/5).
        np.testing.assert_allclose(offset, [-0.6, -1.2], atol=1e-12)
        assert np.abs(trace.errors[-1, :, 0] - offset).max() <= 1e-4

    def test_equilibrium(self):
        trace = simulate(twocycle_system(), HURWITZ, self.cfg(x0=[0.0], t_final=1.0, decimate=100))
        assert not trace.states.any() and not trace.estimates.any() and not trace.error_norms.any()

    def test_fourth_order(self):
        sys = twocycle_system()
        e0 = -np.ones(2)
        exact = error_solution(sys, HURWITZ, e0, 10.0)
        errs = []
        for dt in (0.2, 0.1, 0.05):
            trace = simulate(sys, HURWITZ, self.cfg(dt=dt, decimate=10**6))
            errs.append(np.linalg.norm(trace.errors[-1, :, 0] - exact))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert (orders >= 3.5).all()

    def test_decimation(self):
        trace = simulate(twocycle_system(), HURWITZ, self.cfg(t_final=1.0, decimate=250))
        np.testing.assert_allclose(trace.times, [0, 0.25, 0.5, 0.75, 1.0])
        assert trace.estimates.shape == (5, 2, 1) and trace.error_norms.shape == (5, 2)

    def test_x0_shape_checked(self):
        with pytest.raises(ValueError, match="x0"):
            simulate(twocycle_system(), HURWITZ, self.cfg(x0=[1.0, 2.0]))

    def test_divergence(self):
        sys = scalar_node(A=800.0)
        gains = GainSet(L=[[[0.0]]], K=[[[0.0]]])
        with pytest.raises(SimulationDiverged) as info:
            simulate(sys, gains, SimulationConfig(t_final=5.0, dt=0.01, x0=[1.0]))
        assert 0 < info.value.t <= 5.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimulationConfig(t_final=1.0, dt=0.0, x0=[0.0])
        with pytest.raises(ValueError):
            SimulationConfig(t_final=0.001, dt=0.01, x0=[0.0])


class TestDisturbances:
    def test_plant_channel(self):
        # x' = sin(2 pi f t), x(0) = 0  ->  x = (1 - cos(2 pi f t)) / (2 pi f).
        sys = scalar_node(A=0.0, B=[[1.0]], D=[[0.0]])
        gains = GainSet(L=[[[0.0]]], K=[[[0.0]]])
        f = 0.5
        cfg = SimulationConfig(t_final=3.0, dt=1e-3, x0=[0.0], disturbance=Sinusoid(1.0, f), decimate=100)
        trace = simulate(sys, gains, cfg)
        w = 2 * np.pi * f
        np.testing.assert_allclose(trace.states[:, 0], (1 - np.cos(w * trace.times)) / w, atol=1e-10)
        np.testing.assert_allclose(trace.estimates, 0.0, atol=1e-10)

    def test_local_measurement_channel(self):
        # e' = -e + sin(w t) with e(0) = -1 (A = 0, C = L = 1, Dbar = 1).
        sys = scalar_node(A=0.0, C=1.0, Dbar=[[1.0]])
        gains = GainSet(L=[[[1.0]]], K=[[[0.0]]])
        cfg = SimulationConfig(t_final=5.0, dt=1e-3, x0=[1.0], disturbance=Sinusoid(1.0, 1 / (2 * np.pi)),
                               decimate=100)
        trace = simulate(sys, gains, cfg)
        t = trace.times
        exact = -np.exp(-t) + (np.sin(t) - np.cos(t) + np.exp(-t)) / 2
        np.testing.assert_allclose(trace.errors[:, 0, 0], exact, atol=1e-10)
        np.testing.assert_allclose(trace.states[:, 0], 1.0)

    def test_shared_channel_cancels(self):
        # With D = B and L C = 1 the shared disturbance drops out of the error: e' = -e.
        sys = scalar_node(A=0.0, B=[[1.0]], C=1.0, D=[[1.0]])
        gains = GainSet(L=[[[1.0]]], K=[[[0.0]]])
        cfg = SimulationConfig(t_final=2.0, dt=1e-3, x0=[1.0], disturbance=HeldNoise(seed=3, hold=0.1),
                               decimate=100)
        trace = simulate(sys, gains, cfg)
        np.testing.assert_allclose(trace.errors[:, 0, 0], -np.exp(-trace.times), rtol=1e-10)
        assert np.ptp(trace.states) > 0

    def test_noise_reproducible(self):
        sys = scalar_node(A=-1.0, B=[[1.0]], D=[[0.5]], Dbar=[[1.0]])
        gains = GainSet(L=[[[1.0]]], K=[[[0.0]]])

        def run(seed):
            cfg = SimulationConfig(t_final=1.0, dt=1e-2, x0=[0.0], disturbance=HeldNoise(seed, 0.05, 1.0))
            return simulate(sys, gains, cfg)

        a, b, c = run(1), run(1), run(2)
        assert a.to_csv() == b.to_csv()
        assert a.to_csv() != c.to_csv()

    def test_noise_is_held(self):
        sample = HeldNoise(seed=0, hold=0.03, std=1.0).sampler(2, 0.01)
        values = [sample(step, step * 0.01).copy() for step in range(6)]
        assert (values[0] == values[2]).all() and (values[3] == values[5]).all()
        assert not (values[2] == values[3]).all()


class TestTraceCSV:
    def test_header_and_rows(self):
        cfg = SimulationConfig(t_final=1.0, dt=0.5, x0=[1.0])
        text = simulate(twocycle_system(), HURWITZ, cfg).to_csv()
        lines = text.splitlines()
        assert lines[0] == "t,x_1,xhat_1_1,xhat_2_1,err_1,err_2"
        assert len(lines) == 4
        first = [float(v) for v in lines[1].split(",")]
        assert first == [0.0, 1.0, 0.0, 0.0, 1.0, 1.0]

    def test_multidimensional_header(self):
        A = np.array([[0.0, 1.0], [-1.0, -1.0]])
        g = Digraph.from_edges(2, [(1, 2)])
        sys = ObserverNetworkSystem(A=A, C=[np.eye(2)] * 2, H=[np.eye(2)] * 2, graph=g)
        gains = GainSet(L=[np.eye(2)] * 2, K=[np.zeros((2, 2))] * 2)
        trace = simulate(sys, gains, SimulationConfig(t_final=0.1, dt=0.05, x0=[1.0, 0.0]))
        assert trace.header() == ["t", "x_1", "x_2", "xhat_1_1", "xhat_1_2", "xhat_2_1", "xhat_2_2",
                                  "err_1", "err_2"]
