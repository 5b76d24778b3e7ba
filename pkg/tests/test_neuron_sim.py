"""
tandemnet — Neuron Simulation Tests
Hand-stepped IF / LIF oracles, conservation of counts and the synaptic delay.
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import config
from tandem.errors import NumericError, ParameterError, ShapeError
from tandem.neuron_sim import (LayerState, NeuronKind, NeuronParams, free_membrane_potential, run_layer, step,
                               synaptic_current)

IF = NeuronParams.from_kind("IF")
LIF = NeuronParams.from_kind("LIF")


def _spike_times(params, current, T):
    state = LayerState.zeros((1,))
    times = []
    for t in range(1, T + 1):
        if step(params, state, np.array([current]))[0]:
            times.append(t)
    return times, state


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Parameters and state
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestNeuronParams:
    def test_defaults(self):
        assert IF.kind is NeuronKind.IF and IF.theta == 1.0
        assert LIF.kind is NeuronKind.LIF and LIF.theta == 0.1 and LIF.tau_m == 20.0

    def test_alpha(self):
        assert IF.alpha == 1.0
        assert math.isclose(LIF.alpha, math.exp(-1 / 20))

    def test_kind_case_insensitive(self):
        assert NeuronKind.parse("lif") is NeuronKind.LIF

    @pytest.mark.parametrize("kind", list(NeuronKind))
    def test_parse_accepts_members(self, kind):
        assert NeuronKind.parse(kind) is kind
        assert NeuronParams(kind, 0.5).kind is kind
        assert NeuronParams.from_kind(kind).kind is kind

    @pytest.mark.parametrize("theta", [0.0, -1.0, float("inf"), float("nan")])
    def test_bad_threshold(self, theta):
        with pytest.raises(ParameterError):
            NeuronParams(NeuronKind.IF, theta)

    def test_bad_tau(self):
        with pytest.raises(ParameterError):
            NeuronParams(NeuronKind.LIF, 0.1, tau_m=0.0)

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            NeuronParams.from_kind("izhikevich")

    def test_reset_state_is_zero(self):
        state = LayerState.zeros((3,))
        step(IF, state, np.array([2.0, 0.0, 5.0]))
        state.reset()
        assert not state.membrane.any() and not state.last_spikes.any()


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Synaptic input
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestSynapticCurrent:
    def test_zero(self):
        assert not synaptic_current(np.ones((2, 3)), np.zeros(2), np.zeros((1, 3))).any()

    def test_hand_dot_product(self):
        out = synaptic_current([[1.0, -0.5]], [0.2], [[1.0, 1.0]])
        assert np.isclose(out[0, 0], 0.7)

    def test_identity(self):
        s = np.array([[1.0, 0.0, 1.0]])
        np.testing.assert_array_equal(synaptic_current(np.eye(3), np.zeros(3), s), s)

    def test_geometry_mismatch(self):
        with pytest.raises(ShapeError):
            synaptic_current(np.ones((2, 3)), np.zeros(2), np.ones((1, 4)))

    def test_conv_bias_per_filter(self):
        out = synaptic_current(np.zeros((2, 1, 3, 3)), np.array([1.0, -1.0]), np.zeros((1, 1, 4, 4)), padding=1)
        assert out.shape == (1, 2, 4, 4)
        assert np.all(out[:, 0] == 1.0) and np.all(out[:, 1] == -1.0)

    def test_overflowing_drive_raises(self):
        with pytest.raises(NumericError):
            synaptic_current([[1e200]], [0.0], [[1e200]])

    def test_nan_weight_raises_in_run_layer(self):
        with pytest.raises(NumericError):
            run_layer(IF, [[np.nan]], [0.0], np.array([[1.0]]), 4, constant=True)


class TestFreeMembranePotential:
    def test_zero(self):
        assert free_membrane_potential([[1.0]], [0.0], [[0.0]], 10)[0, 0] == 0.0

    def test_hand_arithmetic(self):
        assert np.isclose(free_membrane_potential([[2.0]], [0.1], [[3.0]], 10)[0, 0], 7.0)

    def test_bias_only(self):
        assert free_membrane_potential([[0.0]], [0.5], [[9.0]], 8)[0, 0] == 4.0


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Single-step dynamics
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestStep:
    def test_if_hand_stepped(self):
        """θ=1, I=0.3: U = .3 .6 .9 1.2→spike, .5 .8 1.1→spike, .4 .7 1.0→spike."""
        times, _ = _spike_times(IF, 0.3, 10)
        assert times == [4, 7, 10]

    def test_lif_hand_stepped(self):
        """θ=0.1, τ=20, I=0.05: U = 0.0500, 0.0976, 0.1428 → first spike at t=3."""
        state = LayerState.zeros((1,))
        trace = []
        for _ in range(3):
            spikes = step(LIF, state, np.array([0.05]))
            trace.append((float(state.membrane[0]), int(spikes[0])))
        np.testing.assert_allclose([u for u, _ in trace], [0.05, 0.0976, 0.1428], atol=1e-4)
        assert [s for _, s in trace] == [0, 0, 1]

    def test_zero_input_stays_at_rest(self):
        for params in (IF, LIF):
            times, state = _spike_times(params, 0.0, 20)
            assert times == []
            assert state.membrane[0] == 0.0

    def test_reset_by_subtraction_is_deferred(self):
        state = LayerState.zeros((1,))
        step(IF, state, np.array([1.5]))
        assert state.membrane[0] == 1.5
        step(IF, state, np.array([0.0]))
        assert state.membrane[0] == 0.5

    def test_non_finite_current(self):
        with pytest.raises(NumericError):
            step(IF, LayerState.zeros((2,)), np.array([0.1, np.nan]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            step(IF, LayerState.zeros((2,)), np.zeros(3))


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Whole-window simulation
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestRunLayer:
    def test_all_ones_train_fires_every_step(self):
        train, counts = run_layer(IF, [[1.0]], [0.0], np.ones((10, 1, 1)), 10)
        assert counts[0, 0] == 10
        assert train.dtype == np.uint8 and train.shape == (10, 1, 1)

    def test_empty_input(self):
        train, counts = run_layer(IF, np.ones((3, 4)), np.zeros(3), np.zeros((6, 2, 4)), 6)
        assert not train.any() and not counts.any()

    def test_early_excitation_beats_free_potential(self):
        """+1.0 then −0.6: one spike, although the free aggregate potential is only 0.4."""
        currents = np.zeros((10, 1, 1))
        currents[0], currents[1] = 1.0, -0.6
        _, counts = run_layer(IF, [[1.0]], [0.0], currents, 10)
        free = free_membrane_potential([[1.0]], [0.0], currents.sum(axis=0), 10)
        assert counts[0, 0] == 1
        assert np.isclose(free[0, 0], 0.4) and free[0, 0] < IF.theta

    def test_counts_are_time_sums(self):
        rng = np.random.default_rng(0)
        inputs = (rng.random((12, 5, 8)) < 0.4).astype(np.uint8)
        train, counts = run_layer(IF, rng.normal(0.5, 0.5, (6, 8)), rng.normal(0, 0.1, 6), inputs, 12)
        np.testing.assert_array_equal(counts, train.sum(axis=0))
        assert counts.dtype == np.float64

    def test_constant_current_matches_hand_oracle(self):
        _, counts = run_layer(IF, [[1.0]], [0.0], np.array([[0.3]]), 10, constant=True)
        assert counts[0, 0] == 3

    def test_count_monotone_in_current(self):
        currents = np.linspace(0.0, 2.5, 51)[:, None]
        _, counts = run_layer(IF, [[1.0]], [0.0], currents, 16, constant=True)
        assert np.all(np.diff(counts[:, 0]) >= 0)

    def test_if_subtractive_reset_conservation(self):
        """U[T] = Σ I − θ·Σ_{t<T} s[t]: the last spike's subtraction lands after the window."""
        rng = np.random.default_rng(8)
        currents = rng.uniform(-0.3, 0.9, size=(25, 4))
        state = LayerState.zeros((4,))
        spikes = np.array([step(IF, state, currents[t]) for t in range(25)])
        expected = currents.sum(axis=0) - IF.theta * spikes[:-1].sum(axis=0)
        np.testing.assert_allclose(state.membrane, expected, atol=1e-12)

    def test_determinism(self):
        rng = np.random.default_rng(2)
        inputs = (rng.random((10, 3, 6)) < 0.5).astype(np.uint8)
        w, b = rng.normal(0, 1, (4, 6)), rng.normal(0, 0.1, 4)
        first, _ = run_layer(LIF, w, b, inputs, 10)
        second, _ = run_layer(LIF, w, b, inputs, 10)
        np.testing.assert_array_equal(first, second)

    def test_if_rate_band(self):
        """Per-step current in [0, θ] gives a count within one of I·T/θ."""
        T = 20
        currents = np.linspace(0.0, IF.theta, 101)[:, None]
        _, counts = run_layer(IF, [[1.0]], [0.0], currents, T, constant=True)
        assert np.all(np.abs(counts[:, 0] - currents[:, 0] * T / IF.theta) <= 1.0)

    def test_count_never_exceeds_window(self):
        _, counts = run_layer(IF, [[1.0]], [0.0], np.array([[50.0]]), 7, constant=True)
        assert counts[0, 0] == 7

    def test_synaptic_delay_shifts_input(self):
        _, plain = run_layer(IF, [[1.0]], [0.0], np.array([[1.0]]), 3, constant=True)
        _, delayed = run_layer(IF, [[1.0]], [0.0], np.array([[1.0]]), 3, constant=True, delay=True)
        assert plain[0, 0] == 3 and delayed[0, 0] == 2

    def test_delay_on_a_train(self):
        inputs = np.zeros((4, 1, 1))
        inputs[3] = 1.0
        _, plain = run_layer(IF, [[1.0]], [0.0], inputs, 4)
        _, delayed = run_layer(IF, [[1.0]], [0.0], inputs, 4, delay=True)
        assert plain[0, 0] == 1 and delayed[0, 0] == 0

    def test_threads_do_not_change_results(self):
        rng = np.random.default_rng(5)
        inputs = rng.normal(0.2, 0.3, (9, 4))
        w, b = rng.normal(0, 0.6, (5, 4)), rng.normal(0, 0.1, 5)
        one = run_layer(LIF, w, b, inputs, 15, constant=True, threads=1)
        many = run_layer(LIF, w, b, inputs, 15, constant=True, threads=4)
        np.testing.assert_array_equal(one[0], many[0])
        np.testing.assert_array_equal(one[1], many[1])

    def test_conv_layer_shapes(self):
        inputs = (np.random.default_rng(1).random((5, 2, 1, 6, 6)) < 0.5).astype(np.uint8)
        train, counts = run_layer(IF, np.full((3, 1, 3, 3), 0.2), np.zeros(3), inputs, 5, padding=1)
        assert train.shape == (5, 2, 3, 6, 6)
        assert counts.shape == (2, 3, 6, 6)

    def test_train_length_must_match_window(self):
        with pytest.raises(ShapeError):
            run_layer(IF, [[1.0]], [0.0], np.ones((4, 1, 1)), 5)

    @pytest.mark.parametrize("T", [0, -3, 2.5, config.MAX_T + 1])
    def test_bad_window(self, T):
        with pytest.raises(ParameterError):
            run_layer(IF, [[1.0]], [0.0], np.ones((1, 1)), T, constant=True)
