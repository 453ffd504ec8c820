"""Integrator accuracy, steady-state geometry, and measurement plumbing."""

import numpy as np
import pytest

from kbesc import (
    PlantModel,
    PlantSession,
    SimulationDivergenceError,
    initial_state,
    integrate,
    measure,
    static_map,
    two_state_benchmark,
    two_state_steady_state,
)


def _decaying_cubic():
    # x' = -x^3 from x(0) = 1 has the closed form x(t) = (1 + 2t)^(-1/2)
    return PlantModel(
        state_dim=1,
        input_dim=1,
        dynamics=lambda x, theta: -(x**3),
        output=lambda x: float(x[0]),
    )


def test_integrator_is_fourth_order():
    # x' = theta x, x(0) = 1 over one unit of time; halving the step must
    # cut the error by ~2^4, and theta is threaded through the dynamics
    model = PlantModel(
        state_dim=1,
        input_dim=1,
        dynamics=lambda x, theta: theta[0] * x,
        output=lambda x: float(x[0]),
    )
    errors = []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        state = integrate(model, initial_state(model, [1.0]), [1.0], 1.0, dt=dt)
        errors.append(abs(state.x[0] - np.e))
    orders = [np.log2(errors[i] / errors[i + 1]) for i in range(3)]
    for p in orders:
        assert 3.8 <= p <= 4.2


def test_integration_lands_exactly_and_observes_every_step():
    model = _decaying_cubic()
    seen = []
    state = integrate(
        model,
        initial_state(model, [1.0]),
        [0.0],
        duration=10.0,
        dt=1e-3,
        observer=lambda t, x, th, y: seen.append(t),
    )
    assert state.t == 10.0
    assert len(seen) == 10_000
    assert seen[-1] == pytest.approx(10.0, abs=1e-12)


def test_remainder_step_is_taken_and_observed():
    model = _decaying_cubic()
    seen = []
    state = integrate(
        model,
        initial_state(model, [1.0]),
        [0.0],
        duration=0.0015,
        dt=1e-3,
        observer=lambda t, x, th, y: seen.append(t),
    )
    assert state.t == 0.0015
    assert len(seen) == 2
    assert seen[1] == pytest.approx(0.0015, abs=1e-15)


def test_observer_decimation_counts():
    model = _decaying_cubic()
    seen = []
    integrate(
        model,
        initial_state(model, [1.0]),
        [0.0],
        duration=1.0,
        dt=1e-3,
        observer=lambda t, x, th, y: seen.append(t),
        observe_every=100,
    )
    assert len(seen) == 10
    assert seen[0] == pytest.approx(0.1, abs=1e-12)


def test_divergence_raises():
    model = PlantModel(
        state_dim=1,
        input_dim=1,
        dynamics=lambda x, theta: x**2,
        output=lambda x: float(x[0]),
    )
    with np.errstate(all="ignore"):
        with pytest.raises(SimulationDivergenceError):
            integrate(model, initial_state(model, [1.0]), [0.0], 2.0, dt=1e-3)


def test_benchmark_steady_state_is_an_equilibrium():
    model = two_state_benchmark()
    rng = np.random.default_rng(3)
    for _ in range(50):
        theta = rng.uniform(-5.0, 9.0, 2)
        xss = two_state_steady_state(theta)
        assert np.max(np.abs(model.dynamics(xss, theta))) < 1e-10


def test_benchmark_truth_values():
    model = two_state_benchmark()
    assert model.truth([-2.0, -4.0]) == pytest.approx(-np.exp(-1.0), abs=1e-15)
    assert model.truth([0.0, 0.0]) == pytest.approx(-np.exp(-0.2), abs=1e-15)
    assert model.truth([3.0, 1.0]) == -1.0
    assert model.output(np.array([0.0, 1.0])) == pytest.approx(
        -np.exp(-0.1), abs=1e-15
    )
    assert np.array_equal(model.minimizer, [3.0, 1.0])


def test_output_at_steady_state_equals_truth():
    model = two_state_benchmark()
    rng = np.random.default_rng(4)
    for _ in range(50):
        theta = rng.uniform(-5.0, 9.0, 2)
        y = model.output(two_state_steady_state(theta))
        assert y == pytest.approx(model.truth(theta), abs=1e-12)


def test_waiting_time_settles_within_tube_half_width():
    # T = 10 must bring the output within the 2.5e-3 measurement tube,
    # both from rest and when re-settling after a setpoint change
    model = two_state_benchmark()
    session = PlantSession(model, x0=[0.0, 0.0])
    y = session.apply([-2.0, -4.0], 10.0)
    assert abs(y - model.truth([-2.0, -4.0])) <= 2.5e-3
    y = session.apply([1.0, -1.0], 10.0)
    assert abs(y - model.truth([1.0, -1.0])) <= 2.5e-3


def test_session_state_persists_across_inputs():
    model = two_state_benchmark()
    session = PlantSession(model, x0=[0.0, 0.0])
    session.apply([0.0, 0.0], 1.0)
    session.apply([2.0, 2.0], 1.0)
    assert session.state.t == 2.0

    state = initial_state(model, [0.0, 0.0])
    state = integrate(model, state, [0.0, 0.0], 1.0)
    state = integrate(model, state, [2.0, 2.0], 1.0)
    assert np.allclose(session.state.x, state.x, atol=1e-14)
    assert measure(model, session.state) == pytest.approx(
        float(model.output(state.x)), abs=1e-14
    )


def test_static_map_measures_exactly():
    plant = static_map(lambda th: float((th[0] - 1.0) ** 2), input_dim=1,
                       minimizer=[1.0])
    state = initial_state(plant)
    with pytest.raises(ValueError):
        measure(plant, state)
    seen = []
    state = integrate(plant, state, [3.0], 5.0,
                      observer=lambda t, x, th, y: seen.append((t, y)))
    assert state.t == 5.0
    assert measure(plant, state) == 4.0
    assert seen == [(5.0, 4.0)]


def test_validation_errors():
    model = _decaying_cubic()
    with pytest.raises(ValueError):
        initial_state(model, [1.0, 2.0])
    with pytest.raises(ValueError):
        integrate(model, initial_state(model, [1.0]), [0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        integrate(model, initial_state(model, [1.0]), [0.0], -1.0)
    with pytest.raises(ValueError):
        integrate(model, initial_state(model, [1.0]), [0.0], 1.0, dt=0.0)
    with pytest.raises(ValueError):
        PlantModel(state_dim=1, input_dim=1)
    with pytest.raises(ValueError):
        PlantModel(state_dim=0, input_dim=1)
