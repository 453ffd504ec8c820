"""Plant models, fixed-step integration, and steady-state measurement.

The optimizer interacts with the plant in one pattern only: hold a constant
input theta for a waiting time T, then read the output once.  For dynamic
plants the held input drives an ODE x' = g(x, theta) integrated with
classical RK4 at a fixed step; static plants (state_dim == 0) short-circuit
to evaluating their map directly, which gives the tuning loop a single code
path for both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SimulationDivergenceError

DEFAULT_DT = 1e-3
DIVERGENCE_GUARD = 1e12


@dataclass(frozen=True)
class PlantModel:
    """Dynamics x' = dynamics(x, theta), scalar output y = output(x).

    truth, when available, is the closed-form steady-state cost map
    theta -> lim y; minimizer its argmin.  Static maps set state_dim = 0 and
    supply truth only.
    """

    state_dim: int
    input_dim: int
    dynamics: Callable | None = None
    output: Callable | None = None
    truth: Callable | None = None
    minimizer: np.ndarray | None = None

    def __post_init__(self):
        if self.state_dim < 0 or self.input_dim < 1:
            raise ValueError("state_dim must be >= 0 and input_dim >= 1")
        if self.state_dim > 0 and (self.dynamics is None or self.output is None):
            raise ValueError("dynamic plants need dynamics and output callables")
        if self.state_dim == 0 and self.truth is None:
            raise ValueError("static plants are defined by their truth map")


@dataclass(frozen=True)
class PlantState:
    """Simulation clock, internal state, and the input currently applied."""

    t: float
    x: np.ndarray
    theta_applied: np.ndarray | None = None


def initial_state(model: PlantModel, x0=None) -> PlantState:
    x = np.zeros(model.state_dim) if x0 is None else np.asarray(x0, dtype=float)
    if x.shape != (model.state_dim,):
        raise ValueError("x0 has wrong dimension")
    return PlantState(0.0, x)


def integrate(
    model: PlantModel,
    state: PlantState,
    theta,
    duration: float,
    dt: float = DEFAULT_DT,
    observer: Callable | None = None,
    observe_every: int = 1,
) -> PlantState:
    """Advance the plant under constant input theta for `duration` seconds.

    Classical RK4 at fixed step dt, with one shortened final step so the
    returned state lands on t + duration exactly.  The observer, when given,
    receives (t, x, theta, y) every observe_every accepted steps.  Raises
    SimulationDivergenceError when the state grows past the guard or stops
    being finite.
    """
    if duration < 0.0:
        raise ValueError("duration must be nonnegative")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.input_dim,):
        raise ValueError("theta has wrong dimension")

    if model.state_dim == 0:
        new = PlantState(state.t + duration, state.x, theta)
        if observer is not None:
            observer(new.t, new.x, theta, measure(model, new))
        return new

    rhs = model.dynamics
    x = state.x.astype(float, copy=True)
    t0 = state.t
    # floor with a relative nudge so durations that are an exact multiple of
    # dt in real arithmetic do not round down to an extra remainder step
    n_full = int(np.floor(duration / dt + 1e-9))
    remainder = duration - n_full * dt
    if remainder <= 1e-9 * dt:
        remainder = 0.0

    def step(x, h):
        k1 = rhs(x, theta)
        k2 = rhs(x + 0.5 * h * k1, theta)
        k3 = rhs(x + 0.5 * h * k2, theta)
        k4 = rhs(x + h * k3, theta)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    for i in range(n_full):
        x = step(x, dt)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_GUARD:
            raise SimulationDivergenceError(f"state diverged at t={t0 + (i + 1) * dt}")
        if observer is not None and (i + 1) % observe_every == 0:
            observer(t0 + (i + 1) * dt, x.copy(), theta, float(model.output(x)))
    if remainder > 0.0:
        x = step(x, remainder)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_GUARD:
            raise SimulationDivergenceError(f"state diverged at t={t0 + duration}")
        if observer is not None:
            observer(t0 + duration, x.copy(), theta, float(model.output(x)))
    return PlantState(t0 + duration, x, theta)


def measure(model: PlantModel, state: PlantState) -> float:
    """Read the plant output at the current state."""
    if model.state_dim == 0:
        if state.theta_applied is None:
            raise ValueError("no input has been applied yet")
        return float(model.truth(state.theta_applied))
    return float(model.output(state.x))


class PlantSession:
    """Live plant with a persistent state across measurements.

    The physical picture: the plant keeps evolving from wherever the last
    input left it; changing the input never resets the state.
    """

    def __init__(self, model, x0=None, dt=DEFAULT_DT, observer=None, observe_every=1):
        self.model = model
        self.state = initial_state(model, x0)
        self.dt = dt
        self.observer = observer
        self.observe_every = observe_every

    def apply(self, theta, duration: float) -> float:
        """Hold theta for `duration`, then return one output sample."""
        self.state = integrate(
            self.model,
            self.state,
            theta,
            duration,
            self.dt,
            self.observer,
            self.observe_every,
        )
        return measure(self.model, self.state)


_THETA_STAR = np.array([3.0, 1.0])


def _benchmark_rhs(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    u1 = theta[0] - 3.0
    u2 = theta[1] - 1.0
    x1 = x[0]
    x2 = x[1]
    return np.array(
        [-4.0 * x1**3 + 0.5 * u1**6, 2.0 * x1 - 5.0 * x2**3 + u2 * u2]
    )


def _benchmark_output(x: np.ndarray) -> float:
    return -np.exp(-0.1 * x[1] ** 3)


def _benchmark_truth(theta) -> float:
    d = np.asarray(theta, dtype=float) - _THETA_STAR
    return float(-np.exp(-(d @ d) / 50.0))


def two_state_benchmark() -> PlantModel:
    """Two-state nonlinear plant whose steady-state cost map is a scaled
    Gaussian well centered at theta* = (3, 1).

    x1' = -4 x1^3 + (theta_1 - 3)^6 / 2
    x2' = 2 x1 - 5 x2^3 + (theta_2 - 1)^2
    y   = -exp(-x2^3 / 10)

    At equilibrium x1 = (theta_1 - 3)^2 / 2 and x2^3 = ||theta - theta*||^2/5,
    so y settles at -exp(-||theta - theta*||^2 / 50): exactly a squared-
    exponential section with length scale 5, which makes the cost map an
    RKHS element of unit norm.
    """
    return PlantModel(
        state_dim=2,
        input_dim=2,
        dynamics=_benchmark_rhs,
        output=_benchmark_output,
        truth=_benchmark_truth,
        minimizer=_THETA_STAR.copy(),
    )


def two_state_steady_state(theta) -> np.ndarray:
    """Closed-form attractor of the benchmark under constant input."""
    theta = np.asarray(theta, dtype=float)
    x1 = 0.5 * (theta[0] - 3.0) ** 2
    d = theta - _THETA_STAR
    x2 = np.cbrt((d @ d) / 5.0)
    return np.array([x1, x2])


def static_map(fn: Callable, input_dim: int, minimizer=None) -> PlantModel:
    """Plant with no internal state: measuring returns fn(theta) exactly."""
    return PlantModel(
        state_dim=0,
        input_dim=input_dim,
        truth=fn,
        minimizer=None if minimizer is None else np.asarray(minimizer, dtype=float),
    )
