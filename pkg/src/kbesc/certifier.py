"""Worst-case descent certificates for surrogate gradient steps.

Both bounds are exact extrema of a linear functional of the unknown cost map
f over the set of functions consistent with everything we know: f lies in
the kernel's RKHS ball of radius Gamma and threads every measurement tube.
By a representer argument the extremum is attained on the span of the
involved kernel sections, which turns each bound into a finite conic program
over the structured Gram matrices from :mod:`kbesc.kernels`:

* descent margin: minimize grad f(theta) . grad m(theta) -- positive means
  every consistent cost map strictly decreases along -grad m(theta);
* step acceptance: maximize f(theta+) - f(theta) + c * mu * grad f(theta)
  . grad m(theta) -- nonpositive certifies a sufficient-decrease step of
  size mu before taking it.

Ball and tube constraints act through the Gram matrix, so the programs are
solve_ball_lp instances with the matrix supplied as both metric and
objective carrier.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import conic, kernels
from .approximator import Approximation, Dataset
from .errors import CertificationUnavailable, DataInconsistencyError


class BoundKind(enum.Enum):
    DESCENT_LOWER = "descent_lower"
    ARMIJO_UPPER = "armijo_upper"


@dataclass(frozen=True, eq=False)
class CertificateBound:
    """A certified one-sided bound plus the solve it came from."""

    kind: BoundKind
    value: float
    theta: np.ndarray
    gain: float | None
    solve: conic.SolveResult


def _tubes(block: kernels.GramBlock, col) -> tuple:
    m = col.inputs.shape[0]
    return tuple(
        conic.SelectorTube(
            block.index_map[i], float(col.targets[i]), float(col.half_widths[i])
        )
        for i in range(m)
    )


def _run(problem: conic.BallLpProblem, kind: BoundKind, theta, gain) -> CertificateBound:
    res = conic.solve_ball_lp(problem)
    if res.status is conic.SolveStatus.INFEASIBLE:
        raise DataInconsistencyError(
            "no cost map within the norm ball threads the measurement tubes"
        )
    if res.status is not conic.SolveStatus.OPTIMAL:
        raise CertificationUnavailable("certificate program did not solve")
    return CertificateBound(kind, res.objective, np.asarray(theta, float), gain, res)


def descent_lower_bound(
    m: Approximation,
    data: Dataset,
    theta,
    gamma: float | None = None,
    delta_bar: float | None = None,
) -> CertificateBound:
    """Lower bound on grad f(theta) . grad m(theta) over all consistent f.

    A positive value certifies -grad m(theta) as a strict descent direction
    for the true cost map.  With an empty dataset the bound reduces to
    -Gamma times the derivative-metric norm of grad m(theta).
    """
    gamma = m.gamma if gamma is None else gamma
    delta_bar = m.delta_bar if delta_bar is None else delta_bar
    theta = np.asarray(theta, dtype=float)
    col = data.collapse(delta_bar)
    block = kernels.cert_matrix(m.kernel, col.inputs, theta)
    n_rows = block.matrix.shape[0]
    grad_m = m.gradient(theta)
    coeff = np.zeros(n_rows)
    n = theta.shape[0]
    coeff[n_rows - n :] = grad_m
    problem = conic.BallLpProblem(
        metric=block.matrix,
        objective=block.matrix @ coeff,
        radius=gamma,
        constraints=_tubes(block, col),
        maximize=False,
    )
    return _run(problem, BoundKind.DESCENT_LOWER, theta, None)


def armijo_upper_bound(
    m: Approximation,
    data: Dataset,
    theta,
    gain: float,
    armijo_c: float,
    gamma: float | None = None,
    delta_bar: float | None = None,
) -> CertificateBound:
    """Upper bound on f(theta+) - f(theta) + c*mu*grad f(theta).grad m(theta)
    over all consistent f, where theta+ = theta - mu * grad m(theta).

    A nonpositive value certifies the sufficient-decrease inequality for the
    candidate step before any new measurement is taken.  When theta+ lands
    on theta (or a measured input) the duplicated value slices are collapsed
    and their objective coefficients accumulate on the shared row, so at
    gain -> 0 the -1/+1 pair cancels exactly.
    """
    if gain <= 0.0:
        raise ValueError("gain must be positive")
    gamma = m.gamma if gamma is None else gamma
    delta_bar = m.delta_bar if delta_bar is None else delta_bar
    theta = np.asarray(theta, dtype=float)
    grad_m = m.gradient(theta)
    theta_plus = theta - gain * grad_m
    col = data.collapse(delta_bar)
    n_data = col.inputs.shape[0]
    block = kernels.cert_matrix_prime(m.kernel, col.inputs, theta, theta_plus)
    coeff = np.zeros(block.matrix.shape[0])
    coeff[block.index_map[n_data]] += -1.0
    coeff[block.index_map[n_data + 1]] += 1.0
    n = theta.shape[0]
    for j in range(n):
        coeff[block.index_map[n_data + 2 + j]] += armijo_c * gain * grad_m[j]
    problem = conic.BallLpProblem(
        metric=block.matrix,
        objective=block.matrix @ coeff,
        radius=gamma,
        constraints=_tubes(block, col),
        maximize=True,
    )
    return _run(problem, BoundKind.ARMIJO_UPPER, theta, gain)
