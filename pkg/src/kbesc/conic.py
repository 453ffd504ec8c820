"""Conic programs behind the surrogate fit and the certificate bounds.

Two problem shapes cover everything the optimizer needs:

* ``QpProblem``: minimize x^T Q x subject to tube constraints
  |a_i^T x - y_i| <= delta_i (the min-norm interpolation fit).
* ``BallLpProblem``: extremize q^T beta over the ellipsoidal ball
  beta^T M beta <= Gamma^2 intersected with tubes |(M beta)_i - y_i| <= delta_i
  (the certificate programs; the objective always acts through M).

Both are solved with cvxopt's primal-dual interior-point engines on an
eigenvalue-clipped reformulation: Q and M are Gram matrices and routinely
numerically singular, so we eigendecompose, clip eigenvalues below
``CLIP_REL * lambda_max``, and solve in the clipped coordinates where the
quadratic is diagonal (QP) or the ball is Euclidean (LP + second-order cone).
Feasibility and stationarity residuals are measured on the reformulation the
engine actually solved; solutions are mapped back to the original variables.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from cvxopt import matrix as _cvx
from cvxopt import solvers as _solvers

FEAS_TOL = 1e-8
KKT_TOL = 1e-7
MAX_ITER = 200
TOL_ABS = 1e-8
CLIP_REL = 1e-10

_PSD_TOL = 1e-9

_OPTIONS = {
    "show_progress": False,
    "maxiters": MAX_ITER,
    "abstol": 1e-10,
    "reltol": 1e-10,
    "feastol": 1e-9,
}


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERIC_FAILURE = "numeric_failure"


@dataclass(frozen=True)
class TubeConstraint:
    """|row . x - target| <= half_width; half_width == 0 is an equality."""

    row: np.ndarray
    target: float
    half_width: float


@dataclass(frozen=True)
class SelectorTube:
    """|(M beta)_index - target| <= half_width in a ball-LP."""

    index: int
    target: float
    half_width: float


@dataclass(frozen=True)
class QpProblem:
    quadratic: np.ndarray
    constraints: tuple


@dataclass(frozen=True)
class BallLpProblem:
    metric: np.ndarray
    objective: np.ndarray
    radius: float
    constraints: tuple
    maximize: bool = False


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    objective: float
    solution: np.ndarray | None
    kkt_residual: float

    def __post_init__(self):
        if self.status is SolveStatus.OPTIMAL and self.solution is None:
            raise ValueError("optimal result requires a solution vector")


def _failed(status: SolveStatus) -> SolveResult:
    return SolveResult(status, float("nan"), None, float("nan"))


def _checked_psd(mat: np.ndarray, name: str):
    """Symmetrize, eigendecompose, and clip.  Returns (w_clipped, V, w_raw)."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} has non-finite entries")
    asym = np.max(np.abs(mat - mat.T)) if mat.size else 0.0
    scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    if asym > _PSD_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    sym = 0.5 * (mat + mat.T)
    w, v = np.linalg.eigh(sym)
    lam_max = max(float(w[-1]), 0.0) if w.size else 0.0
    if w.size and float(w[0]) < -_PSD_TOL * max(1.0, lam_max):
        raise ValueError(f"{name} is not positive semidefinite")
    eps = CLIP_REL * max(lam_max, 1e-300)
    return np.maximum(w, eps), v, w


def _conelp(c, g, h, dims=None):
    """conelp with an automatic retry on a regularized LDL KKT solver.

    The default Cholesky route is fastest and most accurate but can break
    down (``domain error``) on badly conditioned certificate instances; the
    ldl route with static regularization survives those.  The attempt order
    is fixed, so results stay deterministic.
    """
    attempts = (
        {"options": dict(_OPTIONS)},
        {"options": dict(_OPTIONS, kktreg=1e-9), "kktsolver": "ldl"},
    )
    last = None
    for kwargs in attempts:
        try:
            sol = _solvers.conelp(_cvx(c), _cvx(g), _cvx(h), dims=dims, **kwargs)
        except (ValueError, ArithmeticError):
            continue
        if sol["status"] in ("optimal", "primal infeasible"):
            return sol
        last = sol
    return last


def _coneqp(p, q, g, h, a=None, b=None):
    """coneqp with a tight-tolerance first attempt and a standard retry.

    The tight attempt pins well-conditioned instances down to ~1e-12
    solution error; ill-conditioned fits that cannot reach it fall back to
    the standard tolerances.  Fixed attempt order keeps results
    deterministic.
    """
    attempts = (
        dict(_OPTIONS, abstol=1e-13, reltol=1e-13, feastol=1e-10),
        dict(_OPTIONS),
    )
    last = None
    for options in attempts:
        kwargs = {"options": options}
        if a is not None:
            kwargs["A"] = a
            kwargs["b"] = b
        try:
            sol = _solvers.coneqp(p, q, g, h, **kwargs)
        except (ValueError, ArithmeticError):
            continue
        if sol["status"] == "optimal":
            return sol
        last = sol
    return last


def _phase_one(rows: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> SolveStatus:
    """Classify an empty-looking tube system: min t s.t. lo - t <= rows.x <= hi + t."""
    m, n = rows.shape
    g = np.zeros((2 * m, n + 1))
    g[:m, :n] = rows
    g[:m, n] = -1.0
    g[m:, :n] = -rows
    g[m:, n] = -1.0
    h = np.concatenate([hi, -lo])
    c = np.zeros(n + 1)
    c[n] = 1.0
    sol = _conelp(c, g, h)
    if sol is None or sol["status"] != "optimal":
        return SolveStatus.NUMERIC_FAILURE
    gap = float(np.asarray(sol["x"]).ravel()[n])
    return SolveStatus.INFEASIBLE if gap > FEAS_TOL else SolveStatus.NUMERIC_FAILURE


def _independent_rows(a: np.ndarray, b: np.ndarray):
    """Greedy row selection; returns (a_kept, b_kept) or None when the
    dropped rows are inconsistent with the kept ones."""
    kept_basis: list[np.ndarray] = []
    keep: list[int] = []
    for i, row in enumerate(a):
        r = row.copy()
        for q in kept_basis:
            r -= (r @ q) * q
        nr = float(np.linalg.norm(r))
        if nr > 1e-12 * max(1.0, float(np.linalg.norm(row))):
            kept_basis.append(r / nr)
            keep.append(i)
    x_ls, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.max(np.abs(a @ x_ls - b), initial=0.0) > FEAS_TOL:
        return None
    return a[keep], b[keep]


def solve_qp(problem: QpProblem) -> SolveResult:
    """Minimize x^T Q x over the tube constraints.

    Q must be symmetric PSD (within tolerance).  Returns status OPTIMAL with
    the minimizer, INFEASIBLE when the tubes are contradictory, or
    NUMERIC_FAILURE when the engine could not certify either way.
    """
    wc, v, _ = _checked_psd(problem.quadratic, "quadratic")
    n = wc.shape[0]

    eq_rows, eq_rhs = [], []
    in_rows, in_lo, in_hi = [], [], []
    for con in problem.constraints:
        row = np.asarray(con.row, dtype=float)
        if row.shape != (n,) or not np.all(np.isfinite(row)):
            raise ValueError("constraint row has wrong shape or non-finite entries")
        if not np.isfinite(con.target) or not np.isfinite(con.half_width):
            raise ValueError("constraint bounds must be finite")
        if con.half_width < 0.0:
            raise ValueError("half_width must be nonnegative")
        row_u = row @ v
        if con.half_width == 0.0:
            eq_rows.append(row_u)
            eq_rhs.append(con.target)
        else:
            in_rows.append(row_u)
            in_lo.append(con.target - con.half_width)
            in_hi.append(con.target + con.half_width)

    if not eq_rows and not in_rows:
        x = np.zeros(n)
        return SolveResult(SolveStatus.OPTIMAL, 0.0, x, 0.0)

    a_eq = np.array(eq_rows) if eq_rows else np.zeros((0, n))
    b_eq = np.array(eq_rhs)
    g_in = np.array(in_rows) if in_rows else np.zeros((0, n))
    lo = np.array(in_lo)
    hi = np.array(in_hi)

    if eq_rows:
        reduced = _independent_rows(a_eq, b_eq)
        if reduced is None:
            return _failed(SolveStatus.INFEASIBLE)
        a_eq, b_eq = reduced

    g = np.vstack([g_in, -g_in]) if len(in_rows) else np.zeros((0, n))
    h = np.concatenate([hi, -lo])

    sol = _coneqp(
        _cvx(np.diag(2.0 * wc)),
        _cvx(np.zeros(n)),
        _cvx(g),
        _cvx(h),
        a=_cvx(a_eq) if len(a_eq) else None,
        b=_cvx(b_eq) if len(a_eq) else None,
    )

    if sol is None or sol["status"] != "optimal":
        rows_all = np.vstack([g_in, a_eq]) if len(a_eq) else g_in
        lo_all = np.concatenate([lo, b_eq])
        hi_all = np.concatenate([hi, b_eq])
        if rows_all.size == 0:
            return _failed(SolveStatus.NUMERIC_FAILURE)
        return _failed(_phase_one(rows_all, lo_all, hi_all))

    u = np.asarray(sol["x"]).ravel()
    viol = 0.0
    if len(in_rows):
        r = g_in @ u
        viol = max(viol, float(np.max(np.maximum(r - hi, lo - r), initial=0.0)))
    if len(a_eq):
        viol = max(viol, float(np.max(np.abs(a_eq @ u - b_eq), initial=0.0)))
    grad = 2.0 * wc * u
    stat = grad.copy()
    if len(in_rows):
        stat += g.T @ np.asarray(sol["z"]).ravel()
    if len(a_eq):
        stat += a_eq.T @ np.asarray(sol["y"]).ravel()
    kkt = float(np.max(np.abs(stat))) / max(1.0, float(np.max(np.abs(grad), initial=0.0)))
    if viol > FEAS_TOL or kkt > KKT_TOL:
        return _failed(SolveStatus.NUMERIC_FAILURE)

    x = v @ u
    obj = float(x @ (np.asarray(problem.quadratic, dtype=float) @ x))
    return SolveResult(SolveStatus.OPTIMAL, obj, x, kkt)


def solve_ball_lp(problem: BallLpProblem) -> SolveResult:
    """Extremize q^T beta over {beta^T M beta <= Gamma^2} cut by selector tubes.

    The objective must act through the metric range (q = M L for some L);
    components of beta in the nullspace of M are irrelevant to every term.
    """
    if not (problem.radius > 0.0 and np.isfinite(problem.radius)):
        raise ValueError("radius must be positive and finite")
    q = np.asarray(problem.objective, dtype=float)
    wc, v, _ = _checked_psd(problem.metric, "metric")
    n = wc.shape[0]
    if q.shape != (n,) or not np.all(np.isfinite(q)):
        raise ValueError("objective has wrong shape or non-finite entries")

    s = np.sqrt(wc)
    g_obj = (v.T @ q) / s
    c = -g_obj if problem.maximize else g_obj

    rows, lo, hi = [], [], []
    for con in problem.constraints:
        if not (0 <= con.index < n):
            raise ValueError("selector index out of range")
        if con.half_width < 0.0:
            raise ValueError("half_width must be nonnegative")
        if not np.isfinite(con.target) or not np.isfinite(con.half_width):
            raise ValueError("constraint bounds must be finite")
        rows.append(v[con.index, :] * s)
        lo.append(con.target - con.half_width)
        hi.append(con.target + con.half_width)
    m = len(rows)
    rows_z = np.array(rows) if m else np.zeros((0, n))
    lo = np.array(lo)
    hi = np.array(hi)

    g_lin = np.vstack([rows_z, -rows_z]) if m else np.zeros((0, n))
    h_lin = np.concatenate([hi, -lo])
    g_soc = np.vstack([np.zeros((1, n)), -np.eye(n)])
    h_soc = np.concatenate([[problem.radius], np.zeros(n)])
    g = np.vstack([g_lin, g_soc])
    h = np.concatenate([h_lin, h_soc])
    dims = {"l": 2 * m, "q": [n + 1], "s": []}

    sol = _conelp(c, g, h, dims=dims)
    if sol is None:
        return _failed(SolveStatus.NUMERIC_FAILURE)
    if sol["status"] == "primal infeasible":
        return _failed(SolveStatus.INFEASIBLE)
    if sol["status"] != "optimal":
        return _failed(SolveStatus.NUMERIC_FAILURE)

    z = np.asarray(sol["x"]).ravel()
    viol = max(0.0, float(np.linalg.norm(z)) - problem.radius)
    if m:
        r = rows_z @ z
        viol = max(viol, float(np.max(np.maximum(r - hi, lo - r), initial=0.0)))
    dual = np.asarray(sol["z"]).ravel()
    kkt = float(np.max(np.abs(c + g.T @ dual))) / max(1.0, float(np.max(np.abs(c))))
    if viol > FEAS_TOL or kkt > KKT_TOL:
        return _failed(SolveStatus.NUMERIC_FAILURE)

    beta = v @ (z / s)
    return SolveResult(SolveStatus.OPTIMAL, float(g_obj @ z), beta, kkt)
