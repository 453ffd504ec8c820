"""Kernel evaluations, derivatives, and the structured Gram matrices.

Everything downstream (surrogate fitting, certificate programs) reduces to
inner products between three kinds of RKHS elements: function-value slices
kappa(., z), first-derivative slices d/dz_j kappa(., z), and combinations
thereof.  This module evaluates those inner products in closed form and
assembles them into labeled symmetric blocks.

Kernels must be twice continuously differentiable with closed-form first and
second partials; numeric or automatic differentiation is deliberately not
supported, since the certificate matrices inherit any derivative error
directly.  New kernels register an ops implementation in ``_OPS``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQUARED_EXPONENTIAL = "squared_exponential"

# Inputs closer than this (Euclidean) are treated as the same point when
# assembling certificate matrices; keep-first.
DEDUP_TOL = 1e-9

VALUE = "value"
DERIVATIVE = "derivative"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    kind
        Registered kernel family name.
    length_scale
        The sigma in exp(-||a-b||^2 / (2 sigma^2)) for the squared
        exponential family.
    """

    kind: str = SQUARED_EXPONENTIAL
    length_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _OPS:
            raise ValueError(f"unknown kernel kind: {self.kind!r}")
        if not (self.length_scale > 0.0 and np.isfinite(self.length_scale)):
            raise ValueError("length_scale must be positive and finite")


class _SquaredExponentialOps:
    """Closed-form kernel, gradient, and cross-Hessian for the SE family."""

    def __init__(self, sigma: float):
        self.sigma = float(sigma)
        self.inv_sq = 1.0 / (sigma * sigma)

    def value(self, a: np.ndarray, b: np.ndarray) -> float:
        d = a - b
        return float(np.exp(-0.5 * self.inv_sq * (d @ d)))

    def pairwise(self, pts_a: np.ndarray, pts_b: np.ndarray) -> np.ndarray:
        d = pts_a[:, None, :] - pts_b[None, :, :]
        return np.exp(-0.5 * self.inv_sq * np.einsum("ijk,ijk->ij", d, d))

    def grad_a(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = a - b
        return -self.inv_sq * d * np.exp(-0.5 * self.inv_sq * (d @ d))

    def grad_a_many(self, a: np.ndarray, pts_b: np.ndarray) -> np.ndarray:
        # rows: one per b; columns: components of d/da kappa(a, b)
        d = a[None, :] - pts_b
        k = np.exp(-0.5 * self.inv_sq * np.einsum("ij,ij->i", d, d))
        return -self.inv_sq * d * k[:, None]

    def cross_hessian(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = a - b
        k = np.exp(-0.5 * self.inv_sq * (d @ d))
        n = a.shape[0]
        return (self.inv_sq * np.eye(n) - self.inv_sq**2 * np.outer(d, d)) * k


_OPS = {SQUARED_EXPONENTIAL: _SquaredExponentialOps}


def _ops(spec: KernelSpec):
    return _OPS[spec.kind](spec.length_scale)


def _as_points(arr, what: str) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(arr, dtype=float))
    if pts.ndim != 2:
        raise ValueError(f"{what} must be a 2-d array of points")
    return pts


def value(spec: KernelSpec, a, b) -> float:
    """kappa(a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _ops(spec).value(a, b)


def grad1(spec: KernelSpec, a, b) -> np.ndarray:
    """Gradient of kappa in the first argument, evaluated at (a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _ops(spec).grad_a(a, b)


def grad2(spec: KernelSpec, a, b) -> np.ndarray:
    """Gradient in the second argument; for symmetric kernels -grad1."""
    return -grad1(spec, a, b)


def pairwise(spec: KernelSpec, pts_a, pts_b) -> np.ndarray:
    """Matrix of kappa(pts_a[i], pts_b[j]) values."""
    pa = _as_points(pts_a, "pts_a")
    pb = _as_points(pts_b, "pts_b")
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        return np.zeros((pa.shape[0], pb.shape[0]))
    return _ops(spec).pairwise(pa, pb)


def grad1_many(spec: KernelSpec, a, pts_b) -> np.ndarray:
    """Stack of grad1(a, b) rows, one per point in pts_b; shape (len(pts_b), n)."""
    a = np.asarray(a, dtype=float)
    pb = _as_points(pts_b, "pts_b")
    if pb.shape[0] == 0:
        return np.zeros((0, a.shape[0]))
    return _ops(spec).grad_a_many(a, pb)


def cross_hessian(spec: KernelSpec, a, b) -> np.ndarray:
    """Matrix of mixed second partials d^2 kappa / da_i db_j at (a, b).

    Entry (i, j) is the RKHS inner product of the derivative slices in
    directions e_i at a and e_j at b.  For the squared exponential at a == b
    this is I / sigma^2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _ops(spec).cross_hessian(a, b)


@dataclass(frozen=True)
class SliceLabel:
    """Tags one row/column of a structured Gram block.

    kind is VALUE for kappa(., point) slices and DERIVATIVE for
    d/dpoint_direction kappa(., point) slices.
    """

    kind: str
    point: tuple
    direction: int | None = None


@dataclass(frozen=True)
class GramBlock:
    """Symmetric PSD matrix of slice inner products with per-slice labels.

    index_map sends each *requested* slice position (in construction order,
    before duplicate removal) to its retained row; duplicates share a row.
    """

    matrix: np.ndarray
    labels: tuple
    index_map: tuple = field(default=())

    @property
    def row_labels(self):
        return self.labels

    @property
    def col_labels(self):
        return self.labels

    def __post_init__(self):
        if self.matrix.shape != (len(self.labels), len(self.labels)):
            raise ValueError("matrix dimensions do not match label list")


def gram(spec: KernelSpec, inputs) -> np.ndarray:
    """Plain kernel matrix K[i, j] = kappa(inputs[i], inputs[j])."""
    pts = _as_points(inputs, "inputs")
    if pts.shape[0] == 0:
        return np.zeros((0, 0))
    ops = _ops(spec)
    mat = ops.pairwise(pts, pts)
    return 0.5 * (mat + mat.T)


def _dedup_points(groups) -> tuple:
    """Merge points across ordered groups; keep-first within DEDUP_TOL.

    groups is a list of (M_i, n) arrays.  Returns (unique (U, n) array,
    index_map over the concatenated order).
    """
    retained: list[np.ndarray] = []
    index_map: list[int] = []
    for grp in groups:
        for p in grp:
            hit = None
            for r, q in enumerate(retained):
                if np.linalg.norm(p - q) <= DEDUP_TOL:
                    hit = r
                    break
            if hit is None:
                retained.append(p)
                index_map.append(len(retained) - 1)
            else:
                index_map.append(hit)
    pts = np.array(retained) if retained else np.zeros((0, 0))
    return pts, tuple(index_map)


def _build_cert_block(spec: KernelSpec, value_groups, theta: np.ndarray) -> GramBlock:
    """Assemble [[K_vv, G^T], [G, H]] with deduplicated value slices.

    Value slices come first (unique generating points, construction order),
    then one derivative slice per coordinate direction at theta.  G[l, i] is
    the inner product of kappa(., point_i) with the direction-l derivative
    slice at theta, i.e. d/dtheta_l kappa(theta, point_i).
    """
    n = theta.shape[0]
    pts, index_map = _dedup_points(value_groups)
    m = pts.shape[0]
    ops = _ops(spec)

    mat = np.zeros((m + n, m + n))
    if m > 0:
        kvv = ops.pairwise(pts, pts)
        mat[:m, :m] = 0.5 * (kvv + kvv.T)
        g = ops.grad_a_many(theta, pts).T  # (n, m)
        mat[m:, :m] = g
        mat[:m, m:] = g.T
    mat[m:, m:] = cross_hessian(spec, theta, theta)

    labels = [SliceLabel(VALUE, tuple(p)) for p in pts]
    labels += [SliceLabel(DERIVATIVE, tuple(theta), l) for l in range(n)]
    full_map = list(index_map) + [m + l for l in range(n)]
    return GramBlock(mat, tuple(labels), tuple(full_map))


def cert_matrix(spec: KernelSpec, inputs, theta) -> GramBlock:
    """Gram block spanning value slices at the data inputs plus the
    derivative slices at theta.  Used by the descent-margin program."""
    theta = np.asarray(theta, dtype=float)
    pts = _as_points(inputs, "inputs") if np.size(inputs) else np.zeros((0, theta.shape[0]))
    return _build_cert_block(spec, [pts], theta)


def cert_matrix_prime(spec: KernelSpec, inputs, theta, theta_plus) -> GramBlock:
    """Gram block for the step-acceptance program.

    Value-slice order is [data inputs..., theta, theta_plus] followed by the
    derivative slices at theta; any value slice whose generating input
    duplicates an earlier one (within DEDUP_TOL) is dropped, and index_map
    records where each requested slice ended up.
    """
    theta = np.asarray(theta, dtype=float)
    theta_plus = np.asarray(theta_plus, dtype=float)
    pts = _as_points(inputs, "inputs") if np.size(inputs) else np.zeros((0, theta.shape[0]))
    groups = [pts, theta[None, :], theta_plus[None, :]]
    return _build_cert_block(spec, groups, theta)
