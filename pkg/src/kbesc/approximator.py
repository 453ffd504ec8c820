"""Measurement bookkeeping and the min-norm surrogate of the cost map.

The optimizer never sees the plant's cost map directly; it sees noisy-by-
truncation measurements y_i = f(theta_i) + e_i with |e_i| <= delta_bar.  The
surrogate m is the minimum-RKHS-norm function threading every measurement
tube, found by a convex QP over kernel sections at the measured inputs.  Its
gradient replaces finite-difference estimates whenever the certificates in
:mod:`kbesc.certifier` vouch for it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conic, kernels
from .errors import ApproximationUnavailable, DataInconsistencyError


@dataclass(frozen=True)
class Sample:
    """One steady-state measurement: input point, output, and the update
    index during which it was collected."""

    input: tuple
    output: float
    update_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input", tuple(float(v) for v in self.input))
        object.__setattr__(self, "output", float(self.output))
        if not all(np.isfinite(self.input)) or not np.isfinite(self.output):
            raise ValueError("sample entries must be finite")


@dataclass(frozen=True)
class CollapsedData:
    """Duplicate-free view of a dataset.

    Inputs closer than the dedup tolerance are merged; their tubes
    [y - delta_bar, y + delta_bar] are intersected, so targets/half_widths
    describe the tightest interval every merged measurement allows.
    index_map sends each original sample to its representative row.
    """

    inputs: np.ndarray
    targets: np.ndarray
    half_widths: np.ndarray
    index_map: tuple


class Dataset:
    """Append-only collection of samples with CSV import/export."""

    def __init__(self, samples=()):
        self._samples: list[Sample] = list(samples)

    def __len__(self):
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)

    def __getitem__(self, i):
        return self._samples[i]

    def append(self, sample: Sample):
        self._samples.append(sample)

    def extend(self, samples):
        self._samples.extend(samples)

    def copy(self) -> "Dataset":
        return Dataset(self._samples)

    @property
    def input_dim(self) -> int:
        if not self._samples:
            raise ValueError("empty dataset has no input dimension")
        return len(self._samples[0].input)

    def inputs(self) -> np.ndarray:
        if not self._samples:
            return np.zeros((0, 0))
        return np.array([s.input for s in self._samples], dtype=float)

    def outputs(self) -> np.ndarray:
        return np.array([s.output for s in self._samples], dtype=float)

    def collapse(self, delta_bar: float) -> CollapsedData:
        """Merge duplicate inputs and intersect their tubes.

        Raises DataInconsistencyError when merged tubes have empty
        intersection (outputs at one point differ by more than 2*delta_bar).
        """
        if delta_bar < 0.0:
            raise ValueError("delta_bar must be nonnegative")
        retained: list[np.ndarray] = []
        lo: list[float] = []
        hi: list[float] = []
        index_map: list[int] = []
        for s in self._samples:
            p = np.asarray(s.input, dtype=float)
            hit = None
            for r, q in enumerate(retained):
                if np.linalg.norm(p - q) <= kernels.DEDUP_TOL:
                    hit = r
                    break
            if hit is None:
                retained.append(p)
                lo.append(s.output - delta_bar)
                hi.append(s.output + delta_bar)
                index_map.append(len(retained) - 1)
            else:
                lo[hit] = max(lo[hit], s.output - delta_bar)
                hi[hit] = min(hi[hit], s.output + delta_bar)
                if lo[hit] > hi[hit]:
                    raise DataInconsistencyError(
                        f"duplicate input {tuple(p)} carries contradictory outputs"
                    )
                index_map.append(hit)
        if retained:
            inputs = np.array(retained)
            lo_a = np.array(lo)
            hi_a = np.array(hi)
        else:
            inputs = np.zeros((0, 0))
            lo_a = hi_a = np.zeros(0)
        return CollapsedData(
            inputs, 0.5 * (lo_a + hi_a), 0.5 * (hi_a - lo_a), tuple(index_map)
        )

    def to_csv(self, path):
        """Write rows i,theta_1..theta_n,y,update_k."""
        n = self.input_dim if self._samples else 0
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["i"] + [f"theta_{j + 1}" for j in range(n)] + ["y", "update_k"]
            )
            for i, s in enumerate(self._samples):
                writer.writerow(
                    [i] + [repr(v) for v in s.input] + [repr(s.output), s.update_index]
                )

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        samples = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n = len(header) - 3
            if n < 1 or header[0] != "i" or header[-2:] != ["y", "update_k"]:
                raise ValueError(f"unrecognized dataset header in {path}")
            for row in reader:
                samples.append(
                    Sample(
                        tuple(float(v) for v in row[1 : 1 + n]),
                        float(row[1 + n]),
                        int(row[2 + n]),
                    )
                )
        return cls(samples)


@dataclass(frozen=True, eq=False)
class Approximation:
    """Fitted surrogate m(.) = sum_i weights[i] * kappa(., centers[i]).

    centers are the duplicate-free measured inputs; delta_bar and gamma
    record the tube half-width and norm bound the fit was produced under.
    """

    kernel: kernels.KernelSpec
    centers: np.ndarray
    weights: np.ndarray
    delta_bar: float
    gamma: float
    _gram: np.ndarray = field(repr=False, default=None)

    def __call__(self, theta) -> float:
        if self.centers.shape[0] == 0:
            return 0.0
        theta = np.asarray(theta, dtype=float)
        row = kernels.pairwise(self.kernel, theta[None, :], self.centers)[0]
        return float(row @ self.weights)

    def gradient(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.centers.shape[0] == 0:
            return np.zeros_like(theta)
        g = kernels.grad1_many(self.kernel, theta, self.centers)
        return g.T @ self.weights

    def rkhs_norm(self) -> float:
        if self.centers.shape[0] == 0:
            return 0.0
        k = self._gram if self._gram is not None else kernels.gram(self.kernel, self.centers)
        return float(np.sqrt(max(0.0, self.weights @ (k @ self.weights))))


def fit(
    data: Dataset,
    kernel: kernels.KernelSpec,
    delta_bar: float,
    gamma: float,
) -> Approximation:
    """Minimum-norm interpolant through the measurement tubes.

    Solves min alpha^T K alpha subject to |K[i] . alpha - y_i| <= delta_bar
    over the duplicate-collapsed inputs.  An empty dataset yields the zero
    surrogate.  Contradictory tubes raise DataInconsistencyError; a solver
    breakdown raises ApproximationUnavailable.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    if len(data) == 0:
        return Approximation(kernel, np.zeros((0, 0)), np.zeros(0), delta_bar, gamma)
    col = data.collapse(delta_bar)
    k = kernels.gram(kernel, col.inputs)
    cons = tuple(
        conic.TubeConstraint(k[i], float(col.targets[i]), float(col.half_widths[i]))
        for i in range(k.shape[0])
    )
    res = conic.solve_qp(conic.QpProblem(k, cons))
    if res.status is conic.SolveStatus.INFEASIBLE:
        raise DataInconsistencyError("no function threads the measurement tubes")
    if res.status is not conic.SolveStatus.OPTIMAL:
        raise ApproximationUnavailable("min-norm fit did not solve to optimality")
    return Approximation(kernel, col.inputs, res.solution, delta_bar, gamma, k)
