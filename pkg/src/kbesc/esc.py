"""Sampled-data extremum-seeking with certified surrogate gradient steps.

The baseline tuner estimates the cost gradient by dithering each input
coordinate and waiting out the plant transient, which costs 2n measurements
per update.  This loop keeps every sample ever taken, refits the min-norm
surrogate each round, and asks the certifier two questions before an update:
does every cost map consistent with the data descend along the surrogate
gradient, and does some admissible step size provably satisfy sufficient
decrease?  When both answers are yes the update is a free surrogate gradient
step; otherwise it falls back to one dithered standard step and the dataset
grows.  Certificates are conservative, so a wrong answer costs measurements,
never convergence.
"""

from __future__ import annotations

import csv
import enum
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import certifier, kernels
from .approximator import Dataset, Sample, fit
from .errors import (
    ApproximationUnavailable,
    CertificationUnavailable,
    DataInconsistencyError,
)
from .plant import DEFAULT_DT, PlantModel, PlantSession


class StepKind(enum.Enum):
    STANDARD = "standard"
    KERNEL = "kernel"


@dataclass(frozen=True)
class EscConfig:
    """Tuning parameters.

    dither_amplitude, standard_gain, waiting_time drive the baseline
    dithered step; tube_half_width and norm_bound describe what is assumed
    about the cost map (measurement error bound and RKHS norm bound);
    armijo_c, gain_min, gain_max, backtrack parameterize the certified line
    search.  kb_enabled False disables surrogate steps entirely, giving the
    pure baseline tuner.  stop_tol/stop_patience optionally end the run
    after enough consecutive updates move theta_hat less than stop_tol.
    """

    kernel: kernels.KernelSpec
    dither_amplitude: float
    standard_gain: float
    waiting_time: float
    tube_half_width: float
    norm_bound: float
    armijo_c: float
    gain_min: float
    gain_max: float
    backtrack: float
    max_updates: int
    kb_enabled: bool = True
    dt: float = DEFAULT_DT
    stop_tol: float | None = None
    stop_patience: int = 0

    def __post_init__(self):
        positive = {
            "dither_amplitude": self.dither_amplitude,
            "standard_gain": self.standard_gain,
            "waiting_time": self.waiting_time,
            "norm_bound": self.norm_bound,
            "armijo_c": self.armijo_c,
            "gain_min": self.gain_min,
            "gain_max": self.gain_max,
            "dt": self.dt,
        }
        for name, v in positive.items():
            if not (v > 0.0 and np.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite")
        if self.tube_half_width < 0.0:
            raise ValueError("tube_half_width must be nonnegative")
        if not (0.0 < self.backtrack < 1.0):
            raise ValueError("backtrack must lie in (0, 1)")
        if self.gain_min > self.gain_max:
            raise ValueError("gain_min must not exceed gain_max")
        if self.max_updates < 0:
            raise ValueError("max_updates must be nonnegative")
        if self.stop_patience < 0:
            raise ValueError("stop_patience must be nonnegative")


@dataclass(frozen=True, eq=False)
class UpdateRecord:
    """One parameter update and the evidence it was based on.

    measurements is the cumulative sample count after this update;
    descent_bound / armijo_bound are the certificate values when they were
    computed (None otherwise); gain is the accepted surrogate step size for
    kernel updates.  f_true is the plant's closed-form cost at theta_after
    when the model provides one.
    """

    index: int
    kind: StepKind
    theta_before: np.ndarray | None
    theta_after: np.ndarray
    gain: float | None
    measurements: int
    descent_bound: float | None
    armijo_bound: float | None
    f_true: float | None
    wall_time: float | None = None


class RunTrace:
    """Ordered update records plus the dataset accumulated along the run."""

    def __init__(self, records=(), data: Dataset | None = None):
        self.records: list[UpdateRecord] = list(records)
        self.data = data if data is not None else Dataset()

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def kernel_records(self) -> list[UpdateRecord]:
        return [r for r in self.records if r.kind is StepKind.KERNEL]

    @property
    def total_measurements(self) -> int:
        return self.records[-1].measurements if self.records else 0

    @property
    def final_theta(self) -> np.ndarray:
        if not self.records:
            raise ValueError("empty trace")
        return self.records[-1].theta_after

    def to_csv(self, path):
        """Write rows k,kind,theta_hat_1..n,mu,N_k,b_lower,b_upper,f_true."""
        if not self.records:
            raise ValueError("empty trace")
        n = self.records[0].theta_after.shape[0]

        def cell(v):
            return "" if v is None else repr(float(v))

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["k", "kind"]
                + [f"theta_hat_{j + 1}" for j in range(n)]
                + ["mu", "N_k", "b_lower", "b_upper", "f_true"]
            )
            for r in self.records:
                writer.writerow(
                    [r.index, r.kind.value]
                    + [repr(float(v)) for v in r.theta_after]
                    + [cell(r.gain), r.measurements, cell(r.descent_bound),
                       cell(r.armijo_bound), cell(r.f_true)]
                )

    @classmethod
    def from_csv(cls, path) -> "RunTrace":
        path = Path(path)
        records = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n = len(header) - 7
            expected = (
                ["k", "kind"]
                + [f"theta_hat_{j + 1}" for j in range(n)]
                + ["mu", "N_k", "b_lower", "b_upper", "f_true"]
            )
            if n < 1 or header != expected:
                raise ValueError(f"unrecognized trace header in {path}")

            def cell(v):
                return None if v == "" else float(v)

            prev_theta = None
            for row in reader:
                theta = np.array([float(v) for v in row[2 : 2 + n]])
                records.append(
                    UpdateRecord(
                        index=int(row[0]),
                        kind=StepKind(row[1]),
                        theta_before=prev_theta,
                        theta_after=theta,
                        gain=cell(row[2 + n]),
                        measurements=int(row[3 + n]),
                        descent_bound=cell(row[4 + n]),
                        armijo_bound=cell(row[5 + n]),
                        f_true=cell(row[6 + n]),
                    )
                )
                prev_theta = theta
        return cls(records)


def standard_step(session: PlantSession, theta_hat, cfg: EscConfig, update_index: int):
    """One dithered gradient update: 2n held measurements, central
    differences, and a fixed-gain step.  Returns (theta_next, samples)."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    n = theta_hat.shape[0]
    grad_est = np.zeros(n)
    samples = []
    for j in range(n):
        pair = []
        for sign in (-1.0, 1.0):
            dither = theta_hat.copy()
            dither[j] += sign * cfg.dither_amplitude
            y = session.apply(dither, cfg.waiting_time)
            samples.append(Sample(tuple(dither), y, update_index))
            pair.append(y)
        grad_est[j] = (pair[1] - pair[0]) / (2.0 * cfg.dither_amplitude)
    return theta_hat - cfg.standard_gain * grad_est, samples


def line_search(m, data: Dataset, theta_hat, cfg: EscConfig):
    """Backtracking search over certified step sizes.

    Tries gain_max, gain_max*backtrack, ... down to gain_min and returns
    (gain, bound) for the first candidate whose step-acceptance bound is
    nonpositive, or (None, last_bound) when every candidate fails.  A
    candidate whose program does not solve simply stays uncertified and the
    search backtracks past it.
    """
    gain = cfg.gain_max
    last = None
    while gain >= cfg.gain_min:
        try:
            bound = certifier.armijo_upper_bound(
                m, data, theta_hat, gain, cfg.armijo_c,
                gamma=cfg.norm_bound, delta_bar=cfg.tube_half_width,
            )
        except CertificationUnavailable:
            bound = None
        if bound is not None:
            last = bound
            if bound.value <= 0.0:
                return gain, bound
        gain *= cfg.backtrack
    return None, last


def kernel_step(theta_hat, m, gain: float) -> np.ndarray:
    """Surrogate gradient step: theta - gain * grad m(theta)."""
    g = m.gradient(np.asarray(theta_hat, dtype=float))
    return np.asarray(theta_hat, dtype=float) - gain * g


def run(
    model: PlantModel,
    cfg: EscConfig,
    theta0,
    data0: Dataset | None = None,
    k_bar: int | None = None,
    x0=None,
    observer=None,
    observe_every: int = 1,
) -> RunTrace:
    """Run the tuner for k_bar updates starting from theta0.

    An empty initial dataset triggers one bootstrap standard step (counted
    as update 1) so the first fit has something to work with.  Surrogate
    steps take no measurements; standard steps append 2n samples.  Any
    surrogate-side numerical failure (fit or certificate) falls back to a
    standard step for that round, so the loop never stalls.
    """
    if k_bar is None:
        k_bar = cfg.max_updates
    theta = np.asarray(theta0, dtype=float)
    if theta.shape != (model.input_dim,):
        raise ValueError("theta0 has wrong dimension")
    session = PlantSession(model, x0, cfg.dt, observer, observe_every)
    data = data0.copy() if data0 is not None else Dataset()
    trace = RunTrace(data=data)
    truth = model.truth

    def record(k, kind, before, after, gain, b_lo, b_up, t_start):
        trace.records.append(
            UpdateRecord(
                index=k,
                kind=kind,
                theta_before=before,
                theta_after=after,
                gain=gain,
                measurements=len(data),
                descent_bound=b_lo,
                armijo_bound=b_up,
                f_true=None if truth is None else float(truth(after)),
                wall_time=time.perf_counter() - t_start,
            )
        )

    k = 0
    if len(data) == 0 and k_bar > 0:
        t_start = time.perf_counter()
        theta_next, samples = standard_step(session, theta, cfg, 1)
        data.extend(samples)
        k = 1
        record(k, StepKind.STANDARD, theta, theta_next, None, None, None, t_start)
        theta = theta_next

    quiet = 0
    while k < k_bar:
        t_start = time.perf_counter()
        k += 1
        b_lo = None
        b_up = None
        gain = None
        accepted = None
        if cfg.kb_enabled:
            # fit-time tube contradictions mean broken data and propagate;
            # certificate-time infeasibility only means the norm-ball
            # assumption cannot absorb the data, so we measure instead
            m = None
            try:
                m = fit(data, cfg.kernel, cfg.tube_half_width, cfg.norm_bound)
            except ApproximationUnavailable:
                pass
            if m is not None:
                try:
                    bound = certifier.descent_lower_bound(
                        m, data, theta,
                        gamma=cfg.norm_bound, delta_bar=cfg.tube_half_width,
                    )
                    b_lo = bound.value
                    if b_lo > 0.0:
                        gain, accepted = line_search(m, data, theta, cfg)
                        if accepted is not None:
                            b_up = accepted.value
                except (CertificationUnavailable, DataInconsistencyError):
                    gain = None

        if gain is not None:
            theta_next = kernel_step(theta, m, gain)
            record(k, StepKind.KERNEL, theta, theta_next, gain, b_lo, b_up, t_start)
        else:
            theta_next, samples = standard_step(session, theta, cfg, k)
            data.extend(samples)
            record(k, StepKind.STANDARD, theta, theta_next, None, b_lo, b_up, t_start)

        moved = float(np.linalg.norm(theta_next - theta))
        theta = theta_next
        if cfg.stop_tol is not None:
            quiet = quiet + 1 if moved <= cfg.stop_tol else 0
            if quiet >= max(1, cfg.stop_patience):
                break
    return trace
