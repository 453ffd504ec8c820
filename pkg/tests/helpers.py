"""Shared fixtures and oracles for the test suite."""

import numpy as np

from kbesc import BallLpProblem, Dataset, KernelSpec, Sample, SelectorTube
from kbesc import kernels

BENCH_SIGMA = 5.0
BENCH_STAR = np.array([3.0, 1.0])


def bench_truth(theta):
    """Closed-form benchmark cost map: a unit-norm kernel section."""
    d = np.asarray(theta, dtype=float) - BENCH_STAR
    return float(-np.exp(-(d @ d) / 50.0))


def bench_truth_grad(theta):
    spec = KernelSpec(length_scale=BENCH_SIGMA)
    return -kernels.grad1(spec, np.asarray(theta, dtype=float), BENCH_STAR)


def dithered_dataset(rng, n_updates=4, delta_bar=2.5e-3, c_v=1e-2,
                     start=(-2.0, -4.0), drift=0.45, exact=False):
    """Synthetic run-style dataset: dither clusters marching toward the well.

    Outputs are the benchmark truth, optionally perturbed inside the tube so
    the data stays consistent with the true map by construction.
    """
    theta = np.asarray(start, dtype=float)
    samples = []
    for k in range(1, n_updates + 1):
        for j in range(2):
            for sign in (-1.0, 1.0):
                p = theta.copy()
                p[j] += sign * c_v
                y = bench_truth(p)
                if not exact:
                    y += 0.8 * delta_bar * rng.uniform(-1.0, 1.0)
                samples.append(Sample(tuple(p), y, k))
        theta = theta + drift * (BENCH_STAR - theta) / np.linalg.norm(BENCH_STAR - theta) * 2.0
    return Dataset(samples)


def random_ball_instance(rng, metric, maximize=None):
    """Random ball-LP whose tube targets sit near a sampled in-ball point,
    so the feasible set keeps enough mass for Monte-Carlo comparison."""
    n = metric.shape[0]
    w, v = np.linalg.eigh(metric)
    radius = float(rng.uniform(0.5, 3.0))
    z0 = rng.standard_normal(n)
    z0 *= 0.5 * radius * rng.uniform() ** (1.0 / n) / np.linalg.norm(z0)
    beta0 = v @ (z0 / np.sqrt(w))
    vals = metric @ beta0
    k = int(rng.integers(1, min(4, n) + 1))
    idx = rng.choice(n, size=k, replace=False)
    cons = []
    for i in idx:
        hw = float(rng.uniform(0.1, 0.6))
        cons.append(
            SelectorTube(int(i), float(vals[i] + rng.uniform(-0.3, 0.3) * hw), hw)
        )
    q = metric @ rng.standard_normal(n)
    if maximize is None:
        maximize = bool(rng.integers(0, 2))
    return BallLpProblem(metric, q, radius, tuple(cons), maximize)


def mc_ball_extremum(prob, n_samples, rng):
    """Empirical extremum of a ball-LP objective over uniform metric-ball
    samples that satisfy the tubes.  Returns (value, feasible_count)."""
    m = prob.metric
    n = m.shape[0]
    w, v = np.linalg.eigh(m)
    z = rng.standard_normal((n_samples, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z *= prob.radius * rng.uniform(0.0, 1.0, (n_samples, 1)) ** (1.0 / n)
    betas = (v @ (z / np.sqrt(w)).T).T
    vals = betas @ m.T
    mask = np.ones(n_samples, dtype=bool)
    for con in prob.constraints:
        mask &= np.abs(vals[:, con.index] - con.target) <= con.half_width
    feas = betas[mask]
    if feas.shape[0] == 0:
        return None, 0
    obj = feas @ prob.objective
    return (float(obj.max()) if prob.maximize else float(obj.min())), feas.shape[0]


def fd_gradient(fn, x, h=1e-5):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g
