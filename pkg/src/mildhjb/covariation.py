"""Epsilon-regularized covariations and weak-Dirichlet diagnostics.

Paths live on a uniform grid and may carry leading replica axes. Functionals
are finite sums of rank-one tensors u (x) w; for real-valued paths u and w are
scalars.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .sde import replica_rng
from .spectral import inner


@dataclass(frozen=True)
class ScalarPath:
    grid: object
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape[-1] != self.grid.M + 1:
            raise ConfigurationError(f"path has {values.shape[-1]} values, grid has {self.grid.M + 1} nodes")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ChiFunctional:
    """Rank-one functional with <phi, a (x) b> = <u, a><w, b>."""

    u: object = 1.0
    w: object = 1.0

    def evaluate(self, a, b):
        return _pair(self.u, a) * _pair(self.w, b)


def _pair(u, a):
    u = np.asarray(u, dtype=float)
    a = np.asarray(a, dtype=float)
    return u * a if u.ndim == 0 else inner(u, a)


def _values(path):
    return path.values if isinstance(path, ScalarPath) else np.asarray(path, dtype=float)


def _shift(grid, eps):
    m = eps / grid.h
    if eps <= 0 or not math.isclose(m, round(m), rel_tol=1e-9, abs_tol=1e-9) or round(m) < 1:
        raise ConfigurationError(f"epsilon {eps} is not a positive multiple of the grid step {grid.h}")
    return int(round(m))


def _increments(values, m, time_axis):
    """X(t_i + eps) - X(t_i) for i < M, with the path held constant past T."""
    values = np.moveaxis(values, time_axis, -1)
    pad = np.repeat(values[..., -1:], m, axis=-1)
    ext = np.concatenate([values, pad], axis=-1)
    M = values.shape[-1] - 1
    return np.moveaxis(ext[..., m:m + M] - ext[..., :M], -1, time_axis)


def epsilon_covariation(X, Y, phi, eps, grid=None):
    """[X, Y]^eps(phi) at every grid node.

    value(t_k) = sum_{i < k} <u, X(t_i+eps) - X(t_i)> <w, Y(t_i+eps) - Y(t_i)> h / eps.
    Vector paths have shape (..., M+1, N); scalar paths (..., M+1).
    """
    if grid is None:
        grid = X.grid if isinstance(X, ScalarPath) else Y.grid
    terms = phi if isinstance(phi, (list, tuple)) else [phi]
    m = _shift(grid, eps)
    xv, yv = _values(X), _values(Y)
    total = 0.0
    for term in terms:
        tx = -2 if np.ndim(term.u) else -1
        ty = -2 if np.ndim(term.w) else -1
        dx = _pair(term.u, _increments(xv, m, tx))
        dy = _pair(term.w, _increments(yv, m, ty))
        total = total + dx * dy
    integrand = total * (grid.h / eps)
    zero = np.zeros(np.shape(integrand)[:-1] + (1,))
    return ScalarPath(grid, np.concatenate([zero, np.cumsum(integrand, axis=-1)], axis=-1))


@dataclass
class CovariationEstimate:
    epsilons: list
    terminal_mean: list
    terminal_spread: list
    terminal_stderr: list
    sup_deviation: list
    paths: dict = field(default_factory=dict, repr=False)

    def to_record(self):
        return {
            "epsilons": self.epsilons,
            "terminal_mean": self.terminal_mean,
            "terminal_spread": self.terminal_spread,
            "terminal_stderr": self.terminal_stderr,
            "sup_deviation": self.sup_deviation,
        }

    def to_csv(self, path):
        """Replica-mean path per epsilon: columns t, eps=<e>..."""
        first = next(iter(self.paths.values()))
        times = first.grid.nodes
        means = [np.atleast_2d(self.paths[e].values).mean(axis=0) for e in self.epsilons]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"eps={e:.17g}" for e in self.epsilons])
            for k, t in enumerate(times):
                w.writerow([f"{t:.17g}"] + [f"{m[k]:.17g}" for m in means])


def _summaries(values):
    values = np.atleast_1d(values)
    R = values.size
    spread = float(values.std(ddof=1)) if R > 1 else 0.0
    return float(values.mean()), spread, spread / math.sqrt(R)


def covariation_scan_paths(X, Y, phi, epsilons, grid):
    """Scan over epsilons for replica batches X, Y (leading axis = replica)."""
    epsilons = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ConfigurationError("epsilons must be strictly decreasing")
    paths = {e: epsilon_covariation(X, Y, phi, e, grid) for e in epsilons}
    finest = paths[epsilons[-1]].values
    est = CovariationEstimate(epsilons, [], [], [], [], paths)
    for e in epsilons:
        vals = np.atleast_2d(paths[e].values)
        mean, spread, se = _summaries(vals[:, -1])
        est.terminal_mean.append(mean)
        est.terminal_spread.append(spread)
        est.terminal_stderr.append(se)
        est.sup_deviation.append(float(np.mean(np.max(np.abs(vals - np.atleast_2d(finest)), axis=-1))))
    return est


def covariation_scan(sample, phi, epsilons, grid, replicas, seed):
    """Empirical ucp diagnostic of [X, Y]^eps(phi) as eps decreases.

    ``sample(rng)`` returns one replica (X, Y); replica r draws from substream
    (seed, r), so equal seeds reproduce the output exactly.
    """
    pairs = [sample(replica_rng(seed, r)) for r in range(replicas)]
    X = np.stack([p[0] for p in pairs])
    Y = np.stack([p[1] for p in pairs])
    return covariation_scan_paths(X, Y, phi, epsilons, grid)


@dataclass
class OrthogonalityReport:
    epsilons: list
    means: list
    spreads: list
    stderrs: list
    threshold: float
    strictly_decreasing: bool
    banded_decreasing: bool
    passed: bool

    def to_record(self):
        return dict(self.__dict__)


def orthogonality_test(A, N, epsilons, grid, threshold=None, band=3.0):
    """Martingale-orthogonality check of A against N from terminal [A, N]^eps.

    Passes when |mean| at the finest eps is at most ``threshold`` (default
    ``band`` stderr) and |mean| does not increase as eps decreases beyond
    ``band`` stderr.
    """
    est = covariation_scan_paths(A, N, ChiFunctional(), epsilons, grid)
    mags = [abs(m) for m in est.terminal_mean]
    se = est.terminal_stderr
    if threshold is None:
        threshold = band * se[-1]
    strict = all(b < a for a, b in zip(mags, mags[1:]))
    banded = all(mags[k + 1] <= mags[k] + band * se[k + 1] for k in range(len(mags) - 1))
    passed = bool(mags[-1] <= threshold and banded)
    return OrthogonalityReport(est.epsilons, est.terminal_mean, est.terminal_spread, se,
                               float(threshold), strict, banded, passed)


def weak_dirichlet_split(v, traj, problem):
    """Martingale part R and orthogonal part A of v(t, X(t)) along a trajectory.

    R(t_k) = v(s, X_0) + sum_{i<k} <dv/dx(t_i, X_i), sigma(t_i, X_i) dW_i>,
    A = v(., X) - R, so A(s) = 0.
    """
    t = traj.times[:-1]
    x = traj.states[:-1]
    p = v.dv_dx(t, x)
    noise = inner(p, np.einsum("ikj,ij->ik", problem.sigma(t, x), traj.wiener.increments))
    vals = v.v(traj.times, traj.states)
    r = vals[0] + np.concatenate([[0.0], np.cumsum(noise)])
    return ScalarPath(traj.grid, r), ScalarPath(traj.grid, vals - r)
