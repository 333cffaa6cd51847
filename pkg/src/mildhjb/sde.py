"""Q-Wiener noise and exponential-Euler simulation of the mild state equation.

Coefficient handles follow one convention throughout the package: states ``x``
have shape ``(..., N)``, controls ``a`` have shape ``(...)`` and time ``t`` is a
scalar or broadcasts against ``x.shape[:-1]``.

* ``b_g(t, x, a)``, ``b_i(t, x, a)`` return ``(..., N)``;
* ``noise.sigma(t, x)`` returns ``(..., N, d)``, the action of sigma on the d
  noise coordinates.

Wiener increments carry the covariance of Q (``Var dW_j = q_j h``) so the noise
term of a step is ``sigma(t, x) @ dW``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, PolicyRangeError, SimulationDiverged
from .spectral import SpectralOperator, as_hvec, norm

DIVERGENCE_BOUND = 1e12


@dataclass(frozen=True)
class TimeGrid:
    s: float
    T: float
    M: int

    def __post_init__(self):
        if not self.T > self.s:
            raise ConfigurationError(f"grid needs s < T, got s={self.s}, T={self.T}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigurationError(f"grid needs an integer M >= 1, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @classmethod
    def from_step(cls, s, T, h):
        M = round((T - s) / h)
        if M < 1 or not np.isclose(M * h, T - s, rtol=1e-9, atol=0):
            raise ConfigurationError(f"step {h} does not divide [{s}, {T}]")
        return cls(s, T, M)

    @property
    def h(self):
        return (self.T - self.s) / self.M

    @property
    def nodes(self):
        return self.s + self.h * np.arange(self.M + 1)

    def coarsen(self, factor):
        if self.M % factor:
            raise ConfigurationError(f"cannot coarsen {self.M} steps by {factor}")
        return TimeGrid(self.s, self.T, self.M // factor)


@dataclass(frozen=True)
class NoiseModel:
    """Finite-rank Q-Wiener noise: d scalar Brownian motions with variances q."""

    q: np.ndarray
    sigma: object

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        if q.size == 0 or np.any(q <= 0) or not np.all(np.isfinite(q)):
            raise ConfigurationError("noise covariance eigenvalues must be positive and finite")
        object.__setattr__(self, "q", q)

    @property
    def d(self):
        return self.q.size

    def hilbert_schmidt(self, t, x):
        """|sigma(t,x) Q^{1/2}|_HS for each state in the batch."""
        s = self.sigma(t, x)
        return np.sqrt(np.einsum("...kj,...kj,j->...", s, s, self.q))


@dataclass(frozen=True)
class ControlSet:
    """Closed interval [low, high] of admissible control values (possibly all of R)."""

    low: float = -np.inf
    high: float = np.inf

    @property
    def bounded(self):
        return bool(np.isfinite(self.low) and np.isfinite(self.high))

    def contains(self, a):
        a = np.asarray(a, dtype=float)
        return (a >= self.low) & (a <= self.high)


def _zero_drift(t, x, a):
    return np.zeros_like(x)


@dataclass(frozen=True)
class ControlledSDE:
    """dX = (AX + b_g + b_i) dt + sigma dW_Q on the truncated space."""

    A: SpectralOperator
    noise: NoiseModel
    b_g: object = None
    b_i: object = None
    control_set: ControlSet = field(default_factory=ControlSet)

    def __post_init__(self):
        if self.b_g is None:
            object.__setattr__(self, "b_g", _zero_drift)
        if self.b_i is None:
            object.__setattr__(self, "b_i", _zero_drift)

    @property
    def dim(self):
        return self.A.dim

    def b(self, t, x, a):
        return self.b_g(t, x, a) + self.b_i(t, x, a)

    def sigma(self, t, x):
        return self.noise.sigma(t, x)


def replica_rng(seed, replica=0):
    """Counter-based generator for substream (seed, replica)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replica)])))


@dataclass(frozen=True)
class WienerPath:
    """Increments of W_Q on a grid; ``increments[i, j] ~ N(0, q_j h)``."""

    increments: np.ndarray
    seed: tuple = ()

    @property
    def steps(self):
        return self.increments.shape[-2]

    def coarsen(self, factor):
        """Sum groups of ``factor`` consecutive increments (same Brownian path, step factor*h)."""
        dw = self.increments
        if dw.shape[-2] % factor:
            raise ConfigurationError(f"cannot coarsen {dw.shape[-2]} increments by {factor}")
        shape = dw.shape[:-2] + (dw.shape[-2] // factor, factor, dw.shape[-1])
        return WienerPath(dw.reshape(shape).sum(axis=-2), self.seed)

    def path(self):
        """W_Q at the grid nodes, starting from 0."""
        dw = self.increments
        zero = np.zeros(dw.shape[:-2] + (1, dw.shape[-1]))
        return np.concatenate([zero, np.cumsum(dw, axis=-2)], axis=-2)


def _draw(noise, grid, seed, replica):
    z = replica_rng(seed, replica).standard_normal((grid.M, noise.d))
    return z * np.sqrt(noise.q * grid.h)


def sample_wiener(noise, grid, seed):
    """One Wiener path; ``seed`` is a master seed or a (master, replica) pair."""
    master, replica = (seed, 0) if np.isscalar(seed) else tuple(seed)
    return WienerPath(_draw(noise, grid, master, replica), (int(master), int(replica)))


def sample_wiener_batch(noise, grid, seed, start, stop):
    """Increments for replicas ``start..stop-1`` with shape (stop-start, M, d)."""
    return np.stack([_draw(noise, grid, seed, r) for r in range(start, stop)])


@dataclass(frozen=True)
class MonteCarlo:
    replicas: int
    seed: int
    chunk: int = 2000

    def __post_init__(self):
        if self.replicas < 2:
            raise ConfigurationError("Monte Carlo needs at least 2 replicas")

    def chunks(self, noise, grid):
        """Yield (start, increments) blocks; the partition does not affect any result."""
        for start in range(0, self.replicas, self.chunk):
            stop = min(start + self.chunk, self.replicas)
            yield start, sample_wiener_batch(noise, grid, self.seed, start, stop)


def integrate(problem, policy, x0, grid, dW, observe=None, replica_offset=0):
    """March the exponential-Euler scheme over a batch of increments.

    ``dW`` has shape (B, M, d). ``observe(i, t_i, X_i, a_i, dW_i)`` is called
    before each step with batch arrays. Returns the terminal states (B, N).
    """
    dW = np.asarray(dW, dtype=float)
    B, M, d = dW.shape
    if M != grid.M or d != problem.noise.d:
        raise DimensionError(f"increments of shape {dW.shape} do not match grid M={grid.M}, d={problem.noise.d}")
    x = np.broadcast_to(as_hvec(x0, problem.dim), (B, problem.dim)).copy()
    h = grid.h
    decay = problem.A.exp_factors(h)
    for i in range(M):
        t = grid.s + i * h
        a = np.broadcast_to(np.asarray(policy.control(t, x, dW[:, :i, :]), dtype=float), (B,))
        bad = ~problem.control_set.contains(a)
        if bad.any():
            r = int(np.argmax(bad))
            raise PolicyRangeError(i, float(a[r]), replica_offset + r)
        if observe is not None:
            observe(i, t, x, a, dW[:, i, :])
        noise = np.einsum("bkj,bj->bk", problem.sigma(t, x), dW[:, i, :])
        x = decay * (x + problem.b(t, x, a) * h + noise)
        bad = ~np.all(np.isfinite(x), axis=-1) | (np.max(np.abs(x), axis=-1) > DIVERGENCE_BOUND)
        if bad.any():
            raise SimulationDiverged(i + 1, replica_offset + int(np.argmax(bad)))
    return x


@dataclass
class Trajectory:
    grid: TimeGrid
    states: np.ndarray
    controls: np.ndarray
    wiener: WienerPath

    @property
    def times(self):
        return self.grid.nodes

    def to_csv(self, path):
        """Columns t, x_1..x_N, a, dW_1..dW_d; the terminal row leaves a and dW empty."""
        n = self.states.shape[-1]
        d = self.wiener.increments.shape[-1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x_{k + 1}" for k in range(n)] + ["a"] + [f"dW_{j + 1}" for j in range(d)])
            for i, t in enumerate(self.times):
                row = [t, *self.states[i]]
                if i < self.grid.M:
                    row += [self.controls[i], *self.wiener.increments[i]]
                else:
                    row += [""] * (1 + d)
                w.writerow([format(v, ".17g") if not isinstance(v, str) else v for v in row])


def simulate_batch(problem, policy, x0, grid, dW, replica_offset=0):
    """Full state and control paths for a batch, shapes (B, M+1, N) and (B, M)."""
    dW = np.asarray(dW, dtype=float)
    B = dW.shape[0]
    states = np.empty((B, grid.M + 1, problem.dim))
    controls = np.empty((B, grid.M))

    def record(i, t, x, a, dw):
        states[:, i] = x
        controls[:, i] = a

    states[:, -1] = integrate(problem, policy, x0, grid, dW, record, replica_offset)
    return states, controls


def simulate_mild(problem, policy, x0, grid, wiener):
    """Single trajectory of the mild solution driven by ``wiener``."""
    dW = np.asarray(wiener.increments, dtype=float)[None]
    replica = wiener.seed[1] if len(wiener.seed) == 2 else 0
    states, controls = simulate_batch(problem, policy, x0, grid, dW, replica)
    return Trajectory(grid, states[0], controls[0], wiener)


@dataclass
class HypothesisReport:
    b_lipschitz: float
    b_growth: float
    sigma_lipschitz: float
    sigma_growth: float
    bound: float = None

    @property
    def violations(self):
        if self.bound is None:
            return []
        names = ("b_lipschitz", "b_growth", "sigma_lipschitz", "sigma_growth")
        return [n for n in names if getattr(self, n) > self.bound]

    @property
    def ok(self):
        return not self.violations


def probe_coefficient_hypotheses(problem, probes, bound=None):
    """Empirical Lipschitz and linear-growth ratios of b and sigma on probe tuples (t, x, y, a).

    Report only: the maxima are lower bounds of the true constants.
    """
    if not probes:
        raise ConfigurationError("probe set is empty")
    bl = bg = sl = sg = 0.0
    for t, x, y, a in probes:
        x = as_hvec(x, problem.dim)[None]
        y = as_hvec(y, problem.dim)[None]
        a = np.atleast_1d(np.asarray(a, dtype=float))
        bx, by = problem.b(t, x, a), problem.b(t, y, a)
        gap = float(norm(x - y)[0])
        if gap > 0:
            bl = max(bl, float(norm(bx - by)[0]) / gap)
            diff = problem.sigma(t, x) - problem.sigma(t, y)
            sl = max(sl, float(np.sqrt(np.einsum("...kj,...kj,j->...", diff, diff, problem.noise.q))[0]) / gap)
        for z, bz in ((x, bx), (y, by)):
            scale = 1.0 + float(norm(z)[0])
            bg = max(bg, float(norm(bz)[0]) / scale)
            sg = max(sg, float(problem.noise.hilbert_schmidt(t, z)[0]) / scale)
    return HypothesisReport(bl, bg, sl, sg, bound)
