"""Policies, Monte Carlo cost evaluation, Hamiltonians and feedback synthesis."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .sde import integrate
from .spectral import as_hvec, inner

FLAG_OK = "ok"
FLAG_POSITIVE = "positive-infinite"
FLAG_NEGATIVE = "negative-infinite"
FLAG_BOTH = "both-infinite-suspected"

QUASI_INTEGRABILITY_NOTE = (
    "heuristic diagnostic from finitely many replicas; quasi-integrability is a "
    "property of the law and is not proved by this flag"
)


@dataclass(frozen=True)
class Policy:
    """A control policy.

    ``kind == "feedback"``: ``map(t, x)`` with x of shape (B, N).
    ``kind == "open-loop"``: ``map(t, history)`` where ``history`` holds the
    Wiener increments strictly before t, shape (B, i, d). Only past increments
    are exposed, which keeps open-loop controls adapted.
    """

    map: object
    kind: str = "feedback"
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("feedback", "open-loop"):
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")

    def control(self, t, x, history):
        if self.kind == "feedback":
            return self.map(t, x)
        return np.broadcast_to(self.map(t, history), x.shape[:-1])


def constant_policy(c, label=None):
    c = float(c)
    return Policy(lambda t, x: np.full(np.shape(x)[:-1], c), "feedback", label or f"const:{c:g}")


def open_loop_policy(fn, label="open-loop"):
    return Policy(fn, "open-loop", label)


def synthesize_feedback(argmin_handle, label="feedback"):
    """Wrap a pointwise argmin selection phi(t, y) as a feedback policy.

    Values outside the control set surface as ``PolicyRangeError`` at the first
    offending step of the closed-loop simulation.
    """
    return Policy(argmin_handle, "feedback", label)


@dataclass(frozen=True)
class CostSpec:
    """Running cost ``l(t, x, a)`` (may be discontinuous, extended real) and terminal cost ``g(x)``."""

    l: object
    g: object


@dataclass
class CostEstimate:
    mean: float
    stderr: float
    replicas: int
    positive_part_mean: float
    negative_part_mean: float
    quasi_integrability_flag: str
    label: str = ""
    samples: np.ndarray = field(default=None, repr=False)

    def to_record(self):
        return {
            "policy_label": self.label,
            "mean": self.mean,
            "stderr": self.stderr,
            "replicas": self.replicas,
            "flag": self.quasi_integrability_flag,
        }


def path_integrals(problem, policy, x0, grid, mc, running, terminal=None):
    """Per-replica left-endpoint Riemann sums of ``running[name](t, x, a)``.

    ``terminal[name](x_T)`` values are returned alongside. All replicas share
    the substreams of ``mc``, so two calls with the same ``mc`` use common
    random numbers.
    """
    terminal = terminal or {}
    R = mc.replicas
    out = {name: np.zeros(R) for name in list(running) + list(terminal)}
    h = grid.h
    for start, dW in mc.chunks(problem.noise, grid):
        stop = start + dW.shape[0]

        def observe(i, t, x, a, dw):
            for name, f in running.items():
                out[name][start:stop] += f(t, x, a) * h

        xT = integrate(problem, policy, x0, grid, dW, observe, start)
        for name, f in terminal.items():
            out[name][start:stop] = f(xT)
    return out


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        return float(np.mean(values)), math.inf
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def evaluate_cost(problem, cost, policy, s, x, grid, mc):
    """Monte Carlo estimate of J(s, x; policy) with quasi-integrability bookkeeping."""
    if not np.isclose(grid.s, s):
        raise ConfigurationError(f"grid starts at {grid.s}, cost requested at s={s}")
    parts = path_integrals(
        problem, policy, x, grid, mc,
        running={
            "l_pos": lambda t, y, a: np.maximum(cost.l(t, y, a), 0.0),
            "l_neg": lambda t, y, a: np.maximum(-cost.l(t, y, a), 0.0),
        },
        terminal={"g": cost.g},
    )
    g = parts["g"]
    pos = parts["l_pos"] + np.maximum(g, 0.0)
    neg = parts["l_neg"] + np.maximum(-g, 0.0)
    with np.errstate(invalid="ignore"):
        total = pos - neg
    mean, stderr = _mean_stderr(total)
    pos_mean, neg_mean = float(pos.mean()), float(neg.mean())
    if not (math.isfinite(pos_mean) and math.isfinite(neg_mean)):
        # one infinite side fixes the sign; both infinite leaves nan
        mean = pos_mean - neg_mean if (math.isfinite(pos_mean) or math.isfinite(neg_mean)) else math.nan
    return CostEstimate(
        mean=mean,
        stderr=stderr,
        replicas=mc.replicas,
        positive_part_mean=pos_mean,
        negative_part_mean=neg_mean,
        quasi_integrability_flag=admissibility_report(parts["l_pos"], parts["l_neg"]),
        label=policy.label,
        samples=total,
    )


def _superlinear(values, slope_threshold=1.25, n_min=16):
    values = np.asarray(values, dtype=float)
    if np.any(np.isinf(values)):
        return True
    if values.size < 2 * n_min or not np.any(values > 0):
        return False
    ns = np.unique(np.geomspace(n_min, values.size, 12).astype(int))
    sums = np.cumsum(values)[ns - 1]
    keep = sums > 0
    if keep.sum() < 3:
        return False
    slope = np.polyfit(np.log(ns[keep]), np.log(sums[keep]), 1)[0]
    return bool(slope > slope_threshold)


def admissibility_report(positive_integrals, negative_integrals):
    """Quasi-integrability flag from per-replica integrals of l+ and l-.

    A side is suspected infinite when its cumulative sum over replicas grows
    faster than linearly in the replica count. See ``QUASI_INTEGRABILITY_NOTE``.
    """
    pos = _superlinear(positive_integrals)
    neg = _superlinear(negative_integrals)
    if pos and neg:
        return FLAG_BOTH
    if pos:
        return FLAG_POSITIVE
    if neg:
        return FLAG_NEGATIVE
    return FLAG_OK


def estimate_value(problem, cost, family, s, x, grid, mc):
    """Best policy of a finite family under common random numbers.

    The returned mean upper-bounds V(s, x) up to statistical error.
    """
    estimates = evaluate_family(problem, cost, family, s, x, grid, mc)
    best = min(range(len(estimates)), key=lambda k: estimates[k].mean)
    return estimates[best].label, estimates[best]


def evaluate_family(problem, cost, family, s, x, grid, mc):
    if not family:
        raise ConfigurationError("policy family is empty")
    return [evaluate_cost(problem, cost, p, s, x, grid, mc) for p in family]


# -- Hamiltonians ------------------------------------------------------------


def current_value_hamiltonian(cost, problem, s, x, p, a):
    """F_CV(s, x, p; a) = <p, b(s, x, a)> + l(s, x, a); extended reals propagate."""
    a = np.asarray(a, dtype=float)
    x = np.broadcast_to(as_hvec(x), a.shape + (np.shape(x)[-1],))
    p = np.broadcast_to(as_hvec(p), x.shape)
    with np.errstate(invalid="ignore"):
        return inner(p, problem.b(s, x, a)) + cost.l(s, x, a)


@dataclass(frozen=True)
class ClosedForm:
    """Closed-form argmin ``argmin(s, x, p)``; returning +-inf signals F = -inf."""

    argmin: object


@dataclass(frozen=True)
class GridScan:
    """Uniform scan of the control set followed by golden-section refinement.

    ``window`` restricts an unbounded control set. When the best scan point
    sits on a window edge, the outward ray is probed at 2x, 4x, 8x the edge;
    a strict decrease by more than ``unbounded_tol`` each time returns -inf.
    """

    points: int = 2001
    window: tuple = None
    refine: bool = True
    xtol: float = 1e-12
    unbounded_tol: float = 1e-9


def golden_section(f, lo, hi, xtol=1e-12, max_iter=200):
    """Minimize a unimodal ``f`` on [lo, hi]; returns (a, f(a))."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if hi - lo <= xtol:
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _pick(a, values):
    """Index of the minimum; ties go to the smallest |a|, then the smallest a."""
    best = np.min(values)
    ties = np.flatnonzero(values == best)
    return ties[np.lexsort((a[ties], np.abs(a[ties])))[0]]


def argmin_control(cost, problem, s, x, p, scan=GridScan()):
    """Numeric (a*, F) over the control set; F may be -inf."""
    lam = problem.control_set
    lo, hi = lam.low, lam.high
    if scan.window is not None:
        lo, hi = max(lo, scan.window[0]), min(hi, scan.window[1])
    elif not lam.bounded:
        raise ConfigurationError("grid scan over an unbounded control set needs a window or a closed form")
    grid = np.linspace(lo, hi, scan.points)
    if lo < 0.0 < hi:
        grid = np.union1d(grid, [0.0])
    values = current_value_hamiltonian(cost, problem, s, x, p, grid)
    k = _pick(grid, values)
    a_best, f_best = float(grid[k]), float(values[k])
    if math.isinf(f_best) and f_best < 0:
        return a_best, -math.inf

    edge = k == 0 or k == grid.size - 1
    if edge and scan.window is not None:
        outward = a_best if a_best != 0 else (hi if k else lo)
        if lam.contains(8 * outward):
            ray = current_value_hamiltonian(cost, problem, s, x, p, np.array([2, 4, 8]) * outward)
            steps = np.diff(np.concatenate([[f_best], ray]))
            if np.all(steps < -scan.unbounded_tol):
                return math.copysign(math.inf, outward), -math.inf

    if scan.refine and not edge:
        f = lambda a: float(current_value_hamiltonian(cost, problem, s, x, p, np.array(a)))
        a_ref, f_ref = golden_section(f, float(grid[k - 1]), float(grid[k + 1]), scan.xtol)
        if f_ref < f_best:
            a_best, f_best = a_ref, f_ref
    return a_best, f_best


def hamiltonian(cost, problem, s, x, p, minimizer):
    """F(s, x, p) = inf over the control set of F_CV(s, x, p; a)."""
    if isinstance(minimizer, ClosedForm):
        a = minimizer.argmin(s, x, p)
        if np.isinf(a):
            return -math.inf
        return float(current_value_hamiltonian(cost, problem, s, x, p, np.array(float(a))))
    if isinstance(minimizer, GridScan):
        return argmin_control(cost, problem, s, x, p, minimizer)[1]
    raise ConfigurationError(f"unknown minimizer {minimizer!r}")
