"""HJB operator L0, classical/strong solution checks and the pathwise identities.

Candidate handles are vectorized: ``v(s, x)`` takes ``x`` of shape (..., N) and
``s`` scalar or broadcastable to ``x.shape[:-1]``; ``dv_dx`` returns (..., N);
``d2v_dxx`` returns (..., N, N).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .control import current_value_hamiltonian
from .errors import CapabilityError, ConfigurationError, IdentityInapplicable
from .sde import integrate
from .spectral import inner, norm


@dataclass(frozen=True)
class HJBCandidate:
    v: object
    dv_ds: object
    dv_dx: object
    d2v_dxx: object = None
    growth: tuple = (1.0, 1)
    label: str = ""
    dim: int = None


@dataclass(frozen=True)
class ApproxTriple:
    n: int
    v_n: HJBCandidate
    h_n: object
    g_n: object


@dataclass(frozen=True)
class KinkSet:
    """``predicate(s, x, margin)`` is True where classical derivatives are unreliable."""

    predicate: object
    margin: float = 1e-3

    def excluded(self, s, x):
        return np.asarray(self.predicate(s, x, self.margin), dtype=bool)


@dataclass(frozen=True)
class ProbeSet:
    s: np.ndarray
    x: np.ndarray

    def __len__(self):
        return self.s.size

    def subset(self, keep):
        return ProbeSet(self.s[keep], self.x[keep])


def ball_probes(n_dim, radius, count, s_range=(0.0, 1.0), seed=0):
    """Probe mesh on [s_range] x {|x| <= radius}.

    Half the points lie on the coordinate axes (so each axis is sampled over
    its full extent [-radius, radius]); the rest are uniform in the ball.
    """
    rng = np.random.default_rng([int(seed), int(count), n_dim])
    n_axis = count // 2
    per_axis = max(n_axis // n_dim, 2)
    axis_pts = []
    for k in range(n_dim):
        pts = np.zeros((per_axis, n_dim))
        pts[:, k] = np.linspace(-radius, radius, per_axis)
        axis_pts.append(pts)
    axis_pts = np.concatenate(axis_pts)
    n_rand = count - axis_pts.shape[0]
    direction = rng.standard_normal((max(n_rand, 0), n_dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(max(n_rand, 0)) ** (1.0 / n_dim)
    x = np.concatenate([axis_pts, direction * r[:, None]])
    s0, s1 = s_range
    s = np.concatenate([np.linspace(s0, s1, axis_pts.shape[0])[rng.permutation(axis_pts.shape[0])],
                        rng.uniform(s0, s1, max(n_rand, 0))])
    return ProbeSet(s, x)


def _trace_term(problem, s, x, hess):
    sig = problem.sigma(s, x)
    return 0.5 * np.einsum("...kj,...kl,...lj,j->...", sig, hess, sig, problem.noise.q)


def apply_L0(cand, problem, s, x):
    """dv/ds + <A* dv/dx, x> + 1/2 Tr[sigma Q sigma* D^2 v]."""
    if cand.d2v_dxx is None:
        raise CapabilityError(f"candidate {cand.label!r} has no second derivative")
    x = np.asarray(x, dtype=float)
    p = cand.dv_dx(s, x)
    return cand.dv_ds(s, x) + inner(problem.A.adjoint(p), x) + _trace_term(problem, s, x, cand.d2v_dxx(s, x))


@dataclass
class ResidualStats:
    max: float
    rms: float
    terminal_max: float
    n_probes: int
    flagged: int

    def to_record(self):
        return dict(self.__dict__)


def classical_residual(cand, problem, F, probes, g=None, T=None, kinks=None):
    """Max / RMS of |L0 v + F(s, x, dv/dx)| on the probes and max |v(T, .) - g|.

    Probes where F is infinite are counted in ``flagged`` and left out of the
    statistics.
    """
    if kinks is not None:
        probes = probes.subset(~kinks.excluded(probes.s, probes.x))
    s, x = probes.s, probes.x
    f = np.asarray(F(s, x, cand.dv_dx(s, x)), dtype=float)
    finite = np.isfinite(f)
    res = np.abs(apply_L0(cand, problem, s, x) + f)[finite]
    term = 0.0
    if g is not None:
        term = float(np.max(np.abs(cand.v(T, x) - g(x)))) if len(probes) else 0.0
    return ResidualStats(
        max=float(res.max()) if res.size else 0.0,
        rms=float(np.sqrt(np.mean(res**2))) if res.size else 0.0,
        terminal_max=term,
        n_probes=int(len(probes)),
        flagged=int((~finite).sum()),
    )


@dataclass
class ConvergenceReport:
    ns: list
    compacts: list
    thresholds: dict
    passed: bool

    def to_record(self):
        return {"ns": self.ns, "thresholds": self.thresholds, "passed": self.passed, "compacts": self.compacts}


def _sequence_ok(errors, threshold, slack=0.10):
    growth_ok = all(b <= a * (1.0 + slack) for a, b in zip(errors, errors[1:]))
    return bool(errors[-1] < threshold and growth_ok)


def check_strong_solution(v, triples, F, g, compacts, T, thresholds, seed=0):
    """Uniform-on-compacts convergence v_n -> v, h_n -> -F(., ., dv), g_n -> g.

    ``compacts`` is a sequence of (radius, probe count). Passes when, on every
    compact, each error sequence ends below its threshold and never grows by
    more than 10% between consecutive n.
    """
    triples = sorted(triples, key=lambda tr: tr.n)
    if len(triples) < 3:
        raise ConfigurationError("strong-solution check needs at least 3 approximating triples")
    if np.isscalar(thresholds):
        thresholds = {"v": thresholds, "h": thresholds, "g": thresholds}
    out = []
    passed = True
    for radius, count in compacts:
        probes = ball_probes(_infer_dim(v), radius, count, (0.0, T), seed)
        s, x = probes.s, probes.x
        v_ref = v.v(s, x)
        minus_f = -np.asarray(F(s, x, v.dv_dx(s, x)), dtype=float)
        g_ref = g(x)
        errs = {"v": [], "h": [], "g": []}
        for tr in triples:
            errs["v"].append(float(np.max(np.abs(tr.v_n.v(s, x) - v_ref))))
            errs["h"].append(float(np.max(np.abs(tr.h_n(s, x) - minus_f))))
            errs["g"].append(float(np.max(np.abs(tr.g_n(x) - g_ref))))
        ok = {k: _sequence_ok(errs[k], thresholds[k]) for k in errs}
        passed = passed and all(ok.values())
        out.append({"radius": radius, "probes": len(probes), "errors": errs, "ok": ok})
    return ConvergenceReport([tr.n for tr in triples], out, dict(thresholds), passed)


def _infer_dim(cand):
    dim = getattr(cand, "dim", None)
    if dim is None:
        raise ConfigurationError("candidate must expose its dimension as .dim for probe meshes")
    return dim


@dataclass
class ResidualPath:
    times: np.ndarray
    residual: np.ndarray

    @property
    def terminal(self):
        return float(abs(self.residual[-1]))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,residual\n")
            for t, r in zip(self.times, self.residual):
                fh.write(f"{t:.17g},{r:.17g}\n")


def _hamiltonian_along(traj, v, F):
    t = traj.times[:-1]
    x = traj.states[:-1]
    p = v.dv_dx(t, x)
    f = np.asarray(F(t, x, p), dtype=float)
    bad = ~np.isfinite(f)
    if bad.any():
        raise IdentityInapplicable(float(t[np.argmax(bad)]))
    return t, x, p, f


def decomposition_residual(v, traj, problem, F):
    """Pathwise residual of the decomposition identity for v(t, X(t)).

    residual(t_k) = [v(t_k, X_k) - v(s, x)]
                    - [-sum F h + sum <dv, b> h + sum <dv, sigma dW>],
    all sums over i < k with left-endpoint evaluation and the increments that
    drove the simulation.
    """
    h = traj.grid.h
    t, x, p, f = _hamiltonian_along(traj, v, F)
    a = traj.controls
    dW = traj.wiener.increments
    drift = inner(p, problem.b(t, x, a))
    noise = inner(p, np.einsum("ikj,ij->ik", problem.sigma(t, x), dW))
    incr = -f * h + drift * h + noise
    rhs = np.concatenate([[0.0], np.cumsum(incr)])
    vals = v.v(traj.times, traj.states)
    return ResidualPath(traj.times, (vals - vals[0]) - rhs)


@dataclass
class GapReport:
    label: str
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    difference: float
    combined_stderr: float
    min_gap: float
    replicas: int

    def to_record(self):
        return dict(self.__dict__)


def verification_gap(problem, cost, v, policy, s, x, grid, mc, F, gap=None):
    """Both sides of J(s,x;a) - v(s,x) = E int (F_CV - F)(r, X, dv/dx; a) dr.

    One pass under the substreams of ``mc``: per replica the realized cost and
    the gap integral are formed on the same path, so ``combined_stderr`` is the
    standard error of their pathwise difference. ``gap(t, x, p, a)`` may supply
    F_CV - F in closed form; otherwise it is formed by subtraction.
    """
    if not np.isclose(grid.s, s):
        raise ConfigurationError(f"grid starts at {grid.s}, gap requested at s={s}")
    R, h = mc.replicas, grid.h
    costs = np.zeros(R)
    gaps = np.zeros(R)
    min_gap = math.inf
    for start, dW in mc.chunks(problem.noise, grid):
        stop = start + dW.shape[0]

        def observe(i, t, xb, a, dw):
            nonlocal min_gap
            p = v.dv_dx(t, xb)
            f = np.asarray(F(t, xb, p), dtype=float)
            bad = ~np.isfinite(f)
            if bad.any():
                raise IdentityInapplicable(t, start + int(np.argmax(bad)))
            if gap is None:
                g = current_value_hamiltonian(cost, problem, t, xb, p, a) - f
            else:
                g = gap(t, xb, p, a)
            min_gap = min(min_gap, float(g.min()))
            gaps[start:stop] += g * h
            costs[start:stop] += cost.l(t, xb, a) * h

        xT = integrate(problem, policy, x, grid, dW, observe, start)
        costs[start:stop] += cost.g(xT)
    v0 = float(v.v(s, np.asarray(x, dtype=float)))
    lhs = costs - v0
    diff = lhs - gaps
    se = lambda z: float(z.std(ddof=1) / math.sqrt(R))
    return GapReport(
        label=policy.label,
        lhs=float(lhs.mean()),
        lhs_stderr=se(lhs),
        rhs=float(gaps.mean()),
        rhs_stderr=se(gaps),
        difference=float(diff.mean()),
        combined_stderr=se(diff),
        min_gap=min_gap,
        replicas=R,
    )


def gradient_check(cand, probes, kinks=None, step=1e-4):
    """Max over probes of |dv_dx - central FD|_inf / |central FD|_inf.

    Probes within ``kinks.margin + step`` of the kink set are skipped so the
    stencil never straddles it.
    """
    if kinks is not None:
        wide = KinkSet(kinks.predicate, kinks.margin + step)
        probes = probes.subset(~wide.excluded(probes.s, probes.x))
    s, x = probes.s, probes.x
    n = x.shape[-1]
    fd = np.empty_like(x)
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        fd[:, k] = (cand.v(s, x + e) - cand.v(s, x - e)) / (2 * step)
    err = np.max(np.abs(cand.dv_dx(s, x) - fd), axis=-1)
    scale = np.max(np.abs(fd), axis=-1)
    rel = np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), err)
    return float(rel.max()) if rel.size else 0.0


def growth_check(cand, probes):
    """Max of |dv_dx| / (M (1 + |x|^m)) over probes; <= 1 means the declared bound holds."""
    M, m = cand.growth
    g = norm(cand.dv_dx(probes.s, probes.x))
    return float(np.max(g / (M * (1.0 + norm(probes.x) ** m))))


def gradient_modulus(cand, op, radius, deltas, count=500, T=1.0, seed=0):
    """Empirical modulus of continuity of dv/dx in the graph norm of D(A*).

    For each delta, the max of |dv(s,x) - dv(s,y)|_graph over random pairs in
    the ball with |x - y| = delta. Report only: uniform continuity cannot be
    decided from samples.
    """
    dim = _infer_dim(cand)
    base = ball_probes(dim, radius, count, (0.0, T), seed)
    rng = np.random.default_rng([int(seed), 1])
    out = {}
    for delta in deltas:
        u = rng.standard_normal(base.x.shape)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        diff = cand.dv_dx(base.s, base.x + delta * u) - cand.dv_dx(base.s, base.x)
        out[float(delta)] = float(np.max(op.graph_norm(diff)))
    return out


def bi_convergence_trend(v, triples, traj, problem):
    """sup_k |sum_{i<k} <dv_n - dv, b_i> h| along a trajectory, per n (report only)."""
    t, x, a = traj.times[:-1], traj.states[:-1], traj.controls
    bi = problem.b_i(t, x, a)
    p = v.dv_dx(t, x)
    out = {}
    for tr in sorted(triples, key=lambda tr: tr.n):
        partial = np.cumsum(inner(tr.v_n.dv_dx(t, x) - p, bi)) * traj.grid.h
        out[tr.n] = float(np.max(np.abs(partial))) if partial.size else 0.0
    return out
