"""Experiment kinds run by the command line: each returns named checks plus artifacts."""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import fixtures
from . import heaviside as hv
from .control import FLAG_OK, GridScan, evaluate_family, hamiltonian
from .covariation import ChiFunctional, covariation_scan, orthogonality_test, weak_dirichlet_split
from .errors import ConfigurationError
from .hjb import (
    ball_probes,
    check_strong_solution,
    classical_residual,
    decomposition_residual,
    gradient_check,
    verification_gap,
)
from .sde import TimeGrid, Trajectory, WienerPath, replica_rng, sample_wiener_batch, simulate_batch
from .svg import write_chart


@dataclass
class Check:
    name: str
    passed: bool
    measured: dict
    criterion: str = ""

    def to_record(self):
        return {"name": self.name, "passed": bool(self.passed), "criterion": self.criterion, "measured": self.measured}


@dataclass
class Outcome:
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


class Context:
    """Objects derived from a config, plus caches shared between checks."""

    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.out_dir = out_dir
        self.p = cfg.params
        self.problem = fixtures.make_problem(cfg.problem, cfg.params)
        self.cost = fixtures.make_cost(cfg.cost, cfg.params)
        self.family = [fixtures.make_policy(name, cfg.params) for name in cfg.family]
        self.grid = cfg.grid
        self.mc = cfg.mc
        self.seed = cfg.mc.seed
        self.x0 = cfg.x0
        self.N = cfg.N
        self._gaps = None

    def th(self, key):
        return self.cfg.number("thresholds", key)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    @property
    def is_heaviside(self):
        return self.cfg.problem == "heaviside" and self.cfg.cost == "heaviside"

    @property
    def allowance(self):
        return self.th("allowance_C") * math.sqrt(self.grid.h)

    def gaps(self):
        """Verification gap reports for every policy in the family (computed once)."""
        if self._gaps is None:
            v = hv.candidate(self.p)
            F = lambda s, x, q: hv.hamiltonian_closed_form(s, x, q, self.p)
            gap = lambda t, x, q, a: hv.hamiltonian_gap(t, x, q, a, self.p)
            self._gaps = [
                verification_gap(self.problem, self.cost, v, pol, self.grid.s, self.x0, self.grid, self.mc, F, gap)
                for pol in self.family
            ]
        return self._gaps


def _require_heaviside(ctx, what):
    if not ctx.is_heaviside:
        raise ConfigurationError(f"{what} needs problem = heaviside and cost = heaviside")


# -- criteria ----------------------------------------------------------------


def check_optimality(ctx, out):
    _require_heaviside(ctx, "optimality check")
    reports = {r.label: r for r in ctx.gaps()}
    if "heaviside-optimal" not in reports:
        raise ConfigurationError("policy family must contain heaviside-optimal")
    r = reports["heaviside-optimal"]
    v0 = float(hv.value_v(ctx.grid.s, ctx.x0, ctx.p))
    J = r.lhs + v0
    band = 3 * r.lhs_stderr + ctx.allowance
    out.results["value"] = {"v": v0, "oracle": hv.scalar_oracle_value(ctx.grid.s, float(ctx.x0[ctx.p.psi_index]), ctx.p)}
    out.checks.append(Check("optimality", abs(J - v0) <= band,
                            {"J": J, "stderr": r.lhs_stderr, "v": v0, "band": band}, "1"))


def check_lower_bound(ctx, out):
    _require_heaviside(ctx, "lower-bound check")
    reports = ctx.gaps()
    v0 = float(hv.value_v(ctx.grid.s, ctx.x0, ctx.p))
    by_label = {r.label: r for r in reports}
    opt = by_label.get("heaviside-optimal")
    rows, ok = [], True
    for r in reports:
        J = r.lhs + v0
        band = 3 * r.lhs_stderr + ctx.allowance
        above = J >= v0 - band
        ok = ok and above
        rows.append({"policy": r.label, "J": J, "stderr": r.lhs_stderr, "band": band, "above_v": bool(above)})
    out.results["policy_costs"] = rows
    measured = {"policies": rows}
    if opt is not None:
        J_opt = opt.lhs + v0
        best = min(reports, key=lambda r: r.lhs)
        band = 3 * max(opt.lhs_stderr, best.lhs_stderr) + ctx.allowance
        attained = J_opt <= best.lhs + v0 + band
        ok = ok and attained
        measured.update({"family_min": best.label, "optimal_within_band_of_min": bool(attained)})
    out.checks.append(Check("lower_bound", ok, measured, "2"))


def check_verification_identity(ctx, out):
    _require_heaviside(ctx, "verification identity")
    floor = ctx.th("gap_floor")
    rows, ok = [], True
    for r in ctx.gaps():
        band = 3 * r.combined_stderr + ctx.allowance
        good = abs(r.difference) <= band and r.min_gap >= floor
        ok = ok and good
        rows.append({**r.to_record(), "band": band, "passed": bool(good)})
    out.results["verification_gap"] = rows
    out.checks.append(Check("verification_identity", ok, {"policies": rows}, "3"))


def check_pathwise_identity(ctx, out):
    _require_heaviside(ctx, "pathwise decomposition")
    steps = ctx.cfg.floats("thresholds", "e86_steps")
    paths = int(ctx.th("e86_paths"))
    fine = TimeGrid.from_step(ctx.grid.s, ctx.grid.T, min(steps))
    v = hv.candidate(ctx.p)
    F = lambda s, x, q: hv.hamiltonian_closed_form(s, x, q, ctx.p)
    policy = hv.optimal_policy(ctx.p)
    dW = sample_wiener_batch(ctx.problem.noise, fine, ctx.seed, 0, paths)
    rms = []
    example = None
    for h in steps:
        factor = int(round(h / fine.h))
        grid = fine.coarsen(factor)
        w = WienerPath(dW).coarsen(factor).increments
        states, controls = simulate_batch(ctx.problem, policy, ctx.x0, grid, w)
        terminal = []
        for r in range(paths):
            traj = Trajectory(grid, states[r], controls[r], WienerPath(w[r], (ctx.seed, r)))
            res = decomposition_residual(v, traj, ctx.problem, F)
            terminal.append(res.terminal)
            if r == 0 and h == min(steps):
                example = res
        rms.append(float(np.sqrt(np.mean(np.square(terminal)))))
    decreasing = all(b < a for a, b in zip(rms, rms[1:]))
    out.results["pathwise_residual"] = {"steps": steps, "rms_terminal": rms}
    example.to_csv(ctx.path("residual_path.csv"))
    write_chart(ctx.path("residual_vs_h.svg"), {"RMS terminal residual": (steps, rms)},
                title="Pathwise decomposition residual", xlabel="h", ylabel="RMS", logx=True, logy=True)
    out.artifacts += ["residual_path.csv", "residual_vs_h.svg"]
    out.checks.append(Check("pathwise_identity", decreasing, {"steps": steps, "rms_terminal": rms}, "4"))


def _triples(ctx):
    ns = [int(n) for n in ctx.cfg.floats("thresholds", "strong_ns")]
    return [hv.approx_triple(n, ctx.p) for n in ns]


def check_strong(ctx, out):
    _require_heaviside(ctx, "strong-solution check")
    v = hv.candidate(ctx.p)
    F = lambda s, x, q: hv.hamiltonian_closed_form(s, x, q, ctx.p)
    g = lambda x: hv.terminal_cost(x, ctx.p)
    thresholds = {k: ctx.th(f"strong_{k}") for k in ("v", "h", "g")}
    compacts = [(ctx.th("strong_radius"), int(ctx.th("strong_probes")))]
    rep = check_strong_solution(v, _triples(ctx), F, g, compacts, ctx.grid.T, thresholds, ctx.seed)
    out.results["strong_solution"] = rep.to_record()
    errs = rep.compacts[0]["errors"]
    write_chart(ctx.path("strong_solution.svg"), {f"sup |{k}_n - {k}|": (rep.ns, errs[k]) for k in errs},
                title="Approximating sequence errors", xlabel="n", ylabel="sup error", logx=True, logy=True)
    out.artifacts.append("strong_solution.svg")
    out.checks.append(Check("strong_solution", rep.passed,
                            {"ns": rep.ns, "errors": errs, "thresholds": thresholds}, "5"))


def _probes(ctx):
    return ball_probes(ctx.N, ctx.th("strong_radius"), int(ctx.th("probes")), (ctx.grid.s, ctx.grid.T), ctx.seed)


def check_classical(ctx, out):
    _require_heaviside(ctx, "classical residual")
    probes = _probes(ctx)
    kinks = hv.kinks(ctx.p, ctx.th("kink_margin"))
    tol, ttol = ctx.th("classical_tol"), ctx.th("terminal_tol")
    rows, ok = [], True
    for tr in _triples(ctx):
        F_n = lambda s, x, q, tr=tr: -tr.h_n(s, x)
        st = classical_residual(tr.v_n, ctx.problem, F_n, probes, tr.g_n, ctx.grid.T, kinks)
        good = st.max <= tol and st.terminal_max <= ttol
        ok = ok and good
        rows.append({"n": tr.n, **st.to_record()})
    out.results["classical_residual"] = rows
    out.checks.append(Check("classical_residual", ok, {"per_n": rows, "tol": tol, "terminal_tol": ttol}, "6"))


def _brownian_sample(grid):
    def sample(rng):
        w = np.concatenate([[0.0], np.cumsum(rng.standard_normal(grid.M) * math.sqrt(grid.h))])
        return w, w
    return sample


def check_covariation(ctx, out):
    cov = ctx.cfg.sections["covariation"]
    R = int(cov["replicas"])
    fine = TimeGrid.from_step(0.0, 1.0, float(cov["qv_step"]))
    qv_eps = ctx.cfg.floats("covariation", "qv_epsilons")
    eps = ctx.cfg.floats("covariation", "epsilons")
    band = ctx.th("band")

    qv = covariation_scan(_brownian_sample(fine), ChiFunctional(), qv_eps, fine, R, ctx.seed)
    qv.to_csv(ctx.path("covariation_qv.csv"))
    rel = abs(qv.terminal_mean[-1] - 1.0)
    out.checks.append(Check("brownian_quadratic_variation", rel <= ctx.th("qv_rel"),
                            {**qv.to_record(), "relative_error": rel}, "7"))

    X, Y = [], []
    for r in range(R):
        w = _brownian_sample(fine)(replica_rng(ctx.seed + 1, r))[0]
        X.append(fine.nodes.copy())
        Y.append(w)
    bv = orthogonality_test(np.array(X), np.array(Y), eps, fine, ctx.th("bv_mean"), band)
    out.checks.append(Check("bounded_variation_orthogonality", bv.passed, bv.to_record(), "7"))

    series = {"[W, W]": (qv_eps, [abs(m) for m in qv.terminal_mean]),
              "|[t, W]|": (eps, [abs(m) for m in bv.means])}
    records = {"quadratic_variation": qv.to_record(), "bounded_variation": bv.to_record()}
    if ctx.is_heaviside:
        v = hv.candidate(ctx.p)
        dW = sample_wiener_batch(ctx.problem.noise, ctx.grid, ctx.seed + 2, 0, R)
        states, controls = simulate_batch(ctx.problem, hv.optimal_policy(ctx.p), ctx.x0, ctx.grid, dW)
        A, W = [], []
        for r in range(R):
            wp = WienerPath(dW[r])
            _, a_part = weak_dirichlet_split(v, Trajectory(ctx.grid, states[r], controls[r], wp), ctx.problem)
            A.append(a_part.values)
            W.append(wp.path()[:, 0])
        orth = orthogonality_test(np.array(A), np.array(W), eps, ctx.grid, None, band)
        out.checks.append(Check("value_process_orthogonality", orth.passed, orth.to_record(), "7"))
        series["|[A, W]| (value process)"] = (eps, [abs(m) for m in orth.means])
        records["value_process"] = orth.to_record()
    out.results["covariation"] = records
    write_chart(ctx.path("covariation_vs_eps.svg"), series, title="Terminal epsilon-covariation",
                xlabel="epsilon", ylabel="|mean|", logx=True, logy=True)
    out.artifacts += ["covariation_qv.csv", "covariation_vs_eps.svg"]


def check_cross(ctx, out):
    _require_heaviside(ctx, "gradient / Hamiltonian cross-checks")
    probes = _probes(ctx)
    v = hv.candidate(ctx.p)
    gerr = gradient_check(v, probes, hv.kinks(ctx.p, ctx.th("kink_margin")))
    out.checks.append(Check("gradient_fd", gerr <= ctx.th("gradient_tol"), {"max_relative_error": gerr}, "8"))

    w = ctx.th("hamiltonian_window")
    scan = GridScan(window=(-w, w))
    worst, finite = 0.0, 0
    for s, x in zip(probes.s, probes.x):
        dv = v.dv_dx(s, x)
        closed = hv.hamiltonian_closed_form(s, x, dv, ctx.p)
        if not math.isfinite(closed):
            continue
        finite += 1
        worst = max(worst, abs(hamiltonian(ctx.cost, ctx.problem, s, x, dv, scan) - closed))
    out.checks.append(Check("hamiltonian_numeric", worst <= ctx.th("hamiltonian_tol"),
                            {"max_abs_difference": worst, "finite_probes": finite}, "8"))


# -- experiment kinds ---------------------------------------------------------


def run_simulate(ctx, out):
    cfg = ctx.cfg
    paths = int(cfg.get("simulate", "paths"))
    write_csv = cfg.get("simulate", "write_csv").strip().lower() in ("1", "true", "yes", "on")
    policy = ctx.family[0]
    dW = sample_wiener_batch(ctx.problem.noise, ctx.grid, ctx.seed, 0, paths)
    states, controls = simulate_batch(ctx.problem, policy, ctx.x0, ctx.grid, dW)
    out.checks.append(Check("finite_paths", bool(np.all(np.isfinite(states))), {"paths": paths}))
    for r in range(paths if write_csv else 0):
        name = f"trajectory_{r:03d}.csv"
        Trajectory(ctx.grid, states[r], controls[r], WienerPath(dW[r], (ctx.seed, r))).to_csv(ctx.path(name))
        out.artifacts.append(name)
    out.results["terminal_mean"] = states[:, -1].mean(axis=0).tolist()
    if cfg.problem == "linear":
        t = ctx.grid.nodes
        flow = ctx.problem.A.semigroup(t, np.broadcast_to(ctx.x0, (t.size, ctx.N)))
        err = float(np.max(np.abs(states - flow[None])))
        out.checks.append(Check("semigroup_flow", err <= 1e-12 * max(1.0, float(np.max(np.abs(flow)))),
                                {"max_abs_error": err}))


def run_cost(ctx, out):
    ests = evaluate_family(ctx.problem, ctx.cost, ctx.family, ctx.grid.s, ctx.x0, ctx.grid, ctx.mc)
    out.results["costs"] = [e.to_record() for e in ests]
    best = min(ests, key=lambda e: e.mean)
    out.results["value_upper_bound"] = {"policy_label": best.label, "mean": best.mean, "stderr": best.stderr}
    with open(ctx.path("costs.csv"), "w") as fh:
        fh.write("policy_label,mean,stderr,replicas,flag\n")
        for e in ests:
            fh.write(f"{e.label},{e.mean:.17g},{e.stderr:.17g},{e.replicas},{e.quasi_integrability_flag}\n")
    out.artifacts.append("costs.csv")
    flags = {e.label: e.quasi_integrability_flag for e in ests}
    out.checks.append(Check("quasi_integrable", all(f == FLAG_OK for f in flags.values()), {"flags": flags}))
    if ctx.is_heaviside:
        v0 = float(hv.value_v(ctx.grid.s, ctx.x0, ctx.p))
        low = {e.label: e.mean >= v0 - (3 * e.stderr + ctx.allowance) for e in ests}
        out.checks.append(Check("lower_bound", all(low.values()), {"v": v0, "above_v": low}, "2"))


def run_verify(ctx, out):
    check_optimality(ctx, out)
    check_lower_bound(ctx, out)
    check_verification_identity(ctx, out)
    check_pathwise_identity(ctx, out)
    check_strong(ctx, out)
    check_classical(ctx, out)
    check_cross(ctx, out)


def run_covariation(ctx, out):
    check_covariation(ctx, out)


def run_example_full(ctx, out):
    _require_heaviside(ctx, "example-full")
    run_verify(ctx, out)
    check_covariation(ctx, out)
    order = {"1": 0, "2": 1, "3": 2, "4": 3, "5": 4, "6": 5, "7": 6, "8": 7}
    out.checks.sort(key=lambda c: order.get(c.criterion, 99))


RUNNERS = {
    "simulate": run_simulate,
    "cost": run_cost,
    "verify-hjb": run_verify,
    "covariation": run_covariation,
    "example-full": run_example_full,
}


def run_experiment(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    ctx = Context(cfg, out_dir)
    out = Outcome()
    RUNNERS[cfg.kind](ctx, out)
    return out
