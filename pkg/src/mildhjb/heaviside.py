"""Closed forms of the Heaviside-cost example.

State  dX = (AX + a phi) dt + beta X dW  on R^N with psi = e_{psi_index} an
eigenvector of A (eigenvalue ``lam``), running cost e^{-rho t} Theta(<x,psi>) a^2
and terminal cost e^{-rho T} alpha Theta(<x,psi>) <x,psi>^2.

The approximating sequence uses the denominator +1/4 (2+1/n)^2 <phi,psi>^2 in
``alpha_n`` and a positive ``h_n``; with these signs alpha_n -> alpha and
h_n -> -F(., ., dv/dx). ``printed_alpha_n`` keeps the other sign convention
for reference.
"""

import math
from dataclasses import dataclass

import numpy as np

from .control import ClosedForm, CostSpec, Policy
from .errors import ParameterError
from .hjb import ApproxTriple, HJBCandidate, KinkSet
from .sde import ControlledSDE, ControlSet, NoiseModel, TimeGrid
from .spectral import SpectralOperator, basis, inner

KINK_MARGIN = 1e-3


@dataclass(frozen=True)
class ExampleParams:
    rho: float = 0.5
    lam: float = -1.0
    beta: float = 0.5
    phi: np.ndarray = None
    psi_index: int = 0
    T: float = 1.0
    N: int = 8

    def __post_init__(self):
        phi = basis(self.psi_index, self.N) if self.phi is None else np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "phi", phi)

    @property
    def psi(self):
        return basis(self.psi_index, self.N)

    @property
    def phi_psi(self):
        return float(inner(self.phi, self.psi))


def heaviside(y):
    """1 where y >= 0, else 0."""
    out = np.where(np.asarray(y) >= 0, 1.0, 0.0)
    return float(out) if out.ndim == 0 else out


def _d2(p):
    d = p.phi_psi
    if d == 0:
        raise ParameterError("<phi, psi> must be nonzero")
    return d * d


def alpha(p):
    return (-p.rho + 2 * p.lam + p.beta**2) / _d2(p)


def _alpha_n_numerator(n, p):
    k = 2 + 1 / n
    return -p.rho + k * p.lam + 0.5 * p.beta**2 * k * (1 + 1 / n)


def alpha_n(n, p):
    k = 2 + 1 / n
    return _alpha_n_numerator(n, p) / (0.25 * k * k * _d2(p))


def printed_alpha_n(n, p):
    k = 2 + 1 / n
    return _alpha_n_numerator(n, p) / (-0.25 * k * k * _d2(p))


def _y(x, p):
    return np.asarray(x, dtype=float)[..., p.psi_index]


def _outer_psi(coef, p):
    psi = p.psi
    return np.asarray(coef)[..., None, None] * np.outer(psi, psi)


def value_v(s, x, p):
    y = _y(x, p)
    return alpha(p) * np.exp(-p.rho * np.asarray(s)) * heaviside(y) * y**2


def grad_v(s, x, p):
    y = _y(x, p)
    coef = 2 * alpha(p) * np.exp(-p.rho * np.asarray(s)) * heaviside(y) * y
    return np.asarray(coef)[..., None] * p.psi


def terminal_cost(x, p):
    y = _y(x, p)
    return math.exp(-p.rho * p.T) * alpha(p) * heaviside(y) * y**2


def running_cost(t, x, a, p):
    return np.exp(-p.rho * np.asarray(t)) * heaviside(_y(x, p)) * np.asarray(a) ** 2


def candidate(p):
    """Value function candidate; the Hessian is taken as 0 on the kink <x,psi> = 0."""
    a = alpha(p)

    def d2(s, x):
        y = _y(x, p)
        return _outer_psi(2 * a * np.exp(-p.rho * np.asarray(s)) * (y > 0), p)

    return HJBCandidate(
        v=lambda s, x: value_v(s, x, p),
        dv_ds=lambda s, x: -p.rho * value_v(s, x, p),
        dv_dx=lambda s, x: grad_v(s, x, p),
        d2v_dxx=d2,
        growth=(2 * abs(a), 1),
        label="heaviside-v",
        dim=p.N,
    )


def approx_triple(n, p):
    """(v_n, h_n, g_n) for index n, with all derivatives of v_n."""
    an = alpha_n(n, p)
    k = 2 + 1 / n
    d2 = _d2(p)

    def pos(x):
        return np.maximum(_y(x, p), 0.0)

    def disc(s):
        return np.exp(-p.rho * np.asarray(s))

    def vn(s, x):
        return an * disc(s) * heaviside(_y(x, p)) * pos(x) ** k

    def dvn(s, x):
        coef = k * an * disc(s) * heaviside(_y(x, p)) * pos(x) ** (1 + 1 / n)
        return np.asarray(coef)[..., None] * p.psi

    def d2vn(s, x):
        return _outer_psi(k * (1 + 1 / n) * an * disc(s) * heaviside(_y(x, p)) * pos(x) ** (1 / n), p)

    def hn(s, x):
        return 0.25 * an**2 * disc(s) * k * k * heaviside(_y(x, p)) * d2 * pos(x) ** k

    def gn(x):
        return math.exp(-p.rho * p.T) * an * heaviside(_y(x, p)) * pos(x) ** k

    cand = HJBCandidate(vn, lambda s, x: -p.rho * vn(s, x), dvn, d2vn,
                        growth=(k * abs(an), 2), label=f"v_{n}", dim=p.N)
    return ApproxTriple(n, cand, hn, gn)


def vn_gn_hn(n, s, x, p):
    """Values (v_n(s,x), g_n(x), h_n(s,x)) and the triple carrying the derivative handles."""
    tr = approx_triple(n, p)
    return tr.v_n.v(s, x), tr.g_n(x), tr.h_n(s, x), tr


def hamiltonian_closed_form(s, x, pvec, p):
    """inf_a { a <p,phi> + e^{-rho s} Theta(<x,psi>) a^2 }.

    -inf where <x,psi> < 0 and <p,phi> != 0, else -<p,phi>^2 e^{rho s} / 4.
    """
    pp = inner(pvec, p.phi)
    y = _y(x, p)
    finite = -(pp**2) * np.exp(p.rho * np.asarray(s)) / 4
    out = np.where((y < 0) & (pp != 0), -np.inf, finite)
    return float(out) if out.ndim == 0 else out


def hamiltonian_gap(s, x, pvec, a, p):
    """F_CV - F as a completed square: e^{-rho s} Theta (a + <p,phi> e^{rho s} / 2)^2.

    Valid wherever F is finite; nonnegative in floating point by construction.
    """
    pp = inner(pvec, p.phi)
    on = heaviside(_y(x, p))
    es = np.exp(p.rho * np.asarray(s))
    return on * (np.asarray(a) + pp * es / 2) ** 2 / es


def hamiltonian_along_candidate(s, x, p):
    """F(s, x, dv/dx(s, x)) = -alpha^2 Theta(<x,psi>) <x,psi>^2 <phi,psi>^2 e^{-rho s}."""
    y = _y(x, p)
    return -(alpha(p) ** 2) * heaviside(y) * y**2 * _d2(p) * np.exp(-p.rho * np.asarray(s))


def closed_form_argmin(p):
    """Canonical argmin of F_CV: the vertex where Theta = 1; 0 on the flat region; +-inf when unbounded."""

    def argmin(s, x, pvec):
        pp = float(inner(pvec, p.phi))
        if _y(x, p) >= 0:
            return -pp * math.exp(p.rho * s) / 2
        return 0.0 if pp == 0 else -math.copysign(math.inf, pp)

    return ClosedForm(argmin)


def optimal_feedback(t, x, p):
    y = _y(x, p)
    return -alpha(p) * heaviside(y) * y * p.phi_psi


def optimal_policy(p):
    return Policy(lambda t, x: optimal_feedback(t, x, p), "feedback", "heaviside-optimal")


def problem(p):
    """Controlled system with b = b_i = a phi, sigma(x) = beta x and one scalar Wiener process."""
    lam = SpectralOperator.default(p.N).eigenvalues.copy()
    lam[p.psi_index] = p.lam
    phi = p.phi
    return ControlledSDE(
        A=SpectralOperator(lam),
        noise=NoiseModel(q=[1.0], sigma=lambda t, x: p.beta * np.asarray(x)[..., None]),
        b_i=lambda t, x, a: np.asarray(a)[..., None] * phi,
        control_set=ControlSet(),
    )


def cost(p):
    return CostSpec(l=lambda t, x, a: running_cost(t, x, a, p), g=lambda x: terminal_cost(x, p))


def kinks(p, margin=KINK_MARGIN):
    return KinkSet(lambda s, x, d: np.abs(_y(x, p)) < d, margin)


def _exp_integral(c, tau):
    """int_0^tau e^{c u} du."""
    return tau if c == 0 else math.expm1(c * tau) / c


def scalar_oracle_value(s, y0, p):
    """J under the optimal feedback from <x,psi> = y0, via scalar GBM moments.

    For y0 > 0 the projected closed loop is dy = (lam - alpha d^2) y dt + beta y dW,
    so E y(r)^2 = y0^2 e^{kappa (r - s)} with kappa = 2(lam - alpha d^2) + beta^2,
    and both cost terms are deterministic integrals of that moment.
    """
    if y0 <= 0:
        return 0.0
    a, d2 = alpha(p), _d2(p)
    kappa = 2 * (p.lam - a * d2) + p.beta**2
    tau = p.T - s
    running = a * a * d2 * y0**2 * math.exp(-p.rho * s) * _exp_integral(kappa - p.rho, tau)
    terminal = math.exp(-p.rho * p.T) * a * y0**2 * math.exp(kappa * tau)
    return running + terminal


def discrete_scheme_cost(p, y0, grid):
    """Exact expectation of the exponential-Euler cost estimator under the optimal feedback.

    Assumes the discrete path stays in {y > 0}; the one-step factor is
    1 - alpha d^2 h + beta dW, negative only for dW below about -200 sqrt(h)
    at the default parameters.
    """
    a, d2 = alpha(p), _d2(p)
    h = grid.h
    growth = math.exp(2 * p.lam * h) * ((1 - a * d2 * h) ** 2 + p.beta**2 * h)
    m2 = y0**2
    total = 0.0
    for i in range(grid.M):
        total += math.exp(-p.rho * (grid.s + i * h)) * a * a * d2 * m2 * h
        m2 *= growth
    return total + math.exp(-p.rho * p.T) * a * m2


def calibrate_allowance(p, y0=1.0, steps=(4e-3, 2e-3, 1e-3), s=0.0):
    """max_h |discrete bias| / sqrt(h) over the h-halving study."""
    ratios = []
    for h in steps:
        grid = TimeGrid.from_step(s, p.T, h)
        bias = discrete_scheme_cost(p, y0, grid) - scalar_oracle_value(s, y0, p)
        ratios.append(abs(bias) / math.sqrt(h))
    return max(ratios)
