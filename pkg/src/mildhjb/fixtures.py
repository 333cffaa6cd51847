"""Built-in problems, costs and policies addressable by registry name."""

import numpy as np

from . import heaviside as hv
from .control import CostSpec, constant_policy
from .errors import ConfigurationError
from .sde import ControlledSDE, NoiseModel
from .spectral import SpectralOperator


def _linear(params):
    """Default spectrum, no drift, no noise: the flow is e^{tA} x."""
    n = params.N
    lam = SpectralOperator.default(n).eigenvalues.copy()
    lam[params.psi_index] = params.lam
    return ControlledSDE(SpectralOperator(lam), NoiseModel([1.0], lambda t, x: np.zeros(np.shape(x) + (1,))))


def _brownian(params):
    """A = 0, b = 0, sigma = identity: N independent standard Brownian motions."""
    n = params.N
    eye = np.eye(n)
    return ControlledSDE(SpectralOperator(np.zeros(n)),
                         NoiseModel(np.ones(n), lambda t, x: np.broadcast_to(eye, np.shape(x) + (n,))))


PROBLEMS = {
    "heaviside": hv.problem,
    "linear": _linear,
    "brownian": _brownian,
}


def _zero_cost(params):
    return CostSpec(l=lambda t, x, a: np.zeros(np.shape(x)[:-1]), g=lambda x: np.zeros(np.shape(x)[:-1]))


def _terminal_psi(params):
    k = params.psi_index
    return CostSpec(l=lambda t, x, a: np.zeros(np.shape(x)[:-1]), g=lambda x: np.asarray(x)[..., k])


COSTS = {
    "heaviside": hv.cost,
    "zero": _zero_cost,
    "terminal-psi": _terminal_psi,
}

POLICIES = {
    "heaviside-optimal": "optimal feedback -alpha Theta(<x,psi>) <x,psi> <phi,psi>",
    "zero": "a = 0",
    "const:<c>": "a = c for a real literal c",
}


def make_problem(name, params):
    try:
        return PROBLEMS[name](params)
    except KeyError:
        raise ConfigurationError(f"unknown problem {name!r}; known: {sorted(PROBLEMS)}") from None


def make_cost(name, params):
    try:
        return COSTS[name](params)
    except KeyError:
        raise ConfigurationError(f"unknown cost {name!r}; known: {sorted(COSTS)}") from None


def make_policy(name, params):
    if name == "heaviside-optimal":
        return hv.optimal_policy(params)
    if name == "zero":
        return constant_policy(0.0, "zero")
    if name.startswith("const:"):
        try:
            c = float(name.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad constant policy {name!r}") from None
        return constant_policy(c, name)
    raise ConfigurationError(f"unknown policy {name!r}; known: {sorted(POLICIES)}")


def describe():
    lines = ["problems:"]
    lines += [f"  {k}: {(v.__doc__ or '').strip().splitlines()[0]}" for k, v in PROBLEMS.items()]
    lines.append("costs:")
    lines += [f"  {k}" for k in COSTS]
    lines.append("policies:")
    lines += [f"  {k}: {v}" for k, v in POLICIES.items()]
    return "\n".join(lines)
