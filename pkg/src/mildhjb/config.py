"""Experiment configuration files (INI sections of key = value pairs)."""

import configparser
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import fixtures
from .errors import ConfigurationError
from .heaviside import ExampleParams
from .sde import MonteCarlo, TimeGrid
from .spectral import basis

KINDS = ("simulate", "cost", "verify-hjb", "covariation", "example-full")

# n = 32 sup errors of the closed forms on y in [0, 2], s = 0 (dense 1-D sweep,
# frozen in tests/data/strong_solution_sup.json)
STRONG_SUP_N32 = {"v": 0.05388490823076708, "h": 0.15920217482651822, "g": 0.03268284893776187}

DEFAULTS = {
    "experiment": {"kind": None, "output": "out", "problem": "heaviside", "cost": "heaviside"},
    "space": {"dimension": "8"},
    "grid": {"s": "0", "T": "1", "M": "1000"},
    "mc": {"replicas": "10000", "seed": None, "chunk": "2000"},
    "example": {"rho": "0.5", "lambda": "-1", "beta": "0.5", "phi": "e1", "psi_index": "1", "x0": "e1"},
    "policies": {"family": "heaviside-optimal, const:0, const:-1, const:1, const:2"},
    "simulate": {"paths": "3", "write_csv": "true"},
    "covariation": {
        "epsilons": "0.1, 0.05, 0.02, 0.01",
        "replicas": "100",
        "qv_step": "1e-4",
        "qv_epsilons": "0.1, 0.05, 0.01",
    },
    "thresholds": {
        "allowance_C": "2.0",
        "band": "3.0",
        "e86_paths": "100",
        "e86_steps": "4e-3, 2e-3, 1e-3",
        "strong_ns": "1, 2, 4, 8, 16, 32",
        "strong_radius": "2.0",
        "strong_probes": "2000",
        "strong_v": repr(STRONG_SUP_N32["v"]),
        "strong_h": repr(STRONG_SUP_N32["h"]),
        "strong_g": repr(STRONG_SUP_N32["g"]),
        "classical_tol": "1e-8",
        "terminal_tol": "1e-12",
        "kink_margin": "1e-3",
        "gradient_tol": "1e-6",
        "hamiltonian_tol": "1e-6",
        "hamiltonian_window": "50",
        "gap_floor": "-1e-12",
        "qv_rel": "0.05",
        "bv_mean": "0.02",
        "probes": "1000",
    },
}


def _floats(text):
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _vector(text, n):
    text = text.strip()
    if text.startswith("e") and text[1:].isdigit():
        return basis(int(text[1:]) - 1, n)
    vals = np.array(_floats(text))
    if vals.size != n:
        raise ConfigurationError(f"vector {text!r} has {vals.size} entries, dimension is {n}")
    return vals


@dataclass
class ExperimentConfig:
    kind: str
    output: str
    problem: str
    cost: str
    N: int
    grid: TimeGrid
    mc: MonteCarlo
    params: ExampleParams
    x0: np.ndarray
    family: list
    sections: dict = field(repr=False, default_factory=dict)

    @property
    def hash(self):
        canon = "\n".join(f"[{s}]\n" + "\n".join(f"{k}={v}" for k, v in sorted(kv.items()))
                          for s, kv in sorted(self.sections.items()))
        return hashlib.sha256(canon.encode()).hexdigest()

    def get(self, section, key):
        return self.sections[section][key]

    def floats(self, section, key):
        return _floats(self.sections[section][key])

    def number(self, section, key):
        try:
            return float(self.sections[section][key])
        except ValueError:
            raise ConfigurationError(f"[{section}] {key} is not a number") from None


def parse_config(text, overrides=None):
    """Validate config text; ``overrides`` maps (section, key) to replacement values."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable config: {exc}") from None
    sections = {s: dict(kv) for s, kv in DEFAULTS.items()}
    for s in cp.sections():
        if s not in DEFAULTS:
            raise ConfigurationError(f"unknown section [{s}]")
        for k, v in cp.items(s):
            if k not in DEFAULTS[s]:
                raise ConfigurationError(f"unknown key {k!r} in [{s}]")
            sections[s][k] = v
    for (s, k), v in (overrides or {}).items():
        sections[s][k] = str(v)

    kind = sections["experiment"]["kind"]
    if kind not in KINDS:
        raise ConfigurationError(f"experiment kind must be one of {KINDS}, got {kind!r}")
    seed = sections["mc"]["seed"]
    if seed is None:
        raise ConfigurationError("[mc] seed is mandatory")
    try:
        N = int(sections["space"]["dimension"])
        grid = TimeGrid(float(sections["grid"]["s"]), float(sections["grid"]["T"]), int(sections["grid"]["M"]))
        mc = MonteCarlo(int(sections["mc"]["replicas"]), int(seed), int(sections["mc"]["chunk"]))
        ex = sections["example"]
        psi_index = int(ex["psi_index"]) - 1
        params = ExampleParams(rho=float(ex["rho"]), lam=float(ex["lambda"]), beta=float(ex["beta"]),
                               phi=_vector(ex["phi"], N), psi_index=psi_index, T=grid.T, N=N)
        x0 = _vector(ex["x0"], N)
        for key in DEFAULTS["thresholds"]:
            _floats(sections["thresholds"][key])
    except ValueError as exc:
        raise ConfigurationError(f"bad config value: {exc}") from None
    if N < 1 or not 0 <= psi_index < N:
        raise ConfigurationError("dimension must be >= 1 and psi_index within 1..dimension")
    fixtures.make_problem(sections["experiment"]["problem"], params)
    fixtures.make_cost(sections["experiment"]["cost"], params)
    family = [name.strip() for name in sections["policies"]["family"].split(",") if name.strip()]
    if not family:
        raise ConfigurationError("[policies] family is empty")
    for name in family:
        fixtures.make_policy(name, params)
    return ExperimentConfig(kind, sections["experiment"]["output"], sections["experiment"]["problem"],
                            sections["experiment"]["cost"], N, grid, mc, params, x0, family, sections)


def load_config(path, overrides=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)
