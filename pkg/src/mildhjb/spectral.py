"""Truncated Hilbert space with a diagonal generator.

States are plain ``numpy`` arrays whose last axis holds the N coordinates in
the eigenbasis e_1..e_N of the generator. Leading axes are batch axes and are
broadcast by every operation here.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError


def as_hvec(x, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if n is not None and x.shape[-1] != n:
        raise DimensionError(f"expected dimension {n}, got {x.shape[-1]}")
    return x


def basis(k, n):
    """Unit vector e_k (0-based index k) of the truncated space of dimension n."""
    if not 0 <= k < n:
        raise DimensionError(f"basis index {k} outside 0..{n - 1}")
    e = np.zeros(n)
    e[k] = 1.0
    return e


def inner(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1:] != y.shape[-1:]:
        raise DimensionError(f"dimension mismatch: {x.shape[-1:]} vs {y.shape[-1:]}")
    return np.einsum("...k,...k->...", x, y)


def norm(x):
    return np.sqrt(inner(x, x))


@dataclass(frozen=True)
class SpectralOperator:
    """Diagonal self-adjoint generator A with eigenvalues ``eigenvalues``.

    The semigroup is exact: coefficient k of ``semigroup(t, x)`` is
    ``exp(lambda_k t) x_k``.
    """

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def default(cls, n=8, lambda1=-1.0):
        """Spectrum lambda_1 = ``lambda1`` and lambda_k = -k^2 for k >= 2."""
        k = np.arange(1, n + 1, dtype=float)
        lam = -(k**2)
        lam[0] = lambda1
        return cls(lam)

    @property
    def dim(self):
        return self.eigenvalues.size

    def _check(self, x):
        x = as_hvec(x)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"operator has dimension {self.dim}, vector has {x.shape[-1]}")
        return x

    def apply(self, x):
        return self.eigenvalues * self._check(x)

    def adjoint(self, x):
        # real diagonal, so A* = A
        return self.apply(x)

    def exp_factors(self, t):
        if np.any(np.asarray(t) < 0):
            raise DomainError(f"semigroup is only defined for t >= 0, got {t!r}")
        return np.exp(np.multiply.outer(t, self.eigenvalues))

    def semigroup(self, t, x):
        """e^{tA} x. ``t`` may be an array broadcast against the batch axes of x."""
        return self.exp_factors(t) * self._check(x)

    def graph_norm(self, x):
        """Graph norm of D(A*): sqrt(|x|^2 + |A* x|^2)."""
        x = self._check(x)
        return np.sqrt(inner(x, x) + inner(self.adjoint(x), self.adjoint(x)))


def semigroup_apply(op, t, x):
    return op.semigroup(t, x)


def adjoint_apply(op, x):
    return op.adjoint(x)


@dataclass(frozen=True)
class GraphNormed:
    """A vector of D(A*) together with its graph norm."""

    vec: np.ndarray
    graph_norm: float

    @classmethod
    def of(cls, op, x):
        x = op._check(x)
        return cls(vec=x, graph_norm=float(op.graph_norm(x)))
