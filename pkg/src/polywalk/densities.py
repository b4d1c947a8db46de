"""Target log-densities (up to additive constants) with gradients.

Everything works in log space; support violations return -inf from
``log_density`` (walks treat that as a rejection signal) while
``grad_log_density`` raises, since gradient-based walks must reflect before
evaluating.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, SupportError


class TargetDensity:
    """Interface shared by all targets."""

    is_uniform = False

    def log_density(self, y):
        raise NotImplementedError

    def grad_log_density(self, y):
        raise NotImplementedError


class Uniform(TargetDensity):
    """Flat target; log-density identically zero on the sampling body."""

    is_uniform = True

    def log_density(self, y):
        return 0.0

    def grad_log_density(self, y):
        return np.zeros_like(np.asarray(y, dtype=float))


class Dirichlet(TargetDensity):
    """Dirichlet log-density sum_i (alpha_i - 1) log x_i in asset coordinates.

    Entries of alpha below one are permitted (boundary-seeking targets) but
    make the density unbounded near facets; gradient magnitudes blow up there.
    """

    def __init__(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha <= 0.0):
            raise ValueError("all Dirichlet parameters must be positive")
        self.alpha = alpha

    @property
    def dim(self):
        return self.alpha.shape[0]

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionError("point dimension does not match alpha")
        if np.any(x <= 0.0):
            return -np.inf
        return float((self.alpha - 1.0) @ np.log(x))

    def grad_log_density(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise SupportError("gradient requested outside the open simplex")
        return (self.alpha - 1.0) / x


class ShadowDirichlet(TargetDensity):
    """Dirichlet pushed through a left-stochastic full-rank matrix M.

    The density at x is the Dirichlet density at inv(M) x; the constant
    |det M| is dropped.
    """

    def __init__(self, M, alpha):
        M = np.asarray(M, dtype=float)
        if M.shape[0] != M.shape[1]:
            raise DimensionError("M must be square")
        if not np.allclose(M.sum(axis=0), 1.0, atol=1e-10):
            raise ValueError("columns of M must sum to one (left-stochastic)")
        self.M = M
        try:
            self.M_inv = np.linalg.inv(M)
        except np.linalg.LinAlgError:
            raise ValueError("M must be invertible") from None
        self.base = Dirichlet(alpha)

    @property
    def dim(self):
        return self.M.shape[0]

    def log_density(self, x):
        return self.base.log_density(self.M_inv @ np.asarray(x, dtype=float))

    def grad_log_density(self, x):
        u = self.M_inv @ np.asarray(x, dtype=float)
        return self.M_inv.T @ self.base.grad_log_density(u)


class Transformed(TargetDensity):
    """A base density composed with an affine embedding: evaluated at lift(y)."""

    def __init__(self, base, emb):
        base_dim = getattr(base, "dim", None)
        if base_dim is not None and base_dim != emb.ambient_dim:
            raise DimensionError("base density dimension does not match embedding")
        self.base = base
        self.emb = emb
        self.is_uniform = base.is_uniform

    def log_density(self, y):
        return self.base.log_density(self.emb.lift(y))

    def grad_log_density(self, y):
        x = self.emb.lift(y)
        return self.emb.N @ self.base.grad_log_density(x)


class AffinePullback(TargetDensity):
    """Density seen through an invertible affine change of coordinates x = L y + t.

    Used by rounding: sampling the pullback and mapping draws through the
    transform reproduces the original target (densities are proportional,
    the constant |det L| is dropped).
    """

    def __init__(self, base, Lmap, shift):
        self.base = base
        self.Lmap = np.asarray(Lmap, dtype=float)
        self.shift = np.asarray(shift, dtype=float)
        self.is_uniform = base.is_uniform

    def log_density(self, y):
        return self.base.log_density(self.Lmap @ np.asarray(y, dtype=float) + self.shift)

    def grad_log_density(self, y):
        x = self.Lmap @ np.asarray(y, dtype=float) + self.shift
        return self.Lmap.T @ self.base.grad_log_density(x)
