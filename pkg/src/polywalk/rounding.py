"""Multiphase isotropic rounding of a body (and target) before production runs.

Each phase samples the current body, whitens with the sample covariance
(normalized to unit determinant so an already-round body maps near the
identity), and repeats until the covariance spectrum ratio drops to 4 or the
phase budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .densities import AffinePullback, Uniform
from .errors import DimensionError, PolywalkError
from .geometry import ConvexBody, Ellipsoid, HPolytope
from .walks import WalkConfig, sample

SPECTRUM_TARGET = 4.0
EIGENVALUE_FLOOR = 1e-12


@dataclass(frozen=True)
class RoundingTransform:
    """Affine map x = Lmap y + shift from rounded to original coordinates."""

    Lmap: np.ndarray
    shift: np.ndarray
    log_det: float

    def apply(self, y):
        return np.asarray(y, dtype=float) @ self.Lmap.T + self.shift

    def invert(self, x):
        return np.linalg.solve(self.Lmap, (np.asarray(x, dtype=float) - self.shift).T).T


@dataclass(frozen=True)
class IsotropyReport:
    mean: np.ndarray
    cov: np.ndarray
    spectrum_ratio: float


def isotropy_report(samples):
    """Sample mean, unbiased covariance, and extreme-eigenvalue ratio."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    k, d = samples.shape
    if k < d + 1:
        raise DimensionError(f"need at least {d + 1} samples for a rank-{d} covariance")
    mean = samples.mean(axis=0)
    cov = np.cov(samples, rowvar=False, ddof=1).reshape(d, d)
    lam = np.linalg.eigvalsh(cov)
    ratio = float(lam[-1] / lam[0]) if lam[0] > 0 else np.inf
    return IsotropyReport(mean=mean, cov=cov, spectrum_ratio=ratio)


def _whitening_map(cov):
    """Unit-determinant symmetric whitening of a covariance matrix."""
    lam, V = np.linalg.eigh(cov)
    if lam[0] < EIGENVALUE_FLOOR * lam[-1]:
        j = int(np.argmin(lam))
        raise PolywalkError(
            f"sample covariance is rank deficient along eigendirection {j}; "
            "the body is not full-dimensional"
        )
    W = V @ np.diag(lam**-0.5) @ V.T
    scale = np.exp(-0.5 * np.mean(np.log(lam)))  # det(W)^(1/d)
    W = W / scale
    G = V @ np.diag(lam**0.5) @ V.T * scale  # inverse map
    return W, G


def _affine_body(body, G, mu):
    """Body in new coordinates y with x = G y + mu."""
    polytope = None
    if body.polytope is not None:
        polytope = HPolytope(body.polytope.A @ G, body.polytope.b - body.polytope.A @ mu)
    ellipsoid = None
    if body.ellipsoid is not None:
        ell = body.ellipsoid
        center = np.linalg.solve(G, ell.center - mu)
        ellipsoid = Ellipsoid(G.T @ ell.E @ G, ell.c, center=center)
    return ConvexBody(polytope=polytope, ellipsoid=ellipsoid)


def round_isotropic(body, target=None, walk_cfg=None, max_phases=10):
    """Bring a body (and target) into near-isotropic position.

    Returns (transform, rounded_body, rounded_target); the transform maps
    rounded coordinates back to the original ones, so statistics computed on
    ``transform.apply(draws)`` refer to the original body.
    """
    target = target if target is not None else Uniform()
    if walk_cfg is None:
        kind = "biw" if target.is_uniform else "rehmc"
        walk_cfg = WalkConfig(kind=kind, burn_in=300, thinning=2, seed=0)
    d = body.dim
    n_points = max(1000, 20 * d)

    Lmap = np.eye(d)
    shift = np.zeros(d)
    current_body = body
    current_target = target
    for phase in range(max_phases):
        cfg = replace(walk_cfg, seed=walk_cfg.seed + phase)
        draws = sample(current_body, current_target, cfg, k=n_points, n_chains=4).draws
        report = isotropy_report(draws)
        W, G = _whitening_map(report.cov)
        current_body = _affine_body(current_body, G, report.mean)
        current_target = AffinePullback(current_target, G, report.mean)
        shift = shift + Lmap @ report.mean
        Lmap = Lmap @ G
        if report.spectrum_ratio <= SPECTRUM_TARGET:
            break

    sign, log_det = np.linalg.slogdet(Lmap)
    if sign <= 0:
        raise PolywalkError("rounding transform is not orientation preserving")
    transform = RoundingTransform(Lmap=Lmap, shift=shift, log_det=float(log_det))
    return transform, current_body, current_target
