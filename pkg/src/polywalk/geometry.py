"""Convex bodies and the oracles every walk consumes.

A body is an H-polytope ``{x : Ax <= b}``, an ellipsoid
``{x : (x - center)' E (x - center) <= c}``, or their intersection.  Equality
constraints (the budget) are removed up front through an orthonormal
null-space embedding so that walks always operate on a full-dimensional body.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import (
    DegenerateBoundaryError,
    DegenerateStartError,
    DimensionError,
    InfeasibleBodyError,
    PolywalkError,
    UnboundedBodyError,
    UnboundedRayError,
)

DEFAULT_MEMBERSHIP_TOL = 1e-9
# facet hit wins over an ellipsoid hit when the roots agree this closely
_TIE_TOL = 1e-12

ELLIPSOID_TAG = -1


class HPolytope:
    """Halfspace polytope ``Ax <= b``."""

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.shape[0]:
            raise DimensionError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if A.shape[0] < 1:
            raise DimensionError("polytope needs at least one facet")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
            raise ValueError("polytope data must be finite")
        self.A = A
        self.b = b
        self.row_norms = np.linalg.norm(A, axis=1)

    @property
    def n_facets(self):
        return self.A.shape[0]

    @property
    def dim(self):
        return self.A.shape[1]

    def slack(self, x):
        return self.b - self.A @ x

    def contains(self, x, tol=DEFAULT_MEMBERSHIP_TOL):
        return bool(np.all(self.slack(x) >= -tol))

    def __repr__(self):
        return f"HPolytope(m={self.n_facets}, n={self.dim})"


class Ellipsoid:
    """Quadratic region ``(x - center)' E (x - center) <= c`` with E symmetric PSD."""

    def __init__(self, E, c, center=None):
        E = np.atleast_2d(np.asarray(E, dtype=float))
        if E.shape[0] != E.shape[1]:
            raise DimensionError("E must be square")
        if not np.allclose(E, E.T, atol=1e-10):
            raise ValueError("E must be symmetric")
        if c <= 0:
            raise ValueError("ellipsoid level c must be positive")
        self.E = 0.5 * (E + E.T)
        self.c = float(c)
        self.center = np.zeros(E.shape[0]) if center is None else np.asarray(center, dtype=float)
        if self.center.shape != (E.shape[0],):
            raise DimensionError("center dimension mismatch")

    @property
    def dim(self):
        return self.E.shape[0]

    def quad(self, x):
        u = x - self.center
        return float(u @ self.E @ u)

    def contains(self, x, tol=DEFAULT_MEMBERSHIP_TOL):
        return self.quad(x) <= self.c + tol

    def ball_map(self):
        """Cholesky-like factor L with E = L L', mapping the ellipsoid to the unit ball.

        Points map as x = center + sqrt(c) * inv(L)' u with ||u|| <= 1.
        """
        try:
            L = np.linalg.cholesky(self.E)
        except np.linalg.LinAlgError:
            lam, V = np.linalg.eigh(self.E)
            floor = 1e-14 * max(lam.max(), 1.0)
            if np.any(lam < -1e-10 * max(lam.max(), 1.0)):
                raise ValueError("E is not positive semidefinite")
            L = V @ np.diag(np.sqrt(np.maximum(lam, floor))) @ V.T
        return L

    def __repr__(self):
        return f"Ellipsoid(n={self.dim}, c={self.c:g})"


@dataclass
class HitRecord:
    """First boundary intersection of a ray: distance, facet tag, and point."""

    t: float
    tag: int  # facet index, or ELLIPSOID_TAG
    point: np.ndarray


class ConvexBody:
    """Polytope, ellipsoid, or their intersection."""

    def __init__(self, polytope=None, ellipsoid=None):
        if polytope is None and ellipsoid is None:
            raise ValueError("body needs at least one part")
        if polytope is not None and ellipsoid is not None and polytope.dim != ellipsoid.dim:
            raise DimensionError("polytope and ellipsoid dimensions differ")
        self.polytope = polytope
        self.ellipsoid = ellipsoid
        self._interior_point = None  # certified on first interior_point() call

    @property
    def dim(self):
        return self.polytope.dim if self.polytope is not None else self.ellipsoid.dim

    def __repr__(self):
        parts = []
        if self.polytope is not None:
            parts.append(repr(self.polytope))
        if self.ellipsoid is not None:
            parts.append(repr(self.ellipsoid))
        return "ConvexBody(" + " & ".join(parts) + ")"


def membership(body, x, tol=DEFAULT_MEMBERSHIP_TOL):
    """True iff x satisfies every part of the body within an absolute tolerance."""
    x = np.asarray(x, dtype=float)
    if x.shape != (body.dim,):
        raise DimensionError(f"point has shape {x.shape}, body dimension is {body.dim}")
    if body.polytope is not None and not body.polytope.contains(x, tol):
        return False
    if body.ellipsoid is not None and not body.ellipsoid.contains(x, tol):
        return False
    return True


def boundary_oracle(body, p, v):
    """Smallest t > 0 with p + t v on the boundary of the body.

    Facet roots come from one linear equation per facet; the ellipsoid root
    from the quadratic ``|v|_E^2 t^2 + 2 u'Ev t + (u'Eu - c) = 0`` in the
    centered coordinate u = p - center.  When facet and ellipsoid roots
    coincide within 1e-12 the facet wins (its normal is cheaper).
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    vnorm = np.linalg.norm(v)
    if vnorm == 0.0:
        raise ValueError("direction must be nonzero")

    t_facet = np.inf
    tag = None
    if body.polytope is not None:
        slack = body.polytope.slack(p)
        if np.min(slack) < -1e-9:
            raise DegenerateStartError("ray start is outside the polytope")
        av = body.polytope.A @ v
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = np.where(av > 0.0, slack / av, np.inf)
        j = int(np.argmin(roots))
        if roots[j] < np.inf:
            t_facet = float(roots[j])
            tag = j

    t_ell = np.inf
    if body.ellipsoid is not None:
        ell = body.ellipsoid
        u = p - ell.center
        Ev = ell.E @ v
        a = float(v @ Ev)
        bq = 2.0 * float(u @ Ev)
        cq = float(u @ ell.E @ u) - ell.c
        if cq > 1e-9 * max(abs(ell.c), 1.0):
            raise DegenerateStartError("ray start is outside the ellipsoid")
        if a > 0.0:
            disc = bq * bq - 4.0 * a * min(cq, 0.0)
            t_ell = (-bq + np.sqrt(max(disc, 0.0))) / (2.0 * a)
        elif bq > 0.0:
            t_ell = -cq / bq
        # a == 0 and bq <= 0: the ray never exits the ellipsoid

    if not np.isfinite(t_facet) and not np.isfinite(t_ell):
        raise UnboundedRayError("ray from interior point never hits the boundary")

    if t_facet <= t_ell + _TIE_TOL:
        t, hit_tag = t_facet, tag
    else:
        t, hit_tag = float(t_ell), ELLIPSOID_TAG
    if t <= 0.0:
        raise DegenerateStartError("ray start lies on the boundary")
    return HitRecord(t=t, tag=hit_tag, point=p + t * v)


def normal_at(body, hit):
    """Outward unit normal at a boundary point found by boundary_oracle."""
    if hit.tag == ELLIPSOID_TAG:
        ell = body.ellipsoid
        g = ell.E @ (hit.point - ell.center)
        gn = np.linalg.norm(g)
        if gn == 0.0:
            raise DegenerateBoundaryError("ellipsoid gradient vanishes at hit point")
        return g / gn
    a = body.polytope.A[hit.tag]
    an = body.polytope.row_norms[hit.tag]
    if an == 0.0:
        raise DegenerateBoundaryError(f"facet {hit.tag} has zero normal")
    return a / an


def reflect(v, s):
    """Specular reflection v - 2 <v, s> s against a unit normal s."""
    return v - 2.0 * np.dot(v, s) * s


class AffineEmbedding:
    """Orthonormal null-space map removing equality constraints B x = beq.

    ``project`` sends asset-space points to full-dimensional coordinates,
    ``lift`` inverts it on the affine set: lift(project(x)) = x whenever
    B x = beq.
    """

    def __init__(self, N, x0, B, beq):
        self.N = np.asarray(N, dtype=float)
        self.x0 = np.asarray(x0, dtype=float)
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.beq = np.atleast_1d(np.asarray(beq, dtype=float))
        if not np.allclose(self.N @ self.N.T, np.eye(self.N.shape[0]), atol=1e-10):
            raise ValueError("rows of N are not orthonormal")
        if not np.allclose(self.B @ self.N.T, 0.0, atol=1e-10):
            raise ValueError("N does not span the null space of B")
        if not np.allclose(self.B @ self.x0, self.beq, atol=1e-10):
            raise InfeasibleBodyError("anchor x0 violates the equality constraints")

    @property
    def ambient_dim(self):
        return self.N.shape[1]

    @property
    def dim(self):
        return self.N.shape[0]

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.x0) @ self.N.T

    def lift(self, y):
        y = np.asarray(y, dtype=float)
        return y @ self.N + self.x0


def build_embedding(B, beq, x0):
    """Embedding onto the affine set {x : B x = beq} anchored at a feasible x0."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    beq = np.atleast_1d(np.asarray(beq, dtype=float)).ravel()
    x0 = np.asarray(x0, dtype=float)
    if not np.allclose(B @ x0, beq, atol=1e-8):
        raise InfeasibleBodyError("x0 does not satisfy B x = beq")
    rank = np.linalg.matrix_rank(B)
    if rank < B.shape[0]:
        warnings.warn(
            f"equality matrix is rank deficient ({rank} independent of {B.shape[0]} rows); "
            "reducing to independent rows",
            stacklevel=2,
        )
        # keep a maximal independent row subset via pivoted QR of B'
        _, _, piv = scipy.linalg.qr(B.T, pivoting=True)
        B = B[np.sort(piv[:rank])]
        beq = beq[np.sort(piv[:rank])] if beq.shape[0] > rank else beq[:rank]
    N = scipy.linalg.null_space(B).T  # rank-revealing (SVD)
    return AffineEmbedding(N=N, x0=x0, B=B, beq=beq)


def embed_body(body, emb):
    """Push a body through an embedding, yielding a full-dimensional body.

    Polytope rows become A N' with offsets b - A x0.  The quadratic part is
    reduced to centered form by completing the square; the linear shift folds
    into the new center.
    """
    polytope = None
    if body.polytope is not None:
        A = body.polytope.A
        b = body.polytope.b
        A_new = A @ emb.N.T
        b_new = b - A @ emb.x0
        norms = np.linalg.norm(A_new, axis=1)
        degenerate = norms < 1e-12 * np.maximum(body.polytope.row_norms, 1.0)
        if np.any(degenerate & (b_new < -1e-9)):
            raise InfeasibleBodyError("a constraint is violated everywhere on the affine set")
        keep = ~degenerate
        if not np.any(keep):
            raise InfeasibleBodyError("no facets remain after embedding")
        polytope = HPolytope(A_new[keep], b_new[keep])

    ellipsoid = None
    if body.ellipsoid is not None:
        ell = body.ellipsoid
        shift = emb.x0 - ell.center
        E_new = emb.N @ ell.E @ emb.N.T
        g = emb.N @ (ell.E @ shift)
        c0 = float(shift @ ell.E @ shift)
        center_new, *_ = np.linalg.lstsq(E_new, -g, rcond=None)
        if not np.allclose(E_new @ center_new, -g, atol=1e-8 * max(1.0, np.linalg.norm(g))):
            raise InfeasibleBodyError("ellipsoid degenerates on the affine set")
        c_new = ell.c - c0 - float(g @ center_new)
        if c_new <= 1e-15:
            raise InfeasibleBodyError("ellipsoid has empty interior on the affine set")
        ellipsoid = Ellipsoid(E_new, c_new, center=center_new)

    return ConvexBody(polytope=polytope, ellipsoid=ellipsoid)


def chebyshev_ball(P):
    """Center and radius of the largest inscribed ball of a polytope.

    Solves  max r  s.t.  a_i'x + r ||a_i|| <= b_i  (an LP).
    """
    m, n = P.A.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0  # maximize r
    A_ub = np.hstack([P.A, P.row_norms[:, None]])
    res = scipy.optimize.linprog(
        c, A_ub=A_ub, b_ub=P.b, bounds=[(None, None)] * (n + 1), method="highs"
    )
    if res.status == 3:
        raise UnboundedBodyError("polytope is unbounded; Chebyshev ball does not exist")
    if res.status != 0:
        raise InfeasibleBodyError(f"Chebyshev LP failed: {res.message}")
    center, radius = res.x[:n], float(res.x[-1])
    if radius < -1e-9:
        raise InfeasibleBodyError("polytope is empty (negative Chebyshev radius)")
    if radius <= 1e-12:
        warnings.warn("polytope is not full-dimensional (zero Chebyshev radius)", stacklevel=2)
        radius = max(radius, 0.0)
    return center, radius


def _max_inscribed_ball_barrier(A, b, with_ball, tol=1e-10, max_newton=200):
    """Damped-Newton log-barrier solver for  max r : a_i'x + r||a_i|| <= b_i
    [, ||x|| <= 1 - r].

    Self-contained path-following on the (x, r) variables; the single
    second-order constraint uses the standard cone barrier
    -log((1-r)^2 - ||x||^2).  Returns (x, r).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, n = A.shape
    norms = np.linalg.norm(A, axis=1)
    zero_rows = norms < 1e-300
    if np.any(zero_rows & (b < 0)):
        raise InfeasibleBodyError("constraint 0 <= b_i violated (empty body)")
    A, b, norms = A[~zero_rows], b[~zero_rows], norms[~zero_rows]
    m = A.shape[0]

    r0 = min(0.0, float(np.min(b / norms))) - 0.5
    z = np.concatenate([np.zeros(n), [r0]])  # (x, r)

    def parts(z):
        x, r = z[:n], z[-1]
        lin = b - A @ x - r * norms
        if with_ball:
            one_m_r = 1.0 - r
            soc = one_m_r**2 - x @ x
        else:
            one_m_r, soc = 1.0, 1.0
        return x, r, lin, soc, one_m_r

    def feasible(z):
        _, _, lin, soc, one_m_r = parts(z)
        return np.min(lin) > 0.0 and soc > 0.0 and one_m_r > 0.0

    if not feasible(z):
        raise InfeasibleBodyError("could not construct a strictly feasible start")

    t = 1.0
    n_con = m + (2 if with_ball else 0)
    for _ in range(80):  # outer path-following
        for _ in range(max_newton):
            x, r, lin, soc, one_m_r = parts(z)
            inv_lin = 1.0 / lin
            # gradient of -t*r - sum log lin - [log soc + log(1-r)]
            g = np.zeros(n + 1)
            g[:n] = A.T @ inv_lin
            g[-1] = -t + norms @ inv_lin
            H = np.zeros((n + 1, n + 1))
            Aw = A * inv_lin[:, None]
            H[:n, :n] = Aw.T @ Aw
            H[:n, -1] = Aw.T @ (norms * inv_lin)
            H[-1, :n] = H[:n, -1]
            H[-1, -1] = np.sum((norms * inv_lin) ** 2)
            if with_ball:
                ds = np.concatenate([-2.0 * x, [-2.0 * one_m_r]])  # grad of soc
                g += -ds / soc
                g[-1] += 1.0 / one_m_r
                H += np.outer(ds, ds) / soc**2
                H[:n, :n] += 2.0 * np.eye(n) / soc
                H[-1, -1] += -2.0 / soc + 1.0 / one_m_r**2
            try:
                step = -np.linalg.solve(H + 1e-12 * np.eye(n + 1), g)
            except np.linalg.LinAlgError:
                step = -np.linalg.solve(H + 1e-8 * np.eye(n + 1), g)
            decrement = -0.5 * g @ step
            alpha = 1.0
            while alpha > 1e-14 and not feasible(z + alpha * step):
                alpha *= 0.5
            if alpha <= 1e-14:
                break
            z = z + alpha * step
            if decrement < tol:
                break
        if n_con / t < tol:
            break
        t *= 10.0
    x, r, lin, soc, _ = parts(z)
    return x, float(r)


def interior_point(body):
    """A strictly interior point of the body.

    Polytope-only bodies delegate to the Chebyshev ball.  For a polytope
    intersected with an ellipsoid, the ellipsoid is mapped to the unit ball
    and the largest inscribed ball of the transformed body is found by the
    cone program  max r : a_i'x + r||a_i|| <= b_i, ||x|| <= 1 - r.
    """
    if body._interior_point is not None:
        return body._interior_point.copy()

    if body.ellipsoid is None:
        center, radius = chebyshev_ball(body.polytope)
        if radius <= 0.0:
            raise InfeasibleBodyError("polytope has empty interior")
        point = center
    elif body.polytope is None:
        point = body.ellipsoid.center.copy()
    else:
        ell = body.ellipsoid
        L = ell.ball_map()
        sqrt_c = np.sqrt(ell.c)
        # x = center + sqrt(c) inv(L)' u  maps the unit ball onto the ellipsoid
        Li_A = scipy.linalg.solve_triangular(L, body.polytope.A.T, lower=True).T
        A_u = sqrt_c * Li_A
        b_u = body.polytope.b - body.polytope.A @ ell.center
        u, r = _max_inscribed_ball_barrier(A_u, b_u, with_ball=True)
        if r <= 1e-12:
            raise InfeasibleBodyError(
                "polytope-ellipsoid intersection has empty interior",
                binding=_binding_rows(body, ell.center),
            )
        point = ell.center + sqrt_c * scipy.linalg.solve_triangular(L, u, lower=True, trans="T")

    if not membership(body, point, tol=0.0):
        raise InfeasibleBodyError("computed center failed the membership check")
    body._interior_point = point.copy()
    return point


def _binding_rows(body, probe):
    """Facet indices with the smallest slack at a probe point (diagnostic aid)."""
    if body.polytope is None:
        return []
    slack = body.polytope.slack(probe) / np.maximum(body.polytope.row_norms, 1e-30)
    order = np.argsort(slack)
    return [int(j) for j in order[: min(5, len(order))]]


def diameter_estimate(body):
    """Crude diameter proxy used for walk defaults (exact for boxes and balls)."""
    if body.polytope is not None:
        _, r = chebyshev_ball(body.polytope)
        est = 2.0 * r * np.sqrt(body.dim)
        if body.ellipsoid is not None:
            est = min(est, _ellipsoid_diameter(body.ellipsoid))
        return max(est, 1e-12)
    return _ellipsoid_diameter(body.ellipsoid)


def _ellipsoid_diameter(ell):
    lam = np.linalg.eigvalsh(ell.E)
    lam_min = max(lam.min(), 1e-300)
    return 2.0 * np.sqrt(ell.c / lam_min)


def chebyshev_radius(body):
    """Inscribed-ball radius used to scale walk step sizes."""
    if body.polytope is not None:
        _, r = chebyshev_ball(body.polytope)
        if body.ellipsoid is not None:
            lam_max = np.linalg.eigvalsh(body.ellipsoid.E).max()
            r = min(r, np.sqrt(body.ellipsoid.c / lam_max))
        return max(r, 1e-12)
    lam_max = np.linalg.eigvalsh(body.ellipsoid.E).max()
    return np.sqrt(body.ellipsoid.c / lam_max)


def body_from_bounds(lower, upper):
    """Axis-aligned box as an H-polytope (testing convenience)."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.shape[0]
    A = np.vstack([np.eye(n), -np.eye(n)])
    b = np.concatenate([upper, -lower])
    return ConvexBody(polytope=HPolytope(A, b))


def simplex_body(n):
    """The canonical simplex embedded into n-1 dimensions.

    Returns (body, embedding); lifted points are nonnegative and sum to one.
    """
    B = np.ones((1, n))
    x0 = np.full(n, 1.0 / n)
    emb = build_embedding(B, np.array([1.0]), x0)
    asset_space = ConvexBody(polytope=HPolytope(-np.eye(n), np.zeros(n)))
    return embed_body(asset_space, emb), emb
