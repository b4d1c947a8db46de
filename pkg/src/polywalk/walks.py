"""Geometric random walk kernels and the sampling orchestrator.

One step function per walk (ball walk, hit-and-run, coordinate hit-and-run,
billiard, Dikin, Vaidya, John, reflective HMC) plus ``sample`` which runs
independent chains, discards burn-in, thins, and lifts draws back to asset
space when an embedding is attached.

Chains use counter-based Philox generators spawned from one seed, so results
are bit-identical regardless of how chains are scheduled.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .densities import Uniform
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateStartError,
    PolywalkError,
    SupportError,
    UnboundedRayError,
)
from .geometry import (
    ELLIPSOID_TAG,
    boundary_oracle,
    chebyshev_radius,
    diameter_estimate,
    interior_point,
    membership,
    normal_at,
    reflect,
)

WALK_KINDS = ("baw", "har", "cdhr", "biw", "dikin", "vaidya", "john", "rehmc")
UNIFORM_ONLY = frozenset({"biw", "dikin", "vaidya", "john"})
POLYTOPE_ONLY = frozenset({"dikin", "vaidya", "john"})

_CACHE_REFRESH = 512  # steps between exact refreshes of amortized dot products


@dataclass(frozen=True)
class WalkConfig:
    """Walk selection and tuning knobs; None means a body-derived default."""

    kind: str = "har"
    delta: float | None = None  # ball walk radius
    tau: float | None = None  # billiard trajectory-length scale
    rho: int | None = None  # max reflections (biw / rehmc)
    radius: float | None = None  # dikin / vaidya / john ellipsoid radius
    eta: float | None = None  # leapfrog step
    leapfrog_steps: int = 10
    inner_mh_iters: int = 10  # chord Metropolis iterations for non-uniform HaR/CDHR
    burn_in: int = 1000
    thinning: int = 1
    seed: int = 0
    lazy: bool = True  # vaidya/john fair-coin step
    nuts: bool = False  # optional U-turn stopping for rehmc

    def validate(self):
        if self.kind not in WALK_KINDS:
            raise ConfigurationError(f"unknown walk kind {self.kind!r}")
        if self.kind == "baw" and self.delta is not None and self.delta <= 0:
            raise ConfigurationError("ball walk needs delta > 0")
        if self.kind == "biw":
            if self.tau is not None and self.tau <= 0:
                raise ConfigurationError("billiard walk needs tau > 0")
            if self.rho is not None and self.rho < 1:
                raise ConfigurationError("billiard walk needs rho >= 1")
        if self.kind == "rehmc":
            if self.eta is not None and self.eta <= 0:
                raise ConfigurationError("rehmc needs eta > 0")
            if self.leapfrog_steps < 1:
                raise ConfigurationError("rehmc needs at least one leapfrog step")
        if self.burn_in < 0 or self.thinning < 1:
            raise ConfigurationError("burn_in must be >= 0 and thinning >= 1")


@dataclass
class WalkState:
    """Mutable per-chain state; confined to a single chain."""

    current: np.ndarray
    rng: np.random.Generator
    cache: dict = field(default_factory=dict)
    steps: int = 0
    accepted: int = 0
    eta_scale: float = 1.0  # rehmc auto-shrink on invalid proposals


@dataclass
class SampleSet:
    """Draws in walk coordinates, optional lifted asset-space rows, and metadata."""

    draws: np.ndarray
    lifted: np.ndarray | None
    chain_meta: dict

    def chains(self):
        """Per-chain views of the draw matrix."""
        return [self.draws[a:b] for a, b in self.chain_meta["chain_bounds"]]

    def lifted_chains(self):
        if self.lifted is None:
            return self.chains()
        return [self.lifted[a:b] for a, b in self.chain_meta["chain_bounds"]]


# ---------------------------------------------------------------------------
# elementary draws


def _sphere_direction(rng, d):
    while True:
        v = rng.standard_normal(d)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


def _ball_point(rng, d):
    return _sphere_direction(rng, d) * rng.random() ** (1.0 / d)


def _log_target(target, state, p):
    """Cached log-density of the current point."""
    cached = state.cache.get("logpi")
    if cached is not None and cached[0] is p:
        return cached[1]
    val = target.log_density(p)
    state.cache["logpi"] = (p, val)
    return val


def _set_current(state, p, logpi=None):
    state.current = p
    if logpi is not None:
        state.cache["logpi"] = (p, logpi)


# ---------------------------------------------------------------------------
# ball walk


def baw_step(body, target, state, delta):
    """Uniform ball proposal, reject outside the body, Metropolis filter."""
    p = state.current
    state.steps += 1
    y = p + delta * _ball_point(state.rng, body.dim)
    if not membership(body, y):
        return p
    if target.is_uniform:
        state.accepted += 1
        _set_current(state, y, 0.0)
        return y
    ly = target.log_density(y)
    lp = _log_target(target, state, p)
    if np.log(state.rng.random()) < ly - lp:
        state.accepted += 1
        _set_current(state, y, ly)
        return y
    return p


# ---------------------------------------------------------------------------
# hit-and-run and its coordinate variant


def _chord_draw(target, state, p, v, t_lo, t_hi, inner_iters):
    """Draw a point on the chord p + t v, t in (t_lo, t_hi), from the target
    restricted to the chord (exact for uniform, inner Metropolis otherwise)."""
    rng = state.rng
    if target.is_uniform:
        t = rng.uniform(t_lo, t_hi)
        return t, 0.0, True
    t_cur = 0.0
    l_cur = _log_target(target, state, p)
    moved = False
    for _ in range(inner_iters):
        t_prop = rng.uniform(t_lo, t_hi)
        l_prop = target.log_density(p + t_prop * v)
        if np.log(rng.random()) < l_prop - l_cur:
            t_cur, l_cur = t_prop, l_prop
            moved = True
    return t_cur, l_cur, moved


def har_step(body, target, state, inner_iters=10):
    """Random-direction chord through the current point; draw along it."""
    p = state.current
    state.steps += 1
    for _ in range(100):
        v = _sphere_direction(state.rng, body.dim)
        t_hi = boundary_oracle(body, p, v).t
        t_lo = -boundary_oracle(body, p, -v).t
        if t_hi - t_lo >= 1e-12:
            break
    else:
        raise DegenerateStartError("no usable chord found after 100 directions")
    t, logpi, moved = _chord_draw(target, state, p, v, t_lo, t_hi, inner_iters)
    if moved or target.is_uniform:
        state.accepted += 1
        _set_current(state, p + t * v, logpi if not target.is_uniform else 0.0)
    return state.current


def _cdhr_cache(state, body):
    cache = state.cache.get("cdhr")
    if cache is None or state.steps % _CACHE_REFRESH == 0:
        cache = {}
        if body.polytope is not None:
            cache["Ap"] = body.polytope.A @ state.current
        state.cache["cdhr"] = cache
    return cache


def cdhr_step(body, target, state, inner_iters=10):
    """Axis-direction hit-and-run with O(m) amortized facet bookkeeping."""
    p = state.current
    state.steps += 1
    cache = _cdhr_cache(state, body)
    d = body.dim
    axis = int(state.rng.integers(d))

    t_hi = np.inf
    t_lo = -np.inf
    if body.polytope is not None:
        A = body.polytope.A
        slack = body.polytope.b - cache["Ap"]
        av = A[:, axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = slack / av
        pos = roots[av > 0]
        neg = roots[av < 0]
        if pos.size:
            t_hi = float(pos.min())
        if neg.size:
            t_lo = float(neg.max())
    if body.ellipsoid is not None:
        ell = body.ellipsoid
        u = p - ell.center
        Ek = ell.E[:, axis]
        a = float(Ek[axis])
        bq = 2.0 * float(u @ Ek)
        cq = float(u @ ell.E @ u) - ell.c
        if a > 0:
            disc = max(bq * bq - 4.0 * a * min(cq, 0.0), 0.0)
            t_hi = min(t_hi, (-bq + np.sqrt(disc)) / (2 * a))
            t_lo = max(t_lo, (-bq - np.sqrt(disc)) / (2 * a))
    if not np.isfinite(t_hi) or not np.isfinite(t_lo):
        raise UnboundedRayError("coordinate chord is unbounded")
    if t_hi - t_lo < 1e-12:
        return p  # degenerate axis at this point; stay

    v = np.zeros(d)
    v[axis] = 1.0
    t, logpi, moved = _chord_draw(target, state, p, v, t_lo, t_hi, inner_iters)
    if moved or target.is_uniform:
        q = p.copy()
        q[axis] += t
        if body.polytope is not None:
            cache["Ap"] = cache["Ap"] + t * body.polytope.A[:, axis]
        state.accepted += 1
        _set_current(state, q, logpi if not target.is_uniform else 0.0)
    return state.current


# ---------------------------------------------------------------------------
# billiard walk


class _BilliardCache:
    """Amortized a_j'p and a_j'v products with a facet Gram matrix."""

    def __init__(self, body):
        P = body.polytope
        self.P = P
        if P is not None:
            self.unit_A = P.A / P.row_norms[:, None]
            self.gram_unit = P.A @ self.unit_A.T  # (A a_k / ||a_k||) columns
        self.Ap = None
        self.Av = None

    def start(self, p, v):
        if self.P is None:
            return
        self.Ap = self.P.A @ p
        self.Av = self.P.A @ v

    def facet_hit(self):
        """Smallest positive facet root from cached products."""
        if self.P is None:
            return np.inf, None
        slack = self.P.b - self.Ap
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = np.where(self.Av > 0, slack / self.Av, np.inf)
        j = int(np.argmin(roots))
        return (float(roots[j]), j) if roots[j] < np.inf else (np.inf, None)

    def travel(self, t):
        if self.P is not None:
            self.Ap = self.Ap + t * self.Av

    def reflect_facet(self, v_dot_s, j):
        if self.P is not None:
            self.Av = self.Av - 2.0 * v_dot_s * self.gram_unit[:, j]

    def reflect_general(self, v):
        if self.P is not None:
            self.Av = self.P.A @ v

    def nudge(self, eps, s, s_tag):
        if self.P is None:
            return
        if s_tag == ELLIPSOID_TAG:
            self.Ap = self.Ap - eps * (self.P.A @ s)
        else:
            self.Ap = self.Ap - eps * self.gram_unit[:, s_tag]


def _ellipsoid_exit(ell, p, v):
    u = p - ell.center
    Ev = ell.E @ v
    a = float(v @ Ev)
    bq = 2.0 * float(u @ Ev)
    cq = float(u @ ell.E @ u) - ell.c
    if a > 0:
        disc = max(bq * bq - 4.0 * a * min(cq, 0.0), 0.0)
        return (-bq + np.sqrt(disc)) / (2.0 * a)
    if bq > 0:
        return -cq / bq
    return np.inf


def biw_step(body, state, tau, rho):
    """Billiard trajectory of exponential length with at most rho reflections.

    Exceeding the reflection budget returns the starting point unchanged.
    """
    rng = state.rng
    p0 = state.current
    state.steps += 1
    cache = state.cache.get("biw")
    if cache is None:
        cache = _BilliardCache(body)
        state.cache["biw"] = cache
    eps = state.cache.get("nudge", 1e-10)

    length = -tau * np.log(rng.random())
    v = _sphere_direction(rng, body.dim)
    p = p0
    if state.steps % _CACHE_REFRESH == 0:
        cache.Ap = None  # force a fresh start periodically
    cache.start(p, v)

    for _ in range(rho + 1):
        t_facet, j = cache.facet_hit()
        t_ell = (
            _ellipsoid_exit(body.ellipsoid, p, v) if body.ellipsoid is not None else np.inf
        )
        t_wall = min(t_facet, t_ell)
        if t_wall > length:
            q = p + length * v
            cache.travel(length)
            state.accepted += 1
            _set_current(state, q, 0.0)
            return q
        if not np.isfinite(t_wall) or t_wall <= 0:
            break  # degenerate geometry; give up on this trajectory
        p = p + t_wall * v
        cache.travel(t_wall)
        length -= t_wall
        if t_facet <= t_ell + 1e-12:
            s = cache.unit_A[j]
            tag = j
        else:
            g = body.ellipsoid.E @ (p - body.ellipsoid.center)
            gn = np.linalg.norm(g)
            if gn == 0.0:
                break
            s = g / gn
            tag = ELLIPSOID_TAG
        v_dot_s = float(np.dot(v, s))
        v = reflect(v, s)
        if tag == ELLIPSOID_TAG:
            cache.reflect_general(v)
        else:
            cache.reflect_facet(v_dot_s, tag)
        p = p - eps * s
        cache.nudge(eps, s, tag)

    _set_current(state, p0, 0.0)  # reflection budget exceeded: stay
    cache.Ap = None
    return p0


# ---------------------------------------------------------------------------
# barrier walks (Dikin / Vaidya / John)


def _log_barrier_pieces(P, p):
    slack = P.b - P.A @ p
    if np.min(slack) <= 0:
        return None, None
    C = P.A / slack[:, None]
    return slack, C


def _chol_logdet(H):
    L = np.linalg.cholesky(H)
    return L, 2.0 * float(np.sum(np.log(np.diag(L))))


def dikin_step(P, state, r):
    """Uniform proposal in the Dikin ellipsoid, volume-ratio Metropolis filter."""
    p = state.current
    state.steps += 1
    d = P.dim
    _, C = _log_barrier_pieces(P, p)
    if C is None:
        raise DegenerateStartError("current point is not interior")
    H_p = C.T @ C
    L_p, ld_p = _chol_logdet(H_p)
    u = _ball_point(state.rng, d)
    y = p + r * scipy.linalg.solve_triangular(L_p, u, lower=True, trans="T")
    slack_y = P.b - P.A @ y
    if np.min(slack_y) <= 0:
        return p
    C_y = P.A / slack_y[:, None]
    H_y = C_y.T @ C_y
    w = p - y
    if w @ H_y @ w > r * r:  # p outside E_y(r): zero reverse density
        return p
    _, ld_y = _chol_logdet(H_y)
    if np.log(state.rng.random()) < 0.5 * (ld_y - ld_p):
        state.accepted += 1
        _set_current(state, y)
        return y
    return p


def _vaidya_matrix(P, p):
    slack, C = _log_barrier_pieces(P, p)
    if C is None:
        return None
    m, d = P.A.shape
    H = C.T @ C
    lev = np.einsum("ij,ji->i", C, np.linalg.solve(H, C.T))
    V = (C * (lev + d / m)[:, None]).T @ C
    return V


def _gaussian_mh(P, state, p, matrix_fn, kappa, scale):
    """Shared Gaussian proposal + Metropolis machinery for Vaidya/John."""
    M_p = matrix_fn(P, p)
    if M_p is None:
        raise DegenerateStartError("current point is not interior")
    L_p, ld_p = _chol_logdet(M_p)
    xi = state.rng.standard_normal(P.dim)
    y = p + scale * scipy.linalg.solve_triangular(L_p, xi, lower=True, trans="T")
    if np.min(P.b - P.A @ y) <= 0:
        return p, False
    M_y = matrix_fn(P, y)
    _, ld_y = _chol_logdet(M_y)
    w = y - p
    log_fwd = 0.5 * ld_p - 0.5 * kappa * float(w @ M_p @ w)
    log_rev = 0.5 * ld_y - 0.5 * kappa * float(w @ M_y @ w)
    if np.log(state.rng.random()) < log_rev - log_fwd:
        return y, True
    return p, False


def vaidya_step(P, state, r, lazy=True):
    """Lazy Gaussian step shaped by the Vaidya metric (leverage + n/m weights)."""
    p = state.current
    state.steps += 1
    if lazy and state.rng.random() < 0.5:
        return p
    m, d = P.A.shape
    kappa = np.sqrt(m * d) / r**2
    scale = r / (m * d) ** 0.25
    q, ok = _gaussian_mh(P, state, p, _vaidya_matrix, kappa, scale)
    if ok:
        state.accepted += 1
        _set_current(state, q)
    return q


def john_weights(C, beta_j, a_j, tol=1e-8, max_iter=200, w0=None):
    """Approximate John weights via the leverage-score fixed point.

    Iterates w <- w^a * leverage(w) + beta until the sup-norm change is below
    tol; non-convergence raises with the trailing iteration trace.  ``w0``
    warm-starts the iteration (the fixed point itself does not depend on it).
    """
    m = C.shape[0]
    w = np.ones(m) if w0 is None else np.asarray(w0, dtype=float).copy()
    trace = []
    for _ in range(max_iter):
        wa = w**a_j
        M = (C * wa[:, None]).T @ C
        lev = np.einsum("ij,ji->i", C, np.linalg.solve(M, C.T))
        w_new = wa * lev + beta_j
        delta = float(np.max(np.abs(w_new - w)))
        trace.append(delta)
        w = w_new
        if delta < tol:
            return w
    raise ConvergenceError("John weight iteration did not converge", trace=trace[-20:])


def _john_matrix_factory(state):
    def matrix_fn(P, p):
        slack, C = _log_barrier_pieces(P, p)
        if C is None:
            return None
        m, d = P.A.shape
        beta_j = d / (2.0 * m)
        a_j = 1.0 - 1.0 / np.log2(1.0 / beta_j)
        zeta = john_weights(C, beta_j, a_j, w0=state.cache.get("john_w"))
        state.cache["john_w"] = zeta
        return (C * zeta[:, None]).T @ C

    return matrix_fn


def john_step(P, state, r, lazy=True):
    """Lazy Gaussian step shaped by the approximate John ellipsoid metric."""
    p = state.current
    state.steps += 1
    if lazy and state.rng.random() < 0.5:
        return p
    d = P.dim
    kappa = d**1.5 / r**2
    scale = r / d**0.75
    q, ok = _gaussian_mh(P, state, p, _john_matrix_factory(state), kappa, scale)
    if ok:
        state.accepted += 1
        _set_current(state, q)
    return q


# ---------------------------------------------------------------------------
# reflective HMC


def _reflective_advance(body, p, v, duration, rho, eps):
    """Advance p by duration * v, reflecting at the boundary (at most rho times).

    Returns (p, v, ok); ok is False when the reflection budget is exhausted
    or the geometry degenerates.
    """
    remaining = duration
    for _ in range(rho + 1):
        try:
            hit = boundary_oracle(body, p, v)
        except (DegenerateStartError, UnboundedRayError):
            return p, v, False
        if hit.t >= remaining:
            return p + remaining * v, v, True
        s = normal_at(body, hit)
        p = hit.point - eps * s
        v = reflect(v, s)
        remaining -= hit.t
    return p, v, False


def rehmc_step(body, target, state, eta, leapfrog_steps, rho, nuts=False):
    """Reflective leapfrog HMC step with a Metropolis correction.

    Position updates crossing the boundary are specularly reflected; running
    out of reflections rejects the proposal.  Invalid proposals (gradient or
    density evaluated outside the support) also reject and halve the
    effective step for subsequent attempts, floored at 1e-6.
    """
    rng = state.rng
    p0 = state.current
    state.steps += 1
    d = p0.shape[0]
    eps = state.cache.get("nudge", 1e-10)
    eta_eff = max(eta * state.eta_scale, 1e-6)

    v = rng.standard_normal(d)
    lp0 = _log_target(target, state, p0)
    if not np.isfinite(lp0):
        raise DegenerateStartError("current point has zero target density")
    h0 = -lp0 + 0.5 * float(v @ v)

    def shrink_and_stay():
        state.eta_scale = max(state.eta_scale * 0.5, 1e-6 / max(eta, 1e-300))
        return p0

    p = p0
    try:
        g = target.grad_log_density(p)
    except SupportError:
        return shrink_and_stay()
    v = v + 0.5 * eta_eff * g
    for i in range(leapfrog_steps):
        p, v, ok = _reflective_advance(body, p, v, eta_eff, rho, eps)
        if not ok:
            return shrink_and_stay()
        try:
            g = target.grad_log_density(p)
        except SupportError:
            return shrink_and_stay()
        if not np.all(np.isfinite(g)):
            return shrink_and_stay()
        last = i == leapfrog_steps - 1
        v = v + (0.5 if last else 1.0) * eta_eff * g
        if nuts and not last and float((p - p0) @ v) < 0.0:
            v = v - 0.5 * eta_eff * g  # complete the trailing half step
            break

    lp1 = target.log_density(p)
    if not np.isfinite(lp1):
        return shrink_and_stay()
    h1 = -lp1 + 0.5 * float(v @ v)
    if np.log(rng.random()) < h0 - h1:
        state.accepted += 1
        _set_current(state, p, lp1)
        return p
    return p0


# ---------------------------------------------------------------------------
# orchestration


@dataclass(frozen=True)
class _Resolved:
    kind: str
    delta: float
    tau: float
    rho: int
    radius: float
    eta: float
    leapfrog_steps: int
    inner_mh_iters: int
    lazy: bool
    nuts: bool
    nudge: float


def _resolve(config, body, target):
    d = body.dim
    r = chebyshev_radius(body)
    diam = diameter_estimate(body)
    if config.delta is not None:
        delta = config.delta
    elif target.is_uniform:
        delta = 4.0 * r / np.sqrt(d)
    else:
        delta = 4.0 * r / d
    return _Resolved(
        kind=config.kind,
        delta=delta,
        tau=config.tau if config.tau is not None else 2.0 * diam,
        rho=config.rho if config.rho is not None else 10 * d,
        radius=config.radius if config.radius is not None else 1.0,
        eta=config.eta if config.eta is not None else 0.5 * r,
        leapfrog_steps=config.leapfrog_steps,
        inner_mh_iters=config.inner_mh_iters,
        lazy=config.lazy,
        nuts=config.nuts,
        nudge=1e-10 * diam,
    )


def _make_stepper(body, target, rp):
    if rp.kind == "baw":
        return lambda st: baw_step(body, target, st, rp.delta)
    if rp.kind == "har":
        return lambda st: har_step(body, target, st, rp.inner_mh_iters)
    if rp.kind == "cdhr":
        return lambda st: cdhr_step(body, target, st, rp.inner_mh_iters)
    if rp.kind == "biw":
        return lambda st: biw_step(body, st, rp.tau, rp.rho)
    if rp.kind == "dikin":
        return lambda st: dikin_step(body.polytope, st, rp.radius)
    if rp.kind == "vaidya":
        return lambda st: vaidya_step(body.polytope, st, rp.radius, rp.lazy)
    if rp.kind == "john":
        return lambda st: john_step(body.polytope, st, rp.radius, rp.lazy)
    if rp.kind == "rehmc":
        return lambda st: rehmc_step(
            body, target, st, rp.eta, rp.leapfrog_steps, rp.rho, rp.nuts
        )
    raise ConfigurationError(f"unknown walk kind {rp.kind!r}")


def validate_pairing(body, target, kind):
    """Enforce the walk / target / body support matrix."""
    if kind not in WALK_KINDS:
        raise ConfigurationError(f"unknown walk kind {kind!r}")
    if kind in UNIFORM_ONLY and not target.is_uniform:
        raise ConfigurationError(f"walk {kind!r} samples only the uniform distribution")
    if kind in POLYTOPE_ONLY and body.ellipsoid is not None:
        raise ConfigurationError(f"walk {kind!r} requires a polytope-only body")
    if kind == "rehmc" and not hasattr(target, "grad_log_density"):
        raise ConfigurationError("rehmc needs a differentiable target")


def _jitter_start(body, x0, rng, scale):
    for _ in range(50):
        y = x0 + scale * rng.standard_normal(x0.shape[0])
        if membership(body, y, tol=0.0):
            return y
        scale *= 0.5
    return x0.copy()


def _run_chain(body, target, rp, stepper, x0, seed_seq, n_draws, burn_in, thinning, jitter):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    start = _jitter_start(body, x0, rng, jitter)
    state = WalkState(current=start, rng=rng)
    state.cache["nudge"] = rp.nudge
    for _ in range(burn_in):
        stepper(state)
    out = np.empty((n_draws, body.dim))
    for i in range(n_draws):
        for _ in range(thinning):
            stepper(state)
        out[i] = state.current
    rate = state.accepted / max(state.steps, 1)
    return out, rate


def sample(body, target=None, config=None, k=1000, n_chains=4, emb=None):
    """Run independent chains of the configured walk and assemble a SampleSet.

    Chains start from the interior point of the body plus a small random
    jitter, discard ``config.burn_in`` steps, and keep every
    ``config.thinning``-th state until ``k`` draws are collected in total.
    With an embedding attached the draws are lifted to asset space as well.
    """
    target = target if target is not None else Uniform()
    config = config if config is not None else WalkConfig()
    config.validate()
    validate_pairing(body, target, config.kind)

    meta = {
        "walk": config.kind,
        "seed": config.seed,
        "burn_in": config.burn_in,
        "thinning": config.thinning,
        "chain_bounds": [],
        "acceptance_rates": [],
    }
    if k == 0:
        return SampleSet(draws=np.empty((0, body.dim)), lifted=None, chain_meta=meta)
    if k < 0 or n_chains < 1:
        raise ConfigurationError("k must be >= 0 and n_chains >= 1")

    rp = _resolve(config, body, target)
    stepper = _make_stepper(body, target, rp)
    x0 = interior_point(body)
    jitter = 0.05 * chebyshev_radius(body)

    counts = [k // n_chains + (1 if i < k % n_chains else 0) for i in range(n_chains)]
    seeds = np.random.SeedSequence(config.seed).spawn(n_chains)
    jobs = [
        (body, target, rp, stepper, x0, seeds[i], counts[i], config.burn_in, config.thinning, jitter)
        for i in range(n_chains)
        if counts[i] > 0
    ]

    n_workers = int(os.environ.get("POLYWALK_THREADS", "1"))
    if n_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=min(n_workers, len(jobs))) as pool:
            results = list(pool.map(lambda args: _run_chain(*args), jobs))
    else:
        results = [_run_chain(*args) for args in jobs]

    blocks = []
    offset = 0
    for draws_i, rate_i in results:
        blocks.append(draws_i)
        meta["chain_bounds"].append((offset, offset + draws_i.shape[0]))
        meta["acceptance_rates"].append(rate_i)
        offset += draws_i.shape[0]
    draws = np.vstack(blocks)
    lifted = emb.lift(draws) if emb is not None else None
    return SampleSet(draws=draws, lifted=lifted, chain_meta=meta)
