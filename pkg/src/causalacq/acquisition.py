"""Acquisition functions for choosing the next shift intervention.

The CIV family has closed-form values and analytic gradients: every variant
reduces to sum_i A_i u_i^2 + C_i u_i where u_i is the look-ahead quadratic
form mu*_pa^T M_i(D(a')) mu*_pa. A' and C' encode the variance mode and the
integration weights, and differentiation chains through the predicted sample
xbar' = (I - E[B])^{-1} a'. Baselines (random, greedy, maxv, cv, ucb, ei_mc,
mi_mc) adapt standard active-learning criteria to the same posterior.

Additive and multiplicative constants that do not depend on a' are dropped
everywhere; only the argmin matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from causalacq.posterior import (
    Batch,
    DagBlrPosterior,
    KnownVariance,
    UnknownVariance,
    estimate_a_star,
    posterior_mean_B,
    update,
)
from causalacq.scm import inverse_of_i_minus


class AcqError(ValueError):
    """Acquisition precondition violated."""


_BALL_TOL = 1e-9


@dataclass(frozen=True)
class AcqMethod:
    """A named acquisition with its hyperparameters.

    Names match the CLI/CSV vocabulary: civ, civ_ow, random, greedy, maxv,
    cv, ucb, ei_mc, mi_mc.
    """

    name: str
    kappa: float = 5.0
    beta_explore: float = 0.5
    mc_samples: int = 200
    n_candidates: int = 20
    noise_scale: float = 0.25

    _NAMES = (
        "civ",
        "civ_ow",
        "random",
        "greedy",
        "maxv",
        "cv",
        "ucb",
        "ei_mc",
        "mi_mc",
    )

    def __post_init__(self):
        if self.name not in self._NAMES:
            raise AcqError(f"unknown acquisition method {self.name!r}")
        if self.mc_samples < 1 or self.n_candidates < 1:
            raise AcqError("MC sample counts must be positive")


@dataclass(frozen=True)
class AcqContext:
    """Immutable per-step cache of everything acquisition values need.

    Parent sets are padded to a common width so node-wise quadratic forms
    evaluate as single einsums. Padded slots carry index 0 and mask 0.
    """

    post: DagBlrPosterior
    mu_star: np.ndarray
    n: int
    # derived, filled by build_context
    b: np.ndarray = field(default=None)
    Ainv: np.ndarray = field(default=None)
    pa_idx: np.ndarray = field(default=None)
    mask: np.ndarray = field(default=None)
    Mpad: np.ndarray = field(default=None)
    mu_pa: np.ndarray = field(default=None)
    Mmu: np.ndarray = field(default=None)
    u0: np.ndarray = field(default=None)
    scale: np.ndarray = field(default=None)  # sigma^2 or beta'/(alpha'-1)
    w2: np.ndarray = field(default=None)  # unknown-variance only
    known: bool = field(default=True)

    @property
    def p(self) -> int:
        return self.post.dag.p


def build_context(post: DagBlrPosterior, mu_star: np.ndarray, n: int) -> AcqContext:
    if n < 1:
        raise AcqError("per-step sample budget must be at least 1")
    dag = post.dag
    p = dag.p
    kmax = max((len(pa) for pa in dag.parents), default=0)
    kmax = max(kmax, 1)
    pa_idx = np.zeros((p, kmax), dtype=np.intp)
    mask = np.zeros((p, kmax))
    Mpad = np.zeros((p, kmax, kmax))
    for i, pa in enumerate(dag.parents):
        k = len(pa)
        if k:
            pa_idx[i, :k] = pa
            mask[i, :k] = 1.0
            Mpad[i, :k, :k] = post.nodes[i].M
    mu_pa = mu_star[pa_idx] * mask
    Mmu = np.einsum("ijk,ik->ij", Mpad, mu_pa)
    u0 = np.einsum("ij,ij->i", mu_pa, Mmu)

    EB = posterior_mean_B(post)
    b = mu_star - EB @ mu_star
    Ainv = inverse_of_i_minus(dag, EB)

    known = isinstance(post.mode, KnownVariance)
    if known:
        scale = np.asarray(post.mode.sigma2, dtype=float)
        w2 = None
    else:
        alpha = np.array([nb.alpha for nb in post.nodes]) + 0.5 * n
        beta = np.array([nb.beta for nb in post.nodes])
        if np.any(alpha <= 2.0):
            raise AcqError(
                "unknown-variance acquisition needs alpha' > 2 at every node; "
                "absorb warm-up samples first"
            )
        scale = beta / (alpha - 1.0)
        w2 = beta * (2.0 * alpha - 1.0) / ((alpha - 1.0) * (alpha - 2.0))

    return AcqContext(
        post=post,
        mu_star=np.asarray(mu_star, dtype=float),
        n=n,
        b=b,
        Ainv=Ainv,
        pa_idx=pa_idx,
        mask=mask,
        Mpad=Mpad,
        mu_pa=mu_pa,
        Mmu=Mmu,
        u0=u0,
        scale=scale,
        w2=w2,
        known=known,
    )


def _check_ball(a_prime: np.ndarray):
    if not np.all(np.isfinite(a_prime)):
        raise AcqError("a' must be finite")
    if np.linalg.norm(a_prime) > 1.0 + _BALL_TOL:
        raise AcqError("a' must lie in the unit ball")


def _lookahead_u(ctx: AcqContext, a_prime: np.ndarray):
    """u_i = mu*_pa^T M_i(D(a')) mu*_pa for all i, with grad intermediates."""
    xbar = ctx.Ainv @ a_prime
    xpad = xbar[ctx.pa_idx] * ctx.mask
    q = np.einsum("ij,ij->i", xpad, ctx.Mmu)
    Mx = np.einsum("ijk,ik->ij", ctx.Mpad, xpad)
    d = np.einsum("ij,ij->i", xpad, Mx)
    denom = 1.0 + ctx.n * d
    u = ctx.u0 - ctx.n * q * q / denom
    return u, (xpad, q, Mx, denom)


def _quadratic_value(ctx: AcqContext, u: np.ndarray, W: np.ndarray, factor=1.0):
    """sum_i A_i u_i^2 + C_i u_i for integration weights W."""
    if ctx.known:
        A = ctx.scale**2
        C = 2.0 * ctx.scale**2 / ctx.n + 2.0 * ctx.scale * W
    else:
        A = ctx.scale * ctx.w2
        C = (2.0 / ctx.n) * ctx.scale * ctx.w2 + 4.0 * ctx.scale * W
    return factor * float(A @ (u * u) + C @ u)


def _quadratic_grad(ctx: AcqContext, a_prime: np.ndarray, W: np.ndarray, factor=1.0):
    u, (xpad, q, Mx, denom) = _lookahead_u(ctx, a_prime)
    if ctx.known:
        A = ctx.scale**2
        C = 2.0 * ctx.scale**2 / ctx.n + 2.0 * ctx.scale * W
    else:
        A = ctx.scale * ctx.w2
        C = (2.0 / ctx.n) * ctx.scale * ctx.w2 + 4.0 * ctx.scale * W
    gu = 2.0 * A * u + C
    # du_i/dxpad = -(2 n q / denom^2) (denom * Mmu - n q * Mx)
    coef = -2.0 * ctx.n * q / (denom * denom)
    gxpad = (gu * coef)[:, None] * (denom[:, None] * ctx.Mmu - (ctx.n * q)[:, None] * Mx)
    gx = np.zeros(ctx.p)
    np.add.at(gx, ctx.pa_idx, gxpad * ctx.mask)
    return factor * (ctx.Ainv.T @ gx)


def variance_g(ctx: AcqContext, a: np.ndarray, a_prime: np.ndarray) -> float:
    """Posterior variance of the optimality gap at a after a look-ahead at a'.

    Additive constant dropped.
    """
    _check_ball(a_prime)
    if not np.all(np.isfinite(a)):
        raise AcqError("a must be finite")
    u, _ = _lookahead_u(ctx, a_prime)
    W = (a - ctx.b) ** 2
    return _quadratic_value(ctx, u, W, factor=2.0 if ctx.known else 1.0)


def _uniform_weights(ctx: AcqContext) -> np.ndarray:
    return ctx.b**2 + 1.0 / ctx.p


def civ(ctx: AcqContext, a_prime: np.ndarray) -> float:
    """variance_g integrated over the uniform measure on the sphere."""
    _check_ball(a_prime)
    u, _ = _lookahead_u(ctx, a_prime)
    return _quadratic_value(ctx, u, _uniform_weights(ctx))


def civ_grad(ctx: AcqContext, a_prime: np.ndarray) -> np.ndarray:
    _check_ball(a_prime)
    return _quadratic_grad(ctx, a_prime, _uniform_weights(ctx))


def ow_weights(ctx: AcqContext, kappa: float) -> np.ndarray:
    """Output-weighted sphere integrals of (a_i - b_i)^2, per coordinate."""
    p = ctx.p
    if p < 3:
        raise AcqError("output weighting needs p >= 3")
    bhat = ctx.b
    if p == 3:
        if kappa <= 0:
            raise AcqError("kappa must be positive")
        coth = 1.0 / np.tanh(kappa)
        c0 = coth / kappa - 1.0 / kappa**2
        c1 = 2.0 - 3.0 * coth / kappa + 3.0 / kappa**2
        return c0 + c1 * bhat**2
    nb2 = float(bhat @ bhat)
    gap = np.maximum(nb2 - bhat**2, 1e-300)
    raw = gap ** (0.5 * (4.0 - p)) * bhat**2
    total = raw.sum()
    if not np.isfinite(total) or total <= 0.0:
        # degenerate estimate (b ~ 0 or a single live coordinate): spread evenly
        return np.full(p, (1.0 + nb2) / p)
    return (1.0 + nb2) * raw / total


def civ_ow(ctx: AcqContext, a_prime: np.ndarray, kappa: float = 5.0) -> float:
    """CIV with output weighting toward the current estimate of a*.

    At p = 2 CIV already always targets the unique upstream node, so the
    weighting is irrelevant and this falls back to civ.
    """
    _check_ball(a_prime)
    if ctx.p < 3:
        return civ(ctx, a_prime)
    u, _ = _lookahead_u(ctx, a_prime)
    return _quadratic_value(ctx, u, ow_weights(ctx, kappa))


def civ_ow_grad(ctx: AcqContext, a_prime: np.ndarray, kappa: float = 5.0) -> np.ndarray:
    _check_ball(a_prime)
    if ctx.p < 3:
        return civ_grad(ctx, a_prime)
    return _quadratic_grad(ctx, a_prime, ow_weights(ctx, kappa))


def acq_greedy(ctx: AcqContext) -> np.ndarray:
    """Current estimate of a*, projected onto the unit ball."""
    est = estimate_a_star(ctx.post, ctx.mu_star)
    nrm = np.linalg.norm(est)
    return est / max(1.0, nrm)


def acq_random(p: int, seed) -> np.ndarray:
    """Uniform draw from the unit sphere."""
    rng = np.random.default_rng(seed)
    while True:
        v = rng.standard_normal(p)
        nrm = np.linalg.norm(v)
        if nrm > 1e-12:
            return v / nrm


def _augmented_Mpad(ctx: AcqContext, a_prime: np.ndarray) -> np.ndarray:
    xbar = ctx.Ainv @ a_prime
    xpad = xbar[ctx.pa_idx] * ctx.mask
    Mx = np.einsum("ijk,ik->ij", ctx.Mpad, xpad)
    d = np.einsum("ij,ij->i", xpad, Mx)
    denom = 1.0 + ctx.n * d
    return ctx.Mpad - (ctx.n / denom)[:, None, None] * np.einsum(
        "ij,ik->ijk", Mx, Mx
    )


def acq_maxv(ctx: AcqContext, a_prime: np.ndarray) -> float:
    """Largest spectral norm of any row covariance after the look-ahead."""
    _check_ball(a_prime)
    Maug = _augmented_Mpad(ctx, a_prime)
    lam = np.linalg.eigvalsh(Maug)[:, -1]
    has_pa = ctx.mask[:, 0] > 0
    vals = np.where(has_pa, ctx.scale * lam, 0.0)
    return float(vals.max(initial=0.0))


def acq_maxv_grad(ctx: AcqContext, a_prime: np.ndarray) -> np.ndarray:
    """Subgradient of acq_maxv at the argmax node's top eigenvector."""
    _check_ball(a_prime)
    Maug = _augmented_Mpad(ctx, a_prime)
    lam, vecs = np.linalg.eigh(Maug)
    has_pa = ctx.mask[:, 0] > 0
    vals = np.where(has_pa, ctx.scale * lam[:, -1], 0.0)
    i = int(vals.argmax())
    if not has_pa[i]:
        return np.zeros(ctx.p)
    v = vecs[i, :, -1] * ctx.mask[i]
    # d(v^T M_aug v)/da' through xbar, analogous to the CIV chain
    xbar = ctx.Ainv @ a_prime
    x = xbar[ctx.pa_idx[i]] * ctx.mask[i]
    M = ctx.Mpad[i]
    Mx = M @ x
    Mv = M @ v
    q = v @ Mx
    denom = 1.0 + ctx.n * (x @ Mx)
    gxi = -(2.0 * ctx.n * q / denom**2) * (denom * Mv - ctx.n * q * Mx)
    gx = np.zeros(ctx.p)
    np.add.at(gx, ctx.pa_idx[i], gxi * ctx.mask[i])
    return ctx.scale[i] * (ctx.Ainv.T @ gx)


def acq_cv(ctx: AcqContext, a_prime: np.ndarray) -> float:
    """Spectral norm of the (diagonal) look-ahead covariance of (I-B)mu*."""
    _check_ball(a_prime)
    u, _ = _lookahead_u(ctx, a_prime)
    return float(np.max(ctx.scale * u, initial=0.0))


def acq_cv_grad(ctx: AcqContext, a_prime: np.ndarray) -> np.ndarray:
    _check_ball(a_prime)
    u, (xpad, q, Mx, denom) = _lookahead_u(ctx, a_prime)
    vals = ctx.scale * u
    i = int(vals.argmax())
    coef = -2.0 * ctx.n * q[i] / denom[i] ** 2
    gxi = coef * (denom[i] * ctx.Mmu[i] - ctx.n * q[i] * Mx[i])
    gx = np.zeros(ctx.p)
    np.add.at(gx, ctx.pa_idx[i], gxi * ctx.mask[i])
    return ctx.scale[i] * (ctx.Ainv.T @ gx)


def acq_ucb(ctx: AcqContext, a_prime: np.ndarray, beta_explore: float = 0.5) -> float:
    """Upper confidence bound on the optimality gap; MAXIMIZED by callers.

    Uses the unaugmented scale matrices: no look-ahead here by design.
    """
    _check_ball(a_prime)
    s = ctx.scale * ctx.u0
    diff = a_prime - ctx.b
    explore = np.sqrt(4.0 * float(s @ (diff * diff)))
    return -float(diff @ diff) + beta_explore * explore


def acq_ucb_grad(
    ctx: AcqContext, a_prime: np.ndarray, beta_explore: float = 0.5
) -> np.ndarray:
    _check_ball(a_prime)
    s = ctx.scale * ctx.u0
    diff = a_prime - ctx.b
    inner = 4.0 * float(s @ (diff * diff))
    g = -2.0 * diff
    if inner > 1e-300:
        g = g + beta_explore * (4.0 * s * diff) / np.sqrt(inner)
    return g


def sample_B(post: DagBlrPosterior, K: int, rng: np.random.Generator) -> list:
    """K joint draws of the weight matrix rows; returns per-node (K, k_i) arrays."""
    draws = []
    for i, nb in enumerate(post.nodes):
        k = nb.m.shape[0]
        if k == 0:
            draws.append(np.zeros((K, 0)))
            continue
        if isinstance(post.mode, KnownVariance):
            s2 = np.full(K, post.mode.sigma2[i])
        else:
            if nb.beta <= 0:
                s2 = np.zeros(K)
            else:
                s2 = nb.beta / rng.gamma(nb.alpha, 1.0, size=K)
        L = np.linalg.cholesky(nb.M)
        z = rng.standard_normal((K, k))
        draws.append(nb.m + np.sqrt(s2)[:, None] * (z @ L.T))
    return draws


def _solve_sampled(post: DagBlrPosterior, Bdraws: list, rhs: np.ndarray) -> np.ndarray:
    """Solve (I - B_k) x_k = rhs_k for every draw k, in topological order."""
    K = rhs.shape[0]
    X = np.zeros_like(rhs)
    for i in post.dag.topo:
        pa = list(post.dag.parents[i])
        X[:, i] = rhs[:, i]
        if pa:
            X[:, i] += np.einsum("kj,kj->k", Bdraws[i], X[:, pa])
    return X


def acq_ei_mc(
    ctx: AcqContext, f_best: float, a_prime: np.ndarray, K: int, seed
) -> float:
    """MC expected improvement of the squared target gap; MINIMIZED by callers."""
    _check_ball(a_prime)
    if not np.isfinite(f_best):
        raise AcqError("f_best must be finite")
    rng = np.random.default_rng(seed)
    Bdraws = sample_B(ctx.post, K, rng)
    X = _solve_sampled(ctx.post, Bdraws, np.tile(a_prime, (K, 1)))
    dist2 = np.sum((X - ctx.mu_star) ** 2, axis=1)
    return float(np.minimum(dist2 - f_best, 0.0).mean())


def acq_mi_mc(ctx: AcqContext, a_prime: np.ndarray, K: int, seed) -> float:
    """MC expected posterior entropy of (I-B)mu* after acquiring at a'.

    Entropy restricted to the coordinates with non-degenerate variance (the
    same set for every a', so the argmin is unchanged); additive constants
    dropped. Known-variance mode is deterministic and short-circuits.
    """
    _check_ball(a_prime)
    active = ctx.u0 > 1e-15
    if not np.any(active):
        return float("-inf")
    if ctx.known:
        u, _ = _lookahead_u(ctx, a_prime)
        return 0.5 * float(np.sum(np.log(ctx.scale[active] * u[active])))
    rng = np.random.default_rng(seed)
    n = ctx.n
    total = 0.0
    for _ in range(K):
        Bdraws = sample_B(ctx.post, 1, rng)
        noise = np.empty((n, ctx.p))
        for i, nb in enumerate(ctx.post.nodes):
            s2 = nb.beta / rng.gamma(nb.alpha, 1.0) if nb.beta > 0 else 0.0
            noise[:, i] = np.sqrt(s2) * rng.standard_normal(n)
        Bd = [np.tile(d, (n, 1)) for d in Bdraws]
        Xp = _solve_sampled(ctx.post, Bd, noise + a_prime)
        aug = update(ctx.post, Batch(X=Xp, a=a_prime, n=n))
        ctx2 = build_context(aug, ctx.mu_star, n)
        w = ctx2.scale[active] * ctx2.u0[active]
        total += 0.5 * float(np.sum(np.log(np.maximum(w, 1e-300))))
    return total / K


def ei_candidates(ctx: AcqContext, L: int, noise_scale: float, seed) -> np.ndarray:
    """L sphere candidates perturbing the current estimate of a*."""
    rng = np.random.default_rng(seed)
    est = estimate_a_star(ctx.post, ctx.mu_star)
    out = np.empty((L, ctx.p))
    for j in range(L):
        v = est + noise_scale * rng.standard_normal(ctx.p)
        nrm = np.linalg.norm(v)
        out[j] = v / nrm if nrm > 1e-12 else acq_random(ctx.p, rng.integers(2**32))
    return out
