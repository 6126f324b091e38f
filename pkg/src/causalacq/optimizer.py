"""Projected gradient descent on the unit ball, plus per-method dispatch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from causalacq.acquisition import (
    AcqContext,
    AcqError,
    AcqMethod,
    acq_cv,
    acq_cv_grad,
    acq_ei_mc,
    acq_greedy,
    acq_maxv,
    acq_maxv_grad,
    acq_mi_mc,
    acq_random,
    acq_ucb,
    acq_ucb_grad,
    civ,
    civ_grad,
    civ_ow,
    civ_ow_grad,
    ei_candidates,
)


class OptimizerError(RuntimeError):
    """Non-finite value or gradient encountered during optimization."""


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 200
    grad_tol: float = 1e-7
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4

    def __post_init__(self):
        if min(self.max_iters, self.grad_tol, self.step_init, self.armijo_c) <= 0:
            raise ValueError("optimizer parameters must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")


def _project_ball(x: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(x)
    return x / nrm if nrm > 1.0 else x


def minimize_on_ball(value_fn, grad_fn, inits, cfg: OptimizerConfig = OptimizerConfig()):
    """Projected gradient descent with Armijo backtracking from each init.

    Returns the best (point, value) across inits. Final points within 1e-6 of
    the sphere are renormalized onto it (the CIV family attains its optimum on
    the sphere).
    """
    best_x = None
    best_v = np.inf
    for x0 in inits:
        x = _project_ball(np.asarray(x0, dtype=float).copy())
        v = value_fn(x)
        if not np.isfinite(v):
            raise OptimizerError(f"non-finite value at init {x0}")
        step = cfg.step_init
        for _ in range(cfg.max_iters):
            g = grad_fn(x)
            if not np.all(np.isfinite(g)):
                raise OptimizerError("non-finite gradient encountered")
            if np.linalg.norm(x - _project_ball(x - g)) <= cfg.grad_tol:
                break
            accepted = False
            while step > 1e-16:
                x_new = _project_ball(x - step * g)
                v_new = value_fn(x_new)
                if not np.isfinite(v_new):
                    raise OptimizerError("non-finite value during line search")
                decrease = g @ (x - x_new)
                if v_new <= v - cfg.armijo_c * decrease:
                    accepted = True
                    break
                step *= cfg.backtrack_factor
            if not accepted or np.allclose(x_new, x):
                break
            x, v = x_new, v_new
            step = min(step / cfg.backtrack_factor, cfg.step_init)
        if v < best_v:
            best_x, best_v = x, v
    nrm = np.linalg.norm(best_x)
    if nrm > 1.0 - 1e-6:
        best_x = best_x / nrm
        best_v = value_fn(best_x)
    return best_x, best_v


def _fd_grad(value_fn, x: np.ndarray) -> np.ndarray:
    """Central finite differences, available for the spectral objectives."""
    h = 1e-6 * max(1.0, np.linalg.norm(x))
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (value_fn(x + e) - value_fn(x - e)) / (2.0 * h)
    return g


def select_next(
    method: AcqMethod,
    ctx: AcqContext,
    prev_a: np.ndarray,
    seed,
    cfg: OptimizerConfig = OptimizerConfig(),
    f_best: float | None = None,
) -> np.ndarray:
    """Choose the next intervention for one of the named acquisition methods.

    Gradient methods start from both prev_a and the projected current
    estimate of a*; the lower value wins and exact ties keep the
    estimate-based solution.
    """
    if method.name == "random":
        return acq_random(ctx.p, seed)
    if method.name == "greedy":
        return acq_greedy(ctx)

    est_init = acq_greedy(ctx)
    inits = [est_init, _project_ball(np.asarray(prev_a, dtype=float))]

    if method.name == "civ":
        fns = (lambda a: civ(ctx, a), lambda a: civ_grad(ctx, a))
    elif method.name == "civ_ow":
        fns = (
            lambda a: civ_ow(ctx, a, method.kappa),
            lambda a: civ_ow_grad(ctx, a, method.kappa),
        )
    elif method.name == "maxv":
        fns = (lambda a: acq_maxv(ctx, a), lambda a: acq_maxv_grad(ctx, a))
    elif method.name == "cv":
        fns = (lambda a: acq_cv(ctx, a), lambda a: acq_cv_grad(ctx, a))
    elif method.name == "ucb":
        fns = (
            lambda a: -acq_ucb(ctx, a, method.beta_explore),
            lambda a: -acq_ucb_grad(ctx, a, method.beta_explore),
        )
    elif method.name in ("ei_mc", "mi_mc"):
        cands = ei_candidates(ctx, method.n_candidates, method.noise_scale, seed)
        rng = np.random.default_rng(seed)
        vals = []
        for j, a in enumerate(cands):
            s = int(rng.integers(2**32))
            if method.name == "ei_mc":
                if f_best is None:
                    raise AcqError("ei_mc needs the best objective so far")
                vals.append(acq_ei_mc(ctx, f_best, a, method.mc_samples, s))
            else:
                vals.append(acq_mi_mc(ctx, a, method.mc_samples, s))
        return cands[int(np.argmin(vals))]
    else:  # pragma: no cover - AcqMethod validates names
        raise AcqError(f"unsupported method {method.name!r}")

    value_fn, grad_fn = fns
    # run each init separately so ties resolve to the estimate-based start
    x_est, v_est = minimize_on_ball(value_fn, grad_fn, [inits[0]], cfg)
    x_prev, v_prev = minimize_on_ball(value_fn, grad_fn, [inits[1]], cfg)
    if v_prev < v_est - 1e-12:
        return x_prev
    return x_est
