"""Ground-truth linear Gaussian SCMs over a known DAG.

All linear systems in (I - B) are solved by forward/backward substitution in
topological order; no general matrix inverses are formed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from causalacq.graph import Dag, GraphKind, generate


class ScmError(ValueError):
    """Invalid SCM input or infeasible instance generation."""


@dataclass(frozen=True)
class LinearScm:
    """Linear Gaussian SCM: x = B x + eps, eps ~ N(0, diag(sigma2))."""

    dag: Dag
    B: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        p = self.dag.p
        if self.B.shape != (p, p):
            raise ScmError(f"B must be {p}x{p}")
        if self.sigma2.shape != (p,):
            raise ScmError(f"sigma2 must have length {p}")
        if np.any(self.sigma2 <= 0):
            raise ScmError("noise variances must be strictly positive")
        support = np.zeros((p, p), dtype=bool)
        for i, pa in enumerate(self.dag.parents):
            support[i, list(pa)] = True
        if np.any(self.B[~support] != 0.0):
            raise ScmError("B has nonzero entries outside the DAG support")


@dataclass(frozen=True)
class Instance:
    """One synthetic benchmark problem: SCM plus its optimal intervention."""

    scm: LinearScm
    a_star: np.ndarray
    mu_star: np.ndarray

    def __post_init__(self):
        resid = np.linalg.norm(
            forward_solve(self.scm.dag, self.scm.B, self.a_star) - self.mu_star
        )
        if resid > 1e-9:
            raise ScmError(f"mu_star inconsistent with a_star (residual {resid:.2e})")

    def to_json(self) -> str:
        return json.dumps(
            {
                "dag": json.loads(self.scm.dag.to_json()),
                "B": self.scm.B.tolist(),
                "sigma2": self.scm.sigma2.tolist(),
                "a_star": self.a_star.tolist(),
                "mu_star": self.mu_star.tolist(),
            }
        )

    @classmethod
    def from_json(cls, s: str) -> "Instance":
        d = json.loads(s)
        dag = Dag.from_json(json.dumps(d["dag"]))
        scm = LinearScm(
            dag=dag, B=np.asarray(d["B"]), sigma2=np.asarray(d["sigma2"])
        )
        return cls(
            scm=scm,
            a_star=np.asarray(d["a_star"]),
            mu_star=np.asarray(d["mu_star"]),
        )


def forward_solve(dag: Dag, B: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve (I - B) x = y by substitution in topological order."""
    x = np.array(y, dtype=float, copy=True)
    for i in dag.topo:
        pa = dag.parents[i]
        if pa:
            x[i] += B[i, list(pa)] @ x[list(pa)]
    return x


def transpose_solve(dag: Dag, B: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve (I - B)^T z = g by substitution in reverse topological order."""
    z = np.array(g, dtype=float, copy=True)
    ch = dag.children()
    for i in reversed(dag.topo):
        for j in ch[i]:
            z[i] += B[j, i] * z[j]
    return z


def inverse_of_i_minus(dag: Dag, B: np.ndarray) -> np.ndarray:
    """Dense (I - B)^{-1}, built column-by-column via triangular solves."""
    p = dag.p
    out = np.empty((p, p))
    eye = np.eye(p)
    for k in range(p):
        out[:, k] = forward_solve(dag, B, eye[:, k])
    return out


def gen_weights(dag: Dag, seed: int) -> LinearScm:
    """Draw edge weights uniformly from [-1, -0.25] u [0.25, 1]; unit noise."""
    rng = np.random.default_rng(seed)
    B = np.zeros((dag.p, dag.p))
    for i in range(dag.p):
        for k in dag.parents[i]:
            mag = rng.uniform(0.25, 1.0)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            B[i, k] = sign * mag
    return LinearScm(dag=dag, B=B, sigma2=np.ones(dag.p))


def analytic_covariance(scm: LinearScm) -> np.ndarray:
    """Observational covariance (I-B)^{-1} diag(sigma2) (I-B)^{-T}."""
    A = inverse_of_i_minus(scm.dag, scm.B)
    return (A * scm.sigma2[None, :]) @ A.T


def standardize(scm: LinearScm) -> LinearScm:
    """Rescale each variable to unit marginal variance.

    Equivalent to processing nodes in topological order and rescaling
    mechanism i by sqrt(Var(x_i)) of the pre-standardization model.
    """
    s = np.sqrt(np.diag(analytic_covariance(scm)))
    B = scm.B * (s[None, :] / s[:, None])
    sigma2 = scm.sigma2 / s**2
    return LinearScm(dag=scm.dag, B=B, sigma2=sigma2)


def sample(scm: LinearScm, a: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Draw n samples of x = (I-B)^{-1}(a + eps) by forward substitution."""
    if n < 1:
        raise ScmError(f"sample count must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    p = scm.dag.p
    eps = rng.standard_normal((n, p)) * np.sqrt(scm.sigma2)[None, :]
    X = eps + np.asarray(a, dtype=float)[None, :]
    for i in scm.dag.topo:
        pa = list(scm.dag.parents[i])
        if pa:
            X[:, i] += X[:, pa] @ scm.B[i, pa]
    return X


def optimal_intervention(B: np.ndarray, mu_star: np.ndarray) -> np.ndarray:
    """Shift whose infinite-sample interventional mean is mu_star: (I-B) mu_star."""
    return mu_star - B @ mu_star


def target_mean(dag: Dag, B: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Infinite-sample mean under shift a: (I-B)^{-1} a."""
    return forward_solve(dag, B, a)


_MAX_SUPPORT_RESAMPLES = 100


def gen_instance(
    kind: GraphKind,
    p: int,
    k_targets: int,
    target_rule: str,
    seed: int,
) -> Instance:
    """Build a full synthetic instance: DAG, standardized weights, a*, mu*.

    target_rule is "random" or "most_downstream". Supports consisting only of
    sink nodes are rejected (they make the look-ahead acquisition degenerate).
    """
    if not 1 <= k_targets <= p:
        raise ScmError(f"k_targets must be in [1, {p}], got {k_targets}")
    if target_rule not in ("random", "most_downstream"):
        raise ScmError(f"unknown target rule {target_rule!r}")

    rng = np.random.default_rng(seed)
    dag = generate(kind, p, seed=int(rng.integers(2**63)))
    scm = standardize(gen_weights(dag, seed=int(rng.integers(2**63))))
    sinks = set(dag.sinks())

    if target_rule == "most_downstream":
        if k_targets == 1:
            non_sinks = [i for i in dag.topo if i not in sinks]
            if not non_sinks:
                raise ScmError("all nodes are sinks; no valid single target")
            support = [non_sinks[-1]]
        else:
            support = list(dag.topo[-k_targets:])
            if all(i in sinks for i in support):
                raise ScmError(
                    "most-downstream support contains only sink nodes"
                )
    else:
        support = None
        for _ in range(_MAX_SUPPORT_RESAMPLES):
            cand = [int(v) for v in rng.choice(p, k_targets, replace=False)]
            if any(i not in sinks for i in cand):
                support = cand
                break
        if support is None:
            raise ScmError("could not draw a support containing a non-sink node")

    a_star = np.zeros(p)
    z = rng.standard_normal(k_targets)
    a_star[support] = z / np.linalg.norm(z)
    mu_star = forward_solve(dag, scm.B, a_star)
    return Instance(scm=scm, a_star=a_star, mu_star=mu_star)
