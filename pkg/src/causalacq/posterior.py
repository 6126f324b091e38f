"""Conjugate Bayesian model over (B, Sigma) respecting the DAG sparsity.

Each node i carries a normal-inverse-gamma belief over its incoming edge
weights and noise variance. Updates under shift interventions subtract the
shift from the node value and run the standard conjugate recursion, one
sample at a time via Sherman-Morrison so the scale matrix inverse is never
formed and the beta increment is a non-negative residual quotient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from causalacq.graph import Dag
from causalacq.scm import forward_solve


class PosteriorError(ValueError):
    """Invalid posterior input or numerically broken update."""


@dataclass(frozen=True)
class KnownVariance:
    """Noise variances fixed and known; alpha/beta carried but unused."""

    sigma2: np.ndarray


@dataclass(frozen=True)
class UnknownVariance:
    """Noise variances inferred through the inverse-gamma marginals."""


@dataclass(frozen=True)
class NodeBelief:
    alpha: float
    beta: float
    m: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        k = self.m.shape[0]
        if self.M.shape != (k, k):
            raise PosteriorError("m and M dimensions disagree")
        if self.beta < -1e-9:
            raise PosteriorError(f"beta must be non-negative, got {self.beta}")
        if k > 0:
            try:
                np.linalg.cholesky(self.M)
            except np.linalg.LinAlgError as exc:
                raise PosteriorError("M is not positive definite") from exc


@dataclass(frozen=True)
class DagBlrPosterior:
    dag: Dag
    nodes: tuple[NodeBelief, ...]
    mode: KnownVariance | UnknownVariance
    sample_count: int = 0

    def __post_init__(self):
        if len(self.nodes) != self.dag.p:
            raise PosteriorError("one belief per node required")
        for i, nb in enumerate(self.nodes):
            if nb.m.shape[0] != len(self.dag.parents[i]):
                raise PosteriorError(f"belief dimension mismatch at node {i}")

    def to_json(self) -> str:
        mode = (
            {"kind": "known", "sigma2": self.mode.sigma2.tolist()}
            if isinstance(self.mode, KnownVariance)
            else {"kind": "unknown"}
        )
        return json.dumps(
            {
                "mode": mode,
                "sample_count": self.sample_count,
                "nodes": [
                    {
                        "alpha": nb.alpha,
                        "beta": nb.beta,
                        "m": nb.m.tolist(),
                        "M": nb.M.tolist(),
                    }
                    for nb in self.nodes
                ],
            }
        )


@dataclass(frozen=True)
class Batch:
    """Samples X drawn under a single shift intervention a."""

    X: np.ndarray
    a: np.ndarray
    n: int

    def __post_init__(self):
        if self.n < 1 or self.X.shape[0] != self.n:
            raise PosteriorError("batch must contain at least one sample")
        if not np.all(np.isfinite(self.X)):
            raise PosteriorError("batch contains non-finite samples")


def init_prior(
    dag: Dag,
    alpha0: float = 2.0,
    beta0: float = 0.0,
    mode: KnownVariance | UnknownVariance = UnknownVariance(),
) -> DagBlrPosterior:
    """Prior with m_i = 0 and M_i = I for every node."""
    if isinstance(mode, UnknownVariance) and alpha0 <= 0:
        raise PosteriorError("alpha0 must be positive in unknown-variance mode")
    nodes = tuple(
        NodeBelief(
            alpha=alpha0,
            beta=beta0,
            m=np.zeros(len(pa)),
            M=np.eye(len(pa)),
        )
        for pa in dag.parents
    )
    return DagBlrPosterior(dag=dag, nodes=nodes, mode=mode)


def _update_node(nb: NodeBelief, Xp: np.ndarray, y: np.ndarray) -> NodeBelief:
    """Absorb regression samples (Xp rows, shifted responses y) into one belief."""
    m = nb.m.copy()
    M = nb.M.copy()
    beta = nb.beta
    for s in range(y.shape[0]):
        x = Xp[s]
        r = y[s] - m @ x
        Mx = M @ x
        denom = 1.0 + x @ Mx
        beta += 0.5 * r * r / denom
        m = m + Mx * (r / denom)
        M = M - np.outer(Mx, Mx) / denom
        M = 0.5 * (M + M.T)
    alpha = nb.alpha + 0.5 * y.shape[0]
    if M.size and not np.all(np.isfinite(M)):
        raise PosteriorError("scale matrix update produced non-finite values")
    return NodeBelief(alpha=alpha, beta=beta, m=m, M=M)


def update(post: DagBlrPosterior, batch: Batch) -> DagBlrPosterior:
    """Conjugate posterior update from one interventional batch."""
    p = post.dag.p
    if batch.X.shape[1] != p or batch.a.shape != (p,):
        raise PosteriorError("batch dimensions do not match the model")
    nodes = []
    for i in range(p):
        pa = list(post.dag.parents[i])
        Xp = batch.X[:, pa]
        y = batch.X[:, i] - batch.a[i]
        nodes.append(_update_node(post.nodes[i], Xp, y))
    return replace(
        post, nodes=tuple(nodes), sample_count=post.sample_count + batch.n
    )


def posterior_mean_B(post: DagBlrPosterior) -> np.ndarray:
    """Matrix of posterior mean edge weights (zero off the DAG support)."""
    B = np.zeros((post.dag.p, post.dag.p))
    for i, nb in enumerate(post.nodes):
        pa = list(post.dag.parents[i])
        if pa:
            B[i, pa] = nb.m
    return B


def estimate_a_star(post: DagBlrPosterior, mu_star: np.ndarray) -> np.ndarray:
    """Plug-in estimate of the optimal shift: (I - E[B]) mu_star."""
    return mu_star - posterior_mean_B(post) @ mu_star


def hypothetical_sample(post: DagBlrPosterior, a_prime: np.ndarray) -> np.ndarray:
    """Predicted outcome of a_prime under the posterior mean model."""
    return forward_solve(post.dag, posterior_mean_B(post), a_prime)


def augmented_M(
    post: DagBlrPosterior, a_prime: np.ndarray, n: int
) -> list[np.ndarray]:
    """Per-node scale matrices after absorbing n hypothetical samples of a_prime.

    Only the scale matrices change under hypothetical augmentation; the other
    hyperparameters need no recomputation (beyond the deterministic alpha
    increment), so only matrices are returned.
    """
    if n < 1:
        raise PosteriorError("augmentation sample count must be at least 1")
    xbar = hypothetical_sample(post, a_prime)
    out = []
    for i, nb in enumerate(post.nodes):
        pa = list(post.dag.parents[i])
        if not pa:
            out.append(nb.M.copy())
            continue
        x = xbar[pa]
        Mx = nb.M @ x
        denom = 1.0 + n * (x @ Mx)
        out.append(nb.M - n * np.outer(Mx, Mx) / denom)
    return out
