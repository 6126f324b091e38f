"""Independent reference implementations used to check the package.

Everything here is written the slow, obvious way (explicit matrix inverses,
brute-force Monte Carlo) on purpose: these are the oracles, not the product.
"""

import numpy as np


def blr_conjugate(X, y, alpha0, beta0, m0, M0):
    """Batch normal-inverse-gamma update for y = X w + noise."""
    n = y.shape[0]
    M0inv = np.linalg.inv(M0)
    Mn_inv = M0inv + X.T @ X
    Mn = np.linalg.inv(Mn_inv)
    mn = Mn @ (M0inv @ m0 + X.T @ y)
    alpha_n = alpha0 + 0.5 * n
    beta_n = beta0 + 0.5 * (y @ y + m0 @ M0inv @ m0 - mn @ Mn_inv @ mn)
    return alpha_n, beta_n, mn, Mn


def mc_variance_g(post, sigma2, mu_star, a, a_prime, n, draws, seed):
    """Monte-Carlo Var(g(a) | D_t(a')) for a known-variance posterior.

    Samples the edge-weight rows from the look-ahead posterior (augmented
    scale matrices, unchanged means) and the averaged noise, then takes the
    empirical variance of the squared optimality gap.
    """
    from causalacq.posterior import augmented_M

    rng = np.random.default_rng(seed)
    p = post.dag.p
    Maug = augmented_M(post, a_prime, n)
    # z_i = B_i . mu*_pa(i), independent across rows
    z = np.zeros((draws, p))
    for i, nb in enumerate(post.nodes):
        pa = list(post.dag.parents[i])
        if not pa:
            continue
        mu_pa = mu_star[pa]
        mean = nb.m @ mu_pa
        var = sigma2[i] * (mu_pa @ Maug[i] @ mu_pa)
        z[:, i] = mean + np.sqrt(max(var, 0.0)) * rng.standard_normal(draws)
    eps_bar = rng.standard_normal((draws, p)) * np.sqrt(sigma2 / n)
    g = np.sum((a + eps_bar - mu_star + z) ** 2, axis=1)
    return float(np.var(g))


def uniform_sphere(p, count, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, p))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def fd_gradient(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def affine_fit_r2(x, y):
    """R^2 of the best affine map x -> y."""
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
