"""Shared model builders for the test suite."""

import numpy as np

from freqconn.varcore import VarModel


def make_model(phi, sigma, names=None, intercept=None):
    """VarModel from raw arrays; phi may be one matrix or a list of them."""
    arr = np.asarray(phi, dtype=float)
    phi = [arr] if arr.ndim == 2 else [np.asarray(m, dtype=float) for m in phi]
    sigma = np.asarray(sigma, dtype=float)
    k = sigma.shape[0]
    return VarModel(
        k=k,
        p=len(phi),
        intercept=np.zeros(k) if intercept is None else np.asarray(intercept, dtype=float),
        phi=tuple(phi),
        sigma=sigma,
        n_obs=0,
        variable_names=tuple(names) if names else tuple(f"V{i + 1}" for i in range(k)),
    )


def random_stable_var(k, p, seed, target_radius=None):
    """Random stable VAR with the companion spectral radius rescaled to a
    target in [0.3, 0.85] and a random correlation-like innovation matrix."""
    rng = np.random.default_rng(seed)
    target = rng.uniform(0.3, 0.85) if target_radius is None else target_radius
    phi = rng.normal(size=(p, k, k)) / np.sqrt(k * p)
    base = make_model(list(phi), np.eye(k))
    r0 = base.spectral_radius
    assert r0 > 1e-8, "degenerate random draw"
    scale = target / r0
    phi = [phi[j] * scale ** (j + 1) for j in range(p)]
    a = rng.normal(size=(k, k))
    sigma = a @ a.T + 0.5 * np.eye(k)
    d = np.sqrt(np.diag(sigma))
    sigma = sigma / np.outer(d, d)
    return make_model(phi, sigma)


def model_fleet(n=200, seed0=1000):
    """Deterministic fleet cycling k in {2, 3, 5} and p in {1, 2}."""
    combos = [(k, p) for k in (2, 3, 5) for p in (1, 2)]
    return [
        random_stable_var(*combos[i % len(combos)], seed=seed0 + i)
        for i in range(n)
    ]


def white_noise_model(sigma, names=None):
    sigma = np.asarray(sigma, dtype=float)
    k = sigma.shape[0]
    return make_model(np.zeros((k, k)), sigma, names=names)
