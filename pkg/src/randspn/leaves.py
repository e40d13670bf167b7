"""Leaf distribution log-densities with exact marginalization by masking.

Leaves factorize over their scope, so marginalizing a variable out is the
same as dropping its univariate term: masked entries contribute exactly 0 in
the log domain. Gaussian leaves are the working default; Bernoulli leaves
exist so that discrete circuits can be checked against exhaustive
enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

LOG_2PI = float(np.log(2.0 * np.pi))
VARIANCE_FLOOR = 1e-4


@dataclass
class GaussianLeaf:
    scope: tuple[int, ...]
    means: np.ndarray                  # (d,)
    variances: np.ndarray | None = None  # (d,), defaults to all ones

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        if self.variances is None:
            self.variances = np.ones_like(self.means)
        else:
            self.variances = np.asarray(self.variances, dtype=float)
            if np.any(self.variances <= 0):
                raise InvalidInput("Gaussian leaf variances must be positive")


@dataclass
class BernoulliLeaf:
    scope: tuple[int, ...]
    success_logits: np.ndarray  # (d,)

    def __post_init__(self):
        self.success_logits = np.asarray(self.success_logits, dtype=float)


def _check_observed_finite(x, missing):
    observed = x if missing is None else np.where(missing, 0.0, x)
    if not np.all(np.isfinite(observed)):
        raise InvalidInput("observed values must be finite")


def gaussian_block_log_density(x, means, variances=None, missing=None):
    """Log-densities of a block of factorized Gaussians.

    x: (N, d) values for the block's scope variables; means: (I, d);
    variances: (I, d) or None for unit variance; missing: (N, d) boolean,
    True entries are marginalized out. Returns (N, I).
    """
    x = np.asarray(x, dtype=float)
    means = np.asarray(means, dtype=float)
    if x.ndim != 2 or means.ndim != 2 or x.shape[1] != means.shape[1]:
        raise InvalidInput(
            f"shape mismatch: batch {x.shape} vs means {means.shape}"
        )
    _check_observed_finite(x, missing)
    if variances is None:
        var = np.ones_like(means)
        log_var = np.zeros_like(means)
    else:
        var = np.asarray(variances, dtype=float)
        log_var = np.log(var)
    diff = x[:, None, :] - means[None, :, :]                      # (N, I, d)
    terms = -0.5 * (LOG_2PI + log_var[None, :, :] + diff * diff / var[None, :, :])
    if missing is not None:
        terms = np.where(np.asarray(missing, bool)[:, None, :], 0.0, terms)
    return terms.sum(axis=2)


def bernoulli_block_log_mass(x, success_logits, missing=None):
    """Log-masses of a block of factorized Bernoullis; x entries in {0, 1}."""
    x = np.asarray(x, dtype=float)
    logits = np.asarray(success_logits, dtype=float)
    if x.ndim != 2 or logits.ndim != 2 or x.shape[1] != logits.shape[1]:
        raise InvalidInput(
            f"shape mismatch: batch {x.shape} vs logits {logits.shape}"
        )
    _check_observed_finite(x, missing)
    # log sigmoid(l) = -log1p(exp(-l)), computed stably on both branches
    log_p = -np.logaddexp(0.0, -logits)
    log_q = -np.logaddexp(0.0, logits)
    terms = x[:, None, :] * log_p[None, :, :] + (1.0 - x[:, None, :]) * log_q[None, :, :]
    if missing is not None:
        terms = np.where(np.asarray(missing, bool)[:, None, :], 0.0, terms)
    return terms.sum(axis=2)


def clamped_variances(log_vars):
    """Trainable variances with the degenerate-Gaussian floor applied."""
    return np.maximum(np.exp(np.asarray(log_vars, dtype=float)), VARIANCE_FLOOR)


def leaf_log_density(leaf, x, missing=None) -> float:
    """Log-density of a single leaf node at one assignment over its scope."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    mask = None if missing is None else np.asarray(missing, bool).reshape(1, -1)
    if isinstance(leaf, GaussianLeaf):
        out = gaussian_block_log_density(x, leaf.means[None, :], leaf.variances[None, :], mask)
    elif isinstance(leaf, BernoulliLeaf):
        out = bernoulli_block_log_mass(x, leaf.success_logits[None, :], mask)
    else:
        raise InvalidInput(f"unknown leaf type {type(leaf).__name__}")
    return float(out[0, 0])


def leaf_log_density_batch(leaf, batch, missing=None) -> np.ndarray:
    """Vectorized ``leaf_log_density`` over the rows of ``batch``. Returns (N,)."""
    batch = np.asarray(batch, dtype=float)
    if isinstance(leaf, GaussianLeaf):
        out = gaussian_block_log_density(batch, leaf.means[None, :], leaf.variances[None, :], missing)
    elif isinstance(leaf, BernoulliLeaf):
        out = bernoulli_block_log_mass(batch, leaf.success_logits[None, :], missing)
    else:
        raise InvalidInput(f"unknown leaf type {type(leaf).__name__}")
    return out[:, 0]
