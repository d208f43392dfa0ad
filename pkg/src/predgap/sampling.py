"""Monte Carlo and quasi-Monte Carlo estimators of the prediction gap.

These are the sampling baselines the exact algorithm is measured against:
plain MC draws independent noise per perturbed feature, QMC runs the Halton
sequence (restarted at index 1 for every query) through each feature's
inverse CDF.  No variance-reduction tricks on purpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .exact import _check_query
from .model import TreeEnsemble
from .perturb import PerturbationSpec, halton_matrix

_METHODS = ("mc", "qmc")


@dataclass(frozen=True)
class EstimatorConfig:
    """How to estimate: 'mc' or 'qmc', iteration count, and the MC seed."""

    method: str
    iterations: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValidationError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")


def perturbed_inputs(
    vec: np.ndarray, feats: tuple[int, ...], spec: PerturbationSpec, config: EstimatorConfig
) -> np.ndarray:
    """One perturbed copy of ``vec`` per iteration, features in ascending order.

    QMC assigns Halton coordinate j to the j-th smallest perturbed feature
    and ignores the seed; the sequence is deterministic.
    """
    n = config.iterations
    X = np.tile(vec, (n, 1))
    if config.method == "mc":
        rng = np.random.default_rng(config.seed)
        for q in feats:
            X[:, q] += spec.distribution_for(q).sample_n(rng, n)
    else:
        U = halton_matrix(n, len(feats))
        for j, q in enumerate(feats):
            X[:, q] += spec.distribution_for(q).inv_cdf_n(U[:, j])
    return X


def _sampled_gaps(ensemble, x, features, spec, config):
    vec, feats = _check_query(ensemble, x, features, spec)
    if not feats:
        return None
    c = ensemble.predict(vec)
    X = perturbed_inputs(vec, feats, spec, config)
    return ensemble.predict_batch(X) - c


def pg2_sampled(
    ensemble: TreeEnsemble, x, features, spec: PerturbationSpec, config: EstimatorConfig
) -> float:
    """Mean of (f(x') - f(x))^2 over the configured draws."""
    gaps = _sampled_gaps(ensemble, x, features, spec, config)
    if gaps is None:
        return 0.0
    return float(np.mean(gaps * gaps))


def pg_abs_sampled(
    ensemble: TreeEnsemble, x, features, spec: PerturbationSpec, config: EstimatorConfig
) -> float:
    """Mean of |f(x') - f(x)| over the configured draws."""
    gaps = _sampled_gaps(ensemble, x, features, spec, config)
    if gaps is None:
        return 0.0
    return float(np.mean(np.abs(gaps)))
