"""Independent per-feature perturbation distributions and Halton sequences.

Every distribution exposes an O(1) CDF, its inverse, and seeded sampling.
``cdf`` is the usual right-continuous Pr[delta <= v]; ``cdf_below`` is the
left limit Pr[delta < v], which only differs for discrete distributions and
is what half-open interval probabilities are built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import ndtri

from .errors import NumericDomainError, ValidationError

_SQRT2 = math.sqrt(2.0)


class Distribution:
    """Common surface for the supported perturbation distributions."""

    def cdf(self, v: float) -> float:
        raise NotImplementedError

    def cdf_below(self, v: float) -> float:
        return self.cdf(v)

    def interval_prob(self, lo: float, hi: float) -> float:
        """Pr[lo <= delta < hi] for the half-open interval [lo, hi)."""
        if hi <= lo:
            return 0.0
        return self.cdf_below(hi) - self.cdf_below(lo)

    def inv_cdf(self, u: float) -> float:
        if not 0.0 < u < 1.0:
            raise NumericDomainError(f"inverse CDF needs u in (0, 1), got {u}")
        return float(self.inv_cdf_n(np.asarray([u]))[0])

    def inv_cdf_n(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.sample_n(rng, 1)[0])

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(Distribution):
    """Centered normal noise with standard deviation ``sigma``."""

    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"gaussian sigma must be positive, got {self.sigma}")

    def cdf(self, v: float) -> float:
        return 0.5 * (1.0 + math.erf(v / (self.sigma * _SQRT2)))

    def inv_cdf_n(self, u: np.ndarray) -> np.ndarray:
        return self.sigma * ndtri(u)

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(0.0, self.sigma, size=n)


@dataclass(frozen=True)
class Uniform(Distribution):
    """Uniform noise on [-half_width, half_width]."""

    half_width: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise ValidationError(
                f"uniform half_width must be positive, got {self.half_width}"
            )

    def cdf(self, v: float) -> float:
        w = self.half_width
        if v <= -w:
            return 0.0
        if v >= w:
            return 1.0
        return (v + w) / (2.0 * w)

    def inv_cdf_n(self, u: np.ndarray) -> np.ndarray:
        return (2.0 * u - 1.0) * self.half_width

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=n)


@dataclass(frozen=True)
class Discrete(Distribution):
    """A finite point distribution given as (offset, probability) pairs."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValidationError("discrete distribution needs at least one point")
        offsets = [p[0] for p in self.points]
        probs = [p[1] for p in self.points]
        if any(not math.isfinite(o) for o in offsets):
            raise ValidationError("discrete offsets must be finite")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValidationError("discrete offsets must be strictly increasing")
        if any(p < 0 for p in probs):
            raise ValidationError("discrete probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValidationError(
                f"discrete probabilities must sum to 1, got {sum(probs)!r}"
            )
        object.__setattr__(self, "points", tuple((float(o), float(p)) for o, p in self.points))

    @cached_property
    def _offsets(self) -> np.ndarray:
        return np.asarray([p[0] for p in self.points], dtype=np.float64)

    @cached_property
    def _cum(self) -> np.ndarray:
        return np.cumsum([p[1] for p in self.points])

    def cdf(self, v: float) -> float:
        i = int(np.searchsorted(self._offsets, v, side="right"))
        return 0.0 if i == 0 else float(self._cum[i - 1])

    def cdf_below(self, v: float) -> float:
        i = int(np.searchsorted(self._offsets, v, side="left"))
        return 0.0 if i == 0 else float(self._cum[i - 1])

    def inv_cdf(self, u: float) -> float:
        # Generalized inverse: the smallest offset whose CDF reaches u.
        if not 0.0 < u < 1.0:
            raise NumericDomainError(f"inverse CDF needs u in (0, 1), got {u}")
        i = int(np.searchsorted(self._cum, u, side="left"))
        return float(self._offsets[min(i, len(self.points) - 1)])

    def inv_cdf_n(self, u: np.ndarray) -> np.ndarray:
        idx = np.minimum(
            np.searchsorted(self._cum, u, side="left"), len(self.points) - 1
        )
        return self._offsets[idx]

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self._offsets[np.searchsorted(self._cum, rng.random(n), side="right").clip(max=len(self.points) - 1)]


@dataclass(frozen=True)
class PerturbationSpec:
    """One independent noise distribution per feature.

    Entries may be None for features that are never perturbed; asking for
    such a feature's distribution raises.
    """

    per_feature: tuple[Distribution | None, ...]

    @property
    def num_features(self) -> int:
        return len(self.per_feature)

    def distribution_for(self, feature: int) -> Distribution:
        if not 0 <= feature < len(self.per_feature):
            raise ValidationError(
                f"feature {feature} outside the perturbation spec (d={len(self.per_feature)})"
            )
        dist = self.per_feature[feature]
        if dist is None:
            raise ValidationError(f"feature {feature} has no perturbation distribution")
        return dist

    @staticmethod
    def same(dist: Distribution, num_features: int) -> PerturbationSpec:
        return PerturbationSpec(per_feature=(dist,) * num_features)

    @staticmethod
    def gaussian(sigma: float, num_features: int) -> PerturbationSpec:
        return PerturbationSpec.same(Gaussian(sigma), num_features)


def distribution_from_config(obj) -> Distribution:
    """Build one distribution from its JSON-config description."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("distribution config must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "gaussian":
        return Gaussian(float(obj["sigma"]))
    if kind == "uniform":
        return Uniform(float(obj["half_width"]))
    if kind == "discrete":
        pts = obj.get("points")
        if not isinstance(pts, list):
            raise ValidationError("discrete config needs a 'points' array")
        return Discrete(tuple((float(o), float(p)) for o, p in pts))
    raise ValidationError(f"unknown distribution kind {kind!r}")


def spec_from_config(obj, num_features: int) -> PerturbationSpec:
    """A config is either one distribution for all features or a per-feature list."""
    if isinstance(obj, list):
        if len(obj) != num_features:
            raise ValidationError(
                f"per-feature config has {len(obj)} entries, expected {num_features}"
            )
        return PerturbationSpec(
            per_feature=tuple(
                None if entry is None else distribution_from_config(entry)
                for entry in obj
            )
        )
    return PerturbationSpec.same(distribution_from_config(obj), num_features)


# ---------------------------------------------------------------------------
# Halton sequence
# ---------------------------------------------------------------------------

def _first_primes(count: int) -> tuple[int, ...]:
    primes: list[int] = []
    candidate = 2
    while len(primes) < count:
        if all(candidate % p for p in primes):
            primes.append(candidate)
        candidate += 1
    return tuple(primes)


_PRIMES = _first_primes(256)


def radical_inverse(index: int, base: int) -> float:
    """Reflect the base-``base`` digits of ``index`` about the radix point."""
    inv = 0.0
    scale = 1.0 / base
    while index > 0:
        index, digit = divmod(index, base)
        inv += digit * scale
        scale /= base
    return inv


def halton_point(index: int, dim: int) -> tuple[float, ...]:
    """The ``index``-th Halton point (1-based, unscrambled) in [0, 1)^dim."""
    if index < 1:
        raise ValidationError(f"halton index must be >= 1, got {index}")
    if not 1 <= dim <= len(_PRIMES):
        raise ValidationError(
            f"halton dimension {dim} outside the prime-table capacity (1..{len(_PRIMES)})"
        )
    return tuple(radical_inverse(index, _PRIMES[j]) for j in range(dim))


def halton_matrix(count: int, dim: int) -> np.ndarray:
    """Halton points for indices 1..count, one row per index."""
    if count < 1:
        raise ValidationError(f"need at least one halton point, got {count}")
    if not 1 <= dim <= len(_PRIMES):
        raise ValidationError(
            f"halton dimension {dim} outside the prime-table capacity (1..{len(_PRIMES)})"
        )
    out = np.empty((count, dim), dtype=np.float64)
    indices = np.arange(1, count + 1, dtype=np.int64)
    for j in range(dim):
        base = _PRIMES[j]
        work = indices.copy()
        inv = np.zeros(count, dtype=np.float64)
        scale = 1.0 / base
        while work.any():
            inv += (work % base) * scale
            work //= base
            scale /= base
        out[:, j] = inv
    return out
