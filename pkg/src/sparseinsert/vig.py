"""Variable-information guidance: sampling availability masks across a
hybrid family of sparsity regimes so one model serves any control density.

Regimes:
    SINGLE  exactly one available frame
    SPARSE  per-frame Bernoulli with density drawn from a low range
    DENSE   per-frame Bernoulli with density drawn from a high range
    ANCHOR  every frame available (full supervision)

The regime mixture weights, density ranges, and endpoint bias are config
defaults, not published values; they are exposed so experiments can sweep
them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import AvailabilityMask


class Regime(enum.Enum):
    SINGLE = "single"
    SPARSE = "sparse"
    DENSE = "dense"
    ANCHOR = "anchor"


_DEFAULT_WEIGHTS = {
    Regime.SINGLE: 0.10,
    Regime.SPARSE: 0.40,
    Regime.DENSE: 0.30,
    Regime.ANCHOR: 0.20,
}


@dataclass(frozen=True)
class RegimeConfig:
    """Sampling law for availability masks.

    placement 'uniform' drops the endpoint bias entirely;
    'endpoints_biased' forces the first frame on (and the last frame too,
    when the raw draw produced at least two frames) with probability
    endpoint_bias. First/last-frame control is the primary inference mode,
    so training should see it often.
    """

    weights: dict = field(default_factory=lambda: dict(_DEFAULT_WEIGHTS))
    sparse_density_range: tuple = (0.02, 0.30)
    dense_density_range: tuple = (0.30, 0.90)
    placement: str = "endpoints_biased"
    endpoint_bias: float = 0.5

    def __post_init__(self):
        weights = {Regime(k) if not isinstance(k, Regime) else k: float(v) for k, v in self.weights.items()}
        if set(weights) != set(Regime):
            raise ValueError(f"weights must cover exactly {[r.value for r in Regime]}")
        if any(w < 0 for w in weights.values()):
            raise ValueError("regime weights must be nonnegative")
        if abs(sum(weights.values()) - 1.0) > 1e-9:
            raise ValueError("regime weights must sum to 1")
        object.__setattr__(self, "weights", weights)
        for name, rng in (
            ("sparse_density_range", self.sparse_density_range),
            ("dense_density_range", self.dense_density_range),
        ):
            lo, hi = rng
            if not (0.0 < lo <= hi < 1.0):
                raise ValueError(f"{name} must satisfy 0 < lo <= hi < 1, got {rng}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.sparse_density_range[1] > self.dense_density_range[0]:
            raise ValueError("sparse range must not exceed the dense range")
        if self.placement not in ("uniform", "endpoints_biased"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if not (0.0 <= self.endpoint_bias <= 1.0):
            raise ValueError("endpoint_bias must lie in [0, 1]")


def sample_mask(length: int, cfg: RegimeConfig, seed: int) -> tuple[AvailabilityMask, Regime]:
    """Draw one availability mask of the given length.

    Deterministic per (length, cfg, seed). Draw order is pinned: regime,
    regime-specific draws, endpoint bias, empty-mask repair. Every returned
    mask has at least one available frame; a degenerate all-zero Bernoulli
    draw is repaired by forcing one uniformly chosen frame rather than
    resampling, which keeps the density statistics analyzable.
    """
    if length < 1:
        raise ValueError("mask length must be at least 1")
    rng = np.random.default_rng(seed)

    regimes = list(Regime)
    probs = np.array([cfg.weights[r] for r in regimes])
    regime = regimes[int(rng.choice(len(regimes), p=probs / probs.sum()))]

    bits = np.zeros(length, dtype=np.uint8)
    if regime is Regime.SINGLE:
        bits[int(rng.integers(length))] = 1
    elif regime is Regime.ANCHOR:
        bits[:] = 1
    else:
        lo, hi = (
            cfg.sparse_density_range if regime is Regime.SPARSE else cfg.dense_density_range
        )
        density = float(rng.uniform(lo, hi))
        bits = (rng.random(length) < density).astype(np.uint8)
        drawn = int(bits.sum())
        if cfg.placement == "endpoints_biased" and rng.random() < cfg.endpoint_bias:
            bits[0] = 1
            if drawn >= 2:
                bits[-1] = 1
        if bits.sum() == 0:
            bits[int(rng.integers(length))] = 1

    return AvailabilityMask(bits), regime


def fixed_mask(length: int, keyframes) -> AvailabilityMask:
    """Inference-time control mask: available exactly at the given frame
    indices (sorted, unique, in range)."""
    idx = list(keyframes)
    if not idx:
        raise ValueError("at least one keyframe index is required")
    if any(not (0 <= k < length) for k in idx):
        raise ValueError(f"keyframe indices must lie in [0, {length})")
    if sorted(set(idx)) != idx:
        raise ValueError("keyframe indices must be sorted and unique")
    bits = np.zeros(length, dtype=np.uint8)
    bits[np.asarray(idx, dtype=int)] = 1
    return AvailabilityMask(bits)
