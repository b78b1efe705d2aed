"""Core data model: video clips, availability masks, per-frame signals.

All types are immutable value objects: constructors copy their array
arguments and mark the copies read-only, so instances are safe to share
across threads. Constructors raise only on structural problems (wrong
rank, bad channel count, non-finite values); value-range and cross-member
invariants are audited by :func:`validate_bundle`, which reports instead
of raising so whole corpora can be checked in bulk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Tensor shapes or lengths are inconsistent."""


def _frozen_f32(data, rank: int, name: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float32)
    if arr.ndim != rank:
        raise ShapeError(f"{name} must have rank {rank}, got rank {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class VideoTensor:
    """A clip of T frames, H x W pixels, C channels, intensities in [0, 1].

    The unit-interval range is audited by validate_bundle rather than
    enforced here, so slightly out-of-range intermediates can still be
    inspected.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen_f32(self.data, 4, "video")
        t, _, _, c = arr.shape
        if t < 1:
            raise ShapeError("video needs at least one frame")
        if c not in (1, 3):
            raise ShapeError(f"channel count must be 1 or 3, got {c}")
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]


@dataclass(frozen=True)
class AvailabilityMask:
    """Frame-level observability bits: entry t is 1 when instance guidance
    exists at frame t. Stored per frame and broadcast spatially by consumers."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ShapeError(f"availability mask must be 1-D, got rank {arr.ndim}")
        if arr.size < 1:
            raise ShapeError("availability mask needs at least one entry")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("availability bits must be 0 or 1")
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def density(self) -> float:
        """Fraction of available frames."""
        return float(self.bits.mean())

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class FrameSignals:
    """Per-frame conditioning signals aligned to a companion video.

    mask: T x H x W binary foreground mask.
    instance_depth: T x H x W, nonnegative, zero exactly where mask is zero.
    background_depth: T x H x W, positive scene depth of the clean video.
    """

    mask: np.ndarray
    instance_depth: np.ndarray
    background_depth: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", _frozen_f32(self.mask, 3, "mask"))
        object.__setattr__(
            self, "instance_depth", _frozen_f32(self.instance_depth, 3, "instance_depth")
        )
        object.__setattr__(
            self,
            "background_depth",
            _frozen_f32(self.background_depth, 3, "background_depth"),
        )

    @property
    def frames(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class ConditionBundle:
    """The condition set fed to the denoiser: clean background video and
    depth, availability-masked instance signals, and the availability mask
    itself. Use make_condition_bundle to apply the masking rule."""

    background: VideoTensor
    signals: FrameSignals
    instance: VideoTensor
    availability: AvailabilityMask


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "violations", tuple(self.violations))
        if self.ok != (len(self.violations) == 0):
            raise ValueError("ok flag must mirror an empty violation list")


def apply_availability(signal, mask: AvailabilityMask):
    """Zero out the frames of an instance-side signal where the mask is 0.

    Accepts a VideoTensor or any array whose first axis is time; returns
    the same kind. Frames with bit 1 are copied through bitwise unchanged,
    and the input itself is never mutated.
    """
    arr = signal.data if isinstance(signal, VideoTensor) else np.asarray(signal)
    if arr.shape[0] != len(mask):
        raise ShapeError(
            f"signal has {arr.shape[0]} frames but availability mask has {len(mask)}"
        )
    bits = mask.bits.reshape((len(mask),) + (1,) * (arr.ndim - 1))
    out = arr * bits.astype(arr.dtype)
    # multiplication already copies; keep exact frames where available
    keep = mask.bits.astype(bool)
    out[keep] = arr[keep]
    if isinstance(signal, VideoTensor):
        return VideoTensor(out)
    return out


def make_condition_bundle(
    background: VideoTensor,
    signals: FrameSignals,
    instance: VideoTensor,
    availability: AvailabilityMask,
) -> ConditionBundle:
    """Assemble a bundle, masking the instance-specific signals (instance
    RGB, mask, instance depth) by availability. Background video and depth
    stay unmasked: scene geometry is always fully observable."""
    masked_signals = FrameSignals(
        mask=apply_availability(signals.mask, availability),
        instance_depth=apply_availability(signals.instance_depth, availability),
        background_depth=signals.background_depth,
    )
    return ConditionBundle(
        background=background,
        signals=masked_signals,
        instance=apply_availability(instance, availability),
        availability=availability,
    )


def validate_bundle(bundle: ConditionBundle) -> ValidationReport:
    """Audit every type invariant of a bundle. Never raises, never mutates."""
    v: list[tuple[str, str]] = []
    bg = bundle.background.data
    inst = bundle.instance.data
    sig = bundle.signals
    t, h, w, c = bg.shape

    if inst.shape != bg.shape:
        v.append(
            (
                "instance",
                f"shape {inst.shape} does not match background {bg.shape}",
            )
        )
    for name, arr in (
        ("mask", sig.mask),
        ("instance_depth", sig.instance_depth),
        ("background_depth", sig.background_depth),
    ):
        if arr.shape != (t, h, w):
            v.append((f"signals.{name}", f"shape {arr.shape} != {(t, h, w)}"))
    if len(bundle.availability) != t:
        v.append(
            (
                "availability",
                f"length mismatch: {len(bundle.availability)} bits for {t} frames",
            )
        )

    for name, vid in (("background", bg), ("instance", inst)):
        if vid.min() < 0.0 or vid.max() > 1.0:
            v.append((name, "values outside the unit interval"))
    if not np.all((sig.mask == 0.0) | (sig.mask == 1.0)):
        v.append(("signals.mask", "mask is not binary"))
    if sig.instance_depth.min() < 0.0:
        v.append(("signals.instance_depth", "negative depth"))
    if sig.background_depth.min() < 0.0:
        v.append(("signals.background_depth", "negative depth"))

    # cross-member checks only where shapes permit them
    if inst.shape == bg.shape and sig.mask.shape == (t, h, w):
        outside = sig.mask == 0.0
        if np.any(inst[outside] != 0.0):
            v.append(("instance", "instance nonzero outside mask"))
    if sig.mask.shape == (t, h, w) and sig.instance_depth.shape == (t, h, w):
        if np.any(sig.instance_depth[sig.mask == 0.0] != 0.0):
            v.append(("signals.instance_depth", "depth nonzero outside mask"))
        if np.any(sig.instance_depth[sig.mask == 1.0] == 0.0):
            v.append(("signals.instance_depth", "zero depth inside mask"))

    return ValidationReport(ok=not v, violations=tuple(v))
