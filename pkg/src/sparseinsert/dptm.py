"""Distribution-preserving temporal masking.

Sparse conditioning is stabilized in three moves: missing instance frames
are filled with the temporally nearest available frame in pixel space (so
the codec sees natural video statistics), token slices whose whole source
window was unobserved are zeroed in latent space, and a per-frame
availability channel reshaped to token resolution carries the exact
observability pattern into the condition stack.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .core import AvailabilityMask, ConditionBundle, ShapeError, VideoTensor
from .tensorio import read_tensor, write_tensor

if TYPE_CHECKING:
    from .codec import LatentTokens

CONDITION_LAYOUT_VERSION = 1


class NoAvailableFrames(ValueError):
    """Nearest completion needs at least one available frame."""


@dataclass(frozen=True)
class TemporalGrouping:
    """Partition of frame indices into the windows merged per latent step:
    the first frame alone, then consecutive windows of `factor` frames."""

    factor: int
    groups: tuple

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))

    @property
    def token_length(self) -> int:
        return len(self.groups)

    @property
    def frames(self) -> int:
        return sum(len(g) for g in self.groups)


def build_grouping(frames: int, factor: int) -> TemporalGrouping:
    """Grouping law: [0], [1..factor], [factor+1..2*factor], ...

    Requires frames == 1 (mod factor) so the windows tile exactly; the
    resulting token length is 1 + (frames-1)/factor == ceil(frames/factor).
    """
    if frames < 1:
        raise ShapeError("need at least one frame")
    if factor < 1:
        raise ValueError("temporal factor must be >= 1")
    if factor == 1:
        return TemporalGrouping(1, tuple((t,) for t in range(frames)))
    if (frames - 1) % factor != 0:
        raise ShapeError(
            f"{frames} frames are incompatible with temporal factor {factor}: "
            f"need frames == 1 (mod {factor}); pad or trim the clip"
        )
    groups = [(0,)] + [
        tuple(range(1 + i * factor, 1 + (i + 1) * factor))
        for i in range((frames - 1) // factor)
    ]
    return TemporalGrouping(factor, tuple(groups))


def nearest_complete(signal, mask: AvailabilityMask):
    """Replace every unavailable frame with the temporally nearest available
    one; equidistant ties resolve toward the earlier frame. Available frames
    pass through bitwise unchanged."""
    arr = signal.data if isinstance(signal, VideoTensor) else np.asarray(signal)
    if arr.shape[0] != len(mask):
        raise ShapeError(
            f"signal has {arr.shape[0]} frames but availability mask has {len(mask)}"
        )
    if mask.popcount == 0:
        raise NoAvailableFrames("cannot complete a clip with no available frames")

    avail = np.flatnonzero(mask.bits)
    t = np.arange(len(mask))
    right = np.searchsorted(avail, t, side="left")
    left = np.clip(right - 1, 0, len(avail) - 1)
    right = np.clip(right, 0, len(avail) - 1)
    dist_left = np.abs(t - avail[left])
    dist_right = np.abs(avail[right] - t)
    source = np.where(dist_left <= dist_right, avail[left], avail[right])

    out = arr[source].copy()
    if isinstance(signal, VideoTensor):
        return VideoTensor(out)
    return out


@dataclass(frozen=True)
class AvailabilityChannel:
    """Frame observability reshaped to token resolution: channel c of token
    step g carries the bit of frame groups[g][c], broadcast spatially. The
    singleton first group is padded by replicating its only bit."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_f32(self.data, 4, "availability channel")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("availability channel values must lie in [0, 1]")
        object.__setattr__(self, "data", arr)


def _as_f32(data, rank, name):
    arr = np.array(data, dtype=np.float32)
    if arr.ndim != rank:
        raise ShapeError(f"{name} must have rank {rank}")
    arr.flags.writeable = False
    return arr


def reshape_availability(
    mask: AvailabilityMask, grouping: TemporalGrouping, height: int, width: int
) -> AvailabilityChannel:
    if grouping.frames != len(mask):
        raise ShapeError(
            f"grouping covers {grouping.frames} frames, mask has {len(mask)}"
        )
    ct = grouping.factor
    out = np.zeros((ct, grouping.token_length, height, width), dtype=np.float32)
    for g, group in enumerate(grouping.groups):
        for c in range(ct):
            frame = group[c] if c < len(group) else group[0]
            out[c, g] = float(mask.bits[frame])
    return AvailabilityChannel(out)


def mask_tokens(latent: "LatentTokens", mask: AvailabilityMask, grouping: TemporalGrouping):
    """Zero the latent slice of every token step whose entire frame window
    was unobserved. Steps with at least one observed frame pass through:
    the availability channel carries the per-frame detail, so destroying a
    partially observed token would lose information."""
    if latent.data.shape[0] != grouping.token_length:
        raise ShapeError(
            f"latent has {latent.data.shape[0]} token steps, grouping implies "
            f"{grouping.token_length}"
        )
    if grouping.frames != len(mask):
        raise ShapeError(
            f"grouping covers {grouping.frames} frames, mask has {len(mask)}"
        )
    out = latent.data.copy()
    for g, group in enumerate(grouping.groups):
        if not any(mask.bits[f] for f in group):
            out[g] = 0.0
    return dataclasses.replace(latent, data=out)


def pool_to_tokens(signal: np.ndarray, grouping: TemporalGrouping, spatial_factor: int) -> np.ndarray:
    """Reduce a T x H x W signal to token resolution: average pooling over
    spatial_factor x spatial_factor cells, then the mean over each temporal
    window. Fractional values encode partial observability."""
    arr = np.asarray(signal, dtype=np.float32)
    if arr.ndim != 3:
        raise ShapeError("pooling expects a T x H x W signal")
    t, h, w = arr.shape
    if grouping.frames != t:
        raise ShapeError(f"grouping covers {grouping.frames} frames, signal has {t}")
    if h % spatial_factor or w % spatial_factor:
        raise ShapeError(
            f"spatial dims {(h, w)} not divisible by spatial factor {spatial_factor}"
        )
    hp, wp = h // spatial_factor, w // spatial_factor
    pooled = arr.reshape(t, hp, spatial_factor, wp, spatial_factor).mean(axis=(2, 4))
    out = np.stack([pooled[list(g)].mean(axis=0) for g in grouping.groups])
    return out.astype(np.float32)


@dataclass(frozen=True)
class ConditionTokens:
    """Token-resolution condition stack: named channel blocks concatenated
    along the last axis, shape T' x H' x W' x C."""

    data: np.ndarray
    blocks: tuple
    layout_version: int = CONDITION_LAYOUT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "data", _as_f32(self.data, 4, "condition tokens"))
        object.__setattr__(self, "blocks", tuple(tuple(b) for b in self.blocks))

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    def block(self, name: str) -> np.ndarray:
        for block_name, start, stop in self.blocks:
            if block_name == name:
                return self.data[..., start:stop]
        raise KeyError(name)


def build_condition_tokens(
    bundle: ConditionBundle, codec, depth_scale: float = 0.1
) -> ConditionTokens:
    """Assemble the full condition stack for one clip.

    Blocks, in order: encoded clean background, encoded nearest-completed
    instance after token masking, pooled instance mask, pooled instance
    depth, pooled background depth, availability channels. Depth blocks are
    multiplied by depth_scale so raw scene depths do not dwarf unit-range
    channels; the scale is recorded in the layout. The channel layout is
    versioned via CONDITION_LAYOUT_VERSION.
    """
    mask = bundle.availability
    bg_latent = codec.encode(bundle.background)
    grouping = bg_latent.grouping

    completed = nearest_complete(bundle.instance, mask)
    inst_latent = mask_tokens(codec.encode(completed), mask, grouping)

    spatial = codec.config.spatial_factor
    hp, wp = bg_latent.data.shape[1], bg_latent.data.shape[2]
    pooled_mask = pool_to_tokens(bundle.signals.mask, grouping, spatial)
    pooled_inst_depth = pool_to_tokens(bundle.signals.instance_depth, grouping, spatial) * depth_scale
    pooled_bg_depth = pool_to_tokens(bundle.signals.background_depth, grouping, spatial) * depth_scale
    avail = reshape_availability(mask, grouping, hp, wp)

    parts = [
        ("background_latent", bg_latent.data),
        ("instance_latent", inst_latent.data),
        ("instance_mask", pooled_mask[..., None]),
        ("instance_depth", pooled_inst_depth[..., None]),
        ("background_depth", pooled_bg_depth[..., None]),
        ("availability", np.moveaxis(avail.data, 0, -1)),
    ]
    blocks = []
    start = 0
    for name, arr in parts:
        stop = start + arr.shape[-1]
        blocks.append((name, start, stop))
        start = stop
    data = np.concatenate([arr for _, arr in parts], axis=-1)
    return ConditionTokens(data=data, blocks=tuple(blocks))


def condition_channel_count(latent_channels: int, temporal_factor: int) -> int:
    """Channel count implied by the layout: two latent streams, three pooled
    scalar signals, and one availability channel per window slot."""
    return 2 * latent_channels + 3 + temporal_factor


def save_condition_tokens(path_prefix, tokens: ConditionTokens) -> None:
    """Persist as <prefix>.pten plus a JSON sidecar naming each block."""
    prefix = Path(path_prefix)
    write_tensor(prefix.with_suffix(".pten"), tokens.data)
    sidecar = {
        "layout_version": tokens.layout_version,
        "blocks": [
            {"name": n, "start": a, "stop": b} for n, a, b in tokens.blocks
        ],
    }
    prefix.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_condition_tokens(path_prefix) -> ConditionTokens:
    prefix = Path(path_prefix)
    data = read_tensor(prefix.with_suffix(".pten"))
    sidecar = json.loads(prefix.with_suffix(".json").read_text())
    blocks = tuple(
        (b["name"], int(b["start"]), int(b["stop"])) for b in sidecar["blocks"]
    )
    return ConditionTokens(
        data=data, blocks=blocks, layout_version=int(sidecar["layout_version"])
    )
