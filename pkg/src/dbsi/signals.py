"""Ground-truth SIMO channels, source signal and noisy sensor outputs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator from an int or a ``SeedSequence``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class ChannelSet:
    """Channels ``h`` (shape ``(M, L)``) plus a schedule of norm changes.

    ``rescale_schedule`` holds ``(frame, norms)`` entries sorted by frame.
    Rescaling keeps channel directions and changes only their norms.
    """

    h: np.ndarray
    rescale_schedule: tuple[tuple[int, tuple[float, ...]], ...] = ()
    target_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=float, copy=True)
        if h.ndim != 2:
            raise ValueError("channels must be an (M, L) array")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        norms = np.linalg.norm(h, axis=1)
        norms.setflags(write=False)
        object.__setattr__(self, "target_norms", norms)
        frames = [f for f, _ in self.rescale_schedule]
        if frames != sorted(frames):
            raise ValueError("rescale schedule must be sorted by frame")
        for f, norms in self.rescale_schedule:
            if len(norms) != h.shape[0]:
                raise ValueError(f"schedule entry at frame {f} has {len(norms)} norms for {h.shape[0]} channels")
            if any(v <= 0 for v in norms):
                raise ValueError(f"schedule entry at frame {f} has a nonpositive norm")

    @property
    def M(self) -> int:
        return self.h.shape[0]

    @property
    def L(self) -> int:
        return self.h.shape[1]

    @property
    def stacked(self) -> np.ndarray:
        return self.h.ravel()

    def with_norms(self, norms) -> "ChannelSet":
        norms = np.asarray(norms, dtype=float)
        cur = np.linalg.norm(self.h, axis=1)
        if np.any((cur == 0) & (norms != 0)):
            raise ValueError("cannot rescale a zero-norm channel to a nonzero norm")
        h = self.h.copy()
        nz = cur > 0
        # unchanged norms keep the vectors bit-identical
        change = nz & (norms != cur)
        h[change] *= (norms[change] / cur[change])[:, None]
        return ChannelSet(h, self.rescale_schedule)

    def event_frames(self) -> list[int]:
        return [f for f, _ in self.rescale_schedule]


def generate_channels(M: int, L: int, norm_low: float = 0.5, norm_high: float = 2.0,
                      seed=None, rescale_schedule=()) -> ChannelSet:
    """Standard-normal taps scaled to norms drawn from ``U[norm_low, norm_high]``.

    When the schedule contains an entry at frame 0 the drawn norms are
    replaced by that entry.
    """
    if M < 1 or L < 1:
        raise ValueError("M and L must be positive")
    if not (0 < norm_low <= norm_high):
        raise ValueError(f"invalid norm bounds [{norm_low}, {norm_high}]")
    rng = make_rng(seed)
    h = rng.standard_normal((M, L))
    norms = rng.uniform(norm_low, norm_high, size=M)
    h *= (norms / np.linalg.norm(h, axis=1))[:, None]
    schedule = tuple((int(f), tuple(float(v) for v in n)) for f, n in rescale_schedule)
    cs = ChannelSet(h, schedule)
    return rescale_channels(cs, 0)


def rescale_channels(channels: ChannelSet, n: int) -> ChannelSet:
    for frame, norms in channels.rescale_schedule:
        if frame == n:
            return channels.with_norms(norms)
    return channels


@dataclass(frozen=True)
class SignalStream:
    """Source ``s`` (length N), outputs ``x`` and noise ``v`` (both ``(M, N)``)."""

    s: np.ndarray
    x: np.ndarray
    v: np.ndarray
    snr_db: float
    hop: int = 1
    clean: np.ndarray | None = field(default=None, repr=False)
    channel_at: tuple = field(default=(), repr=False)

    @property
    def M(self) -> int:
        return self.x.shape[0]

    @property
    def n_samples(self) -> int:
        return self.x.shape[1]

    def sample_of(self, n: int) -> int:
        return n * self.hop

    def channels_for_frame(self, n: int) -> ChannelSet:
        """Ground truth active at the last sample of frame ``n``."""
        sample = self.sample_of(n)
        current = self.channel_at[0][1]
        for start, cs in self.channel_at:
            if start <= sample:
                current = cs
        return current


def _convolve_piecewise(s: np.ndarray, segments) -> np.ndarray:
    """``x(n) = sum_t h^(n)(t) s(n-t)`` with ``h^(n)`` the channel active at sample ``n``."""
    N = s.shape[0]
    M, _ = segments[0][1].h.shape
    x = np.zeros((M, N))
    bounds = [start for start, _ in segments] + [N]
    for (start, cs), stop in zip(segments, bounds[1:]):
        if start >= N:
            break
        stop = min(stop, N)
        for i in range(M):
            full = np.convolve(s[:stop], cs.h[i])[:stop]
            x[i, start:stop] = full[start:stop]
    return x


def generate_stream(channels: ChannelSet, frame_count: int, L: int | None = None,
                    snr_db: float = 10.0, seed=None, hop: int = 1,
                    snr_reference: str = "channel", source_seed=None) -> SignalStream:
    """White Gaussian source through the channels plus scaled white noise.

    ``snr_reference="channel"`` scales each node's noise so that the measured
    ratio of convolved-signal power to noise power equals ``snr_db``;
    ``"source"`` uses the source power as the reference for every node, so
    all nodes get the same noise variance.  ``snr_db = inf`` disables noise.
    Noise power is matched exactly to the realized sequences.
    """
    if frame_count < 1:
        raise ValueError("frame_count must be at least 1")
    if hop < 1:
        raise ValueError("hop must be at least 1")
    if L is not None and L != channels.L:
        raise ValueError(f"L={L} does not match channel length {channels.L}")
    if snr_reference not in ("channel", "source"):
        raise ValueError(f"unknown snr_reference {snr_reference!r}")
    N = (frame_count - 1) * hop + 1
    if source_seed is None:
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        source_seed, seed = ss.spawn(2)
    s = make_rng(source_seed).standard_normal(N)

    segments = [(0, rescale_channels(channels, 0))]
    for frame, _ in channels.rescale_schedule:
        if frame > 0:
            segments.append((frame * hop, rescale_channels(segments[-1][1], frame)))
    clean = _convolve_piecewise(s, segments)

    M = channels.M
    if math.isinf(snr_db) and snr_db > 0:
        v = np.zeros((M, N))
    else:
        z = make_rng(seed).standard_normal((M, N))
        if snr_reference == "channel":
            ref = np.mean(clean**2, axis=1)
        else:
            ref = np.full(M, np.mean(s**2))
        target = ref / 10.0 ** (snr_db / 10.0)
        v = z * np.sqrt(target / np.mean(z**2, axis=1))[:, None]
    return SignalStream(s=s, x=clean + v, v=v, snr_db=float(snr_db), hop=hop,
                        clean=clean, channel_at=tuple(segments))


def frame(stream, i: int, n: int, L: int) -> np.ndarray:
    """Length-``L`` window of node ``i`` ending at frame ``n``, newest sample first.

    Samples before index 0 read as zero.
    """
    x = stream.x if isinstance(stream, SignalStream) else np.asarray(stream)
    hop = stream.hop if isinstance(stream, SignalStream) else 1
    end = n * hop
    if n < 0 or end >= x.shape[-1]:
        raise IndexError(f"frame {n} out of range")
    row = x[i] if x.ndim == 2 else x
    start = end - L + 1
    if start >= 0:
        return row[start:end + 1][::-1].copy()
    out = np.zeros(L)
    out[: end + 1] = row[: end + 1][::-1]
    return out


def all_frames(stream: SignalStream, L: int) -> np.ndarray:
    """Every frame of every node as an array ``(frames, M, L)``, newest first."""
    x = stream.x
    M, N = x.shape
    padded = np.concatenate([np.zeros((M, L - 1)), x], axis=1)
    win = np.lib.stride_tricks.sliding_window_view(padded, L, axis=1)[:, :, ::-1]
    frames = win[:, :: stream.hop]
    return np.ascontiguousarray(frames.transpose(1, 0, 2))
