"""Wireless channel simulation: r = h * s + n for AWGN and Rayleigh fading.

One real symbol per channel use. Fading is block fading: a single
nonnegative gain h per transmitted block, drawn fresh for every
transmission, with E[h^2] = 1. Noise is Gaussian with variance
10^(-snr_db/10) against unit signal power; snr_db = inf disables noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_EPS = 1e-12

CHANNEL_KINDS = ("awgn", "rayleigh")


@dataclass(frozen=True)
class ChannelConfig:
    kind: str = "awgn"
    snr_db: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"channel kind must be one of {CHANNEL_KINDS}, got {self.kind!r}")
        if np.isnan(self.snr_db):
            raise ValueError("snr_db must not be NaN")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "snr_db": self.snr_db, "seed": self.seed}

    @staticmethod
    def from_dict(d: dict) -> "ChannelConfig":
        return ChannelConfig(kind=d["kind"], snr_db=float(d["snr_db"]), seed=int(d["seed"]))


@dataclass(frozen=True)
class EncodedBlock:
    """Power-normalized encoder output for one round."""

    symbols: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class ReceivedBlock:
    """Post-channel symbols for one round."""

    symbols: np.ndarray
    round_index: int = 1


@dataclass(frozen=True)
class ChannelDraw:
    """One realization of (gain, noise) for a batch of blocks."""

    gain: np.ndarray   # (B,)
    noise: np.ndarray  # (B, L)


def noise_variance(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


def normalize_power(raw) -> EncodedBlock:
    """Scale a symbol vector to unit mean square: raw * sqrt(L / (sum raw^2 + eps)).

    An (almost) all-zero block cannot be normalized; it comes back
    essentially unchanged and flagged degenerate.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        raise ValueError("cannot normalize an empty block")
    out = raw * np.sqrt(raw.size / (np.sum(raw * raw) + NORM_EPS))
    degenerate = abs(float(np.mean(out * out)) - 1.0) > 1e-6
    return EncodedBlock(symbols=out, degenerate=degenerate)


def normalize_power_batch(raw: np.ndarray) -> np.ndarray:
    """Row-wise power normalization for (B, L) encoder outputs."""
    ss = np.sum(raw * raw, axis=1, keepdims=True)
    return raw * np.sqrt(raw.shape[1] / (ss + NORM_EPS))


def power_norm_forward(raw: np.ndarray) -> tuple[np.ndarray, tuple]:
    """normalize_power_batch plus the cache its backward pass needs."""
    ss = np.sum(raw * raw, axis=1, keepdims=True) + NORM_EPS
    scale = np.sqrt(raw.shape[1] / ss)
    out = raw * scale
    return out, (raw, ss, scale)


def power_norm_backward(dout: np.ndarray, cache: tuple) -> np.ndarray:
    """Exact Jacobian product: d s_i / d raw_j = scale * (delta_ij - raw_i raw_j / ss)."""
    raw, ss, scale = cache
    inner = np.sum(dout * raw, axis=1, keepdims=True)
    return scale * (dout - raw * inner / ss)


def draw_channel(cfg: ChannelConfig, n_blocks: int, block_len: int, rng) -> ChannelDraw:
    """Sample gains and noise for n_blocks independent transmissions.

    AWGN has unit gain. Rayleigh draws one gain per block as the magnitude
    of a standard complex Gaussian (E[h^2] = 1, E[h] = sqrt(pi)/2).
    """
    sigma = np.sqrt(noise_variance(cfg.snr_db))
    if cfg.kind == "rayleigh":
        re_im = rng.normal(0.0, np.sqrt(0.5), size=(n_blocks, 2))
        gain = np.hypot(re_im[:, 0], re_im[:, 1])
    else:
        gain = np.ones(n_blocks)
    if sigma == 0.0:
        noise = np.zeros((n_blocks, block_len))
    else:
        noise = rng.normal(0.0, sigma, size=(n_blocks, block_len))
    return ChannelDraw(gain=gain, noise=noise)


def apply_channel(symbols: np.ndarray, draw: ChannelDraw) -> np.ndarray:
    """r = h * s + n, rows are blocks. Differentiable in s: dr/ds = h."""
    return draw.gain[:, None] * symbols + draw.noise


def transmit(block: EncodedBlock, cfg: ChannelConfig, rng, round_index: int = 1) -> ReceivedBlock:
    """Send one normalized block through a fresh channel realization."""
    s = block.symbols
    draw = draw_channel(cfg, 1, s.size, rng)
    return ReceivedBlock(symbols=apply_channel(s[None, :], draw)[0], round_index=round_index)
