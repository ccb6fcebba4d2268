"""What the channel does to a block of symbols.

Walks through the transmit path on its own, without any networks: power
normalization, the frozen per-block channel draw, and the received symbols.
Then checks the advertised statistics the hard way, by averaging a million
draws and comparing against the closed-form values.

Run:  python3 demos/01_channel_statistics.py
"""

import numpy as np

from mrmtl.channel import (
    ChannelConfig,
    apply_channel,
    draw_channel,
    noise_variance,
    normalize_power,
    transmit,
)

rng = np.random.default_rng(1)

# --- power normalization -----------------------------------------------
# Raw encoder outputs can have any scale. The normalizer rescales each
# block so its mean squared symbol is one, which is what makes the SNR
# setting meaningful.
raw = rng.normal(0.0, 3.0, size=8)
block = normalize_power(raw)
print("raw block:       ", np.round(raw, 3))
print("normalized:      ", np.round(block.symbols, 3))
print("mean square:     ", float(np.mean(block.symbols**2)))
print()

# --- one transmission --------------------------------------------------
cfg = ChannelConfig(kind="rayleigh", snr_db=10.0, seed=0)
received = transmit(block, cfg, rng)
print(f"channel:          {cfg.kind} at {cfg.snr_db} dB")
print("received:        ", np.round(received.symbols, 3))
print("round index:     ", received.round_index)
print()

# --- noise variance vs the closed form ---------------------------------
# sigma^2 = 10^(-snr_db / 10). A million samples land within a percent.
for snr_db in (0.0, 10.0, 20.0):
    draw = draw_channel(ChannelConfig(kind="awgn", snr_db=snr_db, seed=0),
                        1000, 1000, rng)
    measured = float(np.var(draw.noise))
    print(f"awgn {snr_db:4.0f} dB: var {measured:.6f}  "
          f"(closed form {noise_variance(snr_db):.6f})")
print()

# --- fading moments ----------------------------------------------------
# The fading gain is the magnitude of a unit-power complex normal, so its
# square has mean 1 and its mean is sqrt(pi) / 2.
draw = draw_channel(ChannelConfig(kind="rayleigh", snr_db=10.0, seed=0),
                    1_000_000, 1, rng)
h = draw.gain
print(f"rayleigh E[h^2]:  {float(np.mean(h * h)):.4f}  (expected 1.0)")
print(f"rayleigh E[h]:    {float(np.mean(h)):.4f}  "
      f"(expected {np.sqrt(np.pi) / 2:.4f})")
print()

# --- a received block is exactly gain * signal + noise ------------------
s = normalize_power(rng.normal(size=16)).symbols[None, :]
ray_draw = draw_channel(ChannelConfig(kind="rayleigh", snr_db=10.0, seed=0),
                        1, 16, np.random.default_rng(7))
r = apply_channel(s, ray_draw)
manual = ray_draw.gain[:, None] * s + ray_draw.noise
print("rayleigh gain:   ", np.round(ray_draw.gain, 3))
print("received[:4]:    ", np.round(r[0, :4], 3))
print("gain*s + n [:4]: ", np.round(manual[0, :4], 3))
print("identical:       ", bool(np.array_equal(r, manual)))
