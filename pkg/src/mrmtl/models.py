"""Encoder/decoder assembly, joint training, and per-round inference.

Two system variants share the same building blocks:

* single-round (SRSTL): one encoder/decoder pair trained end to end for a
  fixed number of channel uses;
* multi-round (MRMTL): two encoder/decoder heads trained jointly with the
  weighted loss l = w*l1 + (1-w)*l2, where the Round-2 decoder sees the
  concatenation [r1, r2] of both rounds' received signals.

All transmissions pass through power normalization, then the channel.
Channel gains and noise are redrawn on every forward pass; gradients treat
the drawn gain as a constant multiplier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .channel import (
    ChannelConfig,
    ChannelDraw,
    ReceivedBlock,
    apply_channel,
    draw_channel,
    power_norm_backward,
    power_norm_forward,
)
from .dataset import Dataset, Sample, Split, batches

EVAL_BATCH = 64


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""


@dataclass(frozen=True)
class ArchitectureConfig:
    """Channel-use budgets and head sizes.

    nc is the base number of channel uses; the per-round budgets nc1 and nc2
    default to nc. decoder_hidden is the width of the decoder's middle dense
    layer and defaults to nc as well.
    """

    nc: int
    nc1: int | None = None
    nc2: int | None = None
    num_classes: int = 10
    decoder_hidden: int | None = None

    def __post_init__(self):
        if self.nc1 is None:
            object.__setattr__(self, "nc1", self.nc)
        if self.nc2 is None:
            object.__setattr__(self, "nc2", self.nc)
        if self.nc < 1 or self.nc1 < 1 or self.nc2 < 1:
            raise ValueError("channel-use budgets must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.decoder_hidden is None:
            object.__setattr__(self, "decoder_hidden", self.nc)

    def to_dict(self) -> dict:
        return {"nc": self.nc, "nc1": self.nc1, "nc2": self.nc2,
                "num_classes": self.num_classes, "decoder_hidden": self.decoder_hidden}

    @staticmethod
    def from_dict(d: dict) -> "ArchitectureConfig":
        return ArchitectureConfig(**d)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 64
    lr: float = 1e-3
    loss_weight: float = 0.5
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.loss_weight <= 1.0:
            raise ValueError("loss_weight must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr,
                "loss_weight": self.loss_weight, "seed": self.seed,
                "deterministic": self.deterministic}

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        return TrainConfig(**d)


@dataclass(frozen=True)
class DecoderOutput:
    """One decoder head's verdict on one sample."""

    probs: np.ndarray      # (num_classes,)
    predicted: int         # argmax, ties to the lowest class id
    confidence: float      # max probability
    round_index: int       # 1 or 2

    @staticmethod
    def from_probs(probs: np.ndarray, round_index: int) -> "DecoderOutput":
        return DecoderOutput(
            probs=probs,
            predicted=int(np.argmax(probs)),
            confidence=float(np.max(probs)),
            round_index=round_index,
        )


@dataclass
class SrstlModel:
    encoder: nn.Network
    decoder: nn.Network
    nc1: int


@dataclass
class MrmtlModel:
    encoder1: nn.Network
    encoder2: nn.Network
    decoder1: nn.Network
    decoder2: nn.Network
    loss_weight: float
    nc1: int
    nc2: int


def build_encoder(out_size: int, seed: int, input_shape=(3, 32, 32)) -> nn.Network:
    """Six same-padded 3x3 conv layers in three pool/dropout blocks
    (32, 32 / 64, 64 / 128, 128 filters), then Dense 512 and a linear
    Dense head of width out_size (the modulated symbols for one round)."""
    if out_size < 1:
        raise ValueError(f"encoder out_size must be >= 1, got {out_size}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    c = input_shape[0]
    layers = [
        nn.Conv2D(c, 32, 3, "relu", rng=rng),
        nn.Conv2D(32, 32, 3, "relu", rng=rng),
        nn.MaxPool2D(2),
        nn.Dropout(0.25),
        nn.Conv2D(32, 64, 3, "relu", rng=rng),
        nn.Conv2D(64, 64, 3, "relu", rng=rng),
        nn.MaxPool2D(2),
        nn.Dropout(0.25),
        nn.Conv2D(64, 128, 3, "relu", rng=rng),
        nn.Conv2D(128, 128, 3, "relu", rng=rng),
        nn.MaxPool2D(2),
        nn.Dropout(0.25),
        nn.Flatten(),
    ]
    shape = tuple(input_shape)
    for layer in layers:
        shape = layer.out_shape(shape)
    layers += [
        nn.Dense(shape[0], 512, "relu", rng=rng),
        nn.Dropout(0.25),
        nn.Dense(512, out_size, "linear", rng=rng),
    ]
    return nn.Network(layers, input_shape)


def build_decoder(in_size: int, hidden: int, seed: int, num_classes: int = 10) -> nn.Network:
    """Dense(in_size, ReLU), Dropout 0.1, Dense(hidden, ReLU), SoftMax head."""
    if in_size < 1 or hidden < 1:
        raise ValueError("decoder sizes must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))
    return nn.Network([
        nn.Dense(in_size, in_size, "relu", rng=rng),
        nn.Dropout(0.1),
        nn.Dense(in_size, hidden, "relu", rng=rng),
        nn.Dense(hidden, num_classes, "softmax", rng=rng),
    ], (in_size,))


# ---------------------------------------------------------------------------
# forward/backward plumbing shared by training, evaluation, and grad checks


def _transmit_batch(encoder: nn.Network, images: np.ndarray, draw: ChannelDraw,
                    train: bool, rng) -> tuple[np.ndarray, tuple]:
    """Encode, power-normalize, and push a batch through a frozen draw."""
    raw = encoder.forward(images, train, rng)
    s, cache = power_norm_forward(raw)
    return apply_channel(s, draw), (cache, draw)


def _transmit_backward(encoder: nn.Network, d_received: np.ndarray, cache: tuple) -> None:
    norm_cache, draw = cache
    ds = draw.gain[:, None] * d_received
    encoder.backward(power_norm_backward(ds, norm_cache))


def srstl_loss(model: SrstlModel, images, labels, draw: ChannelDraw,
               train: bool = False, rng=None):
    """Forward pass only; returns (loss, probs)."""
    r, _ = _transmit_batch(model.encoder, images, draw, train, rng)
    probs = model.decoder.forward(r, train, rng)
    return nn.cross_entropy(probs, labels), probs


def srstl_loss_and_grads(model: SrstlModel, images, labels, draw: ChannelDraw, rng):
    """Training forward + backward; gradients are left on the networks."""
    r, cache = _transmit_batch(model.encoder, images, draw, True, rng)
    probs = model.decoder.forward(r, True, rng)
    loss = nn.cross_entropy(probs, labels)
    dr = model.decoder.backward(nn.cross_entropy_grad(probs, labels))
    _transmit_backward(model.encoder, dr, cache)
    return loss, probs


def mrmtl_loss(model: MrmtlModel, images, labels, draw1: ChannelDraw, draw2: ChannelDraw,
               w: float | None = None, train: bool = False, rng=None):
    """Forward pass of both heads; returns (loss, l1, l2, probs1, probs2)."""
    w = model.loss_weight if w is None else w
    r1, _ = _transmit_batch(model.encoder1, images, draw1, train, rng)
    r2, _ = _transmit_batch(model.encoder2, images, draw2, train, rng)
    probs1 = model.decoder1.forward(r1, train, rng)
    probs2 = model.decoder2.forward(np.concatenate([r1, r2], axis=1), train, rng)
    l1 = nn.cross_entropy(probs1, labels)
    l2 = nn.cross_entropy(probs2, labels)
    return w * l1 + (1.0 - w) * l2, l1, l2, probs1, probs2


def mrmtl_loss_and_grads(model: MrmtlModel, images, labels, draw1: ChannelDraw,
                         draw2: ChannelDraw, rng, w: float | None = None):
    """Training pass of the joint loss; gradients land on all four networks.

    Round-1 received symbols feed both decoders, so the gradient into r1 is
    the sum of Decoder 1's (weighted by w) and the first nc1 columns of
    Decoder 2's (weighted by 1-w).
    """
    w = model.loss_weight if w is None else w
    nc1 = model.nc1
    r1, cache1 = _transmit_batch(model.encoder1, images, draw1, True, rng)
    r2, cache2 = _transmit_batch(model.encoder2, images, draw2, True, rng)
    probs1 = model.decoder1.forward(r1, True, rng)
    probs2 = model.decoder2.forward(np.concatenate([r1, r2], axis=1), True, rng)
    l1 = nn.cross_entropy(probs1, labels)
    l2 = nn.cross_entropy(probs2, labels)

    d_r1 = model.decoder1.backward(w * nn.cross_entropy_grad(probs1, labels))
    d_cat = model.decoder2.backward((1.0 - w) * nn.cross_entropy_grad(probs2, labels))
    _transmit_backward(model.encoder1, d_r1 + d_cat[:, :nc1], cache1)
    _transmit_backward(model.encoder2, d_cat[:, nc1:], cache2)
    return w * l1 + (1.0 - w) * l2, l1, l2, probs1, probs2


# ---------------------------------------------------------------------------
# training loops


def _check_finite(loss: float, epoch: int) -> None:
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss at epoch {epoch}")


def _srstl_accuracy(model: SrstlModel, split: Split, cfg: ChannelConfig, rng) -> float:
    correct = 0
    for imgs, labels in batches(split, EVAL_BATCH):
        draw = draw_channel(cfg, imgs.shape[0], model.nc1, rng)
        r, _ = _transmit_batch(model.encoder, imgs, draw, False, None)
        probs = model.decoder.forward(r, False, None)
        correct += int(np.sum(probs.argmax(axis=1) == labels))
    return correct / len(split)


def mrmtl_head_accuracies(model: MrmtlModel, split: Split, cfg: ChannelConfig, rng) -> tuple[float, float]:
    """Round-1 and Round-2 head accuracies over fresh channel draws."""
    c1 = c2 = 0
    for imgs, labels in batches(split, EVAL_BATCH):
        b = imgs.shape[0]
        draw1 = draw_channel(cfg, b, model.nc1, rng)
        draw2 = draw_channel(cfg, b, model.nc2, rng)
        _, _, _, probs1, probs2 = mrmtl_loss(model, imgs, labels, draw1, draw2)
        c1 += int(np.sum(probs1.argmax(axis=1) == labels))
        c2 += int(np.sum(probs2.argmax(axis=1) == labels))
    n = len(split)
    return c1 / n, c2 / n


def train_srstl(dataset: Dataset, arch: ArchitectureConfig, channel_cfg: ChannelConfig,
                cfg: TrainConfig) -> tuple[SrstlModel, list[dict]]:
    """End-to-end training of the single-round pair; returns (model, log)."""
    root = np.random.SeedSequence([cfg.seed, 11])
    enc_seed, dec_seed, loop_seed = (int(s.generate_state(1)[0]) for s in root.spawn(3))
    model = SrstlModel(
        encoder=build_encoder(arch.nc1, enc_seed),
        decoder=build_decoder(arch.nc1, arch.decoder_hidden, dec_seed, arch.num_classes),
        nc1=arch.nc1,
    )
    rng = np.random.default_rng(loop_seed)
    opt = nn.Adam(lr=cfg.lr)
    log: list[dict] = []
    for epoch in range(cfg.epochs):
        total_loss = 0.0
        correct = 0
        shuffle_seed = int(rng.integers(2**63))
        for imgs, labels in batches(dataset.train, cfg.batch_size, shuffle_seed):
            draw = draw_channel(channel_cfg, imgs.shape[0], arch.nc1, rng)
            loss, probs = srstl_loss_and_grads(model, imgs, labels, draw, rng)
            _check_finite(loss, epoch)
            opt.step([model.encoder, model.decoder])
            total_loss += loss * imgs.shape[0]
            correct += int(np.sum(probs.argmax(axis=1) == labels))
        log.append({
            "epoch": epoch,
            "train_loss": total_loss / len(dataset.train),
            "train_accuracy": correct / len(dataset.train),
            "test_accuracy": _srstl_accuracy(model, dataset.test, channel_cfg, rng),
        })
    return model, log


def train_mrmtl(dataset: Dataset, arch: ArchitectureConfig, channel_cfg: ChannelConfig,
                cfg: TrainConfig) -> tuple[MrmtlModel, list[dict]]:
    """Joint training of both rounds against l = w*l1 + (1-w)*l2.

    Both heads are evaluated on every batch; r1 and r2 go through
    independent channel draws, as they do at inference time.
    """
    root = np.random.SeedSequence([cfg.seed, 22])
    seeds = [int(s.generate_state(1)[0]) for s in root.spawn(5)]
    model = MrmtlModel(
        encoder1=build_encoder(arch.nc1, seeds[0]),
        encoder2=build_encoder(arch.nc2, seeds[1]),
        decoder1=build_decoder(arch.nc1, arch.decoder_hidden, seeds[2], arch.num_classes),
        decoder2=build_decoder(arch.nc1 + arch.nc2, arch.decoder_hidden, seeds[3],
                               arch.num_classes),
        loss_weight=cfg.loss_weight,
        nc1=arch.nc1,
        nc2=arch.nc2,
    )
    rng = np.random.default_rng(seeds[4])
    opt = nn.Adam(lr=cfg.lr)
    nets = [model.encoder1, model.encoder2, model.decoder1, model.decoder2]
    log: list[dict] = []
    for epoch in range(cfg.epochs):
        tot = np.zeros(3)
        correct1 = correct2 = 0
        shuffle_seed = int(rng.integers(2**63))
        for imgs, labels in batches(dataset.train, cfg.batch_size, shuffle_seed):
            b = imgs.shape[0]
            draw1 = draw_channel(channel_cfg, b, arch.nc1, rng)
            draw2 = draw_channel(channel_cfg, b, arch.nc2, rng)
            loss, l1, l2, probs1, probs2 = mrmtl_loss_and_grads(
                model, imgs, labels, draw1, draw2, rng)
            _check_finite(loss, epoch)
            opt.step(nets)
            tot += np.array([loss, l1, l2]) * b
            correct1 += int(np.sum(probs1.argmax(axis=1) == labels))
            correct2 += int(np.sum(probs2.argmax(axis=1) == labels))
        n = len(dataset.train)
        test1, test2 = mrmtl_head_accuracies(model, dataset.test, channel_cfg, rng)
        log.append({
            "epoch": epoch,
            "train_loss": tot[0] / n,
            "train_loss_round1": tot[1] / n,
            "train_loss_round2": tot[2] / n,
            "train_accuracy_round1": correct1 / n,
            "train_accuracy_round2": correct2 / n,
            "test_accuracy_round1": test1,
            "test_accuracy_round2": test2,
        })
    return model, log


# ---------------------------------------------------------------------------
# per-sample inference


def _round1_nets(model) -> tuple[nn.Network, nn.Network, int]:
    if isinstance(model, MrmtlModel):
        return model.encoder1, model.decoder1, model.nc1
    return model.encoder, model.decoder, model.nc1


def _as_image_batch(sample) -> np.ndarray:
    image = sample.image if isinstance(sample, Sample) else np.asarray(sample)
    return image[None, ...]


def infer_round1(model, sample, channel_cfg: ChannelConfig, rng) -> tuple[DecoderOutput, ReceivedBlock]:
    """Round-1 transmission and classification for one sample.

    Returns the decoder verdict and the received block, which is retained
    for a possible Round 2.
    """
    encoder, decoder, nc1 = _round1_nets(model)
    draw = draw_channel(channel_cfg, 1, nc1, rng)
    r, _ = _transmit_batch(encoder, _as_image_batch(sample), draw, False, None)
    probs = decoder.forward(r, False, None)
    return (DecoderOutput.from_probs(probs[0], round_index=1),
            ReceivedBlock(symbols=r[0], round_index=1))


def infer_round2(model: MrmtlModel, sample, r1: ReceivedBlock,
                 channel_cfg: ChannelConfig, rng) -> DecoderOutput:
    """Round-2 escalation: transmit the second encoding over a fresh channel
    and decode [r1, r2]. r1 is reused exactly as received, so the sample's
    total channel uses are nc1 + nc2."""
    expected = model.decoder2.input_shape[0]
    if r1.symbols.size + model.nc2 != expected:
        raise nn.ShapeError(
            f"round-1 block of length {r1.symbols.size} does not fit decoder2 "
            f"input {expected} with nc2={model.nc2}"
        )
    draw = draw_channel(channel_cfg, 1, model.nc2, rng)
    r2, _ = _transmit_batch(model.encoder2, _as_image_batch(sample), draw, False, None)
    concat = np.concatenate([r1.symbols[None, :], r2], axis=1)
    probs = model.decoder2.forward(concat, False, None)
    return DecoderOutput.from_probs(probs[0], round_index=2)


# ---------------------------------------------------------------------------
# model bundles on disk

BUNDLE_VERSION = 1


class BundleError(ValueError):
    """Bundle directory is missing files or inconsistent."""


def save_bundle(model, out_dir, arch: ArchitectureConfig, channel_cfg: ChannelConfig,
                train_cfg: TrainConfig, dataset_fingerprint: str,
                training_log: list[dict] | None = None) -> Path:
    """Write the model's networks plus a bundle.json manifest.

    MRMTL bundles hold encoder1/encoder2/decoder1/decoder2 checkpoints;
    single-round bundles hold only the Round-1 pair under the same names.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(model, MrmtlModel):
        mode = "mrmtl"
        parts = {"encoder1": model.encoder1, "encoder2": model.encoder2,
                 "decoder1": model.decoder1, "decoder2": model.decoder2}
    else:
        mode = "srstl"
        parts = {"encoder1": model.encoder, "decoder1": model.decoder}
    for name, net in parts.items():
        nn.save_checkpoint(net, out / f"{name}.ckpt", metadata={"part": name, "mode": mode})
    manifest = {
        "format_version": BUNDLE_VERSION,
        "mode": mode,
        "parts": sorted(parts),
        "architecture": arch.to_dict(),
        "channel": channel_cfg.to_dict(),
        "training": train_cfg.to_dict(),
        "dataset_fingerprint": dataset_fingerprint,
    }
    (out / "bundle.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if training_log is not None:
        (out / "training_log.json").write_text(
            json.dumps(training_log, indent=2, sort_keys=True) + "\n")
    return out


def load_bundle(bundle_dir) -> tuple[SrstlModel | MrmtlModel, dict]:
    """Rebuild a model from a bundle directory; returns (model, manifest)."""
    bundle = Path(bundle_dir)
    manifest_path = bundle / "bundle.json"
    if not manifest_path.is_file():
        raise BundleError(f"no bundle.json in {bundle}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != BUNDLE_VERSION:
        raise BundleError(f"unsupported bundle version {manifest.get('format_version')!r}")
    arch = ArchitectureConfig.from_dict(manifest["architecture"])

    def load_part(name: str) -> nn.Network:
        path = bundle / f"{name}.ckpt"
        if not path.is_file():
            raise BundleError(f"bundle part missing: {path}")
        net, _ = nn.load_checkpoint(path)
        return net

    if manifest["mode"] == "mrmtl":
        model = MrmtlModel(
            encoder1=load_part("encoder1"),
            encoder2=load_part("encoder2"),
            decoder1=load_part("decoder1"),
            decoder2=load_part("decoder2"),
            loss_weight=manifest["training"]["loss_weight"],
            nc1=arch.nc1,
            nc2=arch.nc2,
        )
    elif manifest["mode"] == "srstl":
        model = SrstlModel(
            encoder=load_part("encoder1"),
            decoder=load_part("decoder1"),
            nc1=arch.nc1,
        )
    else:
        raise BundleError(f"unknown bundle mode {manifest['mode']!r}")
    return model, manifest
