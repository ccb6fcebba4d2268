"""Confidence-thresholded dynamic round selection.

The receiver decodes Round 1, compares the top softmax probability against a
threshold delta, and requests the Round-2 transmission only when confidence
falls short (strictly below; equality stays in Round 1). Per-sample delay is
nc1 channel uses without escalation and nc1 + nc2 with it.

Evaluation is split in two stages so threshold studies are cheap and exactly
reproducible: evaluate_rounds() runs both decoder heads once per sample and
caches the outputs; apply_threshold() then resolves any delta against the
cached confidences without touching the channel again. run_protocol,
sweep_threshold, and calibrate_threshold are assembled from these stages,
which is what makes sweep rows bit-identical to per-delta re-runs under the
same entry rng state.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, draw_channel
from .dataset import Sample, Split
from .models import DecoderOutput, MrmtlModel, _transmit_batch

# Samples are processed in fixed-size chunks, one spawned rng child per
# chunk, so channel draws depend only on the entry rng state and the sample
# order, never on the worker count.
CHUNK = 64


class CalibrationError(RuntimeError):
    """Calibration set cannot support the conditional-mean estimate."""


@dataclass(frozen=True)
class ProtocolTrace:
    """Everything the protocol decided about one sample."""

    sample_index: int
    round1: DecoderOutput
    escalated: bool
    round2: DecoderOutput | None
    final_predicted: int
    true_label: int
    delay: int


@dataclass
class RoundCache:
    """Per-sample outputs of both decoder heads under frozen channel draws."""

    true_labels: np.ndarray    # (N,) int
    round1_probs: np.ndarray   # (N, K)
    round1_pred: np.ndarray    # (N,) int
    round1_conf: np.ndarray    # (N,)
    round2_probs: np.ndarray   # (N, K)
    round2_pred: np.ndarray    # (N,) int
    nc1: int
    nc2: int

    def __len__(self) -> int:
        return self.true_labels.shape[0]


@dataclass(frozen=True)
class CalibrationStats:
    """Conditional confidence statistics of the Round-1 head.

    delta_star is the midpoint of the two conditional means. separated
    flags the expected ordering (correct above incorrect); a violation is
    reported, not raised.
    """

    mean_conf_correct: float
    mean_conf_incorrect: float
    delta_star: float
    histogram_correct: np.ndarray
    histogram_incorrect: np.ndarray
    bin_edges: np.ndarray
    n_correct: int
    n_incorrect: int
    separated: bool


def _split_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, Split):
        return samples.images, samples.labels
    items = list(samples)
    if not items:
        raise ValueError("empty sample set")
    images = np.stack([s.image if isinstance(s, Sample) else np.asarray(s[0]) for s in items])
    labels = np.array([s.label if isinstance(s, Sample) else int(s[1]) for s in items])
    return images, labels


def _chunk_bounds(n: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]


def evaluate_rounds(model: MrmtlModel, samples, channel_cfg: ChannelConfig, rng,
                    workers: int = 1) -> RoundCache:
    """Run both heads over every sample once and cache the outputs.

    Each chunk draws its Round-1 channel before its Round-2 channel from its
    own rng child. The model is read-only here, so chunks may be evaluated
    by a thread pool; results land in preallocated arrays at fixed offsets.
    """
    images, labels = _split_arrays(samples)
    n = images.shape[0]
    if n == 0:
        raise ValueError("empty sample set")
    bounds = _chunk_bounds(n)
    rngs = rng.spawn(len(bounds))
    k = model.decoder1.output_shape[0]
    probs1 = np.empty((n, k))
    probs2 = np.empty((n, k))

    def eval_chunk(i: int) -> None:
        lo, hi = bounds[i]
        crng = rngs[i]
        imgs = images[lo:hi]
        b = hi - lo
        draw1 = draw_channel(channel_cfg, b, model.nc1, crng)
        draw2 = draw_channel(channel_cfg, b, model.nc2, crng)
        r1, _ = _transmit_batch(model.encoder1, imgs, draw1, False, None)
        r2, _ = _transmit_batch(model.encoder2, imgs, draw2, False, None)
        probs1[lo:hi] = model.decoder1.forward(r1, False, None)
        probs2[lo:hi] = model.decoder2.forward(np.concatenate([r1, r2], axis=1), False, None)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(eval_chunk, range(len(bounds))))
    else:
        for i in range(len(bounds)):
            eval_chunk(i)

    return RoundCache(
        true_labels=labels,
        round1_probs=probs1,
        round1_pred=probs1.argmax(axis=1),
        round1_conf=probs1.max(axis=1),
        round2_probs=probs2,
        round2_pred=probs2.argmax(axis=1),
        nc1=model.nc1,
        nc2=model.nc2,
    )


def apply_threshold(cache: RoundCache, delta: float) -> list[ProtocolTrace]:
    """Resolve the escalation rule against cached outputs for one delta."""
    traces = []
    for i in range(len(cache)):
        conf = float(cache.round1_conf[i])
        escalated = conf < delta
        r1 = DecoderOutput(
            probs=cache.round1_probs[i],
            predicted=int(cache.round1_pred[i]),
            confidence=conf,
            round_index=1,
        )
        r2 = None
        if escalated:
            r2 = DecoderOutput(
                probs=cache.round2_probs[i],
                predicted=int(cache.round2_pred[i]),
                confidence=float(cache.round2_probs[i].max()),
                round_index=2,
            )
        traces.append(ProtocolTrace(
            sample_index=i,
            round1=r1,
            escalated=escalated,
            round2=r2,
            final_predicted=r2.predicted if escalated else r1.predicted,
            true_label=int(cache.true_labels[i]),
            delay=cache.nc1 + (cache.nc2 if escalated else 0),
        ))
    return traces


def run_protocol(model: MrmtlModel, samples, delta: float, channel_cfg: ChannelConfig,
                 rng, workers: int = 1) -> list[ProtocolTrace]:
    """Dynamic round selection over a sample set at one threshold."""
    return apply_threshold(evaluate_rounds(model, samples, channel_cfg, rng, workers), delta)


# ---------------------------------------------------------------------------
# summary statistics over traces


def _require_traces(traces) -> list:
    traces = list(traces)
    if not traces:
        raise ValueError("empty trace list")
    return traces


def average_delay(traces) -> float:
    """Mean channel uses per sample."""
    traces = _require_traces(traces)
    return sum(t.delay for t in traces) / len(traces)


def task_accuracy(traces) -> float:
    """Fraction of samples whose final prediction matches the true label."""
    traces = _require_traces(traces)
    return sum(1 for t in traces if t.final_predicted == t.true_label) / len(traces)


def escalation_rate(traces) -> float:
    traces = _require_traces(traces)
    return sum(1 for t in traces if t.escalated) / len(traces)


def delay_decomposition(traces, nc1: int, nc2: int) -> dict:
    """Average delay written as the two-branch expectation: the stay
    probability times nc1 plus the escalation probability times nc1 + nc2."""
    traces = _require_traces(traces)
    n = len(traces)
    stay = sum(1 for t in traces if not t.escalated)
    esc = n - stay
    for t in traces:
        want = nc1 + nc2 if t.escalated else nc1
        if t.delay != want:
            raise ValueError(
                f"trace {t.sample_index} has delay {t.delay}, expected {want} "
                f"for nc1={nc1}, nc2={nc2}"
            )
    return {
        "p_stay": stay / n,
        "p_escalate": esc / n,
        "delay_stay": nc1,
        "delay_escalate": nc1 + nc2,
        "expected_delay": nc1 * (stay / n) + (nc1 + nc2) * (esc / n),
    }


def accuracy_decomposition(traces) -> dict:
    """Task accuracy written by total probability over the two branches.

    Conditional accuracy of an empty branch is reported as 0.0; its weight
    is 0 so the expectation is unaffected.
    """
    traces = _require_traces(traces)
    n = len(traces)
    stay = [t for t in traces if not t.escalated]
    esc = [t for t in traces if t.escalated]
    acc_stay = (sum(1 for t in stay if t.final_predicted == t.true_label) / len(stay)
                if stay else 0.0)
    acc_esc = (sum(1 for t in esc if t.final_predicted == t.true_label) / len(esc)
               if esc else 0.0)
    return {
        "p_stay": len(stay) / n,
        "p_escalate": len(esc) / n,
        "accuracy_given_stay": acc_stay,
        "accuracy_given_escalate": acc_esc,
        "expected_accuracy": acc_stay * (len(stay) / n) + acc_esc * (len(esc) / n),
    }


# ---------------------------------------------------------------------------
# threshold selection


def threshold_midpoint(mean_conf_correct: float, mean_conf_incorrect: float) -> float:
    """Midpoint of the conditional confidence means."""
    return (mean_conf_correct + mean_conf_incorrect) / 2.0


def calibrate_threshold(model, samples, channel_cfg: ChannelConfig, rng,
                        num_bins: int = 50) -> CalibrationStats:
    """Estimate the escalation threshold from Round-1 behavior alone.

    Runs Round-1 inference over the calibration set, splits confidences by
    whether the prediction was correct, and returns the conditional means,
    their midpoint, and fixed-width histograms over [0, 1].
    """
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    images, labels = _split_arrays(samples)
    n = images.shape[0]
    if n == 0:
        raise ValueError("empty sample set")
    encoder = model.encoder1 if isinstance(model, MrmtlModel) else model.encoder
    decoder = model.decoder1 if isinstance(model, MrmtlModel) else model.decoder
    nc1 = model.nc1
    bounds = _chunk_bounds(n)
    rngs = rng.spawn(len(bounds))
    conf = np.empty(n)
    pred = np.empty(n, dtype=np.int64)
    for i, (lo, hi) in enumerate(bounds):
        draw1 = draw_channel(channel_cfg, hi - lo, nc1, rngs[i])
        r1, _ = _transmit_batch(encoder, images[lo:hi], draw1, False, None)
        probs = decoder.forward(r1, False, None)
        conf[lo:hi] = probs.max(axis=1)
        pred[lo:hi] = probs.argmax(axis=1)

    correct = pred == labels
    n_correct = int(np.count_nonzero(correct))
    n_incorrect = n - n_correct
    if n_correct == 0:
        raise CalibrationError("no correctly classified samples in the calibration set")
    if n_incorrect == 0:
        raise CalibrationError("no incorrectly classified samples in the calibration set")
    mean_c = float(conf[correct].mean())
    mean_i = float(conf[~correct].mean())
    edges = np.linspace(0.0, 1.0, num_bins + 1)
    hist_c, _ = np.histogram(conf[correct], bins=edges)
    hist_i, _ = np.histogram(conf[~correct], bins=edges)
    return CalibrationStats(
        mean_conf_correct=mean_c,
        mean_conf_incorrect=mean_i,
        delta_star=threshold_midpoint(mean_c, mean_i),
        histogram_correct=hist_c,
        histogram_incorrect=hist_i,
        bin_edges=edges,
        n_correct=n_correct,
        n_incorrect=n_incorrect,
        separated=mean_c >= mean_i,
    )


# ---------------------------------------------------------------------------
# threshold sweeps


def _validate_grid(delta_grid) -> list[float]:
    grid = [float(d) for d in delta_grid]
    if not grid:
        raise ValueError("empty delta grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta grid must be sorted ascending")
    return grid


def sweep_from_cache(cache: RoundCache, delta_grid) -> list[dict]:
    """Evaluate every grid delta against one set of cached outputs.

    Accuracy and delay are computed from integer counts over the same
    cached predictions apply_threshold() would select, so each row matches
    a dedicated run_protocol call on the same draws bit for bit.
    """
    grid = _validate_grid(delta_grid)
    n = len(cache)
    r1_correct = cache.round1_pred == cache.true_labels
    r2_correct = cache.round2_pred == cache.true_labels
    rows = []
    for delta in grid:
        esc = cache.round1_conf < delta
        k = int(np.count_nonzero(esc))
        n_correct = int(np.count_nonzero(np.where(esc, r2_correct, r1_correct)))
        rows.append({
            "delta": delta,
            "accuracy": n_correct / n,
            "avg_delay": (n * cache.nc1 + k * cache.nc2) / n,
            "escalation_rate": k / n,
        })
    return rows


def sweep_threshold(model: MrmtlModel, samples, delta_grid, channel_cfg: ChannelConfig,
                    rng, workers: int = 1) -> list[dict]:
    """One evaluation pass, many thresholds."""
    grid = _validate_grid(delta_grid)
    cache = evaluate_rounds(model, samples, channel_cfg, rng, workers)
    return sweep_from_cache(cache, grid)


def default_delta_grid(step: float = 0.02) -> list[float]:
    """Thresholds 0 to 1 inclusive at the given step."""
    count = int(round(1.0 / step))
    return [i * step for i in range(count + 1)]
