"""Continuous-grade deep knowledge tracing.

A single-layer vanilla tanh recurrent network reads a student's interaction
sequence and emits one logit per hashed exercise bucket; the prediction for
step t+1 is the sigmoid of the logit at the next exercise's bucket, trained
against grades normalized to [0, 1] with mean-squared error. Gradients are
computed by hand-written backpropagation through time, giving full control
over truncation and making the math checkable by finite differences.
"""

from __future__ import annotations

import struct
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .dataset import Dataset, LearningPath
from .seeding import derive_rng

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8

_MAGIC = b"KTDKT001"


class TrainingError(RuntimeError):
    """Non-finite loss encountered while training."""

    def __init__(self, epoch: int, batch: int, message: str):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"epoch {epoch}, batch {batch}: {message}")


@dataclass(frozen=True)
class DktConfig:
    hidden_size: int = 64
    input_buckets: int = 128
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 64
    bptt_limit: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("hidden_size", "input_buckets", "epochs", "batch_size", "bptt_limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        # learning_rate 0 is allowed so a null update step stays expressible.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass
class DktModel:
    """Weight container; shapes: w_in [H, 2B+1], w_rec [H, H], w_out [B, H]."""

    w_in: np.ndarray
    w_rec: np.ndarray
    b_h: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_rec.shape[0]

    @property
    def input_buckets(self) -> int:
        return self.w_out.shape[0]

    def params(self) -> list[tuple[str, np.ndarray]]:
        return [
            ("w_in", self.w_in),
            ("w_rec", self.w_rec),
            ("b_h", self.b_h),
            ("w_out", self.w_out),
            ("b_out", self.b_out),
        ]

    def copy(self) -> "DktModel":
        return DktModel(*(arr.copy() for _, arr in self.params()))


@dataclass(frozen=True)
class TrainReport:
    epoch_losses: tuple[float, ...]
    final_val_mae: float
    wall_time_s: float


def stable_bucket(exercise_id, buckets: int) -> int:
    """Hash an exercise id into [0, buckets); stable across runs and builds."""
    return zlib.crc32(str(exercise_id).encode("utf-8")) % buckets


def encode_step(exercise_id, grade: float, buckets: int) -> np.ndarray:
    """Input vector: one-hot bucket, grade-scaled bucket, raw grade scalar."""
    if not 0.0 <= grade <= 100.0:
        raise ValueError(f"grade must be in [0,100], got {grade}")
    b = stable_bucket(exercise_id, buckets)
    g = grade / 100.0
    vec = np.zeros(2 * buckets + 1, dtype=np.float64)
    vec[b] = 1.0
    vec[buckets + b] = g
    vec[2 * buckets] = g
    return vec


def init_model(config: DktConfig) -> DktModel:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    rng = derive_rng(config.seed, "dkt-init")
    h, b = config.hidden_size, config.input_buckets
    lim_in = 1.0 / np.sqrt(2 * b + 1)
    lim_rec = 1.0 / np.sqrt(h)
    return DktModel(
        w_in=rng.uniform(-lim_in, lim_in, size=(h, 2 * b + 1)),
        w_rec=rng.uniform(-lim_rec, lim_rec, size=(h, h)),
        b_h=np.zeros(h),
        w_out=rng.uniform(-lim_rec, lim_rec, size=(b, h)),
        b_out=np.zeros(b),
    )


def forward(model: DktModel, path: LearningPath) -> np.ndarray:
    """Predicted next-step grades in (0,1) for steps 1..L-1 of one path."""
    if len(path) < 2:
        raise ValueError(f"path {path.student_id!r} shorter than 2 steps")
    buckets = model.input_buckets
    h = np.zeros(model.hidden_size)
    preds = np.empty(len(path) - 1, dtype=np.float64)
    for t in range(len(path) - 1):
        x = encode_step(path.steps[t].exercise_id, path.steps[t].grade, buckets)
        h = np.tanh(model.w_in @ x + model.w_rec @ h + model.b_h)
        o = model.w_out @ h + model.b_out
        nxt = stable_bucket(path.steps[t + 1].exercise_id, buckets)
        preds[t] = expit(o[nxt])
    return preds


# ---------------------------------------------------------------------------
# Batched training internals
# ---------------------------------------------------------------------------

def _prepare_paths(paths: Sequence[LearningPath], buckets: int):
    """Per path: (bucket id vector, normalized grade vector)."""
    prepped = []
    for p in paths:
        bk = np.array([stable_bucket(s.exercise_id, buckets) for s in p.steps], dtype=np.int64)
        gr = p.grades / 100.0
        prepped.append((bk, gr))
    return prepped

def _pad_batch(prepped, indices):
    lengths = np.array([prepped[i][0].size for i in indices], dtype=np.int64)
    t_max = int(lengths.max())
    bk = np.zeros((len(indices), t_max), dtype=np.int64)
    gr = np.zeros((len(indices), t_max), dtype=np.float64)
    for row, i in enumerate(indices):
        pb, pg = prepped[i]
        bk[row, : pb.size] = pb
        gr[row, : pg.size] = pg
    return bk, gr, lengths


def _loss_and_grads(model: DktModel, bk, gr, lengths, bptt_limit, want_grads=True):
    """Sum of squared errors, pair count and (optionally) gradients of the SSE.

    Inputs are padded [N, T] bucket/grade arrays. Sequences longer than
    bptt_limit are processed in consecutive segments with the hidden state
    carried over but treated as a constant by the backward pass. Padded
    positions contribute nothing: their output error is masked and the
    backward recursion therefore never picks up signal from them.
    """
    n, t_max = bk.shape
    hsz = model.hidden_size
    buckets = model.input_buckets
    sse = 0.0
    n_pairs = int(np.sum(lengths - 1))
    grads = None
    g_in_t = None
    if want_grads:
        grads = {
            "w_rec": np.zeros_like(model.w_rec),
            "b_h": np.zeros_like(model.b_h),
            "w_out": np.zeros_like(model.w_out),
            "b_out": np.zeros_like(model.b_out),
        }
        g_in_t = np.zeros((2 * buckets + 1, hsz))

    h_carry = np.zeros((n, hsz))
    w_rec_t = model.w_rec.T
    for seg_start in range(0, t_max - 1, bptt_limit):
        seg_end = min(seg_start + bptt_limit, t_max - 1)
        span = seg_end - seg_start
        hs = np.empty((span, n, hsz))
        preds = np.empty((n, span))
        h = h_carry
        for j in range(span):
            t = seg_start + j
            xb = bk[:, t]
            xg = gr[:, t][:, None]
            a = (
                model.w_in[:, xb].T
                + model.w_in[:, buckets + xb].T * xg
                + model.w_in[:, 2 * buckets][None, :] * xg
                + h @ w_rec_t
                + model.b_h
            )
            h = np.tanh(a)
            hs[j] = h
            tb = bk[:, t + 1]
            o = np.einsum("nh,nh->n", model.w_out[tb], h) + model.b_out[tb]
            preds[:, j] = expit(o)
        steps = np.arange(seg_start, seg_end)
        valid = (steps[None, :] + 1) < lengths[:, None]
        err = np.where(valid, preds - gr[:, seg_start + 1 : seg_end + 1], 0.0)
        sse += float(np.sum(err * err))
        if want_grads:
            delta_next = np.zeros((n, hsz))
            for j in reversed(range(span)):
                t = seg_start + j
                tb = bk[:, t + 1]
                ho = hs[j]
                do = 2.0 * err[:, j] * preds[:, j] * (1.0 - preds[:, j])
                dh = delta_next @ model.w_rec + model.w_out[tb] * do[:, None]
                da = dh * (1.0 - ho * ho)
                np.add.at(grads["w_out"], tb, do[:, None] * ho)
                np.add.at(grads["b_out"], tb, do)
                h_in = hs[j - 1] if j > 0 else h_carry
                grads["w_rec"] += da.T @ h_in
                grads["b_h"] += da.sum(axis=0)
                xb = bk[:, t]
                xg = gr[:, t][:, None]
                np.add.at(g_in_t, xb, da)
                np.add.at(g_in_t, buckets + xb, da * xg)
                g_in_t[2 * buckets] += (da * xg).sum(axis=0)
                delta_next = da
        h_carry = hs[-1]
    if want_grads:
        grads["w_in"] = g_in_t.T
    return sse, n_pairs, grads


def train(
    model: DktModel,
    train_data: Dataset,
    config: DktConfig,
    val_data: Dataset | None = None,
) -> tuple[DktModel, TrainReport]:
    """Adaptive-moment gradient descent on the mean squared prediction error.

    Shuffling and initialization streams derive from config.seed, so repeated
    runs produce identical weights. Raises TrainingError on non-finite loss.
    """
    paths = [p for p in sorted(train_data.paths, key=lambda q: str(q.student_id)) if len(p) >= 2]
    if not paths:
        raise ValueError("training data has no path of length >= 2")
    prepped = _prepare_paths(paths, config.input_buckets)
    rng = derive_rng(config.seed, "dkt-train")
    adam_m = {name: np.zeros_like(arr) for name, arr in model.params()}
    adam_v = {name: np.zeros_like(arr) for name, arr in model.params()}
    step = 0
    losses = []
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        order = rng.permutation(len(prepped))
        epoch_sse = 0.0
        epoch_pairs = 0
        for batch_no, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start : start + config.batch_size]
            bk, gr, lengths = _pad_batch(prepped, idx)
            sse, n_pairs, grads = _loss_and_grads(model, bk, gr, lengths, config.bptt_limit)
            if not np.isfinite(sse):
                raise TrainingError(epoch, batch_no, f"non-finite loss {sse}")
            epoch_sse += sse
            epoch_pairs += n_pairs
            step += 1
            bc1 = 1.0 - _ADAM_BETA1**step
            bc2 = 1.0 - _ADAM_BETA2**step
            for name, arr in model.params():
                g = grads[name] / n_pairs
                adam_m[name] = _ADAM_BETA1 * adam_m[name] + (1.0 - _ADAM_BETA1) * g
                adam_v[name] = _ADAM_BETA2 * adam_v[name] + (1.0 - _ADAM_BETA2) * g * g
                arr -= config.learning_rate * (adam_m[name] / bc1) / (
                    np.sqrt(adam_v[name] / bc2) + _ADAM_EPS
                )
        losses.append(epoch_sse / epoch_pairs)
    val_mae = float("nan")
    if val_data is not None:
        pairs = predict_dataset(model, val_data)
        val_mae = float(np.mean(np.abs(pairs[:, 0] - pairs[:, 1])))
    report = TrainReport(
        epoch_losses=tuple(losses),
        final_val_mae=val_mae,
        wall_time_s=time.perf_counter() - t0,
    )
    return model, report


def gradient_check(model: DktModel, batch: Sequence[LearningPath], epsilon: float) -> float:
    """Max relative disagreement between analytic and central-difference grads."""
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-7, 1e-3], got {epsilon}")
    prepped = _prepare_paths(batch, model.input_buckets)
    bk, gr, lengths = _pad_batch(prepped, range(len(prepped)))
    no_trunc = int(bk.shape[1]) + 1
    _, n_pairs, grads = _loss_and_grads(model, bk, gr, lengths, no_trunc)

    def loss_at() -> float:
        sse, np_, _ = _loss_and_grads(model, bk, gr, lengths, no_trunc, want_grads=False)
        return sse / np_

    worst = 0.0
    for name, arr in model.params():
        analytic = grads[name] / n_pairs
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            ix = it.multi_index
            orig = arr[ix]
            arr[ix] = orig + epsilon
            up = loss_at()
            arr[ix] = orig - epsilon
            down = loss_at()
            arr[ix] = orig
            numeric = (up - down) / (2.0 * epsilon)
            a = float(analytic[ix])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
            it.iternext()
    return worst


def predict_dataset(model: DktModel, test_data: Dataset) -> np.ndarray:
    """[n_pairs, 2] array of (prediction, actual grade in [0,1]) rows.

    Paths are visited in student-id order; paths shorter than 2 steps yield
    no pairs. The pair order equals the concatenation of per-path forward()
    outputs.
    """
    if test_data.n_students == 0:
        raise ValueError("empty test dataset")
    rows = []
    for p in sorted(test_data.paths, key=lambda q: str(q.student_id)):
        if len(p) < 2:
            continue
        preds = forward(model, p)
        actual = p.grades[1:] / 100.0
        rows.append(np.column_stack([preds, actual]))
    if not rows:
        raise ValueError("no test path of length >= 2")
    return np.concatenate(rows, axis=0)


# ---------------------------------------------------------------------------
# Serialization: versioned binary container
# ---------------------------------------------------------------------------
# Layout: 8-byte magic "KTDKT001", two little-endian int64 (hidden_size,
# input_buckets), then the five arrays as row-major little-endian float64 in
# params() order.

def save_model(model: DktModel, path: str | Path) -> None:
    header = _MAGIC + struct.pack("<qq", model.hidden_size, model.input_buckets)
    with open(path, "wb") as fh:
        fh.write(header)
        for _, arr in model.params():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path: str | Path) -> DktModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _MAGIC:
        raise ValueError(f"{path}: not a DKT model file")
    hsz, buckets = struct.unpack("<qq", blob[8:24])
    shapes = [
        (hsz, 2 * buckets + 1),
        (hsz, hsz),
        (hsz,),
        (buckets, hsz),
        (buckets,),
    ]
    need = 24 + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(blob) != need:
        raise ValueError(f"{path}: truncated model file ({len(blob)} != {need} bytes)")
    offset = 24
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        arrays.append(arr.astype(np.float64))
        offset += 8 * count
    return DktModel(*arrays)
