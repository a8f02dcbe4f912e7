"""Training loop: corpus ingestion, epoch/batch iteration, metrics CSVs and
bit-exact checkpointing.

Runs are deterministic for a fixed seed and config: file ingestion order is
sorted, every random draw comes from one SplitMix64 stream, and checkpoints
capture that stream's state so a resumed run replays bit-identically.
"""

from __future__ import annotations

import csv
import logging
import math
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    CorruptCheckpoint,
    EmptyCorpus,
    MidiError,
    NonFiniteLoss,
    NoSamples,
    VersionMismatch,
)
from .midi_codec import merge_tracks, parse_midi
from .model import (
    DenseParams,
    LstmParams,
    ModelParams,
    init_params,
    model_backward,
    model_forward,
    named_tensors,
)
from .note_matrix import (
    NoteMatrix,
    ScalingParams,
    events_to_matrix,
    fit_scaling,
    make_batches,
    make_samples,
    scale,
)
from .numerics import Rng, Tensor
from .optim import RmspropState, accuracy, clip_gradients, mse, rmsprop_step

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"NGCKPT01"
CHECKPOINT_VERSION = 1

METRICS_COLUMNS = ("scope", "epoch", "batch", "loss", "accuracy")
SUMMARY_COLUMNS = ("epoch", "tensor", "min", "max", "mean", "std")


@dataclass
class TrainConfig:
    corpus_dir: str
    window: int = 50
    hidden: int = 512
    dropout_rate: float = 0.75
    lr: float = 1e-4
    rho: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 64
    epochs: int = 200
    seed: int = 0
    clip_norm: float | None = 5.0
    checkpoint_path: str = "model.ckpt"
    metrics_path: str = "metrics.csv"
    summary_path: str | None = None  # default: metrics path + "_weights.csv"
    resume_from: str | None = None

    def resolved_summary_path(self) -> str:
        if self.summary_path is not None:
            return self.summary_path
        p = Path(self.metrics_path)
        return str(p.with_name(p.stem + "_weights.csv"))


@dataclass
class TrainRecord:
    epoch: int
    batch: int | None  # None for epoch-mean records
    loss: float
    accuracy: float
    wall_seconds: float


@dataclass
class Checkpoint:
    window: int
    hidden: int
    output_dim: int
    dropout_rate: float
    division: int
    scaling: ScalingParams
    tensors: dict[str, Tensor]  # model tensors plus "opt."-prefixed RMSprop v
    rng_state: int
    epochs_completed: int
    version: int = CHECKPOINT_VERSION

    def model_params(self) -> ModelParams:
        return ModelParams(
            lstm=LstmParams(
                kernel=self.tensors["lstm.kernel"].copy(),
                recurrent_kernel=self.tensors["lstm.recurrent_kernel"].copy(),
                bias=self.tensors["lstm.bias"].copy(),
            ),
            dense=DenseParams(
                weights=self.tensors["dense.weights"].copy(),
                bias=self.tensors["dense.bias"].copy(),
            ),
            hidden=self.hidden,
            dropout_rate=self.dropout_rate,
            window=self.window,
        )

    def optimizer_v(self) -> dict[str, Tensor]:
        return {name[len("opt."):]: t.copy()
                for name, t in self.tensors.items() if name.startswith("opt.")}


def ingest_corpus(corpus_dir: str) -> tuple[list[NoteMatrix], ScalingParams]:
    """Parse every .mid/.midi in the directory (sorted order, for
    reproducibility); unparseable files are skipped with a warning."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise EmptyCorpus(f"corpus directory {corpus_dir!r} does not exist")
    paths = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in (".mid", ".midi"))
    matrices = []
    for path in paths:
        try:
            midi = parse_midi(path.read_bytes())
        except MidiError as exc:
            logger.warning("skipping %s: %s", path.name, exc)
            continue
        events, _tempo = merge_tracks(midi)
        matrices.append(events_to_matrix(events, midi.division))
    if not matrices:
        raise EmptyCorpus(f"no parseable MIDI files in {corpus_dir!r}")
    return matrices, fit_scaling(matrices)


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _summary_rows(epoch: int, params: ModelParams) -> list[list]:
    rows = []
    for name, tensor in named_tensors(params):
        rows.append([epoch, name, float(tensor.min()), float(tensor.max()),
                     float(tensor.mean()), float(tensor.std())])
    return rows


def train(config: TrainConfig,
          progress: Callable[[TrainRecord], None] | None = None,
          ) -> tuple[ModelParams, list[TrainRecord]]:
    """Run the full training loop; returns final params and all records.

    Per epoch: reshuffle, then per batch forward (train mode) -> MSE ->
    backward -> optional global-norm clip -> RMSprop step. A checkpoint is
    written after every epoch, so an aborted run keeps its last good state.
    """
    matrices, scaling = ingest_corpus(config.corpus_dir)
    division = matrices[0].division

    rng = Rng(config.seed)
    params = init_params(rng, hidden=config.hidden,
                         dropout_rate=config.dropout_rate,
                         window=config.window)
    state = RmspropState.for_params(params, lr=config.lr, rho=config.rho,
                                    epsilon=config.epsilon)
    start_epoch = 0
    if config.resume_from is not None:
        ckpt = load_checkpoint(config.resume_from)
        if (ckpt.window, ckpt.hidden, ckpt.dropout_rate) != (
                config.window, config.hidden, config.dropout_rate):
            raise ValueError("checkpoint model shape does not match config")
        params = ckpt.model_params()
        state.v = ckpt.optimizer_v()
        rng.set_state(ckpt.rng_state)
        start_epoch = ckpt.epochs_completed
        scaling = ckpt.scaling
        division = ckpt.division

    samples = []
    for matrix in matrices:
        samples.extend(make_samples(scale(matrix, scaling), config.window))
    if not samples:
        raise NoSamples(
            f"no sequence is longer than window+1 = {config.window + 1} rows")

    records: list[TrainRecord] = []
    t0 = time.perf_counter()
    with open(config.metrics_path, "w", newline="") as metrics_file, \
            open(config.resolved_summary_path(), "w", newline="") as summary_file:
        metrics = csv.writer(metrics_file)
        metrics.writerow(METRICS_COLUMNS)
        summary = csv.writer(summary_file)
        summary.writerow(SUMMARY_COLUMNS)

        for epoch in range(start_epoch, config.epochs):
            batches = make_batches(samples, config.batch_size, rng)
            losses, accuracies = [], []
            for batch_idx, batch in enumerate(batches):
                predictions, cache = model_forward(
                    params, batch.inputs, "train", rng)
                loss = mse(predictions, batch.targets)
                if not math.isfinite(loss.mse):
                    metrics_file.flush()
                    summary_file.flush()
                    raise NonFiniteLoss(
                        f"loss {loss.mse} at epoch {epoch} batch {batch_idx}; "
                        "last epoch checkpoint retained")
                acc = accuracy(predictions, batch.targets, scaling)
                grads = model_backward(params, cache, loss.grad)
                if config.clip_norm is not None:
                    clip_gradients(grads, config.clip_norm)
                rmsprop_step(params, grads, state)

                losses.append(loss.mse)
                accuracies.append(acc)
                record = TrainRecord(epoch, batch_idx, loss.mse, acc,
                                     time.perf_counter() - t0)
                records.append(record)
                metrics.writerow(["batch", epoch, batch_idx, loss.mse, acc])

            epoch_record = TrainRecord(epoch, None, _mean(losses),
                                       _mean(accuracies),
                                       time.perf_counter() - t0)
            records.append(epoch_record)
            metrics.writerow(["epoch", epoch, "", epoch_record.loss,
                              epoch_record.accuracy])
            summary.writerows(_summary_rows(epoch, params))

            save_checkpoint(config.checkpoint_path, _snapshot(
                config, params, state, scaling, division, rng, epoch + 1))
            if progress is not None:
                progress(epoch_record)

    return params, records


def _snapshot(config: TrainConfig, params: ModelParams, state: RmspropState,
              scaling: ScalingParams, division: int, rng: Rng,
              epochs_completed: int) -> Checkpoint:
    tensors = {name: t for name, t in named_tensors(params)}
    for name, t in state.v.items():
        tensors["opt." + name] = t
    return Checkpoint(
        window=config.window,
        hidden=config.hidden,
        output_dim=params.dense.bias.shape[0],
        dropout_rate=config.dropout_rate,
        division=division,
        scaling=scaling,
        tensors=tensors,
        rng_state=rng.state,
        epochs_completed=epochs_completed,
    )


def save_checkpoint(path: str, checkpoint: Checkpoint) -> None:
    """Serialize to the little-endian NGCKPT01 format, atomically."""
    out = bytearray(CHECKPOINT_MAGIC)
    out += struct.pack("<I", checkpoint.version)
    out += struct.pack("<III", checkpoint.window, checkpoint.hidden,
                       checkpoint.output_dim)
    out += struct.pack("<d", checkpoint.dropout_rate)
    out += struct.pack("<I", checkpoint.division)
    out += struct.pack("<IIQ", checkpoint.scaling.pitch_divisor,
                       checkpoint.scaling.velocity_divisor,
                       checkpoint.scaling.dt_max_ticks)
    out += struct.pack("<I", checkpoint.epochs_completed)
    out += struct.pack("<Q", checkpoint.rng_state)
    out += struct.pack("<I", len(checkpoint.tensors))
    for name, tensor in checkpoint.tensors.items():
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded)) + encoded
        out += struct.pack("<B", tensor.ndim)
        out += struct.pack(f"<{tensor.ndim}Q", *tensor.shape)
        out += np.ascontiguousarray(tensor, dtype="<f8").tobytes()
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    tmp.write_bytes(bytes(out))
    tmp.replace(path)


class _CheckpointReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpoint("checkpoint file truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: str) -> Checkpoint:
    """Parse an NGCKPT01 file; validates magic, version and exact length."""
    reader = _CheckpointReader(Path(path).read_bytes())
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CorruptCheckpoint("bad magic tag")
    (version,) = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    window, hidden, output_dim = reader.unpack("<III")
    (dropout_rate,) = reader.unpack("<d")
    (division,) = reader.unpack("<I")
    pitch_div, vel_div, dt_max = reader.unpack("<IIQ")
    (epochs_completed,) = reader.unpack("<I")
    (rng_state,) = reader.unpack("<Q")
    (n_tensors,) = reader.unpack("<I")
    tensors: dict[str, Tensor] = {}
    for _ in range(n_tensors):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.unpack("<B")
        shape = reader.unpack(f"<{rank}Q")
        count = int(np.prod(shape)) if rank else 1
        raw = reader.take(count * 8)
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if reader.pos != len(reader.data):
        raise CorruptCheckpoint("trailing bytes after last tensor")
    return Checkpoint(
        window=window, hidden=hidden, output_dim=output_dim,
        dropout_rate=dropout_rate, division=division,
        scaling=ScalingParams(dt_max_ticks=dt_max, pitch_divisor=pitch_div,
                              velocity_divisor=vel_div),
        tensors=tensors, rng_state=rng_state,
        epochs_completed=epochs_completed, version=version,
    )
