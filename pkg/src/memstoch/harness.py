"""Training, evaluation, sweeps and the noisy-input inference study.

Every run writes into its output directory:

* ``metrics.csv``: one row per epoch (columns in :data:`METRIC_COLUMNS`).
  Contains no timing, so seeded reruns are byte-identical.
* ``summary.json``: resolved config, final numbers, timings.
* ``config.json``: the fully resolved config alone.
* ``checkpoint.npz``: weights or conductance pairs, see :func:`save_checkpoint`.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig, dump_config, validate
from .crossbar import CrossbarLayer
from .data import Dataset, NoiseSpec, add_gaussian_noise, load_mnist, normalize_pair, write_pgm
from .device import DeviceParams
from .network import (
    FloatNetwork,
    IdealLayer,
    StochasticNetwork,
    Topology,
    apply_stochastic_update,
    backward_float,
    backward_stochastic,
    cross_entropy,
    forward_float,
    forward_stochastic,
    sgd_step_float,
)
from .stochastic import StreamRng

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1

METRIC_COLUMNS = ("epoch", "learning_rate", "train_error", "train_loss", "test_acc",
                  "max_test_acc", "saturation_events", "reset_events")


class TrainingDiverged(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class EpochMetrics:
    epoch: int
    learning_rate: float
    train_error: float
    train_loss: float
    test_acc: float
    max_test_acc: float
    saturation_events: int
    reset_events: int


@dataclass
class MetricsRecord:
    epochs: list[EpochMetrics] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)
    images_seen: int = 0
    noise_study: list[dict] = field(default_factory=list)

    @property
    def max_test_acc(self) -> float:
        return self.epochs[-1].max_test_acc if self.epochs else float("nan")

    @property
    def final_test_acc(self) -> float:
        return self.epochs[-1].test_acc if self.epochs else float("nan")

    def add(self, row: EpochMetrics) -> None:
        self.epochs.append(row)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(METRIC_COLUMNS)
            for r in self.epochs:
                w.writerow([r.epoch, f"{r.learning_rate:.8g}", f"{r.train_error:.4f}",
                            f"{r.train_loss:.6f}", f"{r.test_acc:.4f}", f"{r.max_test_acc:.4f}",
                            r.saturation_events, r.reset_events])


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(f)]


@dataclass
class TrainResult:
    metrics: MetricsRecord
    model: object
    output_dir: Path
    checkpoint: Path


# --- data -------------------------------------------------------------------


def load_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    train, test = load_mnist(cfg.data.data_dir)
    for ds, limit in ((train, cfg.data.train_limit), (test, cfg.data.test_limit)):
        if limit is not None and len(ds) < limit:
            log.warning("%s split has %d images, fewer than the requested %d",
                        ds.split, len(ds), limit)
    train, test = train.head(cfg.data.train_limit), test.head(cfg.data.test_limit)
    return normalize_pair(train, test, cfg.data.normalization)


# --- models and checkpoints -------------------------------------------------


def build_model(cfg: ExperimentConfig):
    topo = Topology(tuple(cfg.topology))
    rng = np.random.default_rng(cfg.seeds.weights)
    if cfg.mode == "float":
        return FloatNetwork.initialize(topo, rng, cfg.init_scale)
    params = cfg.device.params() if cfg.memristive else None
    return StochasticNetwork.initialize(topo, rng, params=params, w_max=cfg.device.w_max,
                                        init_scale=cfg.init_scale, bl_train=cfg.bl_train,
                                        bl_infer=cfg.bl_infer)


def save_checkpoint(model, path, cfg: ExperimentConfig | None = None) -> Path:
    """Write an ``.npz`` checkpoint.

    Keys: ``format_version``, ``kind`` (``float`` | ``ideal`` | ``crossbar``),
    ``meta`` (JSON string with topology, bit lengths, device params and the
    run config) and per-layer arrays ``w{k}`` or ``g_plus{k}``/``g_minus{k}``.
    """
    arrays: dict[str, np.ndarray] = {}
    meta: dict = {"config": dump_config(cfg) if cfg is not None else None}
    if isinstance(model, FloatNetwork):
        kind = "float"
        for k, w in enumerate(model.weights):
            arrays[f"w{k}"] = w
        meta["topology"] = list(model.topology.layer_sizes)
    elif model.memristive:
        kind = "crossbar"
        for k, layer in enumerate(model.layers):
            arrays[f"g_plus{k}"] = layer.g_plus
            arrays[f"g_minus{k}"] = layer.g_minus
        meta["device"] = asdict(model.layers[0].params)
        meta["weight_scale"] = model.layers[0].weight_scale
    else:
        kind = "ideal"
        for k, layer in enumerate(model.layers):
            arrays[f"w{k}"] = layer.weights
    if kind != "float":
        meta.update(topology=list(model.topology.layer_sizes), bl_train=model.bl_train,
                    bl_infer=model.bl_infer)
    path = Path(path)
    np.savez(path, format_version=np.int64(CHECKPOINT_FORMAT_VERSION), kind=np.str_(kind),
             meta=np.str_(json.dumps(meta)), **arrays)
    return path


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(model, meta)``."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint format {version}")
        kind = str(z["kind"])
        meta = json.loads(str(z["meta"]))
        topo = Topology(tuple(meta["topology"]))
        n = len(topo.shapes)
        if kind == "float":
            return FloatNetwork([z[f"w{k}"].copy() for k in range(n)], topo), meta
        if kind == "crossbar":
            params = DeviceParams(**meta["device"])
            layers = [CrossbarLayer(z[f"g_plus{k}"].copy(), z[f"g_minus{k}"].copy(), params,
                                    meta["weight_scale"]) for k in range(n)]
        elif kind == "ideal":
            layers = [IdealLayer(z[f"w{k}"].copy()) for k in range(n)]
        else:
            raise CheckpointError(f"{path}: unknown checkpoint kind {kind!r}")
    return StochasticNetwork(layers, topo, meta["bl_train"], meta["bl_infer"]), meta


# --- evaluation -------------------------------------------------------------


def evaluate(model, dataset: Dataset, mode: str = "float", bl_infer: int = 10,
             repetitions: int = 1, seed: int = 0) -> float:
    """Test accuracy in percent.

    ``mode="float"`` is a deterministic read of the weights. ``"stochastic"``
    runs ``repetitions`` stream-encoded passes with fresh seeds and takes the
    per-image majority class (ties go to the lowest class index).
    """
    if len(dataset) == 0:
        return float("nan")
    if mode == "float":
        pred = np.argmax(forward_float(model, dataset.images)[-1], axis=-1)
    elif mode == "stochastic":
        weights = model.read_weights()
        n_cls = weights[-1].shape[1]
        votes = np.zeros((len(dataset), n_cls), dtype=np.int64)
        rng = StreamRng(seed)
        rows = np.arange(len(dataset))
        for _ in range(repetitions):
            probs = forward_stochastic(model, dataset.images, bl_infer, rng.next_generator(),
                                       weights)[-1]
            votes[rows, np.argmax(probs, axis=-1)] += 1
        pred = np.argmax(votes, axis=-1)
    else:
        raise ValueError(f"unknown evaluation mode {mode!r}")
    return 100.0 * float(np.mean(pred == dataset.labels))


def _eval_model(model, test: Dataset, cfg: ExperimentConfig, epoch: int) -> float:
    if cfg.mode == "float":
        return evaluate(model, test)
    return evaluate(model, test, "stochastic", cfg.bl_infer, cfg.eval_repetitions,
                    seed=cfg.seeds.streams * 1_000_003 + epoch)


# --- training ---------------------------------------------------------------


def _dump_divergence(out_dir: Path, model, epoch: int, step: int, loss: float) -> Path:
    weights = model.read_weights()
    info = {
        "epoch": epoch, "step": step, "loss": loss,
        "weight_stats": [{"min": float(np.nanmin(w)), "max": float(np.nanmax(w)),
                          "nan": int(np.isnan(w).sum())} for w in weights],
    }
    path = out_dir / "divergence.json"
    path.write_text(json.dumps(info, indent=2))
    return path


def train(cfg: ExperimentConfig, data: tuple[Dataset, Dataset] | None = None,
          on_epoch: Callable[[EpochMetrics], None] | None = None) -> TrainResult:
    """Single-example training for ``cfg.epochs`` epochs.

    Float mode takes plain SGD steps. Stochastic modes encode activations and
    errors as bit streams and apply coincidence updates; memristive mode
    also resets every crossbar after each ``reset_period`` images.
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(dump_config(cfg), indent=2) + "\n")

    train_ds, test_ds = data if data is not None else load_data(cfg)
    n_in = cfg.topology[0]
    if train_ds.images.shape[1] != n_in:
        raise ConfigError(f"topology.0: input size {n_in} != image size {train_ds.images.shape[1]}")

    model = build_model(cfg)
    shuffle_rng = np.random.default_rng(cfg.seeds.shuffle)
    stream_rng = StreamRng(cfg.seeds.streams)
    device_rng = StreamRng(cfg.seeds.device_noise)
    record = MetricsRecord()
    reset_events = 0
    best = -math.inf

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        eta = cfg.schedule.eta(epoch)
        if cfg.mode == "stochastic-ideal-weights":
            for layer in model.layers:
                layer.quantum = eta / (cfg.ideal_delta_gain * cfg.bl_train)
        errors = 0
        loss_sum = 0.0
        order = shuffle_rng.permutation(len(train_ds))
        for step, i in enumerate(order):
            x, label = train_ds.images[i], int(train_ds.labels[i])
            if cfg.mode == "float":
                acts = forward_float(model, x)
                _, grads = backward_float(model, acts, label)
            else:
                weights = model.read_weights()
                gen = stream_rng.next_generator()
                acts = forward_stochastic(model, x, cfg.bl_train, gen, weights)
            probs = acts[-1]
            loss = cross_entropy(probs, label)
            if not math.isfinite(loss) or not np.all(np.isfinite(probs)):
                dump = _dump_divergence(out_dir, model, epoch + 1, step, loss)
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1} step {step}; "
                                       f"diagnostics in {dump}")
            loss_sum += loss
            errors += int(np.argmax(probs) != label)
            if cfg.mode == "float":
                sgd_step_float(model, grads, eta)
            else:
                streams = backward_stochastic(model, acts, label, gen, eta, cfg.bl_train, weights)
                apply_stochastic_update(model, streams, device_rng.next_generator())
            record.images_seen += 1
            if cfg.memristive and record.images_seen % cfg.reset_period == 0:
                model.periodic_reset()
                reset_events += 1

        acc = _eval_model(model, test_ds, cfg, epoch)
        best = max(best, acc)
        row = EpochMetrics(
            epoch=epoch + 1, learning_rate=eta,
            train_error=100.0 * errors / len(train_ds), train_loss=loss_sum / len(train_ds),
            test_acc=acc, max_test_acc=best,
            saturation_events=0 if cfg.mode == "float" else model.saturation_events,
            reset_events=reset_events)
        record.add(row)
        record.wall_clock.append(time.perf_counter() - t0)
        record.write_csv(out_dir / "metrics.csv")
        if on_epoch is not None:
            on_epoch(row)

    ckpt = save_checkpoint(model, out_dir / "checkpoint.npz", cfg)
    write_summary(out_dir, cfg, record, len(train_ds), len(test_ds))
    return TrainResult(record, model, out_dir, ckpt)


def write_summary(out_dir: Path, cfg: ExperimentConfig, record: MetricsRecord,
                  n_train: int, n_test: int) -> None:
    summary = {
        "config": dump_config(cfg),
        "train_images": n_train,
        "test_images": n_test,
        "images_seen": record.images_seen,
        "final_test_acc": record.final_test_acc,
        "max_test_acc": record.max_test_acc,
        "saturation_events": record.epochs[-1].saturation_events if record.epochs else 0,
        "reset_events": record.epochs[-1].reset_events if record.epochs else 0,
        "epoch_seconds": record.wall_clock,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


# --- sweeps and studies -----------------------------------------------------


def dedupe(values: Sequence[float]) -> list[float]:
    out = []
    for v in values:
        if v in out:
            log.warning("duplicate value %g dropped", v)
        else:
            out.append(v)
    return out


def sweep_sigma(cfg: ExperimentConfig, sigma_ratios: Sequence[float],
                data: tuple[Dataset, Dataset] | None = None,
                on_point: Callable[[float, TrainResult], None] | None = None) -> list[dict]:
    """Retrain a memristive network from scratch for each sigma/B value.

    Returns rows ``{"sigma_ratio", "max_test_acc", "final_test_acc"}`` and
    writes ``sweep_sigma.csv`` into ``cfg.output_dir``.
    """
    ratios = dedupe(list(sigma_ratios))
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if ratios and data is None:
        data = load_data(cfg)
    rows = []
    for r in ratios:
        base = dump_config(cfg)
        base["mode"] = "stochastic-memristive"
        base["device"]["sigma_ratio"] = r
        base["output_dir"] = str(out_dir / f"sigma_{r:g}")
        result = train(validate(base), data)
        rows.append({"sigma_ratio": r, "max_test_acc": result.metrics.max_test_acc,
                     "final_test_acc": result.metrics.final_test_acc})
        if on_point is not None:
            on_point(r, result)
    with open(out_dir / "sweep_sigma.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sigma_ratio", "max_test_acc"])
        for row in rows:
            w.writerow([f"{row['sigma_ratio']:g}", f"{row['max_test_acc']:.4f}"])
    return rows


def sweep_shape(rows: Sequence[dict], plateau_tol: float = 1.5) -> dict:
    """Check the plateau-then-decline shape of a sigma sweep.

    ``plateau``: accuracy at 0.3 within ``plateau_tol`` points of 0.1.
    ``decline``: the largest sigma scores strictly below 0.3. ``None`` when a
    needed point is missing.
    """
    acc = {row["sigma_ratio"]: row["max_test_acc"] for row in rows}
    plateau = decline = None
    if 0.1 in acc and 0.3 in acc:
        plateau = acc[0.3] >= acc[0.1] - plateau_tol
    top = max(acc) if acc else None
    if 0.3 in acc and top is not None and top > 0.3:
        decline = acc[top] < acc[0.3]
    return {"plateau": plateau, "decline": decline}


NOISE_COLUMNS = ("model", "bl_infer", "sigma_i_sq", "accuracy", "degradation")


def noise_inference_study(float_ckpt, stochastic_ckpt, variances: Sequence[float],
                          bl_infer_list: Sequence[int] = (10, 100), repetitions: int = 20,
                          noise_seed: int = 0, test: Dataset | None = None,
                          output_dir=None, eval_seed: int = 12345) -> list[dict]:
    """Accuracy of float and stochastic models on noise-corrupted test data.

    One noisy copy of the test set is drawn per variance and shared by all
    models. Each row reports accuracy and degradation (clean minus noisy, in
    percentage points) relative to the same model's clean accuracy. Float
    rows carry ``bl_infer = 0``. Stochastic evaluation seeds depend only on
    the model and bit length, so a variance of 0 reproduces the clean score.
    """
    float_model, float_meta = load_checkpoint(float_ckpt)
    stoch_model, stoch_meta = load_checkpoint(stochastic_ckpt)
    if test is None:
        cfg = validate(stoch_meta["config"] or {})
        _, test = load_data(cfg)
    models = [("float", 0, float_model)] + [("stochastic", int(bl), stoch_model)
                                           for bl in bl_infer_list]

    def score(name, bl, model, ds):
        if name == "float":
            return evaluate(model, ds)
        return evaluate(model, ds, "stochastic", bl, repetitions, seed=eval_seed + bl)

    clean = {(name, bl): score(name, bl, m, test) for name, bl, m in models}
    rows = []
    for k, var in enumerate(variances):
        noisy = add_gaussian_noise(test, NoiseSpec(var, noise_seed + k))
        for name, bl, m in models:
            acc = score(name, bl, m, noisy)
            rows.append({"model": name, "bl_infer": bl, "sigma_i_sq": float(var),
                         "accuracy": acc, "degradation": clean[(name, bl)] - acc,
                         "clean_accuracy": clean[(name, bl)]})
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "noise_study.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(NOISE_COLUMNS)
            for r in rows:
                w.writerow([r["model"], r["bl_infer"], f"{r['sigma_i_sq']:g}",
                            f"{r['accuracy']:.4f}", f"{r['degradation']:.4f}"])
        export_noisy_samples(test, variances, out, noise_seed)
    return rows


def export_noisy_samples(test: Dataset, variances: Sequence[float], out_dir,
                         noise_seed: int = 0, digit: int = 7) -> list[Path]:
    """PGM images of the first test ``digit`` at every noise variance."""
    hits = np.flatnonzero(test.labels == digit)
    if hits.size == 0:
        return []
    idx = int(hits[0])
    one = Dataset(test.images[idx:idx + 1], test.labels[idx:idx + 1], test.split)
    paths = []
    out_dir = Path(out_dir)
    write_pgm(out_dir / f"digit{digit}_clean.pgm", one.images[0])
    paths.append(out_dir / f"digit{digit}_clean.pgm")
    for k, var in enumerate(variances):
        # same noise stream as row idx of the shared noisy set
        noisy = add_gaussian_noise(test, NoiseSpec(var, noise_seed + k)).images[idx]
        p = out_dir / f"digit{digit}_var{var:g}.pgm"
        write_pgm(p, noisy)
        paths.append(p)
    return paths
