"""``memstoch`` command line.

Exit codes: 0 success, 1 runtime failure, 2 configuration / input error.
Summaries and output paths go to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, plotting
from .config import ConfigError, config_schema, dump_config, load_config, validate
from .data import (DATA_DIR_ENV, Dataset, IdxFormatError, NoiseSpec, add_gaussian_noise,
                   load_mnist, normalize_pair)
from .harness import CheckpointError
from .stochastic import StreamRng, coincidence_counts, encode_many

log = logging.getLogger("memstoch")

DEFAULT_SIGMAS = (0.1, 0.2, 0.3, 0.5, 0.7, 1.0)
DEFAULT_VARIANCES = (0.01, 0.1, 0.2)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _resolve(args):
    overrides = list(args.set or [])
    if getattr(args, "output_dir", None):
        overrides.append(f"output_dir={json.dumps(args.output_dir)}")
    return load_config(args.config, overrides)


def _print_epoch(row: harness.EpochMetrics) -> None:
    print(f"epoch {row.epoch:3d}  lr {row.learning_rate:.4g}  train_err {row.train_error:6.2f}%  "
          f"test_acc {row.test_acc:6.2f}%  max {row.max_test_acc:6.2f}%  "
          f"sat {row.saturation_events}", flush=True)


def run_train(args) -> int:
    cfg = _resolve(args)
    result = harness.train(cfg, on_epoch=_print_epoch)
    out = result.output_dir
    if not args.no_plot:
        rows = harness.read_metrics_csv(out / "metrics.csv")
        plotting.plot_training_curves({cfg.mode: rows}, out / "training_curves.png")
    print(f"metrics: {out / 'metrics.csv'}")
    print(f"checkpoint: {result.checkpoint}")
    return 0


def run_sweep(args) -> int:
    cfg = _resolve(args)
    sigmas = harness.dedupe(_floats(args.sigmas))

    def report(r, result):
        print(f"sigma/B {r:g}: max test acc {result.metrics.max_test_acc:.2f}%", flush=True)

    rows = harness.sweep_sigma(cfg, sigmas, on_point=report)
    out = Path(cfg.output_dir)
    (out / "config.json").write_text(json.dumps(dump_config(cfg), indent=2) + "\n")
    if rows and not args.no_plot:
        plotting.plot_sigma_sweep(rows, out / "sweep_sigma.png")
    shape = harness.sweep_shape(rows)
    print(f"shape: plateau={shape['plateau']} decline={shape['decline']}")
    print(f"table: {out / 'sweep_sigma.csv'}")
    return 0


def run_noise_study(args) -> int:
    for p in (args.float_ckpt, args.stochastic_ckpt):
        if not Path(p).exists():
            raise CheckpointError(f"checkpoint not found: {p}")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    test = None
    if args.data_dir is not None:
        _, meta = harness.load_checkpoint(args.stochastic_ckpt)
        cfg_data = (meta.get("config") or {}).get("data", {})
        train_ds, test_ds = load_mnist(args.data_dir)
        train_ds = train_ds.head(cfg_data.get("train_limit"))
        test_ds = test_ds.head(cfg_data.get("test_limit"))
        _, test = normalize_pair(train_ds, test_ds, cfg_data.get("normalization", "scale"))
    variances = _floats(args.variances)
    rows = harness.noise_inference_study(
        args.float_ckpt, args.stochastic_ckpt, variances, _ints(args.bl_infer),
        args.repetitions, args.noise_seed, test=test, output_dir=out)
    (out / "noise_config.json").write_text(json.dumps(vars(args), indent=2, default=str) + "\n")
    for r in rows:
        label = "float" if r["model"] == "float" else f"BL={r['bl_infer']}"
        print(f"{label:8s} var {r['sigma_i_sq']:<5g} acc {r['accuracy']:6.2f}%  "
              f"degradation {r['degradation']:6.2f}")
    if rows and not args.no_plot:
        plotting.plot_noise_study(rows, out / "noise_study.png")
        if test is None:
            _, meta = harness.load_checkpoint(args.stochastic_ckpt)
            _, test = harness.load_data(validate(meta["config"] or {}))
        _plot_noisy_digit(test, variances, args.noise_seed, out / "noisy_digit.png")
    print(f"table: {out / 'noise_study.csv'}")
    return 0


def _plot_noisy_digit(test: Dataset, variances, noise_seed: int, path) -> None:
    hits = np.flatnonzero(test.labels == 7)
    if hits.size == 0:
        return
    idx = int(hits[0])
    images = [test.images[idx]]
    titles = ["clean"]
    for k, var in enumerate(variances):
        images.append(add_gaussian_noise(test, NoiseSpec(var, noise_seed + k)).images[idx])
        titles.append(f"var {var:g}")
    plotting.plot_digits(images, titles, path)


def encode_bench(bls, a: float, b: float, trials: int, seed: int) -> list[dict]:
    """Empirical vs analytic moments of the AND product of two streams."""
    rows = []
    rng = StreamRng(seed)
    for bl in bls:
        sa = encode_many(np.full(trials, a), bl, rng)
        sb = encode_many(np.full(trials, b), bl, rng)
        c = coincidence_counts(sa, sb) / bl
        ab = a * b
        rows.append({"bl": bl, "analytic_mean": ab, "empirical_mean": float(c.mean()),
                     "analytic_var": ab * (1 - ab) / bl, "empirical_var": float(c.var(ddof=1))})
    return rows


def run_encode_bench(args) -> int:
    rows = encode_bench(_ints(args.bl), args.a, args.b, args.trials, args.seed)
    print("bl,analytic_mean,empirical_mean,analytic_var,empirical_var")
    for r in rows:
        print(f"{r['bl']},{r['analytic_mean']:.6g},{r['empirical_mean']:.6g},"
              f"{r['analytic_var']:.6g},{r['empirical_var']:.6g}")
    return 0


def run_eval(args) -> int:
    model, meta = harness.load_checkpoint(args.checkpoint)
    cfg_data = dict(meta.get("config") or {})
    if args.data_dir is not None:
        cfg_data.setdefault("data", {})["data_dir"] = args.data_dir
    cfg = validate(cfg_data)
    _, test = harness.load_data(cfg)
    if args.noise_variance > 0:
        test = add_gaussian_noise(test, NoiseSpec(args.noise_variance, args.noise_seed))
    bl = args.bl_infer or cfg.bl_infer
    acc = harness.evaluate(model, test, args.mode, bl, args.repetitions, args.seed)
    print(f"accuracy {acc:.2f}% on {len(test)} images ({args.mode}"
          + (f", BL={bl}, {args.repetitions} reps)" if args.mode == "stochastic" else ")"))
    return 0


def run_plot_curves(args) -> int:
    runs = {}
    for d in args.runs:
        d = Path(d)
        label = d.name
        cfg_path = d / "config.json"
        if cfg_path.exists():
            cfg = json.loads(cfg_path.read_text())
            label = cfg["mode"] if cfg["mode"] == "float" else f"{cfg['mode']} BL={cfg['bl_train']}"
        runs[label] = harness.read_metrics_csv(d / "metrics.csv")
    path = plotting.plot_training_curves(runs, args.out)
    print(f"figure: {path}")
    return 0


def run_schema(args) -> int:
    print(json.dumps(config_schema(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memstoch", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def config_args(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="dotted override, e.g. device.sigma_ratio=0.3 (repeatable)")
        sp.add_argument("--output-dir")
        sp.add_argument("--no-plot", action="store_true", help="skip PNG figures")

    sp = sub.add_parser("train", help="train one network")
    config_args(sp)
    sp.set_defaults(func=run_train)

    sp = sub.add_parser("sweep-sigma", help="max accuracy vs programming variability")
    config_args(sp)
    sp.add_argument("--sigmas", default=",".join(map(str, DEFAULT_SIGMAS)))
    sp.set_defaults(func=run_sweep)

    sp = sub.add_parser("noise-study", help="inference on noise-corrupted test data")
    sp.add_argument("--float-ckpt", required=True)
    sp.add_argument("--stochastic-ckpt", required=True)
    sp.add_argument("--variances", default=",".join(map(str, DEFAULT_VARIANCES)))
    sp.add_argument("--bl-infer", default="10,100")
    sp.add_argument("--repetitions", type=int, default=20)
    sp.add_argument("--noise-seed", type=int, default=0)
    sp.add_argument("--data-dir", help=f"MNIST directory (default: ${DATA_DIR_ENV})")
    sp.add_argument("--output-dir", default="runs/noise_study")
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=run_noise_study)

    sp = sub.add_parser("encode-bench", help="stream AND moments vs analytic values")
    sp.add_argument("--bl", default="1,2,10,100")
    sp.add_argument("--a", type=float, default=0.5)
    sp.add_argument("--b", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=run_encode_bench)

    sp = sub.add_parser("eval", help="accuracy of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--mode", choices=("float", "stochastic"), default="float")
    sp.add_argument("--bl-infer", type=int)
    sp.add_argument("--repetitions", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise-variance", type=float, default=0.0)
    sp.add_argument("--noise-seed", type=int, default=0)
    sp.add_argument("--data-dir")
    sp.set_defaults(func=run_eval)

    sp = sub.add_parser("plot-curves", help="overlay training curves of several runs")
    sp.add_argument("runs", nargs="+", help="run directories containing metrics.csv")
    sp.add_argument("--out", default="training_curves.png")
    sp.set_defaults(func=run_plot_curves)

    sp = sub.add_parser("schema", help="print the config JSON schema")
    sp.set_defaults(func=run_schema)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, FileNotFoundError, IdxFormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001
        log.exception("run failed")
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
