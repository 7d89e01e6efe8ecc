"""Command-line entry point.

Verbs: generate-sine, train, score, evaluate, coverage.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

import argparse
import logging
import os
import shutil
import sys

import numpy as np

from . import config as cfgmod
from .autodiff import NumericError
from .config import ConfigError
from .data import (DataError, TYPICAL_KINDS, apply_normalize, fit_normalize,
                   generate_sine_dataset, load_series, save_series)
from .evaluation import auroc, best_f1_search, evaluate_scores, sliding_scores
from .model import load_checkpoint, save_checkpoint
from .optim import TrainingError
from .plotting import render_score_svg
from .training import optimizer_from_extra, train

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def prepare_out_dir(out_dir, force):
    if os.path.isdir(out_dir) and os.listdir(out_dir):
        if not force:
            raise ConfigError(
                f"output directory {out_dir} is not empty (use --force)")
        shutil.rmtree(out_dir)
    os.makedirs(out_dir, exist_ok=True)


def echo_config(config_path, out_dir):
    with open(config_path, "rb") as src, \
            open(os.path.join(out_dir, "config.echo"), "wb") as dst:
        dst.write(src.read())


def _load_cfg(args):
    cfg = cfgmod.load_flat_config(args.config)
    if args.seed is not None:
        for key in ("sine.seed", "train.seed"):
            cfg[key] = str(args.seed)
    return cfg


def cmd_generate_sine(args):
    cfg = _load_cfg(args)
    sine = cfgmod.sine_config(cfg)
    prepare_out_dir(args.out, args.force)
    train_series, tests = generate_sine_dataset(sine)
    save_series(train_series, os.path.join(args.out, "train.csv"))
    manifest = ["file,rows,anomalies"]
    manifest.append(f"train.csv,{len(train_series)},0")
    for kind in TYPICAL_KINDS:
        name = f"test_{kind}.csv"
        save_series(tests[kind], os.path.join(args.out, name))
        manifest.append(f"{name},{len(tests[kind])},{int(tests[kind].labels.sum())}")
    with open(os.path.join(args.out, "manifest.csv"), "w") as f:
        f.write("\n".join(manifest) + "\n")
    echo_config(args.config, args.out)
    return 0


def _prepare_training(cfg):
    paths = cfgmod.run_paths(cfg)
    if not paths.train:
        raise ConfigError("data.train is required")
    train_series = load_series(paths.train)
    stats = fit_normalize(train_series)
    normalized = apply_normalize(train_series, stats)
    model_cfg = cfgmod.model_config(cfg, train_series.dim)
    train_cfg = cfgmod.train_config(cfg)
    degr_cfg = cfgmod.degradation_config(cfg)
    if "degradation.min_len" not in cfg:
        degr_cfg.min_len = max(2, model_cfg.patch_size)
    return normalized, stats, model_cfg, train_cfg, degr_cfg


def cmd_train(args):
    cfg = _load_cfg(args)
    normalized, stats, model_cfg, train_cfg, degr_cfg = _prepare_training(cfg)
    prepare_out_dir(args.out, args.force)
    echo_config(args.config, args.out)

    params = None
    optimizer = None
    start_step = 0
    if args.resume:
        params, ckpt_cfg, extra = load_checkpoint(args.resume)
        if ckpt_cfg != model_cfg:
            raise ConfigError("checkpoint model config does not match run config")
        optimizer = optimizer_from_extra(extra, train_cfg.weight_decay)
        start_step = optimizer.step if optimizer else 0

    try:
        params, _ = train(model_cfg, normalized, train_cfg, degr_cfg,
                          params=params, optimizer=optimizer,
                          start_step=start_step, checkpoint_dir=args.out,
                          log_path=os.path.join(args.out, "train_log.csv"))
    except TrainingError:
        logger.exception("training aborted; periodic checkpoints retained")
        raise
    save_checkpoint(os.path.join(args.out, "final.npz"), params, model_cfg,
                    extra={"norm/mean": stats.mean, "norm/std": stats.std})
    return 0


def cmd_score(args):
    params, model_cfg, extra = load_checkpoint(args.checkpoint)
    test = load_series(args.data)
    if test.dim != model_cfg.data_dim:
        raise DataError(
            f"test dimension {test.dim} != model dimension {model_cfg.data_dim}")
    if "norm/mean" in extra:
        from .data import NormStats
        test = apply_normalize(test, NormStats(extra["norm/mean"],
                                               extra["norm/std"]))
    prepare_out_dir(args.out, args.force)
    result = sliding_scores(params, model_cfg, test, stride=args.stride)
    with open(os.path.join(args.out, "scores.csv"), "w") as f:
        f.write("score\n")
        f.writelines(f"{float(v)!r}\n" for v in result.scores)
    svg = render_score_svg(result.scores, labels=test.labels)
    with open(os.path.join(args.out, "scores.svg"), "w") as f:
        f.write(svg)
    return 0


def _read_column(path, skip_header):
    try:
        return np.loadtxt(path, skiprows=1 if skip_header else 0)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read {path}: {e}") from None


def cmd_evaluate(args):
    scores = _read_column(args.scores, skip_header=True)
    labels = _read_column(args.labels, skip_header=False).astype(int)
    if scores.shape != labels.shape:
        raise DataError(
            f"scores length {scores.shape} != labels length {labels.shape}")
    report = evaluate_scores(scores, labels)
    lines = ["tp,fp,fn,f1,threshold_f1,f1_pa,threshold_pa,auroc",
             f"{report.tp},{report.fp},{report.fn},{float(report.f1)!r},"
             f"{float(report.threshold_f1)!r},{float(report.f1_pa)!r},"
             f"{float(report.threshold_pa)!r},{float(report.auroc)!r}"]
    text = "\n".join(lines) + "\n"
    if args.out:
        prepare_out_dir(args.out, args.force)
        with open(os.path.join(args.out, "metrics.csv"), "w") as f:
            f.write(text)
    sys.stdout.write(text)
    return 0


SYNTHETIC_KINDS = ("soft", "uniform", "peak", "length")


def cmd_coverage(args):
    cfg = _load_cfg(args)
    sine = cfgmod.sine_config(cfg)
    prepare_out_dir(args.out, args.force)
    echo_config(args.config, args.out)

    train_series, tests = generate_sine_dataset(sine)
    stats = fit_normalize(train_series)
    normalized = apply_normalize(train_series, stats)
    norm_tests = {k: apply_normalize(v, stats) for k, v in tests.items()}
    model_cfg = cfgmod.model_config(cfg, train_series.dim)
    train_cfg = cfgmod.train_config(cfg)
    base_degr = cfgmod.degradation_config(cfg)
    total = 1.0 - base_degr.p_none
    stride = int(cfg.get("eval.stride", 16))

    rows = ["synthetic,typical,f1,auroc,covered"]
    for i, kind in enumerate(SYNTHETIC_KINDS):
        degr_cfg = base_degr.only(kind, total=total)
        run_cfg = cfgmod.train_config(cfg)
        run_cfg.seed = train_cfg.seed + i
        logger.info("coverage: training %s-only model", kind)
        params, _ = train(model_cfg, normalized, run_cfg, degr_cfg)
        for typical in TYPICAL_KINDS:
            series = norm_tests[typical]
            result = sliding_scores(params, model_cfg, series, stride=stride)
            _, best = best_f1_search(result.scores, series.labels)
            roc = auroc(result.scores, series.labels)
            covered = int(best > 0.9 and roc > 0.9)
            rows.append(f"{kind},{typical},{float(best)!r},{float(roc)!r},"
                        f"{covered}")
    with open(os.path.join(args.out, "coverage.csv"), "w") as f:
        f.write("\n".join(rows) + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tsdetect",
        description="Self-supervised transformer anomaly detection for "
                    "multivariate time series")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--force", action="store_true")

    p = sub.add_parser("generate-sine", help="write the sine benchmark dataset")
    common(p)
    p.set_defaults(func=cmd_generate_sine)

    p = sub.add_parser("train", help="train a model from a run config")
    common(p)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="sliding-window score a test series")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--stride", type=int, default=16)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="compute metrics from scores + labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("coverage", help="run the synthetic-vs-typical coverage matrix")
    common(p)
    p.set_defaults(func=cmd_coverage)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("config error: %s", e)
        return EXIT_CONFIG
    except DataError as e:
        logger.error("data error: %s", e)
        return EXIT_DATA
    except (TrainingError, NumericError) as e:
        logger.error("numeric failure: %s", e)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
