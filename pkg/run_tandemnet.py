"""
tandemnet — Command-Line Runner
Train, evaluate, analyze and meter tandem-learned spiking networks.

    tandemnet train   <config>
    tandemnet eval    <ckpt> --data DIR [--decode membrane|count] [--T-override N ...]
    tandemnet analyze <ckpt> --data DIR [--batch 256]
    tandemnet synops  <ckpt> --data DIR [--batch 256] [--T-override N ...]

Exit codes: 0 ok, 2 usage/config/data/checkpoint errors, 3 numeric failure.
"""

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np
import pandas as pd

import config
from analytics.fidelity import angle_histogram, fidelity_analysis, layer_mismatch_per_sample, \
    mismatch_growth_fraction, pcc_histogram
from analytics.scoring import per_class_accuracy
from analytics.synops import linear_fit_r2, synops_report
from data_ingestion.batching import encode_batch, load_dataset
from data_ingestion.checkpoint import load_checkpoint, save_checkpoint
from data_ingestion.run_config import config_hash, parse_config_text
from tandem.codec import DecodeMode
from tandem.errors import ConfigError, NumericError, TandemError
from tandem.network import build_network, forward_tandem
from tandem.trainer import evaluate, fit, infer_task
from utils.export import MetricWriter, write_csv
from utils.logging_config import get_logger, set_console_level
from utils.manifest import record_finish, record_start

log = get_logger("cli")


def banner(msg: str):
    log.info("=" * 60)
    log.info("  %s", msg)
    log.info("=" * 60)


def resolve_threads(flag: int | None, fallback: int | None = None) -> int:
    """TANDEMNET_THREADS beats --threads, which beats the config file."""
    env = os.getenv("TANDEMNET_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"TANDEMNET_THREADS={env!r} is not an integer") from None
    else:
        value = flag or fallback or 1
    if value < 1:
        raise ConfigError(f"thread count must be positive, got {value}")
    return value


def _windows(overrides: list[str] | None, default: int) -> list[int]:
    if not overrides:
        return [default]
    values = []
    for item in overrides:
        for tok in str(item).split(","):
            tok = tok.strip()
            if not tok:
                continue
            try:
                T = int(tok)
            except ValueError:
                raise ConfigError(f"--T-override value {tok!r} is not an integer") from None
            if not 1 <= T <= config.MAX_T:
                raise ConfigError(f"--T-override value {T} outside [1, {config.MAX_T}]")
            values.append(T)
    if not values:
        raise ConfigError("--T-override given without values")
    return values


def _sample_indices(n: int, batch: int, seed: int) -> np.ndarray:
    if batch < 1:
        raise ConfigError(f"--batch must be positive, got {batch}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=min(batch, n), replace=False))


def _out_dir(args, ckpt: Path) -> Path:
    out = Path(args.out) if args.out else ckpt.parent / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    return out


# ═════════════════════════════════════════════════════════════════════
#  Commands
# ═════════════════════════════════════════════════════════════════════

def cmd_train(args) -> int:
    banner("Train")
    raw = Path(args.config).read_bytes()
    try:
        cfg = parse_config_text(raw.decode("utf-8"))
    except UnicodeDecodeError:
        raise ConfigError(f"{args.config}: not valid UTF-8") from None
    threads = resolve_threads(args.threads, cfg.threads)

    train_set = load_dataset(cfg.dataset, cfg.dataset_dir, "train", cfg.T, cfg.task, cfg.train_limit)
    test_set = load_dataset(cfg.dataset, cfg.dataset_dir, "test", cfg.T, cfg.task, cfg.test_limit)
    network = build_network(cfg.arch, train_set.sample_shape, cfg.neuron_params(), cfg.T, cfg.decode_mode,
                            bn=cfg.bn, synaptic_delay=cfg.synaptic_delay, threads=threads, seed=cfg.seed)
    if cfg.task == "reconstruct" and network.output_size != int(np.prod(train_set.sample_shape)):
        raise ConfigError(f"reconstruction needs {int(np.prod(train_set.sample_shape))} outputs, "
                          f"arch gives {network.output_size}")
    if cfg.task == "classify" and network.output_size < max(train_set.n_classes, test_set.n_classes):
        raise ConfigError(f"arch has {network.output_size} outputs for {train_set.n_classes} classes")

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {"metrics": out / "metrics.csv", "checkpoint": out / "model.tdnn"}
    manifest = record_start(out, cfg.to_dict(), cfg.seed, config_hash(raw), outputs)

    start = time.time()
    try:
        result = fit(network, train_set, test_set, cfg, MetricWriter(outputs["metrics"]))
        save_checkpoint(result.network, outputs["checkpoint"])
    except Exception:
        record_finish(out, manifest, status="failed", duration=time.time() - start)
        raise
    record_finish(out, manifest, status="success", duration=time.time() - start, final_metrics=result.final)
    for name, value in result.final.items():
        print(f"test {name}: {value:.6f}")
    return config.EXIT_OK


def cmd_eval(args) -> int:
    banner("Evaluate")
    ckpt = Path(args.checkpoint)
    network = load_checkpoint(ckpt)
    network = replace(network, threads=resolve_threads(args.threads))
    if args.decode:
        network = replace(network, decode_mode=DecodeMode.parse(args.decode))
    task = infer_task(network) if args.task == "auto" else args.task

    rows, breakdown, cached = [], None, None
    for T in _windows(args.T_override, network.T):
        if args.dataset == "events" or cached is None:
            cached = load_dataset(args.dataset, args.data, "test", T, task, args.limit)
        result = evaluate(network.with_window(T), cached, task)
        rows.append({"T": T, "decode": network.decode_mode.value, **result.metrics})
        if result.preds is not None and breakdown is None:
            breakdown = per_class_accuracy(result.preds, result.labels)

    report = pd.DataFrame(rows)
    print(report.to_string(index=False))
    if breakdown is not None:
        print(breakdown.to_string(index=False))
    if args.out:
        out = Path(args.out)
        write_csv(report, out)
        if breakdown is not None:
            write_csv(breakdown, out.with_name(out.stem + "_per_class.csv"))
    return config.EXIT_OK


def cmd_analyze(args) -> int:
    banner("Analyze")
    ckpt = Path(args.checkpoint)
    network = replace(load_checkpoint(ckpt), threads=resolve_threads(args.threads))
    dataset = load_dataset(args.dataset, args.data, "test", network.T, infer_task(network))
    idx = _sample_indices(len(dataset), args.batch, args.seed)
    batch = encode_batch(dataset, idx, network.T)

    out = _out_dir(args, ckpt)
    fid = fidelity_analysis(network, batch)
    summary = fid.summary()
    write_csv(angle_histogram(fid.frame), out / "angle_histogram.csv")
    write_csv(pcc_histogram(fid.frame), out / "pcc_histogram.csv")
    write_csv(summary, out / "fidelity_summary.csv")

    per_sample = layer_mismatch_per_sample(network, batch)
    mismatch = pd.DataFrame({"layer": np.arange(1, per_sample.shape[1] + 1),
                             "mean_abs_diff": per_sample.mean(axis=0)})
    write_csv(mismatch, out / "mismatch.csv")

    print(summary.to_string(index=False))
    print(mismatch.to_string(index=False))
    if per_sample.shape[1]:
        print(f"mismatch non-decreasing with depth on {mismatch_growth_fraction(per_sample):.1%} of samples")
    print(f"skipped: {fid.skipped_angle} zero-vector angles, {fid.skipped_pcc} constant-vector correlations")
    return config.EXIT_OK


def cmd_synops(args) -> int:
    banner("SynOps")
    ckpt = Path(args.checkpoint)
    network = replace(load_checkpoint(ckpt), threads=resolve_threads(args.threads))
    task = infer_task(network)

    frames, windows, ratios, cached = [], _windows(args.T_override, network.T), [], None
    for T in windows:
        if args.dataset == "events" or cached is None:
            cached = load_dataset(args.dataset, args.data, "test", T, task)
        net_T = network.with_window(T)
        idx = _sample_indices(len(cached), args.batch, args.seed)
        trace = forward_tandem(net_T, encode_batch(cached, idx, T), keep_spikes=False)
        report = synops_report(trace, net_T)
        frames.append(report.to_frame())
        ratios.append(report.ratio)
        print(f"T={T}  snn_total={report.snn_total:.1f}  ann_total={report.ann_total}  ratio={report.ratio:.6f}")
        for i, rate in enumerate(report.per_layer_rate, start=1):
            print(f"    layer {i}: {rate:.6f} spikes/neuron/step")

    table = pd.concat(frames, ignore_index=True)
    if len(windows) >= 2:
        r2 = linear_fit_r2(windows, ratios)
        print(f"linear fit of ratio vs T: R^2 = {r2:.4f}")
        table = pd.concat([table, pd.DataFrame([{"T": 0, "layer": "all", "metric": "ratio_linear_r2",
                                                 "value": r2}])], ignore_index=True)
    write_csv(table, _out_dir(args, ckpt) / "synops.csv")
    return config.EXIT_OK


# ═════════════════════════════════════════════════════════════════════
#  Entry point
# ═════════════════════════════════════════════════════════════════════

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tandemnet", description="Tandem learning for spiking neural networks")
    parser.add_argument("--threads", type=int, default=None,
                        help="Worker threads for SNN simulation (TANDEMNET_THREADS overrides)")
    parser.add_argument("--quiet", action="store_true", help="Only warnings and errors on the console")

    # same flags after the subcommand; SUPPRESS keeps a value given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="Train from a key=value config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    def checkpoint_command(name, func, help_text, batch_default=None):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("checkpoint")
        p.add_argument("--data", required=True, metavar="DIR", help="Dataset directory")
        p.add_argument("--dataset", choices=["mnist", "events"], default="mnist")
        p.add_argument("--out", default=None)
        if batch_default is not None:
            p.add_argument("--batch", type=int, default=batch_default)
            p.add_argument("--seed", type=int, default=config.RANDOM_SEED)
        p.set_defaults(func=func)
        return p

    p = checkpoint_command("eval", cmd_eval, "Score a checkpoint with SNN-only inference")
    p.add_argument("--decode", choices=["membrane", "count", "spike_count"], default=None)
    p.add_argument("--T-override", dest="T_override", action="append", metavar="N")
    p.add_argument("--task", choices=["auto", "classify", "reconstruct"], default="auto")
    p.add_argument("--limit", type=int, default=None, metavar="N", help="Score only the first N test samples")

    checkpoint_command("analyze", cmd_analyze, "Angle / correlation / mismatch analysis", config.ANALYSIS_BATCH)

    p = checkpoint_command("synops", cmd_synops, "Synaptic-operation metering", config.ANALYSIS_BATCH)
    p.add_argument("--T-override", dest="T_override", action="append", metavar="N")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.quiet:
        set_console_level(logging.WARNING)
    try:
        return args.func(args)
    except NumericError as exc:
        log.error("Numeric failure: %s", exc)
        return config.EXIT_NUMERIC
    except (TandemError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return config.EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
