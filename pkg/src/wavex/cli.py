"""Command-line surface.

Subcommands: gen-data, split, train-operator, train-enhancer, run, sweep,
similarity, report, heatmap.  Common flags: --config <file>, --seed <u64>,
--out <dir>.  Config files are `key = value` lines; see the README for the
schema.  The worker pool is bounded by the WAVEX_THREADS environment
variable.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import enhancer as enh
from . import helmholtz, images, operator, pipeline, simplewave
from .dataio import read_dataset, write_dataset


def _config_from_file(path, overrides: dict) -> pipeline.ExperimentConfig:
    kv = pipeline.parse_kv(Path(path).read_text()) if path else {}
    kv.update({k: v for k, v in overrides.items() if v is not None})

    def take(name, cast, default):
        return cast(kv.pop(name)) if name in kv else default

    def ratio(text):
        if "/" in str(text):
            a, b = str(text).split("/")
            return float(a) / (float(a) + float(b))
        return float(text)

    op_kw = {}
    for f_ in dataclasses.fields(operator.OperatorConfig):
        key = f"operator.{f_.name}"
        if key in kv:
            op_kw[f_.name] = type(getattr(operator.OperatorConfig(), f_.name))(kv.pop(key))
    en_kw = {}
    base_en = enh.EnhancerConfig()
    for f_ in dataclasses.fields(enh.EnhancerConfig):
        key = f"enhancer.{f_.name}"
        if key in kv:
            current = getattr(base_en, f_.name)
            if isinstance(current, tuple):
                en_kw[f_.name] = tuple(int(v) for v in str(kv.pop(key)).split(","))
            else:
                en_kw[f_.name] = type(current)(kv.pop(key))

    cfg = pipeline.ExperimentConfig(
        benchmark=take("benchmark", str, "simplewave"),
        method=take("method", str, "apex"),
        n_per_freq=take("n_per_freq", int, 40),
        grid=take("grid", int, 64),
        gen_seed=take("gen_seed", int, 0),
        split_seed=take("split_seed", int, 1),
        eval_seed=take("eval_seed", int, 0),
        hf_train_fraction=take("hf_ratio", ratio, 0.2),
        lf_train_fraction=take("lf_ratio", ratio, 0.8),
        sample_steps=take("sample_steps", int, 50),
        operator=operator.OperatorConfig(**op_kw),
        enhancer=enh.EnhancerConfig(**en_kw),
    )
    if kv:
        raise SystemExit(f"unknown config keys: {sorted(kv)}")
    return cfg


def cmd_gen_data(args):
    if args.benchmark == "simplewave":
        cfg = simplewave.SimpleWaveConfig(grid=args.grid)
        ds = simplewave.generate_dataset(cfg, seed=args.seed,
                                         n_per_freq=args.n_per_freq)
    elif args.benchmark == "helmholtz":
        ds = helmholtz.generate_dataset(seed=args.seed, n_per_k=args.n_per_freq,
                                        grid=args.grid)
    else:
        raise SystemExit(f"unknown benchmark {args.benchmark!r}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(out, ds)
    print(f"wrote {len(ds)} samples to {out}")


def cmd_split(args):
    cfg = _config_from_file(args.config, {"benchmark": args.benchmark})
    ds = read_dataset(args.data)
    split = pipeline.split_for(cfg, ds)
    lines = [f"seed = {split.seed}",
             f"lf_ratio = {split.ratios[0]!r}",
             f"hf_ratio = {split.ratios[1]!r}"]
    for name in ("lf_train", "lf_test", "hf_train", "hf_test"):
        idx = getattr(split, name)
        lines.append(f"{name} = {','.join(str(i) for i in idx)}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    print(f"{split.describe()} -> {out}")


def cmd_train_operator(args):
    cfg = _config_from_file(args.config, {"benchmark": args.benchmark})
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, operator=dataclasses.replace(
            cfg.operator, seed=args.seed))
    ds = read_dataset(args.data)
    split = pipeline.split_for(cfg, ds)
    model = operator.build_operator(ds.inputs.shape[1], cfg.operator)
    trace = operator.train_lf(model, ds.subset(split.lf_train), cfg.operator)
    out = Path(args.out)
    pipeline.save_operator(out, model)
    (out / "train_trace.txt").write_text(
        "\n".join(f"{i} {v!r}" for i, v in enumerate(trace)) + "\n")
    print(f"trained {cfg.operator.epochs} epochs, "
          f"loss {trace[0]:.4f} -> {trace[-1]:.4f}; saved to {out}")


def cmd_train_enhancer(args):
    cfg = _config_from_file(args.config, {"benchmark": args.benchmark,
                                          "method": args.method})
    ds = read_dataset(args.data)
    report = pipeline.run_experiment(cfg, args.out, dataset=ds)
    print(pipeline.report_table(report))
    print(f"artifacts under {Path(args.out) / 'runs' / cfg.hash()}")


def cmd_run(args):
    cfg = _config_from_file(args.config, {"method": args.method,
                                          "eval_seed": args.seed})
    report = pipeline.run_experiment(cfg, args.out)
    print(pipeline.report_table(report))


def cmd_sweep(args):
    cfg = _config_from_file(args.config, {})
    reports = pipeline.ratio_sweep(cfg, args.out)
    for (method, ratio), rep in sorted(reports.items()):
        g = rep.overall()
        print(f"{pipeline.RATIO_LABELS.get(ratio, ratio)} {method:10s} "
              f"H1 {g.h1_mean:.4f}  AWPC {g.awpc_mean:.4f}")


def cmd_similarity(args):
    ds = read_dataset(args.data)
    m = pipeline.similarity_matrices(ds, max_envs=args.max_envs)
    paths = pipeline.export_similarity(m, args.out)
    print(pipeline.similarity_table(m))
    print("wrote", ", ".join(paths))


def cmd_report(args):
    path = Path(args.run) / "report.txt"
    if not path.exists():
        raise SystemExit(f"no report at {path}")
    print(path.read_text())


def cmd_heatmap(args):
    ds = read_dataset(args.data)
    if not 0 <= args.index < len(ds):
        raise SystemExit(f"index {args.index} out of range (dataset has {len(ds)})")
    paths = images.export_heatmaps(ds.field(args.index), args.out)
    print("wrote", ", ".join(paths))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavex",
        description="Cross-frequency wave-field benchmarks and enhancement")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None)
        return p

    p = common(sub.add_parser("gen-data", help="generate a benchmark dataset"))
    p.add_argument("--benchmark", default="simplewave")
    p.add_argument("--n-per-freq", type=int, default=40)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--out", required=True, help="output .wfd file")
    p.set_defaults(seed=0, fn=cmd_gen_data)

    p = common(sub.add_parser("split", help="write LF/HF train/test indices"))
    p.add_argument("--data", required=True)
    p.add_argument("--benchmark", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    p = common(sub.add_parser("train-operator", help="train and freeze the LF operator"))
    p.add_argument("--data", required=True)
    p.add_argument("--benchmark", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_operator)

    p = common(sub.add_parser("train-enhancer",
                              help="train the enhancer (full method run)"))
    p.add_argument("--data", required=True)
    p.add_argument("--benchmark", default=None)
    p.add_argument("--method", default="apex")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_enhancer)

    p = common(sub.add_parser("run", help="run one experiment end to end"))
    p.add_argument("--method", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_run)

    p = common(sub.add_parser("sweep", help="HF supervision-ratio sweep"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = common(sub.add_parser("similarity", help="cross-frequency similarity matrices"),
               config=False)
    p.add_argument("--data", required=True)
    p.add_argument("--max-envs", type=int, default=32)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(fn=cmd_similarity)

    p = common(sub.add_parser("report", help="print a stored run report"),
               config=False)
    p.add_argument("--run", required=True, help="run directory")
    p.set_defaults(fn=cmd_report)

    p = common(sub.add_parser("heatmap", help="export amplitude/phase PGM images"),
               config=False)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(fn=cmd_heatmap)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
