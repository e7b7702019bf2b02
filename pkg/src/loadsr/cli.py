"""Command-line front end: ``loadsr <subcommand> [options]``.

Every RunConfig key is also a flag (``--epochs-gan 5``); a ``--config``
file in flat ``key=value`` format supplies defaults that flags override.
Exit status is 0 only when the whole subcommand succeeded.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .csvio import load_csv, save_csv, save_weather_csv
from .data import downsample, synthesize_corpus
from .metrics import MetricReport
from .networks import CheckpointError, load_checkpoint, save_checkpoint
from .training import (RunConfig, TrainingAborted, ablate_weather, evaluate, load_dataset,
                       merged_sweep_rows, method_outputs, sweep_alpha, train_cnn, train_stage1,
                       train_stage2)

log = logging.getLogger("loadsr")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    for f in dataclasses.fields(RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar=f.type.upper())


def _config(args) -> RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)
                 if getattr(args, f.name, None) is not None}
    saved = Path(args.output_dir or "run") / "config.txt"
    if args.config:
        return RunConfig.load(args.config, **overrides)
    if args.command in ("polish", "eval") and saved.exists():
        return RunConfig.load(saved, **overrides)
    base = {k: str(v) for k, v in dataclasses.asdict(RunConfig.desk()).items()}
    return RunConfig.from_strings({**base, **overrides})


def _out(cfg: RunConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_synth(args) -> None:
    profiles, weather = synthesize_corpus(args.n_days, args.seed, args.households)
    save_csv(profiles, args.out)
    if args.weather_out:
        save_weather_csv({p.day_id: w for p, w in zip(profiles, weather)}, args.weather_out)
    print(f"wrote {len(profiles)} profiles to {args.out}")


def cmd_downsample(args) -> None:
    rng = np.random.default_rng(args.seed)
    profiles = [downsample(p, args.alpha, args.noise_var, rng) for p in load_csv(args.input)]
    save_csv(profiles, args.out)
    print(f"wrote {len(profiles)} profiles at {profiles[0].period}-min to {args.out}")


def cmd_train(args) -> None:
    cfg = _config(args)
    out = _out(cfg)
    cfg.save(out / "config.txt")
    data = load_dataset(cfg)
    (out / "normalizer.json").write_text(json.dumps(data.normalizer.to_dict(), indent=1))
    res = train_stage1(cfg, data, checkpoint_dir=out)
    save_checkpoint(res.generator, out / "generator.ckpt", cfg.alpha, cfg.epochs_gan)
    save_checkpoint(res.discriminator, out / "discriminator.ckpt", cfg.alpha, cfg.epochs_gan)
    res.log.to_csv(out / "stage1_log.csv")
    if args.with_cnn:
        cnn = train_cnn(cfg, data, checkpoint_dir=out)
        save_checkpoint(cnn.generator, out / "cnn.ckpt", cfg.alpha, cfg.epochs_gan)
        cnn.log.to_csv(out / "cnn_log.csv")
    print(f"stage 1 done: {out}")


def cmd_polish(args) -> None:
    cfg = _config(args)
    out = _out(cfg)
    gen, _ = load_checkpoint(out / "generator.ckpt", cfg.generator_config())
    res = train_stage2(cfg, gen, load_dataset(cfg), checkpoint_dir=out)
    save_checkpoint(res.polisher, out / "polisher.ckpt", cfg.alpha, cfg.epochs_polish)
    res.log.to_csv(out / "stage2_log.csv")
    print(f"stage 2 done: {out}")


def cmd_eval(args) -> None:
    cfg = _config(args)
    out = _out(cfg)
    gen, _ = load_checkpoint(out / "generator.ckpt", cfg.generator_config())
    pol = None
    if (out / "polisher.ckpt").exists():
        pol, _ = load_checkpoint(out / "polisher.ckpt", cfg.polisher_config())
    cnn = None
    if (out / "cnn.ckpt").exists():
        cnn, _ = load_checkpoint(out / "cnn.ckpt", cfg.generator_config())
    data = load_dataset(cfg)
    outputs = method_outputs(cfg, data, gen, pol, cnn, args.split)
    idx = getattr(data.split, args.split)
    report = evaluate(outputs, data.hr[idx], [data.ids[i] for i in idx], cfg.spectral_k)
    _write_report(report, out, "report")
    np.savez(out / "outputs.npz", truth=data.hr[idx], **outputs)
    print(report.table())


def _write_report(report: MetricReport, out: Path, stem: str) -> None:
    report.to_json(out / f"{stem}.json")
    report.to_csv(out / f"{stem}.csv")
    report.to_long_csv(out / f"{stem}_long.csv")


def cmd_sweep_alpha(args) -> None:
    cfg = _config(args)
    out = _out(cfg)
    alphas = [int(a) for a in args.alphas.split(",")]
    reports = sweep_alpha(cfg, alphas)
    for a, rep in reports.items():
        _write_report(rep, out, f"report_alpha{a}")
    with open(out / "sweep.csv", "w") as f:
        f.write("alpha,method,metric,mean,gain_vs_lerp\n")
        for row in merged_sweep_rows(reports):
            f.write(",".join(map(str, row)) + "\n")
    for a, rep in reports.items():
        print(f"alpha={a}\n{rep.table()}\n")


def cmd_ablate_weather(args) -> None:
    cfg = _config(args)
    out = _out(cfg)
    report = ablate_weather(cfg)
    _write_report(report, out, "ablation")
    print(report.table())


def cmd_export_report(args) -> None:
    with open(args.report) as f:
        report = MetricReport.from_dict(json.load(f))
    if args.csv:
        report.to_csv(args.csv)
    if args.long_csv:
        report.to_long_csv(args.long_csv)
    print(report.table())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadsr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic profile corpus as CSV")
    p.add_argument("--n-days", type=int, default=2000)
    p.add_argument("--households", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--weather-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("downsample", help="block-average a profile CSV with optional noise")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha", type=int, default=6)
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_downsample)

    for name, func, text in (("train", cmd_train, "train the generator and discriminator"),
                             ("polish", cmd_polish, "train the polisher on a trained generator"),
                             ("eval", cmd_eval, "score all methods on a split"),
                             ("sweep-alpha", cmd_sweep_alpha, "repeat the pipeline per scale factor"),
                             ("ablate-weather", cmd_ablate_weather, "compare with and without weather")):
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
        p.set_defaults(func=func)
    sub.choices["train"].add_argument("--with-cnn", action="store_true",
                                      help="also train the MSE-only CNN baseline")
    sub.choices["eval"].add_argument("--split", default="test", choices=("train", "val", "test"))
    sub.choices["sweep-alpha"].add_argument("--alphas", default="3,6,12")

    p = sub.add_parser("export-report", help="re-export a saved report")
    p.add_argument("--report", required=True)
    p.add_argument("--csv")
    p.add_argument("--long-csv")
    p.set_defaults(func=cmd_export_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (TrainingAborted, CheckpointError, ValueError, OSError) as e:
        print(f"loadsr {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
