"""Command line: ``fmim {train,evaluate,diagnose,synth,sweep,bench}``.

Run options come from an optional ``--config`` file of ``key=value`` lines
(the :class:`~fmim.train.RunConfig` field names) and are overridden by flags
of the same name.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from .benchmark import BENCHMARK_RUN, run_once, summarize
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import TARGET, SynthConfig, generate_synthetic, read_conll_file, write_conll_file
from .errors import ConfigError, FMIMError, ParseError, SchemeError
from .eval import format_diagnostics_table, sentence_diagnostics
from .train import RunConfig, decode, evaluate, read_kv, train, write_kv

log = logging.getLogger("fmim")

SYNTH_FILES = ("source_train.conll", "target_unlabeled.conll", "target_test.conll")


# -- config plumbing -----------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value run configuration file")
    for f in fields(RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    kv = read_kv(args.config) if getattr(args, "config", None) else {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            kv[f.name] = v
    return RunConfig.from_kv(kv)


def _load_corpora(cfg: RunConfig, need_test: bool):
    if not cfg.source_train or not cfg.target_unlabeled:
        raise ConfigError("source_train and target_unlabeled paths are required")
    scheme = cfg.scheme
    source = read_conll_file(cfg.source_train, scheme, labeled=True)
    target = read_conll_file(cfg.target_unlabeled, scheme, labeled=False, domain=TARGET)
    test = None
    if need_test:
        if not cfg.target_test:
            raise ConfigError("target_test path is required")
        test = read_conll_file(cfg.target_test, scheme, labeled=True, domain=TARGET)
    return source, target, test


def _load_for_eval(checkpoint: str, path: str, labeled: bool):
    ckpt = load_checkpoint(checkpoint)
    try:
        corpus = read_conll_file(path, ckpt.scheme, labeled=labeled, domain=TARGET)
    except ParseError as exc:
        raise SchemeError(f"{path} does not match the checkpoint's {ckpt.scheme.name} tags: {exc}") from exc
    return ckpt, corpus


# -- commands ------------------------------------------------------------------


def cmd_train(cfg: RunConfig, quiet: bool = False) -> Path:
    source, target, _ = _load_corpora(cfg, need_test=False)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_kv(out / "config.txt", cfg.to_kv())
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        def on_step(rec):
            fh.write(json.dumps(rec) + "\n")
            if not quiet and rec["step"] % 50 == 0:
                log.info("step %d  ce=%.4f  d1=%.4f  d2=%.4f  %s", rec["step"], rec["ce"],
                         rec["delta1"], rec["delta2"], rec["branch"])

        res = train(cfg, source, target, on_step=on_step, dump_dir=out)
    ckpt_path = out / "checkpoint.npz"
    save_checkpoint(ckpt_path, Checkpoint(res.params, res.vocab, res.scheme, res.optim_state, cfg.to_kv()))
    return ckpt_path


def cmd_evaluate(checkpoint: str, test_path: str, mode: str) -> dict:
    ckpt, corpus = _load_for_eval(checkpoint, test_path, labeled=True)
    return evaluate(ckpt.params, ckpt.vocab, corpus, mode).to_dict()


def cmd_diagnose(checkpoint: str, input_path: str, labeled: bool = False, epsilon: float = 1e-12):
    ckpt, corpus = _load_for_eval(checkpoint, input_path, labeled=labeled)
    rows = []
    for sent, (_, probs) in zip(corpus, decode(ckpt.params, ckpt.vocab, corpus)):
        rows.append((sent.tokens, sentence_diagnostics(probs, ckpt.scheme, epsilon)))
    return rows


def cmd_synth(cfg: SynthConfig, out_dir: str) -> list[Path]:
    corpora = generate_synthetic(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, corpus in zip(SYNTH_FILES, corpora):
        write_conll_file(out / name, corpus)
        paths.append(out / name)
    write_kv(out / "synth_config.txt", cfg.to_kv())
    return paths


def cmd_sweep(cfg: RunConfig, parameter: str, values: list[float]) -> list[dict]:
    """Train and score once per value; everything but ``parameter`` is held fixed."""
    if parameter not in ("alpha", "rho"):
        raise ConfigError("sweep parameter must be alpha or rho")
    if not values:
        raise ConfigError("sweep needs at least one value")
    source, target, test = _load_corpora(cfg, need_test=True)
    label_mode = "NER" if cfg.task == "NER" else "ABSA"
    rows = []
    for v in values:
        run_cfg = replace(cfg, **{parameter: float(v)})
        res = train(run_cfg, source, target)
        rows.append({
            "value": float(v),
            "absa_f1": evaluate(res.params, res.vocab, test, label_mode).micro_f1,
            "ate_f1": evaluate(res.params, res.vocab, test, "ATE").micro_f1,
        })
    return rows


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a tagger and write checkpoint + metrics")
    _add_run_flags(p)

    p = sub.add_parser("evaluate", help="span-level micro-F1 of a checkpoint on a labelled file")
    p.add_argument("checkpoint")
    p.add_argument("test")
    p.add_argument("--mode", default="ABSA", type=str.upper, choices=["ABSA", "ATE", "NER"])

    p = sub.add_parser("diagnose", help="per-sentence entropy and MI of a checkpoint's predictions")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("--labeled", action="store_true", help="input has a label column")
    p.add_argument("--format", choices=["table", "jsonl"], default="table")

    p = sub.add_parser("synth", help="write the synthetic domain-shift benchmark")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="key=value SynthConfig file")
    for f in fields(SynthConfig):
        if f.name not in ("source_lexicon", "target_lexicon"):
            p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None)

    p = sub.add_parser("sweep", help="grid over alpha or rho; CSV of F1 per value")
    _add_run_flags(p)
    p.add_argument("--parameter", required=True, choices=["alpha", "rho"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--csv", help="write the CSV here as well as to stdout")

    p = sub.add_parser("bench", help="collapse-and-rescue experiment on the synthetic benchmark")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--alpha", type=float, default=BENCHMARK_RUN.alpha)
    p.add_argument("--rho", type=float, default=BENCHMARK_RUN.rho)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except FMIMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "train":
        path = cmd_train(resolve_config(args))
        print(path)
    elif args.command == "evaluate":
        print(json.dumps(cmd_evaluate(args.checkpoint, args.test, args.mode)))
    elif args.command == "diagnose":
        rows = cmd_diagnose(args.checkpoint, args.input, labeled=args.labeled)
        if args.format == "jsonl":
            for tokens, d in rows:
                print(json.dumps({"tokens": tokens, **d.to_dict()}))
        else:
            print(format_diagnostics_table(rows))
    elif args.command == "synth":
        kv = read_kv(args.config) if args.config else {}
        for f in fields(SynthConfig):
            v = getattr(args, f.name, None)
            if v is not None:
                kv[f.name] = v
        for path in cmd_synth(SynthConfig.from_kv(kv), args.out_dir):
            print(path)
    elif args.command == "sweep":
        values = [float(v) for v in args.values.split(",") if v.strip()]
        rows = cmd_sweep(resolve_config(args), args.parameter, values)
        outputs = [sys.stdout]
        fh = open(args.csv, "w", newline="", encoding="utf-8") if args.csv else None
        if fh:
            outputs.append(fh)
        for out in outputs:
            w = csv.DictWriter(out, fieldnames=["value", "absa_f1", "ate_f1"], lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        if fh:
            fh.close()
    elif args.command == "bench":
        results = {}
        for name, alpha, rho in (("baseline", 0.0, args.rho), ("fmim", args.alpha, args.rho)):
            runs = [run_once(int(s), alpha, rho) for s in args.seeds.split(",")]
            for r in runs:
                print(json.dumps({"run": name, **vars(r)}))
            results[name] = summarize(runs)
        print(json.dumps({"summary": results}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
