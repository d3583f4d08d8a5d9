"""Command-line entry point.

One executable fronts the whole workflow: corpus building, training,
compiling, finetuning, the two experiment harnesses, quantization, the
precision study, and report rendering.  Options resolve as built-in
defaults < config file (flat key=value) < command-line flags.  Every run
writes a manifest recording the resolved options, the seed, and the SHA-256
of each artifact; delimited outputs embed the manifest id.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line machine-parsable usage errors
        raise CliError("usage", message)


def _load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    cfg = {}
    p = Path(path)
    if not p.exists():
        raise CliError("missing-file", f"config file not found: {path}")
    for raw in p.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError("invalid-input", f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _resolve(ns: argparse.Namespace, config: dict[str, str], spec: dict) -> dict:
    """defaults < config < flags, with casts applied to config strings."""
    out = {}
    for dest, (default, cast) in spec.items():
        flag_value = getattr(ns, dest, None)
        if flag_value is not None:
            out[dest] = flag_value
        elif dest in config:
            out[dest] = cast(config[dest])
        else:
            out[dest] = default
    return out


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_id(command: str, opts: dict) -> str:
    canon = command + "|" + "|".join(f"{k}={opts[k]}" for k in sorted(opts))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_manifest(command: str, opts: dict, artifacts: list[Path],
                   where: Path, extra: list[str] = ()) -> Path:
    mid = manifest_id(command, opts)
    lines = ["nsc-manifest v1", f"id: {mid}", f"command: {command}"]
    for k in sorted(opts):
        lines.append(f"option {k} = {opts[k]}")
    lines.extend(extra)
    for art in artifacts:
        lines.append(f"artifact sha256:{_sha256(art)} {art}")
    lines.append(f"created: {time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())}")
    path = where if where.suffix == ".txt" else Path(str(where) + ".manifest.txt")
    path.write_text("\n".join(lines) + "\n")
    return path


SEED_RULE = ("seed-derivation: Rng(plan_seed).child('trial', program, method, "
             "instance, trial, size) drives every trial; finetune seeds are "
             "derive_int() of its 'ft' child")


def _jobs_default() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# command implementations


def _pipeline_config(opts):
    from .corpus import PipelineConfig

    return PipelineConfig(
        max_tokens=opts["max_tokens"], max_arity=opts["max_arity"],
        out_limit=opts["out_limit"], timeout_secs=opts["timeout_secs"],
        io_rows=opts["io_rows"], seed=opts["seed"],
        cc=os.environ.get("CC"), jobs=opts["jobs"],
    )


def cmd_corpus_build(opts) -> list[Path]:
    from .corpus import build_corpus, write_jsonl

    result = build_corpus(opts["src"], _pipeline_config(opts))
    out = Path(opts["out"])
    write_jsonl(result.records, out)
    artifacts = [out]
    if opts["rejections"]:
        rej = Path(opts["rejections"])
        with open(rej, "w") as fh:
            for r in result.rejections:
                fh.write(json.dumps({"file": r.file, "name": r.name,
                                     "stage": r.stage, "detail": r.detail},
                                    sort_keys=True) + "\n")
        artifacts.append(rej)
    print(f"kept {len(result.records)} programs, "
          f"rejected {len(result.rejections)}: {result.rejection_stages()}")
    return artifacts


def cmd_corpus_synth(opts) -> list[Path]:
    from .corpus import build_corpus_from_sources, synth_corpus, write_jsonl, write_sources

    pairs = synth_corpus(opts["family"], opts["count"], opts["seed"])
    if opts["keep_sources"]:
        write_sources(pairs, opts["keep_sources"])
    result = build_corpus_from_sources(pairs, _pipeline_config(opts))
    out = Path(opts["out"])
    write_jsonl(result.records, out)
    print(f"synthesized {len(pairs)} sources, kept {len(result.records)} records")
    return [out]


def cmd_hypernet_train(opts) -> list[Path]:
    from .corpus import load_records, record_to_task
    from .hypernet import EncoderConfig, HypernetTrainConfig, train
    from .serialization import save_model

    tasks = [record_to_task(r) for r in load_records(opts["data"])]
    cfg = HypernetTrainConfig(
        program_batch=opts["program_batch"], input_batch=opts["input_batch"],
        learning_rate=opts["learning_rate"], epochs=opts["epochs"],
        seed=opts["seed"], vocab_size=opts["vocab_size"],
    )
    encoder = EncoderConfig(layers=opts["layers"], hidden=opts["hidden"],
                            heads=opts["heads"], feed_forward=opts["feed_forward"])
    result = train(tasks, cfg, encoder=encoder)
    out = Path(opts["out"])
    save_model(result.model, out)
    print(f"trained on {len(tasks)} programs for {cfg.epochs} epochs; "
          f"loss {result.epoch_losses[0]:.6g} -> {result.epoch_losses[-1]:.6g}")
    return [out]


def cmd_baseline_train(opts) -> list[Path]:
    from .baselines import MamlConfig, PretrainConfig, maml_train, pretrain
    from .corpus import load_records, record_to_task
    from .serialization import save_params
    from .surrogate import PaddingMode

    tasks = [record_to_task(r) for r in load_records(opts["data"])]
    if opts["method"] == "maml":
        cfg = MamlConfig(meta_batch=opts["meta_batch"], input_batch=opts["input_batch"],
                         epochs=opts["epochs"], inner_lr=opts["inner_lr"],
                         outer_lr=opts["outer_lr"], inner_steps=opts["inner_steps"],
                         seed=opts["seed"])
        result = maml_train(tasks, cfg)
    else:
        cfg = PretrainConfig(program_batch=opts["program_batch"],
                             input_batch=opts["input_batch"],
                             learning_rate=opts["learning_rate"],
                             epochs=opts["epochs"],
                             padding=PaddingMode(opts["padding"]),
                             seed=opts["seed"])
        result = pretrain(tasks, cfg)
    out = Path(opts["out"])
    save_params(result.params, out)
    tail = result.epoch_losses[-1] if result.epoch_losses else float("nan")
    print(f"{opts['method']} trained for {cfg.epochs} epochs; final loss {tail:.6g}")
    return [out]


def cmd_compile(opts) -> list[Path]:
    from .corpus import strip_comments
    from .serialization import load_model, save_params

    model = load_model(opts["model"])
    source = strip_comments(Path(opts["source"]).read_text())
    params = model.compile(source)
    out = Path(opts["out"])
    save_params(params, out)
    print(f"compiled {opts['source']} to a {params.size}-value parameter vector")
    return [out]


def cmd_finetune(opts) -> list[Path]:
    from .baselines import random_init
    from .corpus import load_records, record_to_task
    from .evalkit import subset_split
    from .rng import Rng
    from .serialization import load_params, save_params
    from .surrogate import FinetuneConfig, finetune

    records = {r.id: r for r in load_records(opts["data"])}
    if opts["program"] not in records:
        raise CliError("invalid-input", f"program {opts['program']!r} not in dataset")
    task = record_to_task(records[opts["program"]])
    init = (load_params(opts["init"]) if opts["init"]
            else random_init(seed=opts["random_seed"]))
    splits = subset_split(task, opts["size"], Rng(opts["seed"]).child("cli-subset"), 9)
    cfg = FinetuneConfig(learning_rate=opts["learning_rate"], epochs=opts["epochs"],
                         eval_every=opts["eval_every"], seed=opts["seed"])
    trace = finetune(init, splits, cfg)
    if trace.aborted:
        raise CliError("training-diverged", trace.diagnostic)
    out = Path(opts["out"])
    save_params(trace.final_params, out)
    artifacts = [out]
    if opts["trace"]:
        tpath = Path(opts["trace"])
        with open(tpath, "w") as fh:
            fh.write("epoch,train_loss,val_loss,test_loss\n")
            for e, tr, vl, te in zip(trace.logged_epochs, trace.train_losses,
                                     trace.val_losses, trace.test_losses):
                fh.write(f"{e},{tr!r},{vl!r},{te!r}\n")
        artifacts.append(tpath)
    print(f"reported test loss {trace.reported_test_loss:.6g} "
          f"(best val epoch {trace.best_val_epoch})")
    return artifacts


def _load_plan_methods(opts):
    from .evalkit import CompiledInitializer, FixedInitializer, RandomInitializer
    from .serialization import load_model, load_params

    methods: dict[str, list] = {}
    for name in opts["methods"].split(","):
        name = name.strip()
        if name == "rnd":
            methods[name] = [RandomInitializer()]
        elif name == "cpn":
            paths = _require(opts, "cpn_models", name)
            methods[name] = [CompiledInitializer(load_model(p)) for p in paths]
        elif name == "maml":
            paths = _require(opts, "maml_params", name)
            methods[name] = [FixedInitializer(name, load_params(p)) for p in paths]
        elif name == "pts":
            paths = _require(opts, "pts_params", name)
            methods[name] = [FixedInitializer(name, load_params(p)) for p in paths]
        else:
            raise CliError("invalid-input", f"unknown method {name!r}")
    if "rnd" not in methods:
        raise CliError("invalid-input", "the method list must include rnd")
    return methods


def _require(opts, key: str, method: str) -> list[str]:
    value = opts.get(key)
    if not value:
        raise CliError("invalid-input", f"method {method} requires {key} in the plan")
    return [p.strip() for p in value.split(",") if p.strip()]


def _plan_tasks(opts):
    from .corpus import load_records, record_to_task

    records = load_records(opts["dataset"])
    if opts["programs"]:
        spec = opts["programs"]
        if spec.isdigit():
            records = records[: int(spec)]
        else:
            wanted = {s.strip() for s in spec.split(",")}
            records = [r for r in records if r.id in wanted]
    return [record_to_task(r) for r in records]


def cmd_eval_data_efficiency(opts) -> list[Path]:
    from .evalkit import (PlanConfig, improvement_table, run_data_efficiency,
                          summarize, write_summary_json, write_trials_csv)

    tasks = _plan_tasks(opts)
    methods = _load_plan_methods(opts)
    plan = PlanConfig(
        plan_seed=opts["plan_seed"],
        sizes=tuple(float(s) for s in opts["sizes"].split(",")),
        trials=opts["trials"], epochs=opts["epochs"], eval_every=opts["eval_every"],
    )
    results = run_data_efficiency(tasks, methods, plan, jobs=opts["jobs"])
    out_dir = Path(opts["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    mid = manifest_id("eval-data-efficiency", opts)
    trials = out_dir / "trials.csv"
    summary = out_dir / "summary.json"
    write_trials_csv(results, trials, manifest_id=mid)
    write_summary_json(summarize(improvement_table(results)), summary, manifest_id=mid)
    print(f"{len(results)} trials -> {trials}")
    return [trials, summary]


def cmd_eval_training_time(opts) -> list[Path]:
    from .evalkit import (PlanConfig, improvement_table, run_training_time,
                          summarize, timeout_counts, write_summary_json,
                          write_trials_csv)

    tasks = _plan_tasks(opts)
    methods = _load_plan_methods(opts)
    plan = PlanConfig(plan_seed=opts["plan_seed"], trials=opts["trials"],
                      epochs=opts["epochs"], eval_every=opts["eval_every"],
                      timeout_epochs=opts["timeout_epochs"])
    results, targets = run_training_time(tasks, methods, plan)
    out_dir = Path(opts["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    mid = manifest_id("eval-training-time", opts)
    trials = out_dir / "trials.csv"
    summary_path = out_dir / "summary.json"
    write_trials_csv(results, trials, manifest_id=mid)
    summary = summarize(improvement_table(results, metric="finish"))
    summary["targets"] = targets
    summary["timeouts"] = timeout_counts(results)
    write_summary_json(summary, summary_path, manifest_id=mid)
    print(f"{len(results)} trials -> {trials}")
    return [trials, summary_path]


def cmd_quantize(opts) -> list[Path]:
    from .imaging import image_mse, image_ssim, read_ppm, write_ppm
    from .quantize import ExactDistance, KMeansConfig, SurrogateDistance, quantize_image
    from .serialization import load_params

    img = read_ppm(opts["image"])
    if opts["distance"] == "surrogate":
        if not opts["surrogate"]:
            raise CliError("invalid-input", "surrogate distance requires --surrogate")
        distance = SurrogateDistance(load_params(opts["surrogate"]))
    else:
        distance = ExactDistance()
    cfg = KMeansConfig(k=opts["k"], max_iters=opts["max_iters"],
                       centroid_tolerance=opts["tolerance"], distance=distance,
                       seed=opts["seed"])
    quantized, centroids = quantize_image(img, cfg)
    out = Path(opts["out"])
    write_ppm(quantized, out)
    artifacts = [out]
    print(f"palette of {centroids.shape[0]} colors written to {out}")
    if opts["reference"]:
        ref = read_ppm(opts["reference"])
        mse, ssim = image_mse(ref, quantized), image_ssim(ref, quantized)
        print(f"MSE vs reference: {mse:.4f}   SSIM vs reference: {ssim:.4f}")
        if opts["metrics_out"]:
            mpath = Path(opts["metrics_out"])
            mpath.write_text(json.dumps({"mse": mse, "ssim": ssim,
                                         "manifest": manifest_id("quantize", opts)},
                                        sort_keys=True) + "\n")
            artifacts.append(mpath)
    if opts["figure"]:
        from .report import render_quantize_report

        variants = {"quantized": quantized}
        if opts["reference"]:
            variants = {"reference": read_ppm(opts["reference"]), "quantized": quantized}
        artifacts.append(render_quantize_report(img, variants, opts["figure"]))
    return artifacts


def cmd_downcast_study(opts) -> list[Path]:
    from .benchkit import KERNELS, downcast_study, gen_inputs

    names = list(KERNELS) if opts["kernels"] == "all" else opts["kernels"].split(",")
    out = Path(opts["out"])
    with open(out, "w") as fh:
        fh.write(f"# manifest: {manifest_id('downcast-study', opts)}\n")
        fh.write("kernel,rows,float_vs_double_mse\n")
        for name in names:
            ds = gen_inputs(name.strip(), opts["seed"],
                            train_rows=opts["train_rows"], test_rows=opts["test_rows"],
                            image_size=opts["image_size"])
            mse = downcast_study(name.strip(), ds)
            rows = ds.train_x.shape[0] + ds.test_x.shape[0]
            fh.write(f"{name.strip()},{rows},{mse!r}\n")
            print(f"{name.strip():8s} rows={rows:6d}  float-vs-double MSE = {mse:.3e}")
    return [out]


def cmd_report(opts) -> list[Path]:
    from .evalkit import load_trials_csv
    from .report import render_data_efficiency_report, render_training_time_report

    results = load_trials_csv(opts["trials"])
    out_dir = Path(opts["out_dir"])
    if opts["kind"] == "training-time":
        paths = render_training_time_report(results, out_dir)
    else:
        paths = render_data_efficiency_report(results, out_dir)
    for p in paths:
        print(f"wrote {p}")
    return paths


# ---------------------------------------------------------------------------
# argument wiring


def _add(parser, flag, dest, cast, help_text):
    parser.add_argument(flag, dest=dest, type=cast, default=None, help=help_text)


PIPELINE_SPEC = {
    "max_tokens": (512, int), "max_arity": (9, int), "out_limit": (10.0, float),
    "timeout_secs": (8.0, float), "io_rows": (2048, int), "seed": (0, int),
}


def _add_pipeline_flags(p, jobs_default):
    _add(p, "--max-tokens", "max_tokens", int, "token cap per function (default: 512)")
    _add(p, "--max-arity", "max_arity", int, "input cap per function (default: 9)")
    _add(p, "--out-limit", "out_limit", float, "|output| rejection bound (default: 10.0)")
    _add(p, "--timeout-secs", "timeout_secs", float, "compile/run budget (default: 8)")
    _add(p, "--io-rows", "io_rows", int, "input bank rows (default: 2048)")
    _add(p, "--seed", "seed", int, "build seed (default: 0)")
    _add(p, "--jobs", "jobs", int, f"parallel workers (default: {jobs_default})")


def build_parser() -> _Parser:
    root = _Parser(prog="nsc", description=__doc__)
    root.add_argument("--config", default=None, help="flat key=value config file")
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus-build", parents=[], help="mine a C source tree into a JSONL dataset")
    p.add_argument("--src", required=True, help="directory tree of .c files")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    _add(p, "--rejections", "rejections", str, "optional rejection-log JSONL")
    _add_pipeline_flags(p, _jobs_default())

    p = sub.add_parser("corpus-synth", help="generate a synthetic corpus and run the pipeline")
    _add(p, "--family", "family", str, "affine | quadratic | trig-mix (default: affine)")
    _add(p, "--count", "count", int, "number of programs (default: 50)")
    _add(p, "--seed", "seed", int, "generation/build seed (default: 7)")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    _add(p, "--keep-sources", "keep_sources", str, "also dump the .c files here")
    _add(p, "--io-rows", "io_rows", int, "input bank rows (default: 2048)")
    _add(p, "--jobs", "jobs", int, f"parallel workers (default: {_jobs_default()})")

    p = sub.add_parser("hypernet-train", help="train the program-text-to-weights compiler")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model checkpoint path")
    _add(p, "--epochs", "epochs", int, "training epochs (default: 1500)")
    _add(p, "--program-batch", "program_batch", int, "programs per step (default: 32)")
    _add(p, "--input-batch", "input_batch", int, "I/O rows per program (default: 1024)")
    _add(p, "--learning-rate", "learning_rate", float, "Adam rate (default: 5e-5)")
    _add(p, "--seed", "seed", int, "training seed (default: 0)")
    _add(p, "--vocab-size", "vocab_size", int, "vocabulary cap (default: 30522)")
    _add(p, "--layers", "layers", int, "encoder layers (default: 2)")
    _add(p, "--hidden", "hidden", int, "encoder width (default: 128)")
    _add(p, "--heads", "heads", int, "attention heads (default: 2)")
    _add(p, "--feed-forward", "feed_forward", int, "FF width (default: 512)")

    p = sub.add_parser("baseline-train", help="train the MAML or pretrained baseline")
    p.add_argument("method", choices=("maml", "pretrain"))
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="parameter vector path")
    _add(p, "--epochs", "epochs", int,
         "epochs (default: maml 5000 desk-scale; 70000 is the full setting; pretrain 1500)")
    _add(p, "--meta-batch", "meta_batch", int, "maml tasks per step (default: 32)")
    _add(p, "--program-batch", "program_batch", int, "pretrain programs per step (default: 32)")
    _add(p, "--input-batch", "input_batch", int, "rows per program (default: 1024)")
    _add(p, "--inner-lr", "inner_lr", float, "maml inner step size (default: 0.2)")
    _add(p, "--outer-lr", "outer_lr", float, "maml outer step size (default: 0.001)")
    _add(p, "--inner-steps", "inner_steps", int, "maml inner steps (default: 3)")
    _add(p, "--learning-rate", "learning_rate", float, "pretrain Adam rate (default: 1e-5)")
    _add(p, "--padding", "padding", str, "pretrain padding: random | zero (default: random)")
    _add(p, "--seed", "seed", int, "training seed (default: 0)")

    p = sub.add_parser("compile", help="compile one C source to a parameter vector")
    p.add_argument("--model", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("finetune", help="finetune a surrogate on one dataset program")
    p.add_argument("--data", required=True)
    p.add_argument("--program", required=True, help="record id within the dataset")
    p.add_argument("--out", required=True, help="final parameter vector path")
    _add(p, "--init", "init", str, "initialization vector file (default: random)")
    _add(p, "--random-seed", "random_seed", int, "seed for random init (default: 0)")
    _add(p, "--size", "size", float, "training-subset fraction (default: 1.0)")
    _add(p, "--epochs", "epochs", int, "finetune epochs (default: 5000)")
    _add(p, "--learning-rate", "learning_rate", float, "Adam rate (default: 0.01)")
    _add(p, "--eval-every", "eval_every", int, "loss logging stride (default: 3)")
    _add(p, "--seed", "seed", int, "trial seed (default: 0)")
    _add(p, "--trace", "trace", str, "optional loss-trace CSV")

    for name, extra in (("eval-data-efficiency", True), ("eval-training-time", False)):
        p = sub.add_parser(name, help=f"run the {name.removeprefix('eval-')} experiment")
        _add(p, "--plan", "plan", str, "plan config file (key=value)")
        _add(p, "--dataset", "dataset", str, "dataset JSONL (or set in plan)")
        _add(p, "--methods", "methods", str, "comma list incl. rnd (default: rnd)")
        _add(p, "--cpn-models", "cpn_models", str, "comma list of checkpoints")
        _add(p, "--maml-params", "maml_params", str, "comma list of vectors")
        _add(p, "--pts-params", "pts_params", str, "comma list of vectors")
        _add(p, "--programs", "programs", str, "count prefix or comma id list")
        _add(p, "--plan-seed", "plan_seed", int, "plan seed (default: 0)")
        _add(p, "--trials", "trials", int, "trials per cell (default: 9)")
        _add(p, "--epochs", "epochs", int, "finetune epochs (default: 5000)")
        _add(p, "--eval-every", "eval_every", int, "loss logging stride (default: 3)")
        if extra:
            _add(p, "--sizes", "sizes", str, "dataset-size grid (default: 0,0.001,0.01,0.1,1.0)")
        else:
            _add(p, "--timeout-epochs", "timeout_epochs", int, "cap (default: 15000)")
        _add(p, "--jobs", "jobs", int, f"parallel trials (default: {_jobs_default()})")
        p.add_argument("--out-dir", required=True)

    p = sub.add_parser("quantize", help="k-means color quantization demo")
    p.add_argument("--image", required=True, help="input PPM (P6)")
    p.add_argument("--out", required=True, help="output PPM")
    _add(p, "--k", "k", int, "palette size (default: 5)")
    _add(p, "--max-iters", "max_iters", int, "Lloyd iterations (default: 40)")
    _add(p, "--tolerance", "tolerance", float, "centroid movement stop (default: 1e-5)")
    _add(p, "--distance", "distance", str, "exact | surrogate (default: exact)")
    _add(p, "--surrogate", "surrogate", str, "parameter vector for surrogate distance")
    _add(p, "--seed", "seed", int, "centroid init seed (default: 0)")
    _add(p, "--reference", "reference", str, "reference PPM for MSE/SSIM")
    _add(p, "--metrics-out", "metrics_out", str, "metrics JSON path")
    _add(p, "--figure", "figure", str, "side-by-side report figure (PNG)")

    p = sub.add_parser("downcast-study", help="float-vs-double kernel error study")
    p.add_argument("--out", required=True, help="CSV output")
    _add(p, "--kernels", "kernels", str, "comma list or all (default: all)")
    _add(p, "--seed", "seed", int, "dataset seed (default: 0)")
    _add(p, "--train-rows", "train_rows", int, "override train rows (default: paper sizes)")
    _add(p, "--test-rows", "test_rows", int, "override test rows")
    _add(p, "--image-size", "image_size", int, "bundled image side (default: 64)")

    p = sub.add_parser("report", help="render figures from a trials CSV")
    p.add_argument("--trials", required=True)
    _add(p, "--kind", "kind", str, "data-efficiency | training-time (default: data-efficiency)")
    p.add_argument("--out-dir", required=True)

    return root


COMMAND_SPECS = {
    "corpus-build": {**PIPELINE_SPEC, "jobs": (_jobs_default(), int),
                     "rejections": (None, str)},
    "corpus-synth": {"family": ("affine", str), "count": (50, int), "seed": (7, int),
                     "keep_sources": (None, str), "io_rows": (2048, int),
                     "jobs": (_jobs_default(), int),
                     "max_tokens": (512, int), "max_arity": (9, int),
                     "out_limit": (10.0, float), "timeout_secs": (8.0, float)},
    "hypernet-train": {"epochs": (1500, int), "program_batch": (32, int),
                       "input_batch": (1024, int), "learning_rate": (5e-5, float),
                       "seed": (0, int), "vocab_size": (30_522, int),
                       "layers": (2, int), "hidden": (128, int), "heads": (2, int),
                       "feed_forward": (512, int)},
    "baseline-train": {"epochs": (None, int), "meta_batch": (32, int),
                       "program_batch": (32, int), "input_batch": (1024, int),
                       "inner_lr": (0.2, float), "outer_lr": (0.001, float),
                       "inner_steps": (3, int), "learning_rate": (1e-5, float),
                       "padding": ("random", str), "seed": (0, int)},
    "compile": {},
    "finetune": {"init": (None, str), "random_seed": (0, int), "size": (1.0, float),
                 "epochs": (5000, int), "learning_rate": (0.01, float),
                 "eval_every": (3, int), "seed": (0, int), "trace": (None, str)},
    "eval-data-efficiency": {"plan": (None, str), "dataset": (None, str),
                             "methods": ("rnd", str), "cpn_models": (None, str),
                             "maml_params": (None, str), "pts_params": (None, str),
                             "programs": (None, str), "plan_seed": (0, int),
                             "trials": (9, int), "epochs": (5000, int),
                             "eval_every": (3, int),
                             "sizes": ("0,0.001,0.01,0.1,1.0", str),
                             "jobs": (_jobs_default(), int)},
    "eval-training-time": {"plan": (None, str), "dataset": (None, str),
                           "methods": ("rnd", str), "cpn_models": (None, str),
                           "maml_params": (None, str), "pts_params": (None, str),
                           "programs": (None, str), "plan_seed": (0, int),
                           "trials": (9, int), "epochs": (5000, int),
                           "eval_every": (3, int), "timeout_epochs": (15_000, int),
                           "jobs": (_jobs_default(), int)},
    "quantize": {"k": (5, int), "max_iters": (40, int), "tolerance": (1e-5, float),
                 "distance": ("exact", str), "surrogate": (None, str),
                 "seed": (0, int), "reference": (None, str),
                 "metrics_out": (None, str), "figure": (None, str)},
    "downcast-study": {"kernels": ("all", str), "seed": (0, int),
                       "train_rows": (None, int), "test_rows": (None, int),
                       "image_size": (64, int)},
    "report": {"kind": ("data-efficiency", str)},
}

RUNNERS = {
    "corpus-build": cmd_corpus_build,
    "corpus-synth": cmd_corpus_synth,
    "hypernet-train": cmd_hypernet_train,
    "baseline-train": cmd_baseline_train,
    "compile": cmd_compile,
    "finetune": cmd_finetune,
    "eval-data-efficiency": cmd_eval_data_efficiency,
    "eval-training-time": cmd_eval_training_time,
    "quantize": cmd_quantize,
    "downcast-study": cmd_downcast_study,
    "report": cmd_report,
}


def _manifest_anchor(ns: argparse.Namespace, opts: dict, command: str) -> Path:
    for key in ("out", "out_dir"):
        value = getattr(ns, key, None) or opts.get(key)
        if value:
            p = Path(value)
            if key == "out_dir":
                return p / f"{command}.manifest.txt"
            return Path(str(p) + ".manifest.txt")
    return Path("nsc-run.manifest.txt")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        config = _load_config(ns.config)
        if ns.command in ("eval-data-efficiency", "eval-training-time") and getattr(ns, "plan", None):
            plan_cfg = _load_config(ns.plan)
            config = {**plan_cfg, **config}
        opts = _resolve(ns, config, COMMAND_SPECS[ns.command])
        # required arguments live only on the namespace
        for key in ("src", "out", "out_dir", "data", "model", "source", "image",
                    "program", "method", "trials"):
            if getattr(ns, key, None) is not None:
                opts[key] = getattr(ns, key)
        if ns.command == "baseline-train" and opts["epochs"] is None:
            opts["epochs"] = 5000 if opts["method"] == "maml" else 1500
        if ns.command in ("eval-data-efficiency", "eval-training-time"):
            if not opts.get("dataset"):
                raise CliError("invalid-input", "a dataset must be given via --dataset or the plan")
        artifacts = RUNNERS[ns.command](opts)
        mopts = {k: v for k, v in opts.items() if v is not None}
        extra = [SEED_RULE] if ns.command.startswith("eval-") else []
        write_manifest(ns.command, mopts, artifacts,
                       _manifest_anchor(ns, opts, ns.command), extra)
        return 0
    except CliError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 2 if exc.category == "usage" else 1
    except FileNotFoundError as exc:
        print(f"error:missing-file: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # keep the contract: one parseable line per failure
        from .serialization import SchemaError
        from .tokenizer import SequenceTooLong

        if isinstance(exc, SchemaError):
            category = "schema-version"
        elif isinstance(exc, SequenceTooLong):
            category = "invalid-input"
        elif isinstance(exc, (ValueError, KeyError)):
            category = "invalid-input"
        else:
            category = "internal"
        print(f"error:{category}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
