"""The corpus build pipeline: C sources in, executable ProgramRecords out.

Stage order is fixed: preprocess, strip comments, extract, token-length,
arity, signature, execute, determinism, magnitude, dedup, decontaminate.
Every rejection carries exactly one stage label.  Re-running on the same
tree with the same seed yields a byte-identical JSONL dataset.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..rng import Rng
from ..tasks import Task
from ..tokenizer import lex
from . import harness
from .csrc import (
    CandidateFunction,
    ExtractError,
    PreprocessError,
    extract_functions,
    preprocess,
    signature_verdict,
    strip_comments,
)
from .decontam import match_rule

PASS_STAGES = ("token-length", "arity", "signature", "execute",
               "determinism", "magnitude", "dedup", "decontaminate")


@dataclass
class PipelineConfig:
    max_tokens: int = 512
    max_arity: int = 9
    out_limit: float = 10.0
    timeout_secs: float = 8.0
    io_rows: int = 2048
    seed: int = 0
    cc: str | None = None
    jobs: int = 1
    determinism_reps: int = 5


@dataclass
class Rejection:
    file: str
    name: str
    stage: str
    detail: str = ""


@dataclass
class ProgramRecord:
    id: str
    source: str          # comment-stripped text
    tokens: list[str]
    arity: int
    inputs: np.ndarray   # (io_rows, arity)
    outputs: np.ndarray  # (io_rows,)
    split_seed: int
    audit: list[str] = field(default_factory=list)
    # benchmark datasets carry fixed asymmetric splits: the first
    # `train_prefix` rows are training data.  None means the seed-derived
    # 50/50 split.
    train_prefix: int | None = None

    def split_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Train/test row indices (seed-derived 50/50 unless a prefix split
        was recorded)."""
        n = len(self.outputs)
        if self.train_prefix is not None:
            return np.arange(self.train_prefix), np.arange(self.train_prefix, n)
        perm = Rng(self.split_seed).child("split", self.id).permutation(n)
        half = n // 2
        return perm[:half], perm[half:]


@dataclass
class BuildResult:
    records: list[ProgramRecord]
    rejections: list[Rejection]
    bank: np.ndarray

    def rejection_stages(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.rejections:
            counts[r.stage] = counts.get(r.stage, 0) + 1
        return counts


def make_input_bank(seed: int, rows: int = 2048, width: int = 9) -> np.ndarray:
    """The fixed uniform [-1, 1] inputs shared by every program in a build."""
    return Rng(seed).child("input-bank").uniform(-1.0, 1.0, size=(rows, width))


def build_corpus(src_dir, cfg: PipelineConfig) -> BuildResult:
    """Run the full pipeline over every .c file under a directory tree."""
    root = Path(src_dir)
    files = sorted(p.relative_to(root).as_posix() for p in root.rglob("*.c"))
    sources = []
    for rel in files:
        sources.append((rel, (root / rel).read_text(errors="replace")))
    return build_corpus_from_sources(sources, cfg)


def build_corpus_from_sources(sources: list[tuple[str, str]],
                              cfg: PipelineConfig) -> BuildResult:
    """Pipeline entry point for in-memory (filename, text) pairs."""
    bank = make_input_bank(cfg.seed, cfg.io_rows)
    rejections: list[Rejection] = []
    candidates: list[CandidateFunction] = []

    for rel, text in sorted(sources, key=lambda item: item[0]):
        try:
            expanded = preprocess(text, cc=cfg.cc or "cc", timeout=cfg.timeout_secs)
        except PreprocessError as exc:
            rejections.append(Rejection(rel, "", "preprocess", str(exc)))
            continue
        stripped = strip_comments(expanded)
        try:
            outcome = extract_functions(stripped, file=rel)
        except ExtractError as exc:
            rejections.append(Rejection(rel, "", "extract", str(exc)))
            continue
        if outcome.unparsed_blocks:
            rejections.append(Rejection(
                rel, "", "extract",
                f"skipped {outcome.unparsed_blocks} unparsed function-like block(s)"))
        candidates.extend(outcome.functions)

    candidates.sort(key=lambda fn: fn.provenance())

    # cheap text filters first
    runnable: list[CandidateFunction] = []
    for fn in candidates:
        n_tokens = len(lex(fn.text)) + 1  # classification token included
        if n_tokens > cfg.max_tokens:
            rejections.append(Rejection(fn.file, fn.name, "token-length",
                                        f"{n_tokens} tokens"))
            continue
        if fn.arity > cfg.max_arity:
            rejections.append(Rejection(fn.file, fn.name, "arity",
                                        f"{fn.arity} inputs"))
            continue
        keep, why = signature_verdict(fn)
        if not keep:
            rejections.append(Rejection(fn.file, fn.name, "signature", why))
            continue
        runnable.append(fn)

    # execution is subprocess-bound; parallelize at candidate granularity
    def execute(fn: CandidateFunction) -> harness.HarnessResult:
        return harness.run_harness(fn.text, fn.name, fn.param_types, bank,
                                   reps=cfg.determinism_reps, cc=cfg.cc,
                                   timeout=cfg.timeout_secs)

    if cfg.jobs > 1 and len(runnable) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(execute, runnable))
    else:
        results = [execute(fn) for fn in runnable]

    records: list[ProgramRecord] = []
    seen_fingerprints: set[tuple[str, ...]] = set()
    for fn, res in zip(runnable, results):
        if not res.ok:
            rejections.append(Rejection(fn.file, fn.name, res.status, res.detail))
            continue
        if not harness.deterministic(res.outputs):
            rejections.append(Rejection(fn.file, fn.name, "determinism",
                                        "outputs differ across repeated calls"))
            continue
        outputs = res.outputs[:, 0]
        bad = ~np.isfinite(outputs) | (np.abs(outputs) >= cfg.out_limit)
        if bad.any():
            rejections.append(Rejection(
                fn.file, fn.name, "magnitude",
                f"{int(bad.sum())} rows NaN/Inf or |out| >= {cfg.out_limit}"))
            continue
        tokens = lex(fn.text)
        fingerprint = tuple(tokens)
        if fingerprint in seen_fingerprints:
            rejections.append(Rejection(fn.file, fn.name, "dedup",
                                        "duplicate token sequence"))
            continue
        seen_fingerprints.add(fingerprint)
        rule = match_rule(fn.text, fn.arity)
        if rule is not None:
            rejections.append(Rejection(fn.file, fn.name, "decontaminate", rule))
            continue
        audit = list(PASS_STAGES)
        body = fn.text[fn.text.find("{") + 1 : fn.text.rfind("}")]
        if not body.strip():
            audit.append("warning:empty-body")
        records.append(ProgramRecord(
            id=f"{fn.file}::{fn.name}#{fn.index}",
            source=fn.text,
            tokens=tokens,
            arity=fn.arity,
            inputs=bank[:, : fn.arity].copy(),
            outputs=outputs,
            split_seed=cfg.seed,
            audit=audit,
        ))
    return BuildResult(records=records, rejections=rejections, bank=bank)


# ---------------------------------------------------------------------------
# JSONL dataset format


def write_jsonl(records: list[ProgramRecord], path) -> None:
    with open(path, "w") as fh:
        for r in records:
            io_rows = [[[float(v) for v in inp], float(out)]
                       for inp, out in zip(r.inputs, r.outputs)]
            obj = {
                "id": r.id,
                "source": r.source,
                "tokens": r.tokens,
                "arity": r.arity,
                "io": io_rows,
                "split_seed": r.split_seed,
                "audit": r.audit,
            }
            if r.train_prefix is not None:
                obj["train_prefix"] = r.train_prefix
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_records(path) -> list[ProgramRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            io = obj["io"]
            records.append(ProgramRecord(
                id=obj["id"],
                source=obj["source"],
                tokens=list(obj["tokens"]),
                arity=int(obj["arity"]),
                inputs=np.array([row[0] for row in io]).reshape(len(io), int(obj["arity"])),
                outputs=np.array([row[1] for row in io]),
                split_seed=int(obj["split_seed"]),
                audit=list(obj["audit"]),
                train_prefix=obj.get("train_prefix"),
            ))
    return records


def record_to_task(record: ProgramRecord) -> Task:
    train_idx, test_idx = record.split_indices()
    return Task(
        name=record.id,
        source=record.source,
        arity=record.arity,
        train_x=record.inputs[train_idx],
        train_y=record.outputs[train_idx, None],
        test_x=record.inputs[test_idx],
        test_y=record.outputs[test_idx, None],
    )
