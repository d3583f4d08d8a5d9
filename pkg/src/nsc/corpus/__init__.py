from .csrc import (
    CandidateFunction,
    ExtractError,
    PreprocessError,
    extract_functions,
    preprocess,
    signature_verdict,
    strip_comments,
)
from .decontam import DECONTAMINATION_RULES, match_rule
from .harness import HarnessResult, determinism_filter, run_harness
from .pipeline import (
    BuildResult,
    PipelineConfig,
    ProgramRecord,
    Rejection,
    build_corpus,
    build_corpus_from_sources,
    load_records,
    make_input_bank,
    record_to_task,
    write_jsonl,
)
from .synth import FAMILIES, synth_corpus, write_sources

__all__ = [
    "BuildResult",
    "CandidateFunction",
    "DECONTAMINATION_RULES",
    "ExtractError",
    "FAMILIES",
    "HarnessResult",
    "PipelineConfig",
    "PreprocessError",
    "ProgramRecord",
    "Rejection",
    "build_corpus",
    "build_corpus_from_sources",
    "determinism_filter",
    "extract_functions",
    "load_records",
    "make_input_bank",
    "match_rule",
    "preprocess",
    "record_to_task",
    "run_harness",
    "signature_verdict",
    "strip_comments",
    "synth_corpus",
    "write_jsonl",
    "write_sources",
]
