"""Compile-and-run harness for candidate functions.

The candidate source is embedded in a template that evaluates it on the
shared input bank (truncated to the candidate's arity), repeating each row
`reps` times inside one process so stateful bodies (rand(), static counters)
reveal themselves, and prints every output as %.17g so doubles round-trip
exactly.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

OUTPUT_CAP_BYTES = 1 << 20

OK = "ok"
COMPILE_ERROR = "compile-error"
RUNTIME_CRASH = "runtime-crash"
TIMEOUT = "timeout"
MALFORMED = "output-malformed"


@dataclass
class HarnessResult:
    status: str
    outputs: np.ndarray | None = None  # (rows, reps)
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OK


def render_harness(fn_text: str, fn_name: str, param_types: list[str],
                   bank: np.ndarray, reps: int) -> str:
    rows = bank.shape[0]
    arity = len(param_types)
    lines = [
        "#include <stdlib.h>",
        "#include <stdio.h>",
        "#include <math.h>",
        "",
        fn_text,
        "",
    ]
    if arity:
        lines.append(f"static const double nsc_inputs[{rows}][{arity}] = {{")
        for row in bank[:, :arity]:
            lines.append("  {" + ", ".join(repr(float(v)) for v in row) + "},")
        lines.append("};")
    call_args = ", ".join(
        f"({_scalar_type(t)}) nsc_inputs[i][{j}]" for j, t in enumerate(param_types)
    )
    lines += [
        "",
        "int main(void) {",
        f"  for (int i = 0; i < {rows}; i++) {{",
        f"    for (int r = 0; r < {reps}; r++) {{",
        f"      printf(\"%.17g\\n\", (double) {fn_name}({call_args}));",
        "    }",
        "  }",
        "  return 0;",
        "}",
    ]
    return "\n".join(lines) + "\n"


def _scalar_type(decl: str) -> str:
    return "float" if "float" in decl else "double"


def run_harness(fn_text: str, fn_name: str, param_types: list[str],
                bank: np.ndarray, reps: int = 1, cc: str | None = None,
                timeout: float = 8.0) -> HarnessResult:
    """Compile and execute the harness; wall-clock budget applies per stage."""
    cc = cc or os.environ.get("CC", "cc")
    rows = bank.shape[0]
    source = render_harness(fn_text, fn_name, param_types, bank, reps)
    with tempfile.TemporaryDirectory(prefix="nsc-harness-") as tmp:
        src = Path(tmp) / "harness.c"
        binary = Path(tmp) / "harness"
        src.write_text(source)
        try:
            built = subprocess.run(
                [cc, str(src), "-o", str(binary), "-lm"],
                capture_output=True, text=True, timeout=timeout,
            )
        except subprocess.TimeoutExpired:
            return HarnessResult(TIMEOUT, detail="compile timeout")
        if built.returncode != 0:
            tail = built.stderr.strip().splitlines()[-1] if built.stderr else ""
            return HarnessResult(COMPILE_ERROR, detail=tail)
        try:
            run = subprocess.run(
                [str(binary)], capture_output=True, timeout=timeout,
            )
        except subprocess.TimeoutExpired:
            return HarnessResult(TIMEOUT, detail="run timeout")
        if run.returncode != 0:
            return HarnessResult(RUNTIME_CRASH, detail=f"exit status {run.returncode}")
        raw = run.stdout[:OUTPUT_CAP_BYTES]
    try:
        values = [float(tok) for tok in raw.split()]
    except ValueError as exc:
        return HarnessResult(MALFORMED, detail=str(exc))
    if len(values) != rows * reps:
        return HarnessResult(MALFORMED, detail=f"expected {rows * reps} outputs, got {len(values)}")
    return HarnessResult(OK, outputs=np.array(values).reshape(rows, reps))


def deterministic(outputs: np.ndarray) -> bool:
    """All repetitions of every row agree (NaNs compare equal to NaNs)."""
    first = outputs[:, :1]
    return all(
        np.array_equal(outputs[:, k:k + 1], first, equal_nan=True)
        for k in range(1, outputs.shape[1])
    )


def determinism_filter(fn_text: str, fn_name: str, param_types: list[str],
                       bank: np.ndarray, cc: str | None = None,
                       timeout: float = 8.0, reps: int = 5) -> bool:
    """Evaluate the function `reps` times per input row in one process and
    keep it only when every repetition agrees.

    Stateful bodies (rand(), static counters) diverge between in-process
    calls; whole-process reruns would not expose rand(), which C seeds
    identically on every run.
    """
    result = run_harness(fn_text, fn_name, param_types, bank, reps=reps,
                         cc=cc, timeout=timeout)
    return result.ok and deterministic(result.outputs)
