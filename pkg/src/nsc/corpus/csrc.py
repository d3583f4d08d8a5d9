"""C source handling: preprocessing, comment stripping, function extraction,
and signature analysis.

Extraction is a signature grammar plus brace matcher, not a full C parser.
Function-like blocks it cannot parse (K&R declarations, leftover macros) are
reported so the pipeline can log them; everything the numeric-signature
filters need is recognized.
"""

from __future__ import annotations

import os
import re
import subprocess
from dataclasses import dataclass, field


class PreprocessError(RuntimeError):
    pass


class ExtractError(ValueError):
    pass


def preprocess(text: str, cc: str = "cc", timeout: float = 8.0, max_passes: int = 2) -> str:
    """Expand preprocessor directives.

    Runs the system preprocessor until no line begins with '#' or two passes
    have run; a file that still contains directives after that is returned
    as-is.  A failing invocation raises PreprocessError.
    """
    for _ in range(max_passes):
        if not any(line.lstrip().startswith("#") for line in text.splitlines()):
            break
        try:
            proc = subprocess.run(
                [cc, "-E", "-P", "-x", "c", "-"],
                input=text, capture_output=True, text=True, timeout=timeout,
            )
        except (subprocess.TimeoutExpired, OSError) as exc:
            raise PreprocessError(str(exc)) from exc
        if proc.returncode != 0:
            raise PreprocessError(proc.stderr.strip().splitlines()[-1] if proc.stderr else "preprocessor failed")
        text = proc.stdout
    return text


def strip_comments(text: str) -> str:
    """Remove // and /* */ comments, leaving string/char literals intact."""
    out = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in "\"'":
            quote = ch
            out.append(ch)
            i += 1
            while i < n:
                out.append(text[i])
                if text[i] == "\\" and i + 1 < n:
                    out.append(text[i + 1])
                    i += 2
                    continue
                if text[i] == quote:
                    i += 1
                    break
                i += 1
            continue
        if ch == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "/" and i + 1 < n and text[i + 1] == "*":
            i += 2
            while i + 1 < n and not (text[i] == "*" and text[i + 1] == "/"):
                i += 1
            i += 2
            out.append(" ")
            continue
        out.append(ch)
        i += 1
    return "".join(out)


@dataclass
class CandidateFunction:
    name: str
    text: str               # full definition, header through closing brace
    return_type: str
    param_types: list[str]  # raw parameter declarations, in order
    arity: int
    file: str = ""
    index: int = 0          # position within the file, in source order

    def provenance(self) -> tuple[str, int]:
        return (self.file, self.index)


_IDENT_AT_END = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*$")
_TYPE_QUALIFIERS = {"static", "inline", "extern", "const", "volatile", "register",
                    "restrict", "__inline", "__inline__", "signed", "unsigned"}


@dataclass
class ExtractOutcome:
    functions: list[CandidateFunction] = field(default_factory=list)
    unparsed_blocks: int = 0


def extract_functions(source: str, file: str = "") -> ExtractOutcome:
    """Collect top-level function definitions by brace matching.

    Raises ExtractError on unbalanced braces.  Blocks whose header looks
    function-like but resists the signature grammar are counted, not raised.
    """
    outcome = ExtractOutcome()
    depth = 0
    boundary = 0       # start of the current top-level declaration
    block_start = -1   # '{' position of the open top-level block
    header = ""
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch in "\"'":
            i = _skip_literal(source, i)
            continue
        if ch == "{":
            if depth == 0:
                header = source[boundary:i]
                block_start = i
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                raise ExtractError("unbalanced braces")
            if depth == 0:
                fn = _parse_header(header)
                if fn is not None:
                    fn.text = source[_header_start(source, boundary, header) : i + 1]
                    fn.file = file
                    fn.index = len(outcome.functions)
                    outcome.functions.append(fn)
                elif header.rstrip().endswith(")"):
                    outcome.unparsed_blocks += 1
                boundary = i + 1
        elif ch == ";" and depth == 0:
            boundary = i + 1
        i += 1
    if depth != 0:
        raise ExtractError("unbalanced braces")
    return outcome


def _skip_literal(source: str, i: int) -> int:
    quote = source[i]
    i += 1
    n = len(source)
    while i < n:
        if source[i] == "\\":
            i += 2
            continue
        if source[i] == quote:
            return i + 1
        i += 1
    return i


def _header_start(source: str, boundary: int, header: str) -> int:
    return boundary + (len(header) - len(header.lstrip()))


def _parse_header(header: str) -> CandidateFunction | None:
    header = header.strip()
    if not header.endswith(")") or ";" in header or "=" in header:
        return None
    # matching '(' for the trailing ')'
    depth = 0
    open_paren = -1
    for j in range(len(header) - 1, -1, -1):
        if header[j] == ")":
            depth += 1
        elif header[j] == "(":
            depth -= 1
            if depth == 0:
                open_paren = j
                break
    if open_paren <= 0:
        return None
    m = _IDENT_AT_END.search(header[:open_paren])
    if not m:
        return None
    name = m.group(1)
    rtype = header[: m.start(1)].strip()
    if not rtype:
        return None
    params = _split_params(header[open_paren + 1 : -1])
    arity = 0 if params in ([], ["void"]) else len(params)
    return CandidateFunction(name=name, text="", return_type=rtype,
                             param_types=[] if arity == 0 else params, arity=arity)


def _split_params(inner: str) -> list[str]:
    inner = inner.strip()
    if not inner:
        return []
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(inner):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(inner[start:i].strip())
            start = i + 1
    parts.append(inner[start:].strip())
    return parts


def _base_type(decl: str) -> str | None:
    """Base type of a parameter/return declaration, None if pointerish."""
    if "*" in decl or "[" in decl:
        return None
    words = [w for w in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", decl)]
    words = [w for w in words if w not in _TYPE_QUALIFIERS]
    if not words:
        return None
    # last word may be the parameter name; type words precede it
    if len(words) >= 2 and words[-1] not in ("float", "double", "void"):
        words = words[:-1]
    return " ".join(words)


def signature_verdict(fn: CandidateFunction) -> tuple[bool, str]:
    """Keep/reject decision for the numeric-signature filter.

    Rejects pointers anywhere in the signature, void returns, variadics,
    and parameter or return base types other than float/double.  Types used
    inside the body are not inspected.
    """
    rt = _base_type(fn.return_type)
    if "*" in fn.return_type:
        return False, "pointer return type"
    if rt == "void":
        return False, "void return type"
    if rt not in ("float", "double"):
        return False, f"nonnumeric return type: {fn.return_type.strip()}"
    for decl in fn.param_types:
        if decl == "...":
            return False, "variadic parameters"
        if "*" in decl or "[" in decl:
            return False, f"pointer parameter: {decl}"
        base = _base_type(decl)
        if base not in ("float", "double"):
            return False, f"nonnumeric parameter: {decl}"
    return True, ""
