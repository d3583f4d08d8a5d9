"""Synthetic single-function C sources for desk-scale training runs.

Coefficients are drawn from U[-1, 1] and appear verbatim in the text, so a
program encoder can in principle read the function off its source.  Output
magnitudes are bounded well inside the corpus limit by construction.
"""

from __future__ import annotations

from pathlib import Path

from ..rng import Rng

FAMILIES = ("affine", "quadratic", "trig-mix")


def _coef(rng: Rng, label: str) -> float:
    return float(rng.child(label).uniform(-1.0, 1.0))


def synth_corpus(family: str, count: int, seed: int) -> list[tuple[str, str]]:
    """Generate (filename, source) pairs for one function family."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = Rng(seed).child("synth", family)
    out = []
    for i in range(count):
        crng = rng.child(i)
        name = f"f{i}"
        if family == "affine":
            a, b = _coef(crng, "a"), _coef(crng, "b")
            body = f"return {a:.4f}f*x + {b:.4f}f;"
        elif family == "quadratic":
            a, b, c = _coef(crng, "a"), _coef(crng, "b"), _coef(crng, "c")
            body = f"return {a:.4f}f*x*x + {b:.4f}f*x + {c:.4f}f;"
        else:  # trig-mix
            a, b = _coef(crng, "a"), _coef(crng, "b")
            body = f"return {a:.4f}f*sinf(x) + {b:.4f}f*cosf(x);"
        source = f"float {name}(float x){{{body}}}\n"
        out.append((f"{family.replace('-', '_')}_{i:04d}.c", source))
    return out


def write_sources(pairs: list[tuple[str, str]], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in pairs:
        p = out_dir / name
        p.write_text(text)
        paths.append(p)
    return paths
