"""Rule-based removal of corpus programs syntactically similar to the
evaluation kernels.

Each rule is a conjunction of substring requirements, an optional any-of
group (each alternative itself a conjunction), a cap on non-empty source
lines, and an exact input count.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class DecontamRule:
    name: str
    requires: tuple[str, ...]
    any_of: tuple[tuple[str, ...], ...] | None
    max_nonempty_lines: int | None
    arity: int

    def matches(self, source: str, arity: int) -> bool:
        if arity != self.arity:
            return False
        if any(s not in source for s in self.requires):
            return False
        if self.any_of is not None and not any(
            all(s in source for s in alt) for alt in self.any_of
        ):
            return False
        if self.max_nonempty_lines is not None:
            lines = sum(1 for l in source.splitlines() if l.strip())
            if lines > self.max_nonempty_lines:
                return False
        return True


DECONTAMINATION_RULES = (
    DecontamRule("fft-sin", ("sin",), (("3.14",), ("M_PI",)), 5, 1),
    DecontamRule("fft-cos", ("cos",), (("3.14",), ("M_PI",)), 5, 1),
    DecontamRule("invk2j-0", ("asin", "acos", "sin", "cos"), ((".5",), ("/", "2")), 7, 2),
    DecontamRule("invk2j-1", ("acos",), ((".5",), ("/", "2")), 6, 2),
    DecontamRule("kmeans", ("sqrt", "*", "+", "-"), None, None, 6),
    DecontamRule("sobel", ("sqrt", "+", "*", "/"), None, None, 9),
)


def match_rule(source: str, arity: int) -> str | None:
    """Name of the first matching rule, or None when the program is clean."""
    for rule in DECONTAMINATION_RULES:
        if rule.matches(source, arity):
            return rule.name
    return None
