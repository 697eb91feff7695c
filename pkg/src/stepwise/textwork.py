"""Word and sentence counting rules shared by hint parsing and evaluation.

Sentences end at `.`, `!`, or `?`. Periods inside numbers (`1.5`) and inside
backticked identifiers (`` `readln()` ``) do not terminate a sentence.
Words are maximal whitespace-separated token runs.
"""

from __future__ import annotations

import re

_FENCE_RE = re.compile(r"```.*?```", re.DOTALL)


def strip_code_fences(text: str) -> str:
    """Remove fenced code blocks entirely (including their contents)."""
    out = _FENCE_RE.sub(" ", text)
    if "```" in out:  # unterminated fence: drop everything after it
        out = out.split("```", 1)[0]
    return out


def count_words(text: str) -> int:
    return len(text.split())


def split_sentences(text: str) -> list[str]:
    sentences: list[str] = []
    current: list[str] = []
    in_backticks = False
    chars = text.strip()
    for i, ch in enumerate(chars):
        if ch == "`":
            in_backticks = not in_backticks
        current.append(ch)
        if ch in ".!?" and not in_backticks:
            prev_digit = i > 0 and chars[i - 1].isdigit()
            next_digit = i + 1 < len(chars) and chars[i + 1].isdigit()
            if ch == "." and prev_digit and next_digit:
                continue
            at_end = i + 1 >= len(chars) or chars[i + 1].isspace()
            if at_end:
                sentence = "".join(current).strip()
                if sentence:
                    sentences.append(sentence)
                current = []
    tail = "".join(current).strip()
    if tail:
        sentences.append(tail)
    return sentences


def count_sentences(text: str) -> int:
    return len(split_sentences(text))
