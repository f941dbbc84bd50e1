"""Tokenisers shared by extraction, filtering and ROUGE."""
from __future__ import annotations

import re

_WORD = re.compile(r"[^\W_]+(?:'[^\W_]+)*")
_ROUGE_TOKEN = re.compile(r"[^\W_]+")
_QUOTES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


def normalize(text: str) -> str:
    return text.translate(_QUOTES).casefold()


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens with clitics split off.

    ``"isn't"`` gives ``["is", "n't"]`` and ``"crow's"`` gives ``["crow", "'s"]``
    so negation cues such as ``n't`` are ordinary tokens.
    """
    out: list[str] = []
    for word in _WORD.findall(normalize(text)):
        if "'" not in word:
            out.append(word)
        elif word.endswith("n't"):
            out.extend((word[:-3], "n't") if len(word) > 3 else ("n't",))
        else:
            head, _, rest = word.partition("'")
            out.extend((head, "'" + rest))
    return out


def rouge_tokenize(text: str) -> list[str]:
    # whitespace + punctuation split, lowercase, no stemming or stopwords
    return _ROUGE_TOKEN.findall(normalize(text))


def find_phrase(tokens: list[str], phrase: tuple[str, ...]) -> list[int]:
    """Start indices of every (possibly overlapping) occurrence of ``phrase``."""
    n = len(phrase)
    if n == 0:
        return []
    first = phrase[0]
    return [i for i in range(len(tokens) - n + 1) if tokens[i] == first and tuple(tokens[i:i + n]) == phrase]
