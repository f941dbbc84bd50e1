"""Turn free-form descriptions into an emotion label or a set of AUs.

Emotion: split into sentences, delete sentences that negate an emotion, count
synonym hits per emotion and take the most frequent one. AUs: same sentence
deletion, then look for explicit ``AU<n>`` mentions or alias phrases.
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field

from .lexicon import DEFAULT_NEGATION_CUES, EMOTIONS, EVALUATED_AUS, AuAliasTable, EmotionLexicon
from .text import find_phrase, tokenize

ABBREVIATIONS = frozenset({
    "e.g.", "i.e.", "etc.", "vs.", "approx.", "mr.", "mrs.", "ms.", "dr.", "prof.",
    "st.", "fig.", "cf.", "al.", "resp.", "incl.", "esp.", "ca.",
})
_TERMINATORS = ".!?"
_CHUNK_STRIP = "\"'()[],;:"
_AU_TOKEN = re.compile(r"au0*(\d+)")

FALLBACK_EMOTION = "neutral"


@dataclass
class ExtractionTrace:
    sentences_kept: list[str] = field(default_factory=list)
    sentences_dropped_as_negated: list[str] = field(default_factory=list)
    per_emotion_counts: dict[str, int] = field(default_factory=dict)
    matched_au_mentions: list[tuple[str, int]] = field(default_factory=list)
    unevaluated_aus: list[int] = field(default_factory=list)
    fallback: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["matched_au_mentions"] = [list(m) for m in self.matched_au_mentions]
        return d


def _is_abbreviation(text: str, i: int) -> bool:
    lo = i
    while lo > 0 and not text[lo - 1].isspace():
        lo -= 1
    hi = i + 1
    while hi < len(text) and not text[hi].isspace():
        hi += 1
    return text[lo:hi].strip(_CHUNK_STRIP).casefold() in ABBREVIATIONS


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """(start, end) offsets of each non-empty sentence, whitespace-trimmed."""
    spans = []
    start, i, n = 0, 0, len(text)

    def emit(lo, hi):
        while lo < hi and text[lo].isspace():
            lo += 1
        while hi > lo and text[hi - 1].isspace():
            hi -= 1
        if hi > lo:
            spans.append((lo, hi))

    while i < n:
        ch = text[i]
        if ch in _TERMINATORS:
            if ch == "." and 0 < i < n - 1 and text[i - 1].isdigit() and text[i + 1].isdigit():
                i += 1
                continue
            if ch == "." and _is_abbreviation(text, i):
                i += 1
                continue
            emit(start, i)
            while i < n and text[i] in _TERMINATORS:
                i += 1
            start = i
            continue
        i += 1
    emit(start, n)
    return spans


def split_sentences(text: str) -> list[str]:
    return [text[a:b] for a, b in sentence_spans(text)]


def _phrases(entries) -> list[tuple[str, ...]]:
    return [tuple(tokenize(e)) for e in entries]


def _contains_any(tokens, phrases) -> bool:
    return any(find_phrase(tokens, p) for p in phrases)


def _au_mentions(tokens: list[str]) -> list[tuple[str, int]]:
    found = []
    for i, tok in enumerate(tokens):
        m = _AU_TOKEN.fullmatch(tok)
        if m:
            found.append((tok, int(m.group(1))))
        elif tok == "au" and i + 1 < len(tokens) and tokens[i + 1].isdigit():
            found.append((f"au {tokens[i + 1]}", int(tokens[i + 1])))
    return found


def _split_negated(sentences, cue_phrases, is_topical):
    kept, dropped = [], []
    for s in sentences:
        toks = tokenize(s)
        if _contains_any(toks, cue_phrases) and is_topical(toks):
            dropped.append(s)
        else:
            kept.append(s)
    return kept, dropped


def drop_negated_sentences(sentences, lexicon: EmotionLexicon):
    """Drop sentences holding both a negation cue and an emotion synonym."""
    syn = _phrases(w for emo in EMOTIONS for w in lexicon.synonyms[emo])
    return _split_negated(sentences, _phrases(lexicon.negation_cues), lambda t: _contains_any(t, syn))


def count_emotions(sentences, lexicon: EmotionLexicon) -> dict[str, int]:
    table = {emo: _phrases(lexicon.synonyms[emo]) for emo in EMOTIONS}
    counts = dict.fromkeys(EMOTIONS, 0)
    for s in sentences:
        toks = tokenize(s)
        for emo, phrases in table.items():
            counts[emo] += sum(len(find_phrase(toks, p)) for p in phrases)
    return counts


def vote(counts: dict[str, int]) -> tuple[str, bool]:
    """Most frequent emotion, earlier EMOTIONS entries winning ties; neutral if nothing matched."""
    best = max(counts[e] for e in EMOTIONS)
    if best == 0:
        return FALLBACK_EMOTION, True
    return next(e for e in EMOTIONS if counts[e] == best), False


def extract_emotion(text: str, lexicon: EmotionLexicon):
    kept, dropped = drop_negated_sentences(split_sentences(text), lexicon)
    counts = count_emotions(kept, lexicon)
    label, fallback = vote(counts)
    trace = ExtractionTrace(
        sentences_kept=kept,
        sentences_dropped_as_negated=dropped,
        per_emotion_counts=counts,
        fallback=fallback,
    )
    return label, trace


def _alias_phrases(aliases: AuAliasTable):
    tables = (aliases.entries, aliases.unevaluated)
    return [(au, name, tuple(tokenize(name))) for table in tables for au, names in table.items() for name in names]


def drop_negated_au_sentences(sentences, aliases: AuAliasTable, negation_cues):
    alias_phrases = [p for _, _, p in _alias_phrases(aliases)]
    return _split_negated(
        sentences,
        _phrases(negation_cues),
        lambda t: bool(_au_mentions(t)) or _contains_any(t, alias_phrases),
    )


def extract_aus(text: str, aliases: AuAliasTable, negation_cues=None):
    """Active evaluated AUs as a frozenset, plus a trace.

    ``negation_cues`` defaults to the emotion lexicon's default cue list.
    AUs outside the evaluated twelve are reported in the trace only.
    """
    cues = DEFAULT_NEGATION_CUES if negation_cues is None else negation_cues
    kept, dropped = drop_negated_au_sentences(split_sentences(text), aliases, cues)
    alias_phrases = _alias_phrases(aliases)
    mentions: list[tuple[str, int]] = []
    for s in kept:
        toks = tokenize(s)
        mentions.extend(_au_mentions(toks))
        for au, name, phrase in alias_phrases:
            mentions.extend((name, au) for _ in find_phrase(toks, phrase))
    evaluated = set(EVALUATED_AUS)
    active = frozenset(au for _, au in mentions if au in evaluated)
    trace = ExtractionTrace(
        sentences_kept=kept,
        sentences_dropped_as_negated=dropped,
        matched_au_mentions=mentions,
        unevaluated_aus=sorted({au for _, au in mentions if au not in evaluated}),
    )
    return active, trace
