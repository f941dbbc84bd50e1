"""Emotion synonym lexicon and AU alias table.

Both are plain JSON config files so they can be swapped without touching code.
The shipped defaults live in ``rege_bench/data`` and are placeholders, not
ground truth.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

# Order doubles as the tie-break priority for emotion voting.
EMOTIONS = ("happiness", "sadness", "anger", "fear", "disgust", "surprise", "neutral")
EVALUATED_AUS = (1, 2, 4, 5, 6, 10, 12, 17, 24, 25, 26, 43)

DEFAULT_NEGATION_CUES = ("not", "no", "n't", "never", "without", "lack", "lacks", "absence", "absent")


class LexiconError(ValueError):
    pass


def _check_entries(entries, where):
    for e in entries:
        if not isinstance(e, str) or not e.strip():
            raise LexiconError(f"{where}: empty or non-string entry {e!r}")
        if e != e.lower():
            raise LexiconError(f"{where}: entry {e!r} is not lowercase")


@dataclass(frozen=True)
class EmotionLexicon:
    synonyms: dict[str, tuple[str, ...]]
    negation_cues: tuple[str, ...] = DEFAULT_NEGATION_CUES

    def __post_init__(self):
        missing = [e for e in EMOTIONS if e not in self.synonyms]
        extra = [e for e in self.synonyms if e not in EMOTIONS]
        if missing or extra:
            raise LexiconError(f"emotion keys mismatch: missing={missing} unknown={extra}")
        owner: dict[str, str] = {}
        for emo in EMOTIONS:
            entries = tuple(self.synonyms[emo])
            _check_entries(entries, f"synonyms[{emo}]")
            for e in entries:
                if e in owner and owner[e] != emo:
                    raise LexiconError(f"synonym {e!r} listed under both {owner[e]} and {emo}")
                owner[e] = emo
        if not self.negation_cues:
            raise LexiconError("negation_cues must be non-empty")
        _check_entries(self.negation_cues, "negation_cues")
        # normalise containers so the object is hashable-ish and immutable
        object.__setattr__(self, "synonyms", {e: tuple(self.synonyms[e]) for e in EMOTIONS})
        object.__setattr__(self, "negation_cues", tuple(self.negation_cues))

    def to_dict(self) -> dict:
        return {
            "synonyms": {e: list(v) for e, v in self.synonyms.items()},
            "negation_cues": list(self.negation_cues),
        }


@dataclass(frozen=True)
class AuAliasTable:
    entries: dict[int, tuple[str, ...]]
    # AUs that appear in descriptions but are outside the scored subset
    unevaluated: dict[int, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        ids = sorted(int(k) for k in self.entries)
        if ids != sorted(EVALUATED_AUS):
            raise LexiconError(f"alias table must cover exactly {EVALUATED_AUS}, got {tuple(ids)}")
        seen: dict[str, int] = {}
        for table in (self.entries, self.unevaluated):
            for au, aliases in table.items():
                _check_entries(aliases, f"aliases[{au}]")
                for a in aliases:
                    if a in seen and seen[a] != int(au):
                        raise LexiconError(f"alias {a!r} listed under both AU{seen[a]} and AU{au}")
                    seen[a] = int(au)
        clash = set(int(k) for k in self.unevaluated) & set(EVALUATED_AUS)
        if clash:
            raise LexiconError(f"unevaluated table repeats evaluated ids {sorted(clash)}")
        object.__setattr__(self, "entries", {int(k): tuple(v) for k, v in sorted(self.entries.items(), key=lambda kv: int(kv[0]))})
        object.__setattr__(self, "unevaluated", {int(k): tuple(v) for k, v in sorted(self.unevaluated.items(), key=lambda kv: int(kv[0]))})

    def to_dict(self) -> dict:
        return {
            "aliases": {str(k): list(v) for k, v in self.entries.items()},
            "unevaluated": {str(k): list(v) for k, v in self.unevaluated.items()},
        }


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise LexiconError(f"{path}: invalid JSON ({exc})") from exc


def load_lexicon(path: str | Path) -> EmotionLexicon:
    data = _read_json(path)
    if "synonyms" not in data:
        raise LexiconError(f"{path}: missing 'synonyms'")
    return EmotionLexicon(
        synonyms=data["synonyms"],
        negation_cues=tuple(data.get("negation_cues", DEFAULT_NEGATION_CUES)),
    )


def load_au_aliases(path: str | Path) -> AuAliasTable:
    data = _read_json(path)
    if "aliases" not in data:
        raise LexiconError(f"{path}: missing 'aliases'")
    return AuAliasTable(
        entries={int(k): v for k, v in data["aliases"].items()},
        unevaluated={int(k): v for k, v in data.get("unevaluated", {}).items()},
    )


def default_lexicon_path() -> Path:
    return Path(str(resources.files("rege_bench") / "data" / "emotion_lexicon.json"))


def default_aliases_path() -> Path:
    return Path(str(resources.files("rege_bench") / "data" / "au_aliases.json"))


def default_lexicon() -> EmotionLexicon:
    return load_lexicon(default_lexicon_path())


def default_au_aliases() -> AuAliasTable:
    return load_au_aliases(default_aliases_path())
