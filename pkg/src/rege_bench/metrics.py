"""Recognition, generation and REGE scores.

``s_re`` is accuracy (emotion) or the macro F1 over the 12 evaluated AUs;
``s_ge`` is a per-record ROUGE F-measure averaged over the file; REGE is their
sum. All fractions are kept at full precision; ``reported`` converts to the
x100 one-decimal form used in published tables.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .extraction import extract_aus, extract_emotion
from .lexicon import EVALUATED_AUS, AuAliasTable, EmotionLexicon
from .text import rouge_tokenize

ROUGE_VARIANTS = ("l", "1", "2")


class MetricError(ValueError):
    pass


def reported(x: float) -> float:
    return round(100.0 * x, 1)


def accuracy(pred, gold) -> float:
    if len(pred) != len(gold):
        raise MetricError(f"length mismatch: {len(pred)} predictions vs {len(gold)} labels")
    if not gold:
        raise MetricError("accuracy of an empty list is undefined")
    return sum(p == g for p, g in zip(pred, gold)) / len(gold)


@dataclass
class ConfusionCounts:
    tp: dict[int, int] = field(default_factory=lambda: dict.fromkeys(EVALUATED_AUS, 0))
    fp: dict[int, int] = field(default_factory=lambda: dict.fromkeys(EVALUATED_AUS, 0))
    fn: dict[int, int] = field(default_factory=lambda: dict.fromkeys(EVALUATED_AUS, 0))
    hits: int = 0
    total: int = 0

    def add_aus(self, pred, gold):
        pred, gold = set(pred), set(gold)
        for au in EVALUATED_AUS:
            p, g = au in pred, au in gold
            if p and g:
                self.tp[au] += 1
            elif p:
                self.fp[au] += 1
            elif g:
                self.fn[au] += 1

    def add_emotion(self, pred, gold):
        self.total += 1
        self.hits += pred == gold

    def f1(self) -> dict[int, float]:
        out = {}
        for au in EVALUATED_AUS:
            tp, fp, fn = self.tp[au], self.fp[au], self.fn[au]
            # AUs never predicted nor present score 0, matching published 0.0 columns
            out[au] = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        return out


def per_au_f1(pred, gold) -> dict[int, float]:
    if len(pred) != len(gold):
        raise MetricError(f"length mismatch: {len(pred)} predictions vs {len(gold)} labels")
    counts = ConfusionCounts()
    for p, g in zip(pred, gold):
        counts.add_aus(p, g)
    return counts.f1()


def average_f1(per_au: dict) -> float:
    missing = [au for au in EVALUATED_AUS if au not in per_au]
    if missing:
        raise MetricError(f"per-AU F1 map is missing AUs {missing}")
    return math.fsum(per_au[au] for au in EVALUATED_AUS) / len(EVALUATED_AUS)


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence, bit-parallel over ``a``.

    Each symbol of ``b`` updates a bit vector with one add and a few logic ops,
    so the cost is O(len(b)) big-int operations.
    """
    if not a or not b:
        return 0
    masks: dict = {}
    for i, sym in enumerate(a):
        masks[sym] = masks.get(sym, 0) | (1 << i)
    full = (1 << len(a)) - 1
    v = full
    for sym in b:
        u = v & masks.get(sym, 0)
        v = ((v + u) | (v - u)) & full
    return len(a) - bin(v).count("1")


def _f_measure(overlap: float, n_hyp: int, n_ref: int) -> float:
    if overlap == 0 or n_hyp == 0 or n_ref == 0:
        return 0.0
    p, r = overlap / n_hyp, overlap / n_ref
    return 2 * p * r / (p + r)


def rouge_l_tokens(hyp, ref) -> float:
    return _f_measure(lcs_length(ref, hyp), len(hyp), len(ref))


def rouge_n_tokens(hyp, ref, n: int) -> float:
    h = Counter(tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1))
    r = Counter(tuple(ref[i:i + n]) for i in range(len(ref) - n + 1))
    overlap = sum((h & r).values())
    return _f_measure(overlap, sum(h.values()), sum(r.values()))


def rouge_l(hypothesis: str, reference: str) -> float:
    return rouge_l_tokens(rouge_tokenize(hypothesis), rouge_tokenize(reference))


def rouge(hypothesis: str, reference: str, variant: str = "l") -> float:
    if variant == "l":
        return rouge_l(hypothesis, reference)
    if variant in ("1", "2"):
        return rouge_n_tokens(rouge_tokenize(hypothesis), rouge_tokenize(reference), int(variant))
    raise MetricError(f"unknown ROUGE variant {variant!r}; expected one of {ROUGE_VARIANTS}")


def rege(s_re: float, s_ge: float) -> float:
    for name, v in (("s_re", s_re), ("s_ge", s_ge)):
        if not 0.0 <= v <= 1.0:
            raise MetricError(f"{name}={v} outside [0, 1]")
    return s_re + s_ge


@dataclass
class ScoreReport:
    task: str
    s_re: float
    s_ge: float
    per_au_f1: dict[int, float]
    n_samples: int
    n_fallbacks: int
    n_gold_fallbacks: int = 0
    rouge_variant: str = "l"

    @property
    def s_rege(self) -> float:
        return self.s_re + self.s_ge

    @property
    def reported(self) -> dict[str, float]:
        re_, ge = reported(self.s_re), reported(self.s_ge)
        return {"s_re": re_, "s_ge": ge, "s_rege": round(re_ + ge, 1)}

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "rouge_variant": self.rouge_variant,
            "s_re": self.s_re,
            "s_ge": self.s_ge,
            "s_rege": self.s_rege,
            "reported": self.reported,
            "per_au_f1": {str(k): v for k, v in self.per_au_f1.items()},
            "n_samples": self.n_samples,
            "n_fallbacks": self.n_fallbacks,
            "n_gold_fallbacks": self.n_gold_fallbacks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreReport":
        return cls(
            task=d["task"],
            s_re=float(d["s_re"]),
            s_ge=float(d["s_ge"]),
            per_au_f1={int(k): float(v) for k, v in d.get("per_au_f1", {}).items()},
            n_samples=int(d.get("n_samples", 0)),
            n_fallbacks=int(d.get("n_fallbacks", 0)),
            n_gold_fallbacks=int(d.get("n_gold_fallbacks", 0)),
            rouge_variant=d.get("rouge_variant", "l"),
        )


def score_record(record, lexicon: EmotionLexicon, aliases: AuAliasTable, variant: str = "l"):
    """(pred, gold, rouge, pred_fallback, gold_fallback) for one record."""
    if record.hypothesis is None:
        raise MetricError(f"record {record.id!r} has no hypothesis")
    if record.task == "emotion":
        pred, ptrace = extract_emotion(record.hypothesis, lexicon)
        gold, gtrace = extract_emotion(record.reference, lexicon)
        fb = (ptrace.fallback, gtrace.fallback)
    else:
        pred, _ = extract_aus(record.hypothesis, aliases, lexicon.negation_cues)
        gold, _ = extract_aus(record.reference, aliases, lexicon.negation_cues)
        fb = (False, False)
    return pred, gold, rouge(record.hypothesis, record.reference, variant), fb[0], fb[1]


def _score_chunk(args):
    records, lexicon, aliases, variant = args
    return [score_record(r, lexicon, aliases, variant) for r in records]


def score_file(records, lexicon: EmotionLexicon, aliases: AuAliasTable, rouge_variant: str = "l", jobs: int = 1) -> ScoreReport:
    """Score hypotheses against references for a single-task record list.

    Gold labels come from running the extractor on the references. Results do
    not depend on record order or on ``jobs``: counts are integers and the
    ROUGE mean uses an exactly rounded sum.
    """
    records = list(records)
    if not records:
        raise MetricError("cannot score an empty record list")
    tasks = {r.task for r in records}
    if len(tasks) != 1:
        raise MetricError(f"records mix tasks {sorted(tasks)}")
    if rouge_variant not in ROUGE_VARIANTS:
        raise MetricError(f"unknown ROUGE variant {rouge_variant!r}")
    for r in records:
        if r.hypothesis is None:
            raise MetricError(f"record {r.id!r} has no hypothesis")
    task = tasks.pop()

    if jobs > 1 and len(records) > 1:
        size = -(-len(records) // jobs)
        chunks = [(records[i:i + size], lexicon, aliases, rouge_variant) for i in range(0, len(records), size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = [row for part in pool.map(_score_chunk, chunks) for row in part]
    else:
        results = _score_chunk((records, lexicon, aliases, rouge_variant))

    counts = ConfusionCounts()
    for pred, gold, _, _, _ in results:
        if task == "emotion":
            counts.add_emotion(pred, gold)
        else:
            counts.add_aus(pred, gold)
    if task == "emotion":
        s_re, per_au = counts.hits / counts.total, {}
    else:
        per_au = counts.f1()
        s_re = average_f1(per_au)
    s_ge = math.fsum(row[2] for row in results) / len(results)
    return ScoreReport(
        task=task,
        s_re=s_re,
        s_ge=s_ge,
        per_au_f1=per_au,
        n_samples=len(results),
        n_fallbacks=sum(row[3] for row in results),
        n_gold_fallbacks=sum(row[4] for row in results),
        rouge_variant=rouge_variant,
    )
