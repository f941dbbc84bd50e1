"""
Checking the arithmetic of a published comparison table
=======================================================

The combined score is the sum of the recognition and generation scores, and
the AU recognition score is the unweighted mean of twelve per-AU F1 values.
"""

from rege_bench.lexicon import EVALUATED_AUS
from rege_bench.metrics import average_f1, reported, rege

# per-AU F1 (percent) and the printed AU scores for three systems
rows = {
    "EmoLA": ([72.8, 37.3, 79.9, 67.3, 69.9, 41.7, 63.6, 56.8, 55.6, 73.4, 56.8, 0.0], 56.3, 35.2, 91.5),
    "LLaVA-1.5": ([74.2, 32.7, 76.5, 67.9, 63.6, 41.0, 61.0, 53.4, 54.1, 67.5, 43.5, 50.0], 57.1, 34.3, 91.4),
    "Shikra": ([70.6, 33.9, 76.6, 63.3, 57.8, 43.4, 58.0, 53.0, 54.1, 68.5, 42.4, 0.0], 51.8, 34.8, 86.6),
}

for name, (per_au, s_re, s_ge, s_rege) in rows.items():
    mean = average_f1({au: v / 100 for au, v in zip(EVALUATED_AUS, per_au)})
    total = rege(s_re / 100, s_ge / 100)
    print(f"{name:10s} mean F1 {100 * mean:6.2f} (printed {s_re})   S_rege {reported(total):5.1f} (printed {s_rege})")
