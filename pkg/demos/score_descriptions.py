"""
Scoring generated face descriptions
===================================

Turn free-form descriptions into labels, then compute recognition,
generation and combined scores for a handful of records.
"""

from rege_bench import default_au_aliases, default_lexicon
from rege_bench.extraction import extract_aus, extract_emotion
from rege_bench.metrics import score_file
from rege_bench.records import SampleRecord

lexicon = default_lexicon()
aliases = default_au_aliases()

# a negated sentence is dropped before synonyms are counted
label, trace = extract_emotion("She does not look angry. Her eyes suggest surprise.", lexicon)
print(label, trace.sentences_dropped_as_negated, trace.per_emotion_counts["surprise"])

# AU mentions: explicit ids and alias phrases; AU9 is not evaluated, so it only shows up in the trace
active, trace = extract_aus("Raised inner brows (AU1), a lip corner puller and AU9.", aliases)
print(sorted(active), trace.unevaluated_aus)

# three emotion records with model outputs attached
records = [
    SampleRecord("a", "emotion", "What emotion is shown?", "A broad smile, clearly happy.", "She looks happy and smiles."),
    SampleRecord("b", "emotion", "What emotion is shown?", "Tearful eyes and a downcast gaze.", "The person seems calm."),
    SampleRecord("c", "emotion", "What emotion is shown?", "Wide eyes, startled and shocked.", "He is shocked."),
]
report = score_file(records, lexicon, aliases)
print(report.reported)

# the AU task uses the macro F1 over twelve AUs as its recognition score
au_records = [
    SampleRecord("x", "au", "Which AUs are active?", "AU6 and AU12 are active.", "AU12 is active, cheeks raised (AU6)."),
    SampleRecord("y", "au", "Which AUs are active?", "Brow lowerer AU4 with AU17.", "AU4 is visible."),
]
au_report = score_file(au_records, lexicon, aliases)
print({au: round(v, 2) for au, v in au_report.per_au_f1.items() if v}, au_report.reported)
