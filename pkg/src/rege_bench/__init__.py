"""Score free-form facial affect descriptions with REGE (recognition + ROUGE)."""
from .extraction import extract_aus, extract_emotion, split_sentences
from .lexicon import EMOTIONS, EVALUATED_AUS, AuAliasTable, EmotionLexicon, default_au_aliases, default_lexicon
from .metrics import ScoreReport, accuracy, average_f1, per_au_f1, rege, rouge_l, score_file
from .records import SampleRecord, filter_annotations, load_records, write_records

__version__ = "0.1.0"

__all__ = [
    "EMOTIONS", "EVALUATED_AUS", "AuAliasTable", "EmotionLexicon", "SampleRecord", "ScoreReport",
    "accuracy", "average_f1", "default_au_aliases", "default_lexicon", "extract_aus", "extract_emotion",
    "filter_annotations", "load_records", "per_au_f1", "rege", "rouge_l", "score_file", "split_sentences",
    "write_records",
]
