"""Command line entry point: extract, score, toy-train, report.

Exit codes:
  0  success
  1  internal error
  2  usage error (unknown flag, bad value)
  3  input file missing or unreadable
  4  invalid input (record, lexicon, config or report schema)
  5  numerical failure during training

On failure a JSON object ``{"error", "message", "exit_code"}`` is written to
stderr. Output files are written atomically.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .extraction import extract_aus, extract_emotion
from .lexicon import (
    EVALUATED_AUS,
    LexiconError,
    default_aliases_path,
    default_lexicon_path,
    load_au_aliases,
    load_lexicon,
)
from .manifest import build_manifest, dumps
from .metrics import ROUGE_VARIANTS, MetricError, ScoreReport, average_f1, reported, score_file
from .records import TASKS, RecordError, SampleRecord, atomic_write_text, filter_annotations, load_records

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_MISSING, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5
_EXIT_NAMES = {
    EXIT_INTERNAL: "internal",
    EXIT_USAGE: "usage",
    EXIT_MISSING: "missing_file",
    EXIT_INVALID: "invalid_input",
    EXIT_NUMERIC: "numerical",
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, f"{self.prog}: {message}")


def _color(text: str, code: str) -> str:
    if os.environ.get("REGE_BENCH_NO_COLOR") or os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _need_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_MISSING, f"no such file: {path}")
    return p


def _tables(args):
    """Load lexicon and alias tables; returns them plus (label, path) pairs for the manifest."""
    lex_path = _need_file(args.lexicon) if args.lexicon else default_lexicon_path()
    ali_path = _need_file(args.aliases) if args.aliases else default_aliases_path()
    labels = [args.lexicon or "<default lexicon>", args.aliases or "<default aliases>"]
    return load_lexicon(lex_path), load_au_aliases(ali_path), list(zip(labels, (lex_path, ali_path)))


# ----------------------------------------------------------------- extract
def cmd_extract(args) -> int:
    recs = load_records(_need_file(args.records), args.task)
    lexicon, aliases, table_paths = _tables(args)
    lines = []
    for r in recs:
        text = r.hypothesis if args.field == "hypothesis" else r.reference
        if text is None:
            raise CliError(EXIT_INVALID, f"record {r.id!r} has no {args.field}")
        if r.task == "emotion":
            label, trace = extract_emotion(text, lexicon)
        else:
            active, trace = extract_aus(text, aliases, lexicon.negation_cues)
            label = sorted(active)
        lines.append(json.dumps({"id": r.id, "task": r.task, "field": args.field, "label": label,
                                 "trace": trace.to_dict()}, ensure_ascii=False, sort_keys=True))
    config = {"task": args.task, "field": args.field, "records": args.records,
              "lexicon": table_paths[0][0], "aliases": table_paths[1][0]}
    manifest = build_manifest("extract", config, [(args.records, args.records), *table_paths], __version__, lines)
    header = json.dumps({"manifest": manifest}, sort_keys=True, ensure_ascii=False)
    atomic_write_text(args.out, header + "\n" + "".join(line + "\n" for line in lines))
    return EXIT_OK


# ------------------------------------------------------------------- score
def join_hypotheses(refs, hyps) -> list[SampleRecord]:
    """Attach hypothesis text to each reference record by id.

    A hypothesis record contributes its ``hypothesis`` field, or its
    ``reference`` field when it has none, so a reference file scored against
    itself is a valid self-check.
    """
    by_id = {h.id: (h.hypothesis if h.hypothesis is not None else h.reference) for h in hyps}
    missing = [r.id for r in refs if r.id not in by_id]
    if missing:
        raise RecordError(f"no hypothesis for record ids {missing[:5]}")
    extra = sorted(set(by_id) - {r.id for r in refs})
    if extra:
        raise RecordError(f"hypotheses for unknown record ids {extra[:5]}")
    return [replace(r, hypothesis=by_id[r.id]) for r in refs]


def cmd_score(args) -> int:
    if args.jobs < 1:
        raise CliError(EXIT_USAGE, "--jobs must be >= 1")
    refs = load_records(_need_file(args.refs), args.task)
    hyps = load_records(_need_file(args.hyps), args.task)
    lexicon, aliases, table_paths = _tables(args)
    kept, dropped = filter_annotations(refs, args.min_ref_tokens)
    records = join_hypotheses(kept, [h for h in hyps if h.id not in {d.id for d in dropped}])
    report = score_file(records, lexicon, aliases, args.rouge, jobs=args.jobs)
    payload = report.to_dict()
    payload["n_dropped_references"] = len(dropped)
    # jobs and the output path do not affect results, so they stay out of the echo
    config = {"task": args.task, "refs": args.refs, "hyps": args.hyps, "rouge": args.rouge,
              "min_ref_tokens": args.min_ref_tokens, "lexicon": table_paths[0][0],
              "aliases": table_paths[1][0]}
    inputs = [(args.refs, args.refs), (args.hyps, args.hyps), *table_paths]
    manifest = build_manifest("score", config, inputs, __version__, payload)
    atomic_write_text(args.out, dumps({"kind": "score", "manifest": manifest, "report": payload}))
    r = report.reported
    print(f"{args.task}: S_re {r['s_re']:.1f}  S_ge {r['s_ge']:.1f}  S_rege {r['s_rege']:.1f}  (n={report.n_samples})")
    return EXIT_OK


# --------------------------------------------------------------- toy-train
def cmd_toy_train(args) -> int:
    from .emola.ablation import ablate, format_table
    from .emola.audit import audit
    from .emola.config import ConfigError, ToyConfig, TrainConfig, load_config
    from .emola.model import ToyEmoLA
    from .emola.synthetic import SyntheticFaces, TaskSpec
    from .emola.train import TrainingError, evaluate, fit

    try:
        if args.config:
            model_cfg, train_cfg = load_config(_need_file(args.config))
        else:
            model_cfg, train_cfg = ToyConfig(), TrainConfig(lr=3e-3, steps=400, batch_size=32)
    except (ConfigError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_INVALID, f"bad config: {exc}") from exc
    if args.steps is not None:
        if args.steps < 0:
            raise CliError(EXIT_USAGE, "--steps must be >= 0")
        train_cfg = replace(train_cfg, steps=args.steps)
    model_cfg = model_cfg.replace(seed=args.seed)
    train_cfg = replace(train_cfg, seed=args.seed)
    spec = TaskSpec(seed=args.seed)

    model = ToyEmoLA(model_cfg)
    task = SyntheticFaces(model_cfg, spec)
    train_set = task.sample(args.n_train, seed=args.seed + 1)
    test_set = task.sample(args.n_test, seed=args.seed + 2)
    run = {
        "kind": "toy-train",
        "model": model_cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "task_spec": {"seed": spec.seed, "geometry_gain": spec.geometry_gain,
                      "appearance_gain": spec.appearance_gain, "noise": spec.noise},
        "audits": {"init": audit(model)},
        "losses": [],
    }
    try:
        if train_cfg.steps > 0:
            result = fit(model, train_set, train_cfg)
            run["losses"] = result.losses
            run["audits"]["final"] = audit(model)
            run["frozen_unchanged"] = result.frozen_hash_before == result.frozen_hash_after
            run["eval"] = evaluate(model, test_set)
        if args.ablate:
            rows = ablate(model_cfg, train_cfg, spec, n_train=args.n_train, n_test=args.n_test)
            run["ablation"] = [r.to_dict() for r in rows]
            print(format_table(rows))
    except TrainingError as exc:
        raise CliError(EXIT_NUMERIC, str(exc)) from exc
    config = {"config": args.config, "steps": train_cfg.steps, "seed": args.seed, "ablate": args.ablate,
              "n_train": args.n_train, "n_test": args.n_test}
    run["manifest"] = build_manifest("toy-train", config, [(args.config, args.config)] if args.config else [], __version__,
                                     {k: v for k, v in run.items() if k != "manifest"})
    atomic_write_text(args.out, dumps(run))
    if run["losses"]:
        print(f"trained {train_cfg.steps} steps: loss {run['losses'][0]:.3f} -> {run['losses'][-1]:.3f}, "
              f"test accuracy {100 * run['eval']['accuracy']:.1f}")
    return EXIT_OK


# ------------------------------------------------------------------ report
def _load_report_file(path):
    try:
        with open(_need_file(path), encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INVALID, f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise CliError(EXIT_INVALID, f"{path}: expected a JSON object")
    if data.get("kind") == "toy-train":
        return "toy", data
    body = data.get("report", data)
    if body.get("task") not in TASKS:
        raise CliError(EXIT_INVALID, f"{path}: not a score report or toy-train run")
    try:
        return body["task"], ScoreReport.from_dict(body)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(EXIT_INVALID, f"{path}: malformed score report ({exc})") from exc


def report_rows(paths) -> tuple[str, list[dict]]:
    """One row per file, values x100 with one decimal as in published tables."""
    if not paths:
        raise CliError(EXIT_USAGE, "report needs at least one file")
    loaded = [(Path(p).stem, *_load_report_file(p)) for p in paths]
    tasks = {t for _, t, _ in loaded}
    if len(tasks) > 1:
        raise CliError(EXIT_INVALID, f"cannot mix tasks in one report: {sorted(tasks)}")
    task = tasks.pop()
    rows = []
    for name, _, obj in loaded:
        if task == "toy":
            ev = obj.get("eval", {})
            rows.append({"name": name, "steps": len(obj.get("losses", [])),
                         "final_loss": obj["losses"][-1] if obj.get("losses") else None,
                         "accuracy": reported(ev["accuracy"]) if "accuracy" in ev else None})
            continue
        row = {"name": name}
        if task == "au":
            if sorted(obj.per_au_f1) == sorted(EVALUATED_AUS):
                row.update({f"AU{au}": reported(obj.per_au_f1[au]) for au in EVALUATED_AUS})
                s_re = reported(average_f1(obj.per_au_f1))
            else:
                s_re = reported(obj.s_re)
        else:
            s_re = reported(obj.s_re)
        s_ge = reported(obj.s_ge)
        row.update({"S_re": s_re, "S_ge": s_ge, "S_rege": round(s_re + s_ge, 1)})
        rows.append(row)
    return task, rows


def format_report(task, rows) -> str:
    if task == "toy":
        cols = ["steps", "final_loss", "accuracy"]
    elif task == "au":
        cols = [f"AU{au}" for au in EVALUATED_AUS] + ["S_re", "S_ge", "S_rege"]
    else:
        cols = ["S_re", "S_ge", "S_rege"]
    width = max([len("Method")] + [len(r["name"]) for r in rows])
    head = "Method".ljust(width) + "".join(f"{c:>8s}" for c in cols)

    def cell(v):
        if v is None:
            return f"{'-':>8s}"
        return f"{v:8.1f}" if isinstance(v, float) else f"{v:>8}"

    lines = [_color(head, "1")]
    for r in rows:
        lines.append(r["name"].ljust(width) + "".join(cell(r.get(c)) for c in cols))
    return "\n".join(lines)


def cmd_report(args) -> int:
    task, rows = report_rows(args.files)
    text = format_report(task, rows)
    print(text)
    if args.out:
        manifest = build_manifest("report", {"files": list(args.files)}, [(f, f) for f in args.files], __version__, rows)
        atomic_write_text(args.out, dumps({"kind": "report", "task": task, "rows": rows, "manifest": manifest}))
    return EXIT_OK


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rege-bench", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("extract", help="label each record and write traces", description=__doc__,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("--task", choices=TASKS, required=True)
    e.add_argument("--records", required=True)
    e.add_argument("--field", choices=("reference", "hypothesis"), default="reference")
    e.add_argument("--lexicon")
    e.add_argument("--aliases")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("score", help="compute S_re, S_ge and S_rege", description=__doc__,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--task", choices=TASKS, required=True)
    s.add_argument("--refs", required=True)
    s.add_argument("--hyps", required=True)
    s.add_argument("--lexicon")
    s.add_argument("--aliases")
    s.add_argument("--rouge", choices=ROUGE_VARIANTS, default="l")
    s.add_argument("--min-ref-tokens", type=int, default=1,
                   help="references with fewer tokens are dropped before scoring (default 1)")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    t = sub.add_parser("toy-train", help="train the desk-scale decoder on the synthetic task",
                       description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    t.add_argument("--config")
    t.add_argument("--steps", type=int)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--ablate", action="store_true")
    t.add_argument("--n-train", type=int, default=2000)
    t.add_argument("--n-test", type=int, default=500)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_toy_train)

    r = sub.add_parser("report", help="tabulate score or run files", description=__doc__,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("files", nargs="*")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except FileNotFoundError as exc:
        code, msg = EXIT_MISSING, str(exc)
    except (RecordError, LexiconError, MetricError) as exc:
        code, msg = EXIT_INVALID, str(exc)
    except Exception as exc:  # noqa: BLE001
        code, msg = EXIT_INTERNAL, f"{type(exc).__name__}: {exc}"
    print(json.dumps({"error": _EXIT_NAMES[code], "message": msg, "exit_code": code}), file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())
