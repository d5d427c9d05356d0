"""Command-line pipeline.

Subcommands mirror the processing stages: ``generate`` turns a tagged
corpus into cloze triples, ``build-vocab`` fixes the id space,
``pretrain``/``adapt`` run the two training steps, ``resolve`` predicts
antecedents for gap annotations, and ``eval`` scores predictions per
domain.  Every command writes a ``<output>.manifest.json`` describing
inputs, arguments, and deterministic run statistics (never timestamps,
so reruns are comparable byte for byte).

Exit codes: 0 on success, 2 for problems with user-supplied files or
flags, 1 for internal failures.
"""

import argparse
import json
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, evaluator, pseudogen, resolver, tensorcore, trainer
from .corpus import load_azp_instances, load_documents
from .errors import InputError, UnkOverflowError, ZPReaderError
from .pseudogen import DEFAULT_BLANK, GenerationConfig, azp_instances_to_triples
from .reader import ReaderConfig, init_params, load_checkpoint, save_checkpoint
from .resolver import Resolution
from .trainer import TrainConfig
from .vocab import (
    DEFAULT_SHORTLIST_SIZE,
    DEFAULT_UNK_SLOTS,
    build_shortlist,
    load_vocabulary,
    map_triple,
)

# Second word of seed sequences, so different stages never share a stream.
_VAL_SPLIT_STREAM = 101


def _require(path, what="file"):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {path}")
    return p


def _write_manifest(out_path, command: str, arguments: dict, stats: dict) -> None:
    manifest = {
        "package_version": __version__,
        "gru_backend": tensorcore.BACKEND,
        "command": command,
        "arguments": arguments,
        "stats": stats,
    }
    text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    Path(f"{out_path}.manifest.json").write_text(text, encoding="utf-8")


# ---------------------------------------------------------------- generate

def _gen_doc(payload):
    doc, cfg = payload
    return pseudogen.sample_triples(doc, cfg)


def cmd_generate(args) -> int:
    docs = load_documents(_require(args.corpus, "corpus"))
    cfg = GenerationConfig(triples_per_document=args.triples_per_doc,
                           min_answer_frequency=args.min_answer_freq,
                           rng_seed=args.seed, blank_symbol=args.blank)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            per_doc = list(pool.map(_gen_doc, ((d, cfg) for d in docs), chunksize=16))
    else:
        per_doc = [pseudogen.sample_triples(d, cfg) for d in docs]
    triples = [t for batch in per_doc for t in batch]
    pseudogen.write_triples(triples, args.out)
    stats = {
        "documents": len(docs),
        "sentences": sum(len(d.sentences) for d in docs),
        "queries": len(triples),
    }
    if args.azp:
        if not args.task_out:
            raise InputError("--task-out is required when --azp is given")
        instances, resorted = load_azp_instances(_require(args.azp, "gap file"), docs)
        by_id = {d.doc_id: d for d in docs}
        task_triples, skipped = azp_instances_to_triples(instances, by_id, cfg)
        pseudogen.write_triples(task_triples, args.task_out)
        stats.update(task_queries=len(task_triples), task_skipped_no_gold=skipped,
                     task_candidates_resorted=resorted)
    print(f"documents={stats['documents']} sentences={stats['sentences']} "
          f"queries={stats['queries']}")
    if args.azp:
        print(f"task_queries={stats['task_queries']} "
              f"task_skipped_no_gold={stats['task_skipped_no_gold']}")
    arguments = {k: getattr(args, k) for k in
                 ("corpus", "out", "azp", "task_out", "seed",
                  "triples_per_doc", "min_answer_freq", "blank", "workers")}
    _write_manifest(args.out, "generate", arguments, stats)
    return 0


# -------------------------------------------------------------- build-vocab

def cmd_build_vocab(args) -> int:
    triples = []
    for p in args.triples:
        triples.extend(pseudogen.load_triples(_require(p, "triples file"),
                                              blank_symbol=args.blank))
    voc = build_shortlist(triples, args.shortlist_size, args.unk_slots, args.blank)
    voc.save(args.out)
    fp = voc.fingerprint()
    print(f"shortlist={voc.shortlist_size} total_ids={voc.total_size} "
          f"fingerprint={fp[:12]}")
    arguments = {"triples": list(args.triples), "out": args.out,
                 "shortlist_size": args.shortlist_size,
                 "unk_slots": args.unk_slots, "blank": args.blank}
    _write_manifest(args.out, "build-vocab", arguments, {
        "samples": len(triples),
        "shortlist": voc.shortlist_size,
        "total_ids": voc.total_size,
        "fingerprint": fp,
    })
    return 0


# ------------------------------------------------------- pretrain / adapt

def _map_with_drops(triples, voc):
    mapped, dropped = [], 0
    for t in triples:
        try:
            mapped.append(map_triple(t, voc))
        except UnkOverflowError:
            dropped += 1
    return mapped, dropped


def _split_val(mapped, fraction: float, seed: int):
    if not 0.0 <= fraction < 1.0:
        raise InputError(f"--val-fraction must be in [0, 1), got {fraction}")
    if fraction == 0.0:
        return mapped, []
    n_val = max(1, int(round(fraction * len(mapped))))
    if n_val >= len(mapped):
        raise InputError("validation split leaves no training samples")
    order = np.random.default_rng([seed, _VAL_SPLIT_STREAM]).permutation(len(mapped))
    val_idx = set(order[:n_val].tolist())
    train = [m for i, m in enumerate(mapped) if i not in val_idx]
    val = [mapped[i] for i in sorted(val_idx)]
    return train, val


def _train_config(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, batch_size=args.batch_size,
                       clip_norm=args.clip, max_epochs=args.epochs,
                       patience=args.patience, rng_seed=args.seed)


def _report_stats(report, dropped, n_train, n_val):
    return {
        "samples_train": n_train,
        "samples_val": n_val,
        "samples_dropped_unk_overflow": dropped,
        "epochs": [
            {"epoch": e.epoch, "train_loss": e.train_loss,
             "val_loss": e.val_loss, "improved": e.improved}
            for e in report.epochs
        ],
        "best_epoch": report.best_epoch,
        "best_val_loss": report.best_val_loss,
        "optimizer_steps": report.steps,
        "max_post_clip_norm": max(report.clip_norms) if report.clip_norms else 0.0,
    }


def _load_training_data(args, voc):
    triples = pseudogen.load_triples(_require(args.triples, "triples file"),
                                     blank_symbol=voc.blank_form)
    mapped, dropped = _map_with_drops(triples, voc)
    if not mapped:
        raise InputError("no trainable samples remain after unknown-slot filtering")
    train_set, val_set = _split_val(mapped, args.val_fraction, args.seed)
    return train_set, val_set, dropped


def cmd_pretrain(args) -> int:
    voc = load_vocabulary(_require(args.vocab, "vocabulary"))
    train_set, val_set, dropped = _load_training_data(args, voc)
    rcfg = ReaderConfig(vocab_total=voc.total_size, embed_dim=args.embed_dim,
                        hidden_dim=args.hidden_dim, rng_seed=args.seed,
                        dtype=args.dtype)
    params = init_params(rcfg)
    best, report = trainer.train(params, train_set, val_set, _train_config(args))
    save_checkpoint(args.out, best, rcfg, voc.fingerprint(),
                    extra={"stage": "pretrain", "best_epoch": report.best_epoch})
    print(f"epochs={len(report.epochs)} best_epoch={report.best_epoch} "
          f"best_val_loss={report.best_val_loss:.6f} dropped={dropped}")
    arguments = {k: getattr(args, k) for k in
                 ("triples", "vocab", "out", "seed", "embed_dim", "hidden_dim",
                  "dtype", "lr", "batch_size", "clip", "epochs", "patience",
                  "val_fraction")}
    _write_manifest(args.out, "pretrain", arguments,
                    _report_stats(report, dropped, len(train_set), len(val_set)))
    return 0


def cmd_adapt(args) -> int:
    voc = load_vocabulary(_require(args.vocab, "vocabulary"))
    train_set, val_set, dropped = _load_training_data(args, voc)
    params, rcfg, header = load_checkpoint(_require(args.init, "checkpoint"),
                                           expected_fingerprint=voc.fingerprint())
    best, report = trainer.train(params, train_set, val_set, _train_config(args))
    save_checkpoint(args.out, best, rcfg, voc.fingerprint(),
                    extra={"stage": "adapt", "best_epoch": report.best_epoch,
                           "initialized_from_stage": header["extra"].get("stage")})
    print(f"epochs={len(report.epochs)} best_epoch={report.best_epoch} "
          f"best_val_loss={report.best_val_loss:.6f} dropped={dropped}")
    arguments = {k: getattr(args, k) for k in
                 ("triples", "vocab", "init", "out", "seed", "lr", "batch_size",
                  "clip", "epochs", "patience", "val_fraction")}
    _write_manifest(args.out, "adapt", arguments,
                    _report_stats(report, dropped, len(train_set), len(val_set)))
    return 0


# ----------------------------------------------------------------- resolve

_worker_state = {}


def _init_resolve_worker(checkpoint, vocab_path, corpus_path, restrict):
    docs = load_documents(corpus_path)
    voc = load_vocabulary(vocab_path)
    params, _, _ = load_checkpoint(checkpoint, expected_fingerprint=voc.fingerprint())
    _worker_state["docs_by_id"] = {d.doc_id: d for d in docs}
    _worker_state["voc"] = voc
    _worker_state["params"] = params
    _worker_state["restrict"] = restrict


def _resolve_one(instance):
    st = _worker_state
    return resolver.resolve_or_miss(st["params"], st["voc"],
                                    st["docs_by_id"][instance.doc_id], instance,
                                    restrict_to_context=st["restrict"])


def cmd_resolve(args) -> int:
    docs = load_documents(_require(args.corpus, "corpus"))
    instances, resorted = load_azp_instances(_require(args.azp, "gap file"), docs)
    voc = load_vocabulary(_require(args.vocab, "vocabulary"))
    restrict = not args.unrestricted
    if args.workers > 1:
        _require(args.checkpoint, "checkpoint")
        with ProcessPoolExecutor(
                max_workers=args.workers, initializer=_init_resolve_worker,
                initargs=(args.checkpoint, args.vocab, args.corpus, restrict)) as pool:
            pairs = list(pool.map(_resolve_one, instances, chunksize=8))
        resolutions = [r for r, _ in pairs]
        stats = resolver.ResolveStats(instances=len(instances),
                                      unk_overflow=sum(o for _, o in pairs))
    else:
        params, _, _ = load_checkpoint(_require(args.checkpoint, "checkpoint"),
                                       expected_fingerprint=voc.fingerprint())
        resolutions, stats = resolver.resolve(params, voc, docs, instances,
                                              restrict_to_context=restrict)
    resolver.write_resolutions(resolutions, args.out)
    with_gold = sum(1 for r in resolutions if r.gold_index >= 0)
    correct = sum(1 for r in resolutions if r.correct)
    print(f"instances={stats.instances} unk_overflow={stats.unk_overflow} "
          f"with_gold={with_gold} correct={correct}")
    arguments = {k: getattr(args, k) for k in
                 ("corpus", "azp", "vocab", "checkpoint", "out",
                  "unrestricted", "workers")}
    _write_manifest(args.out, "resolve", arguments, {
        "instances": stats.instances,
        "unk_overflow": stats.unk_overflow,
        "candidates_resorted": resorted,
        "with_gold": with_gold,
        "correct": correct,
    })
    return 0


# -------------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    docs = load_documents(_require(args.corpus, "corpus"))
    instances, _ = load_azp_instances(_require(args.azp, "gap file"), docs)
    preds = resolver.load_resolutions(_require(args.predictions, "predictions"))
    by_gap = {}
    for inst in instances:
        key = (inst.doc_id, *inst.gap_position)
        if key in by_gap:
            raise InputError(f"duplicate gap annotation {key}")
        by_gap[key] = inst
    resolutions, seen = [], set()
    for p in preds:
        key = (p.doc_id, p.sent_index, p.token_slot)
        if key in seen:
            raise InputError(f"duplicate prediction for gap {key}")
        seen.add(key)
        inst = by_gap.get(key)
        if inst is None:
            raise InputError(f"prediction for unannotated gap {key}")
        if inst.gold_candidate_index is None:
            raise InputError(f"gap {key} has no gold antecedent; cannot score")
        correct = p.matched_index == inst.gold_candidate_index
        if correct != p.correct:
            raise InputError(
                f"gap {key}: predictions file marks correct={int(p.correct)} "
                f"but gold index {inst.gold_candidate_index} implies {int(correct)}")
        resolutions.append(Resolution(
            doc_id=p.doc_id, sent_index=p.sent_index, token_slot=p.token_slot,
            predicted_form=p.predicted_form, matched_index=p.matched_index,
            gold_index=inst.gold_candidate_index, correct=correct))
    if len(resolutions) < len(by_gap):
        raise InputError(
            f"{len(by_gap) - len(resolutions)} annotated gaps have no prediction")
    per_domain, overall = evaluator.score(resolutions,
                                          {d.doc_id: d.domain for d in docs})
    print(evaluator.format_score_table(per_domain, overall))
    evaluator.write_scores_tsv(per_domain, overall, args.out)
    arguments = {k: getattr(args, k) for k in ("predictions", "azp", "corpus", "out")}
    _write_manifest(args.out, "eval", arguments, {
        "instances": len(resolutions),
        "per_domain": {d: {"hits": s.hits, "total": s.total}
                       for d, s in per_domain.items()},
        "overall": {"hits": overall.hits, "total": overall.total,
                    "f_score": overall.f_score},
    })
    return 0


# ------------------------------------------------------------------ parser

def _add_train_flags(p):
    p.add_argument("--lr", type=float, default=0.001, help="ADAM learning rate")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--clip", type=float, default=10.0,
                   help="global gradient-norm threshold")
    p.add_argument("--epochs", type=int, default=10, help="maximum epochs")
    p.add_argument("--patience", type=int, default=2,
                   help="stop after this many epochs without improvement")
    p.add_argument("--val-fraction", type=float, default=0.1,
                   help="held-out share for epoch selection (0 disables)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="zpreader",
        description="Zero-pronoun reader: pseudo-sample generation, two-step "
                    "training, and antecedent resolution.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build cloze triples from a tagged corpus")
    g.add_argument("--corpus", required=True)
    g.add_argument("--out", required=True, help="pseudo triples output")
    g.add_argument("--azp", help="gap annotations; converts gold gaps to task triples")
    g.add_argument("--task-out", help="task triples output (with --azp)")
    g.add_argument("--triples-per-doc", type=int, default=1)
    g.add_argument("--min-answer-freq", type=int, default=2)
    g.add_argument("--blank", default=DEFAULT_BLANK)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--workers", type=int, default=1)
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("build-vocab", help="fix the id space from triples")
    v.add_argument("--triples", required=True, nargs="+")
    v.add_argument("--out", required=True)
    v.add_argument("--shortlist-size", type=int, default=DEFAULT_SHORTLIST_SIZE)
    v.add_argument("--unk-slots", type=int, default=DEFAULT_UNK_SLOTS)
    v.add_argument("--blank", default=DEFAULT_BLANK)
    v.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("pretrain", help="train a fresh reader on pseudo triples")
    p.add_argument("--triples", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="checkpoint output")
    p.add_argument("--embed-dim", type=int, default=256)
    p.add_argument("--hidden-dim", type=int, default=256)
    p.add_argument("--dtype", choices=("float64", "float32"), default="float64")
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    p.set_defaults(func=cmd_pretrain)

    a = sub.add_parser("adapt", help="continue training from a checkpoint "
                                     "on task triples")
    a.add_argument("--triples", required=True)
    a.add_argument("--vocab", required=True)
    a.add_argument("--init", required=True, help="checkpoint to start from")
    a.add_argument("--out", required=True, help="checkpoint output")
    a.add_argument("--seed", type=int, default=0)
    _add_train_flags(a)
    a.set_defaults(func=cmd_adapt)

    r = sub.add_parser("resolve", help="predict antecedents for annotated gaps")
    r.add_argument("--corpus", required=True)
    r.add_argument("--azp", required=True)
    r.add_argument("--vocab", required=True)
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--out", required=True, help="predictions output")
    r.add_argument("--unrestricted", action="store_true",
                   help="argmax over the full vocabulary instead of the context")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_resolve)

    e = sub.add_parser("eval", help="score predictions per domain")
    e.add_argument("--predictions", required=True)
    e.add_argument("--azp", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--out", required=True, help="scores TSV output")
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ZPReaderError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
