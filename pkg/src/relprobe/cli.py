"""Command-line orchestration of the pipeline.

Subcommands: validate, synth, probegen, train, extract, probe, suite,
gradcheck, report. Exit codes: 0 success, 1 validation/processing failure,
2 usage error. Errors go to stderr prefixed with "error:".
"""

from __future__ import annotations

import argparse
import os
import sys

from . import probegen, probing, synth
from .corpus import (CorpusFormatError, load_contextual, load_corpus,
                     load_embeddings, random_embeddings, write_corpus)
from .encoders import InputConfig
from .probegen import PROFILES, TASKS, build_task, load_dataset, save_dataset
from .probing import (L2_GRID, baseline_reps, extract_reps, load_reps,
                      render_csv, render_text_table, run_suite, save_reps,
                      suite_table, train_probe)
from .training import (desk_encoder_config, desk_input_config, load_checkpoint,
                       presets, save_checkpoint, train_re)

KNOWN_KEYS = {
    "corpus", "corpus_format", "profile", "encoder", "masking", "word_dim",
    "pos_dim", "max_offset", "embeddings", "embeddings_dim", "contextual",
    "seed", "out", "task_profile", "tasks", "sources", "grid", "standardize",
    "jobs", "boe_dim", "boe_seed",
}

_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def read_config(path):
    """Plain key=value config; '#' starts a comment; unknown keys rejected."""
    cfg = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError("%s:%d: expected key=value" % (path, lineno))
            key, value = (x.strip() for x in line.split("=", 1))
            if key not in KNOWN_KEYS:
                raise UsageError("%s:%d: unknown config key %r" % (path, lineno, key))
            cfg[key] = value
    return cfg


class UsageError(Exception):
    pass


def _seed_from(cfg, default=0):
    env = os.environ.get("RELPROBE_SEED")
    if env is not None:
        return int(env)
    return int(cfg.get("seed", default))


def _load_corpus_cfg(cfg):
    if "corpus" not in cfg:
        raise UsageError("config key 'corpus' is required")
    return load_corpus(cfg["corpus"], cfg.get("corpus_format", "generic-jsonl"))


# ------------------------------------------------------------- subcommands

def cmd_validate(args):
    corpus = load_corpus(args.corpus, args.format)
    n_train, n_val, n_test = len(corpus.train), len(corpus.validation), len(corpus.test)
    total = n_train + n_val + n_test
    neg = sum(1 for s in corpus.all_sentences() if s.relation == corpus.negative_label)
    print("splits: train=%d validation=%d test=%d" % (n_train, n_val, n_test))
    print("relation labels: %d" % len(corpus.label_inventory))
    print("negative label: %s" % (corpus.negative_label or "-"))
    if corpus.negative_label is not None and total:
        print("negative fraction: %.1f%%" % (100.0 * neg / total))
    return 0


def cmd_synth(args):
    lexicons = synth.default_lexicons()
    if args.templates == "default":
        templates = synth.default_templates()
    elif args.templates == "type-pair":
        templates = synth.type_pair_templates()
    elif args.templates == "order-controlled":
        templates = ()
    else:
        templates = synth.load_templates(args.templates)
    cfg = synth.SynthConfig(n_train=args.n_train, n_val=args.n_val, n_test=args.n_test,
                            templates=templates, lexicons=lexicons, seed=args.seed,
                            pad_max=args.pad_max)
    if args.templates == "order-controlled":
        corpus = synth.generate_order_controlled(cfg)
    else:
        corpus = synth.generate(cfg)
    write_corpus(corpus, args.out)
    print("wrote %d/%d/%d sentences to %s"
          % (len(corpus.train), len(corpus.validation), len(corpus.test), args.out))
    return 0


def cmd_probegen(args):
    corpus = load_corpus(args.corpus, args.format)
    tasks = list(TASKS) if args.task == "all" else [args.task]
    os.makedirs(args.out, exist_ok=True)
    trees = probegen.TreeCache()
    for task in tasks:
        if args.all_skip_excluded and isinstance(args.profile, str) \
                and task in probegen.EXCLUDED.get(args.profile, ()):
            continue
        ds = build_task(task, corpus, args.profile, trees)
        path = os.path.join(args.out, "%s.jsonl" % task)
        save_dataset(ds, path)
        print("wrote %s (%d labels)" % (path, len(ds.labels)))
    return 0


def cmd_train(args):
    cfg = read_config(args.config)
    corpus = _load_corpus_cfg(cfg)
    seed = _seed_from(cfg)
    profile_name = cfg.get("profile", "desk-small")
    all_presets = presets()
    if profile_name not in all_presets:
        raise UsageError("unknown profile: %s" % profile_name)
    profile, enc_cfg = all_presets[profile_name]
    kind = cfg.get("encoder", "cnn")
    if enc_cfg is None:
        enc_cfg = desk_encoder_config(kind)
    elif enc_cfg.kind != kind and "encoder" in cfg:
        raise UsageError("profile %s is for encoder %s" % (profile_name, enc_cfg.kind))
    input_kwargs = {
        "masking": _BOOL.get(cfg.get("masking", "false").lower(), False),
        "word_dropout": profile.word_dropout,
        "embedding_dropout": profile.embedding_dropout,
        "pos_dim": int(cfg.get("pos_dim", profile.pos_dim)),
    }
    if "word_dim" in cfg:
        input_kwargs["word_dim"] = int(cfg["word_dim"])
    if "max_offset" in cfg:
        input_kwargs["max_offset"] = int(cfg["max_offset"])
    embeddings = None
    if "embeddings" in cfg:
        dim = int(cfg.get("embeddings_dim", cfg.get("word_dim", 300)))
        embeddings = load_embeddings(cfg["embeddings"], dim)
        input_kwargs.setdefault("word_dim", dim)
    contextual = None
    if "contextual" in cfg:
        contextual = load_contextual(cfg["contextual"])
        contextual.check_against(corpus.all_sentences())
        input_kwargs["use_contextual"] = True
        input_kwargs["contextual_dim"] = next(iter(contextual.matrices.values())).shape[1]
    if profile_name == "desk-small":
        input_cfg = desk_input_config(**input_kwargs)
    else:
        input_kwargs.setdefault("word_dim", 300)
        input_cfg = InputConfig(**input_kwargs)
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    model, history = train_re(corpus, input_cfg, enc_cfg, profile, seed=seed,
                              contextual=contextual, embeddings=embeddings,
                              log=lambda m: print(m))
    save_checkpoint(model, os.path.join(out, "checkpoint.rpck"))
    with open(os.path.join(out, "history.csv"), "w", encoding="utf-8") as f:
        f.write(history.to_csv())
    print("best validation F1: %.4f" % history.best_f1())
    return 0


def _baseline_table(args_or_cfg, sentences):
    if getattr(args_or_cfg, "embeddings", None):
        return load_embeddings(args_or_cfg.embeddings, args_or_cfg.boe_dim)
    tokens = {t for s in sentences for t in s.tokens}
    return random_embeddings(tokens, getattr(args_or_cfg, "boe_dim", 16),
                             getattr(args_or_cfg, "boe_seed", 0))


def cmd_extract(args):
    corpus = load_corpus(args.corpus, args.format)
    sentences = corpus.split(args.split)
    if args.baseline:
        table = _baseline_table(args, corpus.all_sentences()) if args.baseline == "boe" else None
        rep = baseline_reps(args.baseline, sentences, table)
    else:
        if not args.checkpoint:
            raise UsageError("either --checkpoint or --baseline is required")
        model = load_checkpoint(args.checkpoint)
        contextual = load_contextual(args.contextual) if args.contextual else None
        rep = extract_reps(model, sentences, contextual=contextual)
    save_reps(rep, args.out)
    print("wrote %s (%d x %d)" % (args.out, rep.rows.shape[0], rep.rows.shape[1]))
    return 0


def cmd_probe(args):
    task = load_dataset(args.task)
    reps = {"train": load_reps(args.train), "validation": load_reps(args.val),
            "test": load_reps(args.test)}
    grid = tuple(float(x) for x in args.grid.split(",")) if args.grid else L2_GRID
    result = train_probe(reps, task, grid=grid, standardize=args.standardize)
    header = ["task", "source", "chosen_l2", "val_accuracy", "test_accuracy"]
    row = [result.task, result.source, "%g" % result.chosen_l2,
           "%.4f" % result.val_accuracy, "%.4f" % result.test_accuracy]
    out = render_csv(header, [row])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(out)
    print(out, end="")
    return 0


def cmd_suite(args):
    cfg = read_config(args.config)
    corpus = _load_corpus_cfg(cfg)
    seed = _seed_from(cfg)
    task_profile = cfg.get("task_profile", "tacred")
    task_names = cfg.get("tasks", "all")
    if task_names == "all":
        excluded = probegen.EXCLUDED.get(task_profile, ())
        names = [t for t in TASKS if t not in excluded]
    else:
        names = [t.strip() for t in task_names.split(",")]
    trees = probegen.TreeCache()
    tasks = [build_task(t, corpus, task_profile, trees) for t in names]
    split_sents = {"train": corpus.train, "validation": corpus.validation,
                   "test": corpus.test}
    source_names = [s.strip() for s in cfg.get("sources", "length,argdist,boe").split(",")]
    boe_dim = int(cfg.get("boe_dim", 16))
    boe_seed = int(cfg.get("boe_seed", seed))
    if "embeddings" in cfg:
        table = load_embeddings(cfg["embeddings"], int(cfg.get("embeddings_dim", boe_dim)))
    else:
        tokens = {t for s in corpus.all_sentences() for t in s.tokens}
        table = random_embeddings(tokens, boe_dim, boe_seed)
    contextual = load_contextual(cfg["contextual"]) if "contextual" in cfg else None
    sources = []
    for name in source_names:
        if name in probing.BASELINES:
            reps = {sp: baseline_reps(name, ss, table if name == "boe" else None)
                    for sp, ss in split_sents.items()}
            sources.append((name, reps))
        elif name.startswith("ck:"):
            model = load_checkpoint(name[3:])
            label = "encoder:%s" % model.enc_cfg.kind
            reps = {sp: extract_reps(model, ss, source=label, contextual=contextual)
                    for sp, ss in split_sents.items()}
            sources.append((label, reps))
        else:
            raise UsageError("unknown source %r (use length|argdist|boe|ck:<path>)" % name)
    grid = tuple(float(x) for x in cfg.get("grid", "").split(",")) if cfg.get("grid") \
        else L2_GRID
    standardize = _BOOL.get(cfg.get("standardize", "false").lower(), False)
    jobs = args.jobs or int(cfg.get("jobs", 1))
    results = run_suite(sources, tasks, grid=grid, standardize=standardize, jobs=jobs)
    header, rows = suite_table(results, sources, tasks)
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    csv_text = render_csv(header, rows)
    with open(os.path.join(out, "suite.csv"), "w", encoding="utf-8") as f:
        f.write(csv_text)
    with open(os.path.join(out, "suite.txt"), "w", encoding="utf-8") as f:
        f.write(render_text_table(header, rows))
    print(csv_text, end="")
    return 0


def cmd_gradcheck(args):
    from .verify import gradcheck_all
    results = gradcheck_all()
    worst = 0.0
    for name in sorted(results):
        err = results[name]
        worst = max(worst, err)
        print("%-24s %.3e %s" % (name, err, "ok" if err < 1e-4 else "FAIL"))
    print("max relative error: %.3e" % worst)
    return 0 if worst < 1e-4 else 1


def cmd_report(args):
    with open(args.csv, encoding="utf-8") as f:
        lines = [l.rstrip("\n") for l in f if l.strip()]
    header = lines[0].split(",")
    rows = [l.split(",") for l in lines[1:]]
    print(render_text_table(header, rows), end="")
    return 0


# ------------------------------------------------------------------ parser

def build_parser():
    p = argparse.ArgumentParser(prog="relprobe")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="validate a corpus and print a report")
    v.add_argument("--corpus", required=True)
    v.add_argument("--format", default="generic-jsonl")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--templates", default="default",
                   help="default | type-pair | order-controlled | path to jsonl")
    s.add_argument("--n-train", type=int, default=64)
    s.add_argument("--n-val", type=int, default=16)
    s.add_argument("--n-test", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pad-max", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    g = sub.add_parser("probegen", help="generate probing-task datasets")
    g.add_argument("--corpus", required=True)
    g.add_argument("--format", default="generic-jsonl")
    g.add_argument("--profile", default="tacred")
    g.add_argument("--task", default="all")
    g.add_argument("--out", required=True)
    g.add_argument("--all-skip-excluded", action="store_true",
                   help="with --task all, silently skip profile-excluded tasks")
    g.set_defaults(func=cmd_probegen)

    t = sub.add_parser("train", help="train an RE model from a config file")
    t.add_argument("--config", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("extract", help="extract frozen-encoder representations")
    e.add_argument("--corpus", required=True)
    e.add_argument("--format", default="generic-jsonl")
    e.add_argument("--split", default="train",
                   choices=("train", "validation", "test"))
    e.add_argument("--checkpoint")
    e.add_argument("--baseline", choices=probing.BASELINES)
    e.add_argument("--embeddings")
    e.add_argument("--boe-dim", type=int, default=16)
    e.add_argument("--boe-seed", type=int, default=0)
    e.add_argument("--contextual")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_extract)

    b = sub.add_parser("probe", help="train one probing classifier")
    b.add_argument("--task", required=True)
    b.add_argument("--train", required=True)
    b.add_argument("--val", required=True)
    b.add_argument("--test", required=True)
    b.add_argument("--grid")
    b.add_argument("--standardize", action="store_true")
    b.add_argument("--out")
    b.set_defaults(func=cmd_probe)

    u = sub.add_parser("suite", help="run the full probing suite from a config file")
    u.add_argument("--config", required=True)
    u.add_argument("--jobs", type=int)
    u.set_defaults(func=cmd_suite)

    c = sub.add_parser("gradcheck", help="gradient-check all ops and encoders")
    c.add_argument("--all", action="store_true")
    c.set_defaults(func=cmd_gradcheck)

    r = sub.add_parser("report", help="render a CSV as an aligned text table")
    r.add_argument("--csv", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except (CorpusFormatError, ValueError, RuntimeError, OSError, KeyError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
