"""Deterministic synthetic-corpus generator with authored dependency trees.

Templates are generic-jsonl records whose tokens may contain slot markers
like "[PER]"; slots are filled from per-type lexicons. The marker "[ANY]"
draws the entity type itself at random (used for the entity-type
experiments), and relation strings may reference the drawn types via
"{head}" / "{tail}" placeholders. Optional padding clauses ("in the X of
the Y ...") are appended to vary sentence length and tree depth.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, Sentence, Span, sentence_to_record, validate_sentence

_SLOT_RE = re.compile(r"^\[([A-Z_]+)\]$")


@dataclass(frozen=True)
class Template:
    tokens: tuple
    pos: tuple
    ner: tuple
    dep_head: tuple
    dep_label: tuple
    head: Span
    tail: Span
    relation: str


@dataclass
class SynthConfig:
    n_train: int = 64
    n_val: int = 16
    n_test: int = 32
    templates: tuple = ()
    lexicons: dict = field(default_factory=dict)
    seed: int = 0
    pad_max: int = 0  # max number of appended "of the X" padding units
    entity_types: tuple = ("PER", "ORG", "LOC")


def default_lexicons():
    return {
        "PER": ("alice", "bob", "carol", "david", "erin", "frank", "grace", "henry",
                "irene", "jack", "karen", "leo", "mona", "nina", "oscar", "paula"),
        "ORG": ("acme", "globex", "initech", "umbrella", "stark", "wayne", "hooli",
                "soylent", "cyberdyne", "tyrell", "aperture", "vandelay"),
        "LOC": ("berlin", "paris", "london", "tokyo", "madrid", "oslo", "cairo",
                "lima", "quito", "dakar", "hanoi", "perth"),
        "TITLE": ("chief", "director", "manager", "analyst", "engineer", "president"),
        "VERB": ("acquired", "bought", "joined", "visited", "sued", "hired"),
        "NOUN": ("market", "city", "group", "sector", "region", "valley", "area",
                 "district", "council", "board"),
    }


def default_templates():
    return (
        # "[PER] , [TITLE] of [ORG] ," -> per:title
        Template(
            tokens=("[PER]", ",", "[TITLE]", "of", "[ORG]", ","),
            pos=("NNP", ",", "NN", "IN", "NNP", ","),
            ner=("PER", "O", "O", "O", "ORG", "O"),
            dep_head=(0, 1, 1, 5, 3, 1),
            dep_label=("root", "punct", "appos", "case", "nmod", "punct"),
            head=Span(0, 0),
            tail=Span(2, 2),
            relation="per:title",
        ),
        # "[ORG] [VERB] [ORG]" -> org:deal
        Template(
            tokens=("[ORG]", "[VERB]", "[ORG]"),
            pos=("NNP", "VBD", "NNP"),
            ner=("ORG", "O", "ORG"),
            dep_head=(2, 0, 2),
            dep_label=("nsubj", "root", "dobj"),
            head=Span(0, 0),
            tail=Span(2, 2),
            relation="org:deal",
        ),
        # "[PER] [VERB] [LOC]" -> per:visited
        Template(
            tokens=("[PER]", "[VERB]", "[LOC]"),
            pos=("NNP", "VBD", "NNP"),
            ner=("PER", "O", "LOC"),
            dep_head=(2, 0, 2),
            dep_label=("nsubj", "root", "dobj"),
            head=Span(0, 0),
            tail=Span(2, 2),
            relation="per:visited",
        ),
        # "[PER] [VERB] the [ORG] chief [PER]" -> per:employee_of (entity between args)
        Template(
            tokens=("[PER]", "[VERB]", "the", "[ORG]", "chief", "[PER]"),
            pos=("NNP", "VBD", "DT", "NNP", "NN", "NNP"),
            ner=("PER", "O", "O", "ORG", "O", "PER"),
            dep_head=(2, 0, 6, 6, 6, 2),
            dep_label=("nsubj", "root", "det", "compound", "compound", "dobj"),
            head=Span(0, 0),
            tail=Span(5, 5),
            relation="per:employee_of",
        ),
        # "[ORG] was [VERB] by [PER]" -> per:agent_of (tail precedes head)
        Template(
            tokens=("[ORG]", "was", "[VERB]", "by", "[PER]"),
            pos=("NNP", "VBD", "VBN", "IN", "NNP"),
            ner=("ORG", "O", "O", "O", "PER"),
            dep_head=(3, 3, 0, 5, 3),
            dep_label=("nsubjpass", "auxpass", "root", "case", "nmod"),
            head=Span(4, 4),
            tail=Span(0, 0),
            relation="per:agent_of",
        ),
    )


def type_pair_templates():
    """Templates whose relation label is a function of the argument types."""
    return (
        Template(
            tokens=("[ANY]", "[VERB]", "[ANY]"),
            pos=("NNP", "VBD", "NNP"),
            ner=("*", "O", "*"),
            dep_head=(2, 0, 2),
            dep_label=("nsubj", "root", "dobj"),
            head=Span(0, 0),
            tail=Span(2, 2),
            relation="rel:{head}:{tail}",
        ),
        Template(
            tokens=("[ANY]", "[VERB]", "[ANY]", "in", "the", "[NOUN]"),
            pos=("NNP", "VBD", "NNP", "IN", "DT", "NN"),
            ner=("*", "O", "*", "O", "O", "O"),
            dep_head=(2, 0, 2, 6, 6, 2),
            dep_label=("nsubj", "root", "dobj", "case", "det", "nmod"),
            head=Span(0, 0),
            tail=Span(2, 2),
            relation="rel:{head}:{tail}",
        ),
    )


def load_templates(path):
    """Read templates from a jsonl file with the generic-jsonl record schema."""
    templates = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError("%s:%d: malformed template (%s)" % (path, lineno, e))
            templates.append(Template(
                tokens=tuple(rec["tokens"]),
                pos=tuple(rec["pos"]),
                ner=tuple(rec["ner"]),
                dep_head=tuple(rec["dep_head"]),
                dep_label=tuple(rec["dep_label"]),
                head=Span(rec["head_start"], rec["head_end"]),
                tail=Span(rec["tail_start"], rec["tail_end"]),
                relation=rec["relation"],
            ))
    return tuple(templates)


def _choice(rng, items):
    return items[int(rng.integers(len(items)))]


def _fill_template(tpl: Template, cfg: SynthConfig, rng, sid):
    tokens = list(tpl.tokens)
    ner = list(tpl.ner)
    slot_types = {}  # token index -> drawn entity type (for [ANY] slots)
    for i, tok in enumerate(tokens):
        m = _SLOT_RE.match(tok)
        if not m:
            continue
        slot = m.group(1)
        if slot == "ANY":
            slot = _choice(rng, cfg.entity_types)
            ner[i] = slot
        if slot not in cfg.lexicons:
            raise ValueError("no lexicon for slot %s" % slot)
        tokens[i] = _choice(rng, cfg.lexicons[slot])
        slot_types[i] = slot
    relation = tpl.relation
    if "{head}" in relation or "{tail}" in relation:
        head_type = ner[tpl.head.start]
        tail_type = ner[tpl.tail.start]
        relation = relation.replace("{head}", head_type).replace("{tail}", tail_type)
    pos = list(tpl.pos)
    dep_head = list(tpl.dep_head)
    dep_label = list(tpl.dep_label)
    # padding clause: "in the X (of the Y)*" hanging off the root token
    if cfg.pad_max > 0:
        n_units = int(rng.integers(0, cfg.pad_max + 1))
        nouns = cfg.lexicons.get("NOUN", ("thing",))
        root_idx = dep_head.index(0)
        attach = root_idx + 1  # 1-based head of the first padding noun
        for u in range(n_units):
            prep = "in" if u == 0 else "of"
            noun = _choice(rng, nouns)
            base = len(tokens)
            tokens += [prep, "the", noun]
            pos += ["IN", "DT", "NN"]
            ner += ["O", "O", "O"]
            noun_1b = base + 3
            dep_head += [noun_1b, noun_1b, attach]
            dep_label += ["case", "det", "nmod"]
            attach = noun_1b
    return Sentence(
        id=sid,
        tokens=tuple(tokens),
        pos=tuple(pos),
        ner=tuple(ner),
        dep_head=tuple(dep_head),
        dep_label=tuple(dep_label),
        head=tpl.head,
        tail=tpl.tail,
        relation=relation,
    )


def generate(config: SynthConfig) -> Corpus:
    """Generate a fully annotated corpus; identical config+seed => identical corpus."""
    if not config.templates:
        raise ValueError("templates must be non-empty")
    rng = np.random.default_rng(config.seed)
    splits = {}
    for split, n in (("train", config.n_train), ("val", config.n_val), ("test", config.n_test)):
        sentences = []
        for i in range(n):
            tpl = _choice(rng, config.templates)
            s = _fill_template(tpl, config, rng, "%s-%05d" % (split, i))
            problems = validate_sentence(s)
            if problems:
                raise ValueError("generated invalid sentence %s: %s" % (s.id, problems))
            sentences.append(s)
        splits[split] = tuple(sentences)
    inventory = tuple(sorted({s.relation for s in splits["train"]}))
    return Corpus(train=splits["train"], validation=splits["val"], test=splits["test"],
                  label_inventory=inventory, negative_label=None)


def generate_order_controlled(config: SynthConfig, seed=None) -> Corpus:
    """Corpus of sentence pairs with identical token multisets but swapped
    argument order; argument-order labels are balanced exactly 50/50.

    n_train/n_val/n_test count pairs (two sentences each).
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    ents = config.lexicons.get("ORG") or config.lexicons.get("PER")
    verbs = config.lexicons.get("VERB", ("acquired",))
    if not ents or len(ents) < 2:
        raise ValueError("no lexicon with at least 2 entities for slot ORG/PER")
    splits = {}
    for split, n in (("train", config.n_train), ("val", config.n_val), ("test", config.n_test)):
        sentences = []
        for i in range(n):
            h = _choice(rng, ents)
            t = _choice(rng, [e for e in ents if e != h])
            v = _choice(rng, verbs)
            base = dict(
                pos=("NNP", "VBD", "NNP"),
                ner=("ORG", "O", "ORG"),
                dep_head=(2, 0, 2),
                dep_label=("nsubj", "root", "dobj"),
                relation="related",
            )
            fwd = Sentence(id="%s-%05d-f" % (split, i), tokens=(h, v, t),
                           head=Span(0, 0), tail=Span(2, 2), **base)
            rev = Sentence(id="%s-%05d-r" % (split, i), tokens=(t, v, h),
                           head=Span(2, 2), tail=Span(0, 0), **base)
            sentences += [fwd, rev]
        splits[split] = tuple(sentences)
    return Corpus(train=splits["train"], validation=splits["val"], test=splits["test"],
                  label_inventory=("related",), negative_label=None)


def write_templates(templates, path):
    with open(path, "w", encoding="utf-8") as f:
        for i, tpl in enumerate(templates):
            s = Sentence(id="tpl-%d" % i, tokens=tpl.tokens, pos=tpl.pos, ner=tpl.ner,
                         dep_head=tpl.dep_head, dep_label=tpl.dep_label,
                         head=tpl.head, tail=tpl.tail, relation=tpl.relation)
            rec = sentence_to_record(s)
            del rec["id"]
            f.write(json.dumps(rec) + "\n")
