"""Data model and ingestion for annotated relation-extraction corpora.

Sentences carry tokens, POS/NER tags, a dependency tree (1-based heads,
0 = root), the head/tail argument spans and a relation label. Two input
profiles are supported: generic-jsonl (one record per line) and tacred-json
(one array per split file, TACRED field names).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import deptree

GENERIC_JSONL = "generic-jsonl"
TACRED_JSON = "tacred-json"


@dataclass(frozen=True)
class Span:
    start: int
    end: int

    def __contains__(self, i):
        return self.start <= i <= self.end

    def __len__(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple
    pos: tuple
    ner: tuple
    dep_head: tuple
    dep_label: tuple
    head: Span
    tail: Span
    relation: str

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Corpus:
    train: tuple
    validation: tuple
    test: tuple
    label_inventory: tuple
    negative_label: str | None = None

    def split(self, name):
        return {"train": self.train, "validation": self.validation, "test": self.test}[name]

    def all_sentences(self):
        return self.train + self.validation + self.test


def validate_sentence(s: Sentence):
    """Return a list of invariant-violation descriptions (empty if valid)."""
    problems = []
    n = len(s.tokens)
    if n < 1:
        return ["empty token list"]
    for name in ("pos", "ner", "dep_head", "dep_label"):
        if len(getattr(s, name)) != n:
            problems.append("annotation length mismatch: %s" % name)
    for label, span in (("head", s.head), ("tail", s.tail)):
        if span.start > span.end:
            problems.append("%s span start > end" % label)
        elif not (0 <= span.start and span.end < n):
            problems.append("%s span out of range" % label)
    if not any(p.startswith(("head", "tail")) for p in problems):
        if s.head.start <= s.tail.end and s.tail.start <= s.head.end:
            problems.append("head and tail spans overlap")
    if len(s.dep_head) == n:
        roots = [i for i, h in enumerate(s.dep_head) if h == 0]
        if not roots:
            problems.append("no root token")
        elif len(roots) > 1:
            problems.append("multiple root tokens")
        out_of_range = [h for h in s.dep_head if not (0 <= h <= n)]
        if out_of_range:
            problems.append("dep_head value out of range")
        else:
            # walk up from every token; more than n steps means a cycle
            for i in range(n):
                steps, j = 0, i
                while s.dep_head[j] != 0:
                    j = s.dep_head[j] - 1
                    steps += 1
                    if steps > n:
                        problems.append("cycle detected")
                        break
                if steps > n:
                    break
    return problems


class CorpusFormatError(ValueError):
    pass


_GENERIC_FIELDS = (
    "id",
    "tokens",
    "pos",
    "ner",
    "dep_head",
    "dep_label",
    "head_start",
    "head_end",
    "tail_start",
    "tail_end",
    "relation",
)


def _sentence_from_generic(rec):
    return Sentence(
        id=str(rec["id"]),
        tokens=tuple(rec["tokens"]),
        pos=tuple(rec["pos"]),
        ner=tuple(rec["ner"]),
        dep_head=tuple(int(h) for h in rec["dep_head"]),
        dep_label=tuple(rec["dep_label"]),
        head=Span(int(rec["head_start"]), int(rec["head_end"])),
        tail=Span(int(rec["tail_start"]), int(rec["tail_end"])),
        relation=str(rec["relation"]),
    )


def _sentence_from_tacred(rec):
    return Sentence(
        id=str(rec["id"]),
        tokens=tuple(rec["token"]),
        pos=tuple(rec["stanford_pos"]),
        ner=tuple(rec["stanford_ner"]),
        dep_head=tuple(int(h) for h in rec["stanford_head"]),
        dep_label=tuple(rec["stanford_deprel"]),
        head=Span(int(rec["subj_start"]), int(rec["subj_end"])),
        tail=Span(int(rec["obj_start"]), int(rec["obj_end"])),
        relation=str(rec["relation"]),
    )


def _read_jsonl_split(path):
    sentences = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError("%s:%d: malformed json (%s)" % (path, lineno, e))
            missing = [k for k in _GENERIC_FIELDS if k not in rec]
            if missing:
                raise CorpusFormatError(
                    "%s:%d: missing field %s" % (path, lineno, missing[0])
                )
            sentences.append(_sentence_from_generic(rec))
    return sentences


def _read_tacred_split(path):
    with open(path, encoding="utf-8") as f:
        try:
            records = json.load(f)
        except json.JSONDecodeError as e:
            raise CorpusFormatError("%s: malformed json (%s)" % (path, e))
    sentences = []
    for i, rec in enumerate(records):
        try:
            sentences.append(_sentence_from_tacred(rec))
        except KeyError as e:
            raise CorpusFormatError("%s: record %d: missing field %s" % (path, i, e))
    return sentences


_NEGATIVE_CANDIDATES = ("no_relation", "Other", "NA", "none")


def load_corpus(path, format_profile=GENERIC_JSONL, negative_label=None) -> Corpus:
    """Load and validate a corpus from a directory of split files.

    generic-jsonl expects train.jsonl (+ optional validation.jsonl,
    test.jsonl); tacred-json expects train.json (+ optional dev.json,
    test.json).
    """
    if format_profile == GENERIC_JSONL:
        reader, names = _read_jsonl_split, ("train.jsonl", "validation.jsonl", "test.jsonl")
    elif format_profile == TACRED_JSON:
        reader, names = _read_tacred_split, ("train.json", "dev.json", "test.json")
    else:
        raise CorpusFormatError("unknown format profile: %s" % format_profile)
    splits = []
    for i, name in enumerate(names):
        p = os.path.join(path, name)
        if os.path.exists(p):
            splits.append(reader(p))
        elif i == 0:
            raise CorpusFormatError("missing train split file: %s" % p)
        else:
            splits.append([])
    seen_ids = set()
    for sentences in splits:
        for s in sentences:
            problems = validate_sentence(s)
            if problems:
                raise CorpusFormatError("sentence %s: %s" % (s.id, "; ".join(problems)))
            if s.id in seen_ids:
                raise CorpusFormatError("duplicate sentence id: %s" % s.id)
            seen_ids.add(s.id)
    inventory = tuple(sorted({s.relation for s in splits[0]}))
    if negative_label is None:
        negative_label = next((c for c in _NEGATIVE_CANDIDATES if c in inventory), None)
    return Corpus(
        train=tuple(splits[0]),
        validation=tuple(splits[1]),
        test=tuple(splits[2]),
        label_inventory=inventory,
        negative_label=negative_label,
    )


def sentence_to_record(s: Sentence) -> dict:
    return {
        "id": s.id,
        "tokens": list(s.tokens),
        "pos": list(s.pos),
        "ner": list(s.ner),
        "dep_head": list(s.dep_head),
        "dep_label": list(s.dep_label),
        "head_start": s.head.start,
        "head_end": s.head.end,
        "tail_start": s.tail.start,
        "tail_end": s.tail.end,
        "relation": s.relation,
    }


def write_corpus(corpus: Corpus, path):
    """Write the corpus as generic-jsonl split files into a directory."""
    os.makedirs(path, exist_ok=True)
    for name, sentences in (
        ("train.jsonl", corpus.train),
        ("validation.jsonl", corpus.validation),
        ("test.jsonl", corpus.test),
    ):
        if name != "train.jsonl" and not sentences:
            continue
        with open(os.path.join(path, name), "w", encoding="utf-8") as f:
            for s in sentences:
                f.write(json.dumps(sentence_to_record(s)) + "\n")


def mask_entities(s: Sentence) -> Sentence:
    """Replace argument mention tokens with entity-type/role placeholders.

    Head tokens become SUBJ-<TYPE>, tail tokens OBJ-<TYPE>, where <TYPE> is
    the NE tag of the span-root token. Length-preserving and idempotent.
    """
    tree = deptree.build_tree(s.dep_head)
    tokens = list(s.tokens)
    for prefix, span in (("SUBJ", s.head), ("OBJ", s.tail)):
        root = deptree.span_root(tree, span)
        ne_type = s.ner[root]
        mask = "%s-%s" % (prefix, ne_type)
        for i in range(span.start, span.end + 1):
            tokens[i] = mask
    return replace(s, tokens=tuple(tokens))


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict
    unk_vector: np.ndarray
    pad_vector: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.pad_vector is None:
            self.pad_vector = np.zeros(self.dim, dtype=np.float32)

    def lookup(self, token):
        return self.vectors.get(token, self.unk_vector)

    def __len__(self):
        return len(self.vectors)


def load_embeddings(path, dim) -> EmbeddingTable:
    """Parse whitespace-separated `token f1 ... fd` lines into a table."""
    vectors = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise CorpusFormatError(
                    "%s:%d: expected %d values, got %d" % (path, lineno, dim, len(parts) - 1)
                )
            vectors[parts[0]] = np.asarray([float(x) for x in parts[1:]], dtype=np.float32)
    if vectors:
        unk = np.mean(np.stack(list(vectors.values())), axis=0).astype(np.float32)
    else:
        unk = np.zeros(dim, dtype=np.float32)
    return EmbeddingTable(dim=dim, vectors=vectors, unk_vector=unk)


def random_embeddings(tokens, dim, seed=0) -> EmbeddingTable:
    """Deterministic random table; used for synthetic-corpus baselines."""
    rng = np.random.default_rng(seed)
    vectors = {t: rng.normal(0.0, 1.0, size=dim).astype(np.float32) for t in sorted(set(tokens))}
    unk = np.mean(np.stack(list(vectors.values())), axis=0).astype(np.float32)
    return EmbeddingTable(dim=dim, vectors=vectors, unk_vector=unk)


CTX_MAGIC = b"CTXV"


@dataclass
class ContextualStore:
    matrices: dict

    def __len__(self):
        return len(self.matrices)

    def __contains__(self, sid):
        return sid in self.matrices

    def get(self, sid):
        return self.matrices.get(sid)

    def check_against(self, sentences):
        for s in sentences:
            m = self.matrices.get(s.id)
            if m is not None and m.shape[0] != len(s):
                raise CorpusFormatError(
                    "contextual row count mismatch for sentence %s: %d != %d"
                    % (s.id, m.shape[0], len(s))
                )


def load_contextual(path) -> ContextualStore:
    """Read the CTXV binary format of per-token contextual vectors."""
    matrices = {}
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CTX_MAGIC:
            raise CorpusFormatError("%s: bad magic %r" % (path, magic))
        (version,) = struct.unpack("<I", f.read(4))
        if version != 1:
            raise CorpusFormatError("%s: unsupported version %d" % (path, version))
        while True:
            raw = f.read(4)
            if not raw:
                break
            (id_len,) = struct.unpack("<I", raw)
            sid = f.read(id_len).decode("utf-8")
            t, d = struct.unpack("<II", f.read(8))
            data = np.frombuffer(f.read(4 * t * d), dtype="<f4").reshape(t, d)
            matrices[sid] = data.astype(np.float32)
    return ContextualStore(matrices=matrices)


def write_contextual(store: ContextualStore, path):
    with open(path, "wb") as f:
        f.write(CTX_MAGIC)
        f.write(struct.pack("<I", 1))
        for sid in store.matrices:
            m = np.asarray(store.matrices[sid], dtype="<f4")
            raw = sid.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<II", m.shape[0], m.shape[1]))
            f.write(m.tobytes())
