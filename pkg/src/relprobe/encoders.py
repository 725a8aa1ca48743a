"""Input featurization and the sentence encoders (CNN, BiLSTM, GCN,
multi-headed self-attention, bag-of-embeddings) plus the relation
classification head.

Every token is embedded as the concatenation of its word vector, a learned
head-offset embedding, a learned tail-offset embedding and (optionally) a
precomputed contextual vector. Encoders map the resulting T x d_in matrix
to a fixed-size sentence representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from . import deptree
from .corpus import mask_entities

PAD = "<PAD>"
UNK = "<UNK>"


@dataclass(frozen=True)
class InputConfig:
    word_dim: int = 32
    pos_dim: int = 8          # positional-offset embedding width (0 disables)
    max_offset: int = 50      # offsets clipped to [-max_offset, +max_offset]
    use_contextual: bool = False
    contextual_dim: int = 0
    masking: bool = False
    word_dropout: float = 0.0
    embedding_dropout: float = 0.0

    def __post_init__(self):
        if self.word_dim <= 0 or self.pos_dim < 0 or self.max_offset < 1:
            raise ValueError("invalid input config")

    @property
    def width(self):
        return self.word_dim + 2 * self.pos_dim + (self.contextual_dim if self.use_contextual else 0)


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "cnn"
    cnn_filters: int = 500
    cnn_sizes: tuple = (2, 3, 4, 5)
    cnn_activation: str = "tanh"
    lstm_layers: int = 2
    lstm_hidden: int = 500
    recurrent_dropout: float = 0.0
    gcn_layers: int = 2
    gcn_dim: int = 200
    gcn_ff_layers: int = 2
    gcn_prune_k: float = 1
    gcn_dropout: float = 0.0
    attn_layers: int = 8
    attn_heads: int = 8
    attn_kv_dim: int = 256
    attn_ff_dim: int = 512
    attn_model_dim: int = 128
    attn_dropout: float = 0.1
    encoder_dropout: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cnn", "bilstm", "gcn", "attn", "boe"):
            raise ValueError("unknown encoder kind: %s" % self.kind)
        if self.kind == "attn" and self.attn_kv_dim % self.attn_heads != 0:
            raise ValueError("attn_kv_dim must be divisible by attn_heads")


class Vocab:
    """Token inventory with PAD=0 and UNK=1."""

    def __init__(self, tokens):
        self.itos = [PAD, UNK] + [t for t in tokens if t not in (PAD, UNK)]
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @classmethod
    def from_sentences(cls, sentences):
        return cls(sorted({t for s in sentences for t in s.tokens}))

    @classmethod
    def from_itos(cls, itos):
        v = cls.__new__(cls)
        v.itos = list(itos)
        v.stoi = {t: i for i, t in enumerate(v.itos)}
        return v

    def ids(self, tokens):
        unk = self.stoi[UNK]
        return np.asarray([self.stoi.get(t, unk) for t in tokens], dtype=np.int64)

    def __len__(self):
        return len(self.itos)


def position_offsets(span, length, clip):
    """Signed clipped distance of each token to the span (0 inside it)."""
    idx = np.arange(length)
    off = np.where(idx < span.start, idx - span.start,
                   np.where(idx > span.end, idx - span.end, 0))
    return np.clip(off, -clip, clip)


def _glorot(rng, shape):
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) > 1 else (shape[0], shape[0])
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class REModel:
    """Sentence encoder + relation classification head over a fixed vocab."""

    def __init__(self, vocab, labels, input_cfg: InputConfig, enc_cfg: EncoderConfig,
                 seed=0, embeddings=None, negative_label=None):
        self.vocab = vocab
        self.labels = tuple(labels)
        self.label_index = {l: i for i, l in enumerate(self.labels)}
        self.input_cfg = input_cfg
        self.enc_cfg = enc_cfg
        self.negative_label = negative_label
        self.seed = seed
        self.rng = np.random.default_rng(seed)  # dropout rng; reseed per run
        self.params = {}
        self._init_params(np.random.default_rng(seed), embeddings)

    # ---------------------------------------------------------------- setup

    def _add(self, name, data):
        self.params[name] = ad.param(np.asarray(data, dtype=ad.current_dtype()), name=name)

    def _init_params(self, rng, embeddings):
        cfg, enc = self.input_cfg, self.enc_cfg
        word = rng.uniform(-0.1, 0.1, size=(len(self.vocab), cfg.word_dim))
        if embeddings is not None:
            for tok, i in self.vocab.stoi.items():
                vec = embeddings.vectors.get(tok)
                if vec is not None:
                    word[i] = vec[: cfg.word_dim]
        word[0] = 0.0  # PAD row
        self._add("word_emb", word)
        if cfg.pos_dim > 0:
            rows = 2 * cfg.max_offset + 1
            self._add("pos_head_emb", rng.uniform(-0.1, 0.1, size=(rows, cfg.pos_dim)))
            self._add("pos_tail_emb", rng.uniform(-0.1, 0.1, size=(rows, cfg.pos_dim)))
        d_in = cfg.width
        if enc.kind == "cnn":
            for k in enc.cnn_sizes:
                self._add("cnn_w%d" % k, _glorot(rng, (k * d_in, enc.cnn_filters)))
                self._add("cnn_b%d" % k, np.zeros(enc.cnn_filters))
        elif enc.kind == "bilstm":
            size = d_in
            for layer in range(enc.lstm_layers):
                for dirn in ("f", "b"):
                    h = enc.lstm_hidden
                    self._add("lstm%d_%s_wx" % (layer, dirn), _glorot(rng, (size, 4 * h)))
                    self._add("lstm%d_%s_wh" % (layer, dirn), _glorot(rng, (h, 4 * h)))
                    bias = np.zeros(4 * h)
                    bias[h:2 * h] = 1.0  # forget-gate bias
                    self._add("lstm%d_%s_b" % (layer, dirn), bias)
                size = 2 * enc.lstm_hidden
        elif enc.kind == "gcn":
            size = d_in
            for layer in range(enc.gcn_layers):
                self._add("gcn%d_w" % layer, _glorot(rng, (size, enc.gcn_dim)))
                self._add("gcn%d_b" % layer, np.zeros(enc.gcn_dim))
                size = enc.gcn_dim
            size = 3 * enc.gcn_dim
            for j in range(enc.gcn_ff_layers):
                self._add("gcn_ff%d_w" % j, _glorot(rng, (size, enc.gcn_dim)))
                self._add("gcn_ff%d_b" % j, np.zeros(enc.gcn_dim))
                size = enc.gcn_dim
        elif enc.kind == "attn":
            m = enc.attn_model_dim
            self._add("attn_in_w", _glorot(rng, (d_in, m)))
            self._add("attn_in_b", np.zeros(m))
            for layer in range(enc.attn_layers):
                for proj in ("wq", "wk", "wv"):
                    self._add("attn%d_%s" % (layer, proj), _glorot(rng, (m, enc.attn_kv_dim)))
                self._add("attn%d_wo" % layer, _glorot(rng, (enc.attn_kv_dim, m)))
                self._add("attn%d_bo" % layer, np.zeros(m))
                self._add("attn%d_ff1_w" % layer, _glorot(rng, (m, enc.attn_ff_dim)))
                self._add("attn%d_ff1_b" % layer, np.zeros(enc.attn_ff_dim))
                self._add("attn%d_ff2_w" % layer, _glorot(rng, (enc.attn_ff_dim, m)))
                self._add("attn%d_ff2_b" % layer, np.zeros(m))
        self._add("cls_w", _glorot(rng, (self.rep_dim, len(self.labels))))
        self._add("cls_b", np.zeros(len(self.labels)))

    @property
    def rep_dim(self):
        enc = self.enc_cfg
        if enc.kind == "cnn":
            return enc.cnn_filters * len(enc.cnn_sizes)
        if enc.kind == "bilstm":
            return 2 * enc.lstm_hidden
        if enc.kind == "gcn":
            return enc.gcn_dim if enc.gcn_ff_layers > 0 else 3 * enc.gcn_dim
        if enc.kind == "attn":
            return enc.attn_model_dim
        return self.input_cfg.width  # boe

    # -------------------------------------------------------------- forward

    def embed_inputs(self, sentence, train=False, ctx_row=None):
        """Per-token input matrix (T x width) as an autodiff tensor."""
        cfg = self.input_cfg
        s = mask_entities(sentence) if cfg.masking else sentence
        ids = self.vocab.ids(s.tokens)
        if train and cfg.word_dropout > 0:
            drop = self.rng.random(len(ids)) < cfg.word_dropout
            ids = np.where(drop, self.vocab.stoi[UNK], ids)
        parts = [ad.gather_rows(self.params["word_emb"], ids)]
        if cfg.pos_dim > 0:
            h_idx = position_offsets(s.head, len(s), cfg.max_offset) + cfg.max_offset
            t_idx = position_offsets(s.tail, len(s), cfg.max_offset) + cfg.max_offset
            parts.append(ad.gather_rows(self.params["pos_head_emb"], h_idx))
            parts.append(ad.gather_rows(self.params["pos_tail_emb"], t_idx))
        if cfg.use_contextual:
            if ctx_row is None:
                raise ValueError("missing contextual vectors for sentence %s" % sentence.id)
            parts.append(ad.constant(ctx_row))
        x = ad.concat(parts, axis=1) if len(parts) > 1 else parts[0]
        return ad.dropout(x, cfg.embedding_dropout, self.rng, train)

    def encode(self, sentence, train=False, ctx_row=None, tree=None):
        """Fixed-size sentence representation tensor."""
        enc = self.enc_cfg
        x = self.embed_inputs(sentence, train=train, ctx_row=ctx_row)
        if enc.kind == "cnn":
            rep = self._encode_cnn(x)
        elif enc.kind == "bilstm":
            rep = self._encode_bilstm(x, train)
        elif enc.kind == "gcn":
            tree = tree or deptree.build_tree(sentence.dep_head)
            rep = self._encode_gcn(x, sentence, tree, train)
        elif enc.kind == "attn":
            rep = self._encode_attn(x, train)
        else:
            rep = ad.sum_axis(x, axis=0)
        return ad.dropout(rep, enc.encoder_dropout, self.rng, train)

    def logits(self, sentence, train=False, ctx_row=None, tree=None):
        rep = self.encode(sentence, train=train, ctx_row=ctx_row, tree=tree)
        return ad.linear(rep, self.params["cls_w"], self.params["cls_b"])

    def _encode_cnn(self, x):
        enc = self.enc_cfg
        act = ad.tanh if enc.cnn_activation == "tanh" else ad.relu
        pools = []
        for k in enc.cnn_sizes:
            h = act(ad.conv1d(x, self.params["cnn_w%d" % k], self.params["cnn_b%d" % k]))
            pools.append(ad.amax(h, axis=0))
        return ad.concat(pools, axis=0) if len(pools) > 1 else pools[0]

    def _lstm_direction(self, x, layer, dirn, train):
        enc = self.enc_cfg
        h_dim = enc.lstm_hidden
        wx = self.params["lstm%d_%s_wx" % (layer, dirn)]
        wh = self.params["lstm%d_%s_wh" % (layer, dirn)]
        b = self.params["lstm%d_%s_b" % (layer, dirn)]
        t_len = x.shape[0]
        # variational recurrent dropout: one mask reused across time steps
        if train and enc.recurrent_dropout > 0:
            keep = 1.0 - enc.recurrent_dropout
            mask = (self.rng.random((1, h_dim)) < keep).astype(ad.current_dtype()) / keep
            rmask = ad.constant(mask)
        else:
            rmask = None
        h = ad.constant(np.zeros((1, h_dim)))
        c = ad.constant(np.zeros((1, h_dim)))
        order = range(t_len) if dirn == "f" else range(t_len - 1, -1, -1)
        outputs = [None] * t_len
        for t in order:
            x_t = ad.slice_rows(x, t, t + 1)
            h_in = ad.mul(h, rmask) if rmask is not None else h
            gates = ad.add(ad.add(ad.matmul(x_t, wx), ad.matmul(h_in, wh)), b)
            i = ad.sigmoid(ad.slice_cols(gates, 0, h_dim))
            f = ad.sigmoid(ad.slice_cols(gates, h_dim, 2 * h_dim))
            g = ad.tanh(ad.slice_cols(gates, 2 * h_dim, 3 * h_dim))
            o = ad.sigmoid(ad.slice_cols(gates, 3 * h_dim, 4 * h_dim))
            c = ad.add(ad.mul(f, c), ad.mul(i, g))
            h = ad.mul(o, ad.tanh(c))
            outputs[t] = h
        return outputs

    def _encode_bilstm(self, x, train):
        enc = self.enc_cfg
        h = x
        for layer in range(enc.lstm_layers):
            fwd = self._lstm_direction(h, layer, "f", train)
            bwd = self._lstm_direction(h, layer, "b", train)
            rows = [ad.concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
            h = ad.concat(rows, axis=0) if len(rows) > 1 else rows[0]
        return ad.amax(h, axis=0)

    def _encode_gcn(self, x, sentence, tree, train):
        enc = self.enc_cfg
        path = deptree.sdp(tree, sentence.head, sentence.tail)
        k = math.inf if enc.gcn_prune_k in (None, math.inf) else enc.gcn_prune_k
        kept = sorted(deptree.prune(tree, path, k))
        if not kept:
            raise ValueError("pruning removed every token")
        pos = {tok: i for i, tok in enumerate(kept)}
        n = len(kept)
        adj = np.eye(n, dtype=ad.current_dtype())
        for tok in kept:
            p = tree.parent[tok]
            if p is not None and p in pos:
                adj[pos[tok], pos[p]] = 1.0
                adj[pos[p], pos[tok]] = 1.0
        adj /= adj.sum(axis=1, keepdims=True)
        m = ad.constant(adj)
        h = ad.gather_rows(x, np.asarray(kept))
        for layer in range(enc.gcn_layers):
            h = ad.relu(ad.matmul(m, ad.linear(h, self.params["gcn%d_w" % layer],
                                               self.params["gcn%d_b" % layer])))
            if layer < enc.gcn_layers - 1:
                h = ad.dropout(h, enc.gcn_dropout, self.rng, train)
        pools = [ad.amax(h, axis=0)]
        for span in (sentence.head, sentence.tail):
            rows = [pos[t] for t in kept if span.start <= t <= span.end]
            if not rows:
                rows = [pos[deptree.span_root(tree, span)]]
            pools.append(ad.amax(ad.gather_rows(h, np.asarray(rows)), axis=0))
        rep = ad.concat(pools, axis=0)
        for j in range(enc.gcn_ff_layers):
            rep = ad.relu(ad.linear(rep, self.params["gcn_ff%d_w" % j],
                                    self.params["gcn_ff%d_b" % j]))
        return rep

    def _encode_attn(self, x, train):
        enc = self.enc_cfg
        h = ad.linear(x, self.params["attn_in_w"], self.params["attn_in_b"])
        d_head = enc.attn_kv_dim // enc.attn_heads
        for layer in range(enc.attn_layers):
            q = ad.matmul(h, self.params["attn%d_wq" % layer])
            k = ad.matmul(h, self.params["attn%d_wk" % layer])
            v = ad.matmul(h, self.params["attn%d_wv" % layer])
            head_outs = []
            for hd in range(enc.attn_heads):
                lo, hi = hd * d_head, (hd + 1) * d_head
                qh, kh, vh = (ad.slice_cols(t, lo, hi) for t in (q, k, v))
                scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), 1.0 / math.sqrt(d_head))
                attn = ad.softmax(scores)
                attn = ad.dropout(attn, enc.attn_dropout, self.rng, train)
                head_outs.append(ad.matmul(attn, vh))
            merged = ad.concat(head_outs, axis=1) if len(head_outs) > 1 else head_outs[0]
            h = ad.add(h, ad.linear(merged, self.params["attn%d_wo" % layer],
                                    self.params["attn%d_bo" % layer]))
            ff = ad.relu(ad.linear(h, self.params["attn%d_ff1_w" % layer],
                                   self.params["attn%d_ff1_b" % layer]))
            h = ad.add(h, ad.linear(ff, self.params["attn%d_ff2_w" % layer],
                                    self.params["attn%d_ff2_b" % layer]))
        last = h.shape[0] - 1
        return ad.reshape(ad.slice_rows(h, last, last + 1), (enc.attn_model_dim,))

    # ------------------------------------------------------------- utility

    def encode_np(self, sentence, ctx_row=None):
        """Eval-mode representation as a plain float32 vector."""
        rep = self.encode(sentence, train=False, ctx_row=ctx_row)
        return np.asarray(rep.data, dtype=np.float32)

    def predict(self, sentence, ctx_row=None):
        logits = self.logits(sentence, train=False, ctx_row=ctx_row)
        return self.labels[int(np.argmax(logits.data))]

    def zero_grads(self):
        for p in self.params.values():
            p.zero_grad()

    def config_blob(self):
        return {
            "input_cfg": asdict(self.input_cfg),
            "encoder_cfg": asdict(self.enc_cfg),
            "vocab": self.vocab.itos,
            "labels": list(self.labels),
            "negative_label": self.negative_label,
            "seed": self.seed,
        }
