import numpy as np
import pytest

from relprobe import synth
from relprobe.encoders import EncoderConfig
from relprobe.optim import EpochDecay
from relprobe.training import (HyperProfile, desk_encoder_config,
                               desk_input_config, load_checkpoint,
                               macro_f1_directional, micro_f1, presets,
                               save_checkpoint, train_re)


# ------------------------------------------------------------------ micro

NEG = "no_relation"


def test_micro_f1_hand_fixture():
    golds = ["A", "A", NEG, "B"]
    preds = ["A", NEG, NEG, "A"]
    p, r, f1 = micro_f1(preds, golds, NEG)
    assert p == pytest.approx(0.5, abs=1e-12)
    assert r == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert f1 == pytest.approx(0.4, abs=1e-12)


def test_micro_f1_perfect():
    golds = ["A", "B", NEG]
    assert micro_f1(golds, golds, NEG) == (1.0, 1.0, 1.0)


def test_micro_f1_all_negative_predictions():
    assert micro_f1([NEG, NEG], ["A", NEG], NEG) == (0.0, 0.0, 0.0)


def test_micro_f1_negative_correct_does_not_count():
    # one real TP plus many correct negatives: still P = R = 1
    golds = ["A", NEG, NEG, NEG]
    preds = ["A", NEG, NEG, NEG]
    assert micro_f1(preds, golds, NEG) == (1.0, 1.0, 1.0)


def test_micro_f1_length_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        micro_f1(["A"], ["A", "B"], NEG)


# ------------------------------------------------------------------ macro

def test_macro_f1_twelve_example_fixture():
    """Both types have 4 gold, 4 predicted and 2 directed TPs, so each
    per-type F1 is exactly 0.5 and so is the macro average."""
    a, b, o = "A(e1,e2)", "B(e1,e2)", "Other"
    golds = [a, a, a, a, b, b, b, b, o, o, o, o]
    preds = [a, a, b, o, b, b, a, o, a, b, o, o]
    assert macro_f1_directional(preds, golds, "Other") == pytest.approx(0.5, abs=1e-12)


def test_macro_f1_direction_must_match():
    golds = ["A(e1,e2)", "A(e1,e2)"]
    preds = ["A(e2,e1)", "A(e1,e2)"]
    # pooled over directions: tp=1, pred_A=2, gold_A=2 -> F1 = 0.5
    assert macro_f1_directional(preds, golds, "Other") == pytest.approx(0.5, abs=1e-12)


def test_macro_f1_other_excluded():
    golds = ["A(e1,e2)", "Other", "Other"]
    preds = ["A(e1,e2)", "Other", "Other"]
    assert macro_f1_directional(preds, golds, "Other") == pytest.approx(1.0)


def test_macro_f1_requires_positive_type():
    with pytest.raises(ValueError):
        macro_f1_directional(["Other"], ["Other"], "Other")


# ---------------------------------------------------------------- presets

def test_presets_cover_both_corpora():
    p = presets()
    for kind in ("cnn", "bilstm", "gcn", "attn"):
        assert "tacred-%s" % kind in p
        assert "semeval-%s" % kind in p
    prof, enc = p["tacred-cnn"]
    assert prof.optimizer == "adagrad" and prof.lr == 0.1
    assert enc.cnn_filters == 500 and enc.cnn_sizes == (2, 3, 4, 5)
    assert p["semeval-cnn"][1].cnn_filters == 150
    assert p["tacred-bilstm"][1].lstm_hidden == 500
    assert p["semeval-bilstm"][1].lstm_hidden == 300
    assert p["tacred-attn"][0].lr == 1e-4


def test_desk_encoder_configs():
    for kind in ("cnn", "bilstm", "gcn", "attn", "boe"):
        cfg = desk_encoder_config(kind)
        assert cfg.kind == kind
    with pytest.raises(ValueError):
        desk_encoder_config("rnn")


# --------------------------------------------------------------- training

@pytest.fixture(scope="module")
def tiny_corpus():
    cfg = synth.SynthConfig(n_train=24, n_val=8, n_test=8,
                            templates=synth.default_templates(),
                            lexicons=synth.default_lexicons(), seed=2, pad_max=0)
    return synth.generate(cfg)


def _profile(**kw):
    base = dict(name="t", optimizer="adam", lr=1e-2, epochs=5, batch_size=8)
    base.update(kw)
    return HyperProfile(**base)


def _train(corpus, **kw):
    return train_re(corpus, desk_input_config(), EncoderConfig(kind="boe"),
                    _profile(), **kw)


def test_train_loss_decreases(tiny_corpus):
    _, history = _train(tiny_corpus, seed=0)
    losses = [row["loss"] for row in history.epochs]
    assert losses[-1] < losses[0]


def test_train_is_deterministic(tiny_corpus):
    m1, h1 = _train(tiny_corpus, seed=3)
    m2, h2 = _train(tiny_corpus, seed=3)
    assert h1.epochs == h2.epochs
    for name in m1.params:
        np.testing.assert_array_equal(m1.params[name].data, m2.params[name].data)


def test_train_seed_changes_run(tiny_corpus):
    _, h1 = _train(tiny_corpus, seed=3)
    _, h2 = _train(tiny_corpus, seed=4)
    assert h1.epochs != h2.epochs


def test_best_epoch_params_restored(tiny_corpus):
    from relprobe.training import _evaluate
    from relprobe import deptree
    model, history = _train(tiny_corpus, seed=0)
    trees = {s.id: deptree.build_tree(s.dep_head) for s in tiny_corpus.all_sentences()}
    _, _, f1 = _evaluate(model, tiny_corpus.validation, trees)
    assert f1 == pytest.approx(history.best_f1())


def test_early_stop(tiny_corpus):
    _, history = _train(tiny_corpus, seed=0, early_stop_f1=0.0)
    assert len(history.epochs) == 1


def test_history_csv_and_epoch_decay_lr(tiny_corpus):
    prof = _profile(optimizer="sgd", lr=1.0, schedule=EpochDecay(0.5, 2), epochs=4)
    _, history = train_re(tiny_corpus, desk_input_config(), EncoderConfig(kind="boe"), prof)
    csv = history.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "epoch,loss,val_p,val_r,val_f1,lr"
    assert len(lines) == 5
    lrs = [row["lr"] for row in history.epochs]
    np.testing.assert_allclose(lrs, [1.0, 0.5, 0.25, 0.125])


def test_masked_training_vocab_hides_mentions(tiny_corpus):
    model, _ = train_re(tiny_corpus, desk_input_config(masking=True),
                        EncoderConfig(kind="boe"), _profile(epochs=1))
    assert any(t.startswith("SUBJ-") for t in model.vocab.itos)
    from relprobe.corpus import mask_entities
    expected = {t for s in tiny_corpus.train for t in mask_entities(s).tokens}
    assert set(model.vocab.itos) - {"<PAD>", "<UNK>"} == expected


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises(tiny_corpus):
    prof = _profile(optimizer="sgd", lr=1e30, epochs=10)
    with pytest.raises(RuntimeError, match="divergence"):
        train_re(tiny_corpus, desk_input_config(), EncoderConfig(kind="boe"), prof)


# ------------------------------------------------------------- checkpoints

def test_checkpoint_roundtrip_bit_exact(tiny_corpus, tmp_path):
    model, _ = _train(tiny_corpus, seed=1)
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.labels == model.labels
    assert loaded.vocab.itos == model.vocab.itos
    assert loaded.input_cfg == model.input_cfg
    assert loaded.enc_cfg == model.enc_cfg
    for name in model.params:
        np.testing.assert_array_equal(loaded.params[name].data, model.params[name].data)
    for s in tiny_corpus.test[:5]:
        np.testing.assert_array_equal(loaded.logits(s).data, model.logits(s).data)


def test_checkpoint_bad_magic(tmp_path):
    path = str(tmp_path / "bad.ckpt")
    with open(path, "wb") as f:
        f.write(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_cnn_roundtrip(tiny_corpus, tmp_path):
    model, _ = train_re(tiny_corpus, desk_input_config(), desk_encoder_config("cnn"),
                        _profile(epochs=1))
    path = str(tmp_path / "cnn.ckpt")
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    s = tiny_corpus.test[0]
    np.testing.assert_array_equal(loaded.logits(s).data, model.logits(s).data)
