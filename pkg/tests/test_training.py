import math

import numpy as np
import pytest

from dialadapt.corpus import ParallelExample
from dialadapt.errors import TrainingDivergedError, TrainingError, UnknownDialectError
from dialadapt.model import (
    PROFILES,
    TENSOR_ORDER,
    TRANSFER_FROZEN_GROUPS,
    ModelMeta,
    Seq2SeqModel,
)
from dialadapt.synth import contrastive_dialects, generate_corpus
from dialadapt.training import (
    PRESETS,
    TrainingConfig,
    evaluate_loss,
    get_preset,
    make_training_pairs,
    train_model,
    train_on_pairs,
    transfer_train,
)
from dialadapt.vocab import Vocabulary


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(contrastive_dialects(), 60, seed=31, length_range=(2, 4))


@pytest.fixture(scope="module")
def vocab(corpus):
    return Vocabulary.from_corpus(corpus, flags=sorted({ex.dialect_id for ex in corpus}))


def fresh_model(vocab, mode="flagged", dialect=None, seed=1):
    return Seq2SeqModel.create(PROFILES["tiny"], vocab, seed=seed, meta=ModelMeta(mode, dialect))


def quick_config(steps, **overrides):
    base = dict(batch_size=8, checkpoint_every=max(steps, 1), log_every=max(steps, 1))
    base.update(overrides)
    return TrainingConfig(steps=steps, **base)


def test_config_validation():
    for bad in (
        dict(steps=0),
        dict(steps=5, batch_size=0),
        dict(steps=5, optimizer="momentum"),
        dict(steps=5, learning_rate=0.0),
        dict(steps=5, lr_decay=0.0),
        dict(steps=5, lr_decay=1.5),
        dict(steps=5, dropout=1.0),
        dict(steps=5, grad_clip=-1.0),
        dict(steps=5, checkpoint_every=0),
        dict(steps=5, freeze=frozenset({"imaginary"})),
    ):
        with pytest.raises(TrainingError):
            TrainingConfig(**bad)
    assert TrainingConfig(steps=5, grad_clip=None).grad_clip is None


def test_presets_are_pinned():
    base = PRESETS["reference-base"]
    assert (base.steps, base.optimizer, base.learning_rate) == (100_000, "sgd", 1.0)
    assert (base.lr_decay, base.dropout) == (0.5, 0.3)
    assert (base.checkpoint_every, base.log_every) == (5000, 500)
    transfer = PRESETS["reference-transfer"]
    assert transfer.steps == 20_000
    assert transfer.freeze == TRANSFER_FROZEN_GROUPS
    desk = PRESETS["desk"]
    assert (desk.steps, desk.optimizer, desk.learning_rate) == (3000, "adam", 0.002)

    assert get_preset("desk", steps=10).steps == 10
    with pytest.raises(TrainingError):
        get_preset("workstation")


def test_flagged_pairs_start_with_the_dialect_flag(corpus, vocab):
    pairs = make_training_pairs(corpus, vocab, mode="flagged")
    flag_ids = {vocab.flag_id(f) for f in vocab.flags}
    assert pairs
    for src_ids, tgt_ids in pairs:
        assert src_ids[0] in flag_ids
        assert not flag_ids & set(src_ids[1:])
        assert not flag_ids & set(tgt_ids)


def test_plain_pairs_carry_no_flag(corpus, vocab):
    pairs = make_training_pairs(corpus, vocab, mode="plain")
    flag_ids = {vocab.flag_id(f) for f in vocab.flags}
    for src_ids, tgt_ids in pairs:
        assert not flag_ids & set(src_ids)
        assert not flag_ids & set(tgt_ids)


def test_pair_counts_follow_chunking(corpus, vocab):
    expected = sum(math.ceil(len(ex.source_words) / 3) for ex in corpus)
    assert len(make_training_pairs(corpus, vocab, mode="flagged")) == expected


def test_pair_token_layout_is_exact():
    example = ParallelExample("IS", ["minä", "kun", "näin"], ["mie", "ko", "näin"])
    vocab = Vocabulary.from_corpus([example], flags=["IS"])
    (src_ids, tgt_ids), = make_training_pairs([example], vocab, mode="flagged")
    assert vocab.tokens(src_ids) == [
        "IS", "m", "i", "n", "ä", "_", "k", "u", "n", "_", "n", "ä", "i", "n",
    ]
    assert vocab.tokens(tgt_ids) == ["m", "i", "e", "_", "k", "o", "_", "n", "ä", "i", "n"]

    (plain_src, plain_tgt), = make_training_pairs([example], vocab, mode="plain")
    assert vocab.tokens(plain_src) == [
        "m", "i", "n", "ä", "_", "k", "u", "n", "_", "n", "ä", "i", "n",
    ]
    assert plain_tgt == tgt_ids


def test_dialect_filter_and_unknown_dialect(corpus, vocab):
    north_only = make_training_pairs(corpus, vocab, mode="plain", dialect="north")
    expected = sum(
        math.ceil(len(ex.source_words) / 3) for ex in corpus if ex.dialect_id == "north"
    )
    assert len(north_only) == expected

    stranger = [ex for ex in corpus][:1]
    stranger = [type(ex)("outsider", ex.source_words, ex.target_words) for ex in stranger]
    with pytest.raises(UnknownDialectError):
        make_training_pairs(stranger, vocab, mode="flagged")


def test_training_reduces_loss(corpus, vocab):
    model = fresh_model(vocab)
    pairs = make_training_pairs(corpus, vocab, mode="flagged")
    before = evaluate_loss(model, pairs)
    run = train_on_pairs(model, pairs, [], quick_config(40))
    after = evaluate_loss(model, pairs)
    assert after < before
    assert len(run.loss_log) == 40
    assert [step for step, _ in run.loss_log] == list(range(1, 41))


def test_frozen_groups_stay_bitwise_identical(corpus, vocab):
    model = fresh_model(vocab)
    snapshot = {name: model.params[name].copy() for name in TENSOR_ORDER}
    pairs = make_training_pairs(corpus, vocab, mode="flagged")
    train_on_pairs(model, pairs, [], quick_config(10, freeze=frozenset({"src_emb", "enc_l1"})))
    for name in ("src_emb", "enc_l1_Wx", "enc_l1_Wh", "enc_l1_b"):
        assert np.array_equal(model.params[name], snapshot[name])
    assert not np.array_equal(model.params["out_W"], snapshot["out_W"])


def test_training_is_seed_deterministic(corpus, vocab):
    pairs = make_training_pairs(corpus, vocab, mode="flagged")
    runs = []
    for _ in range(2):
        model = fresh_model(vocab, seed=2)
        train_on_pairs(model, pairs, [], quick_config(15, seed=9))
        runs.append(model)
    assert all(np.array_equal(runs[0].params[n], runs[1].params[n]) for n in TENSOR_ORDER)

    other = fresh_model(vocab, seed=2)
    train_on_pairs(other, pairs, [], quick_config(15, seed=10))
    assert any(not np.array_equal(runs[0].params[n], other.params[n]) for n in TENSOR_ORDER)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported_with_the_step(corpus, vocab):
    model = fresh_model(vocab)
    model.params.tensors["out_b"][:] = np.inf
    pairs = make_training_pairs(corpus, vocab, mode="flagged")
    with pytest.raises(TrainingDivergedError) as err:
        train_on_pairs(model, pairs, [], quick_config(5))
    assert err.value.step == 1


def test_meta_steps_accumulate(corpus, vocab):
    model = fresh_model(vocab)
    pairs = make_training_pairs(corpus, vocab, mode="flagged")
    train_on_pairs(model, pairs, [], quick_config(5))
    train_on_pairs(model, pairs, [], quick_config(3))
    assert model.meta.steps == 8


def test_run_artifacts_on_disk(corpus, vocab, tmp_path):
    model = fresh_model(vocab)
    pairs = make_training_pairs(corpus, vocab, mode="flagged")
    run = train_on_pairs(model, pairs[:20], pairs[:8], quick_config(6, checkpoint_every=3), tmp_path)
    for name in ("latest.ckpt", "final.ckpt", "best.ckpt", "train_log.csv"):
        assert (tmp_path / name).exists()
    assert run.final_path == tmp_path / "final.ckpt"
    lines = (tmp_path / "train_log.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "step,train_loss,valid_loss"
    assert len(lines) == 7
    assert run.best_valid is not None
    assert len(run.valid_log) == 2


def test_evaluate_loss_is_batch_size_invariant(corpus, vocab):
    model = fresh_model(vocab)
    pairs = make_training_pairs(corpus, vocab, mode="flagged")[:17]
    full = evaluate_loss(model, pairs, batch_size=17)
    chunked = evaluate_loss(model, pairs, batch_size=4)
    assert chunked == pytest.approx(full, rel=1e-9)
    with pytest.raises(TrainingError):
        evaluate_loss(model, [])


def test_train_model_uses_meta_mode(corpus, vocab):
    model = fresh_model(vocab, mode="plain", dialect="north")
    run = train_model(model, corpus, [], quick_config(3))
    assert run.model is model
    assert model.meta.steps == 3


def test_transfer_specializes_a_clone(corpus, vocab):
    base = fresh_model(vocab)
    train_model(base, corpus, [], quick_config(5))
    base_snapshot = {name: base.params[name].copy() for name in TENSOR_ORDER}

    run = transfer_train(base, "south", corpus, [], quick_config(4))
    child = run.model
    assert child is not base
    assert child.meta == ModelMeta("plain", "south", steps=9)
    assert base.meta.steps == 5
    for name in TENSOR_ORDER:
        assert np.array_equal(base.params[name], base_snapshot[name])
    for name in ("src_emb", "enc_l1_Wx", "enc_l1_Wh", "enc_l1_b"):
        assert np.array_equal(child.params[name], base.params[name])
    assert not np.array_equal(child.params["out_W"], base.params["out_W"])

    with pytest.raises(UnknownDialectError):
        transfer_train(base, "mars", corpus, [], quick_config(2))
