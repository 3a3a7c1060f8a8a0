"""Adapt standard-language text to regional dialects with character-level
sequence models: corpus tools, synthetic dialects, training and evaluation."""

from .corpus import (
    CleaningMap,
    CorpusSplit,
    ParallelExample,
    clean_text,
    load_corpus,
    load_dialect_manifest,
    save_corpus,
    split_sizes,
    stratified_split,
)
from .errors import (
    CheckpointError,
    CleaningMapError,
    CodecError,
    ConfigError,
    CorpusError,
    DialadaptError,
    EmptyReferenceError,
    EvalError,
    IndistinguishableDialectsError,
    MalformedRecordError,
    ModelError,
    NonFiniteGradientError,
    ReservedSymbolError,
    RuleError,
    SplitError,
    TrainingDivergedError,
    TrainingError,
    UnknownDialectError,
    VocabularyError,
)
from .evaluation import (
    REFERENCE_POEM_DISTANCES,
    WerCounts,
    WerReport,
    adapt_sentence,
    align_words,
    distance_from_standard,
    evaluate_model,
    evaluate_pairs,
    fit_to_source,
    group_by_dialect,
    wer,
    wer_counts,
    wer_matrix,
)
from .model import (
    PARAM_GROUPS,
    PROFILES,
    TENSOR_ORDER,
    TRANSFER_FROZEN_GROUPS,
    Batch,
    ModelConfig,
    ModelMeta,
    ModelParams,
    Seq2SeqModel,
    checkpoint_tensor_bytes,
    gradient_check,
    load_checkpoint,
    make_batch,
    read_checkpoint_header,
    save_checkpoint,
)
from .synth import (
    RewriteRule,
    SyntheticDialect,
    apply_rules,
    builtin_rule_packs,
    contrastive_dialects,
    default_vocabulary,
    generate_corpus,
    load_rules,
    parse_rule,
    parse_rules,
    rules_to_text,
)
from .textcodec import (
    BOUNDARY,
    CHUNK_SIZE,
    Chunk,
    EncodedSequence,
    add_flag,
    chunk_sentence,
    decode,
    encode,
    strip_flag,
    truncate_to_source,
    words_from_tokens,
)
from .training import (
    PRESETS,
    TrainingConfig,
    TrainingRun,
    clip_gradients,
    evaluate_loss,
    get_preset,
    make_training_pairs,
    train_model,
    train_on_pairs,
    transfer_train,
)
from .vocab import BOS, BOS_ID, EOS, EOS_ID, PAD, PAD_ID, UNK, UNK_ID, Vocabulary

__version__ = "0.1.0"
