"""Tokenization, vocabularies, encodings, and the four embedding sources."""

from .embeddings import (
    EMBEDDING_SOURCES,
    RANDOM_INIT_BOUND,
    EmbeddingFormatError,
    EmbeddingMatrix,
    init_random_embedding,
    load_embedding_file,
    save_embedding_file,
)
from .subword import char_ngrams, train_corpus_embedding
from .text import tokenize
from .vocab import (
    PAD_INDEX,
    RESERVED,
    UNK_INDEX,
    EncodedSection,
    Vocabulary,
    VocabularyFormatError,
    build_vocabulary,
    encode,
    encode_batch,
    load_vocabulary,
    save_vocabulary,
)

__all__ = [
    "EMBEDDING_SOURCES", "EmbeddingFormatError", "EmbeddingMatrix", "EncodedSection",
    "PAD_INDEX", "RANDOM_INIT_BOUND", "RESERVED", "UNK_INDEX", "Vocabulary",
    "VocabularyFormatError", "build_vocabulary", "char_ngrams", "encode", "encode_batch",
    "init_random_embedding", "load_embedding_file", "load_vocabulary",
    "save_embedding_file", "save_vocabulary", "tokenize", "train_corpus_embedding",
]
