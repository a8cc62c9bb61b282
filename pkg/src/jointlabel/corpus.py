"""Datasets: TSV parsing, vocabularies, embeddings, masking, synthetic data.

File format (UTF-8): one token per line as ``surface<TAB>label`` with label
in {0,1}, or bare ``surface`` for token-unlabeled sentences; an optional
``#sent 0`` / ``#sent 1`` line at the start of a block gives the sentence
label; a blank line terminates a sentence; any other line starting with
``#`` is a comment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ParseError, ValidationError

UNK = "<unk>"
SENT_START = "<s>"
SENT_END = "</s>"

UNK_ID = 0


@dataclass(frozen=True)
class Sentence:
    """One training/evaluation unit.

    ``tokens`` keep original capitalization and feed the character-level
    encoder; ``lowercased`` forms feed the word-level encoder. Token labels
    are either present for every token or absent entirely.
    """

    tokens: tuple[str, ...]
    sentence_label: int
    token_labels: tuple[int, ...] | None = None
    lowercased: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        if not self.tokens:
            raise ValidationError("sentence must contain at least one token")
        if self.sentence_label not in (0, 1):
            raise ValidationError(f"sentence label must be 0 or 1, got {self.sentence_label}")
        if self.token_labels is not None:
            if len(self.token_labels) != len(self.tokens):
                raise ValidationError(
                    f"{len(self.token_labels)} token labels for {len(self.tokens)} tokens")
            if any(label not in (0, 1) for label in self.token_labels):
                raise ValidationError("token labels must be 0 or 1")
            if max(self.token_labels) > self.sentence_label:
                raise ValidationError(
                    "positive token label inside a negative sentence: "
                    + " ".join(self.tokens))
        object.__setattr__(self, "lowercased",
                           tuple(tok.lower() for tok in self.tokens))

    @property
    def char_seqs(self) -> tuple[str, ...]:
        """Per-token character sequences (original capitalization)."""
        return self.tokens

    def __len__(self) -> int:
        return len(self.tokens)

    def without_token_labels(self) -> "Sentence":
        return Sentence(self.tokens, self.sentence_label, None)


@dataclass(frozen=True)
class Dataset:
    sentences: tuple[Sentence, ...]

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def __getitem__(self, idx) -> Sentence:
        return self.sentences[idx]


@dataclass(frozen=True)
class Splits:
    train: Dataset
    dev: Dataset
    test: Dataset


def _finish_block(lines: list[tuple[int, str, int | None]],
                  header: int | None, start_line: int) -> Sentence:
    has_labels = [label is not None for _, _, label in lines]
    if any(has_labels) and not all(has_labels):
        mixed = next(num for (num, _, label), flag in zip(lines, has_labels) if not flag)
        raise ParseError(f"line {mixed}: block mixes labeled and unlabeled tokens")
    tokens = tuple(surface for _, surface, _ in lines)
    labels = tuple(label for _, _, label in lines) if all(has_labels) else None
    if header is None:
        if labels is None:
            raise ParseError(
                f"line {start_line}: block has neither token labels nor a '#sent' header")
        sentence_label = max(labels)
    else:
        sentence_label = header
    return Sentence(tokens, sentence_label, labels)


def parse_tsv(path) -> Dataset:
    """Parse a dataset file; errors carry 1-based line numbers."""
    sentences: list[Sentence] = []
    block: list[tuple[int, str, int | None]] = []
    header: int | None = None
    block_start = 1

    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                if block:
                    sentences.append(_finish_block(block, header, block_start))
                block, header = [], None
                continue
            if line.startswith("#"):
                fields = line.split()
                if fields and fields[0] == "#sent":
                    if block:
                        raise ParseError(
                            f"line {lineno}: '#sent' header must start the block")
                    if header is not None:
                        raise ParseError(f"line {lineno}: duplicate '#sent' header")
                    if len(fields) != 2 or fields[1] not in ("0", "1"):
                        raise ParseError(
                            f"line {lineno}: '#sent' header must be '#sent 0' or '#sent 1'")
                    header = int(fields[1])
                    block_start = lineno
                continue
            if not block and header is None:
                block_start = lineno
            parts = line.split("\t")
            if len(parts) == 1:
                block.append((lineno, parts[0], None))
            elif len(parts) == 2:
                surface, label = parts
                if not surface:
                    raise ParseError(f"line {lineno}: empty token surface")
                if label not in ("0", "1"):
                    raise ParseError(f"line {lineno}: token label must be 0 or 1, got {label!r}")
                block.append((lineno, surface, int(label)))
            else:
                raise ParseError(
                    f"line {lineno}: expected 1 or 2 tab-separated fields, got {len(parts)}")
    if block:
        sentences.append(_finish_block(block, header, block_start))
    return Dataset(tuple(sentences))


def serialize(dataset: Dataset, path) -> None:
    """Inverse of :func:`parse_tsv`; always writes the '#sent' header."""
    with open(path, "w", encoding="utf-8") as handle:
        for k, sentence in enumerate(dataset):
            if k:
                handle.write("\n")
            handle.write(f"#sent {sentence.sentence_label}\n")
            if sentence.token_labels is None:
                for token in sentence.tokens:
                    handle.write(f"{token}\n")
            else:
                for token, label in zip(sentence.tokens, sentence.token_labels):
                    handle.write(f"{token}\t{label}\n")


class WordVocab:
    """Lowercased word forms to contiguous ids; lookups never fail.

    Id 0 is the unknown word; ids 1 and 2 are the sentence-boundary markers
    used as LM targets at sentence edges.
    """

    specials = (UNK, SENT_START, SENT_END)

    def __init__(self, words: Sequence[str]):
        self.symbols: tuple[str, ...] = tuple(self.specials) + tuple(words)
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError("duplicate symbols in word vocabulary")
        self._index = {sym: i for i, sym in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def id(self, word: str) -> int:
        return self._index.get(word, UNK_ID)

    def ids(self, words: Iterable[str]) -> np.ndarray:
        return np.array([self.id(w) for w in words], dtype=np.intp)

    @property
    def start_id(self) -> int:
        return self._index[SENT_START]

    @property
    def end_id(self) -> int:
        return self._index[SENT_END]


class CharVocab:
    """Characters (Unicode scalar values) to contiguous ids; id 0 is unknown."""

    def __init__(self, chars: Sequence[str]):
        if any(len(c) != 1 for c in chars):
            raise ValidationError("character vocabulary entries must be single characters")
        self.symbols: tuple[str, ...] = (UNK,) + tuple(chars)
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError("duplicate symbols in character vocabulary")
        self._index = {sym: i for i, sym in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def id(self, char: str) -> int:
        return self._index.get(char, UNK_ID)

    def ids(self, token: str) -> np.ndarray:
        return np.array([self.id(c) for c in token], dtype=np.intp)


def build_vocabs(dataset: Dataset, min_count: int = 1) -> tuple[WordVocab, CharVocab]:
    """Word vocab over lowercased forms with frequency >= min_count; char
    vocab over every character seen in the original-capitalization tokens."""
    if min_count < 1:
        raise ValidationError(f"min_count must be >= 1, got {min_count}")
    if len(dataset) == 0:
        raise ValidationError("cannot build vocabularies from an empty dataset")
    counts: dict[str, int] = {}
    chars: set[str] = set()
    for sentence in dataset:
        for low in sentence.lowercased:
            counts[low] = counts.get(low, 0) + 1
        for token in sentence.tokens:
            chars.update(token)
    kept = sorted((w for w, c in counts.items() if c >= min_count),
                  key=lambda w: (-counts[w], w))
    return WordVocab(kept), CharVocab(sorted(chars))


PRETRAINED = "pretrained"
RANDOM = "randomly_initialized"


@dataclass(frozen=True)
class EmbeddingTable:
    """|vocab| x dim matrix with per-row provenance."""

    matrix: np.ndarray
    provenance: tuple[str, ...]

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.provenance):
            raise ValidationError("provenance length must match the row count")


def load_embeddings(path, vocab: WordVocab, dim: int = 300,
                    seed: int = 0) -> EmbeddingTable:
    """Load whitespace-separated pretrained vectors for in-vocab words.

    Vocabulary words absent from the file (including the specials) get
    Glorot-uniform rows and are flagged ``randomly_initialized``; the whole
    table stays trainable either way.
    """
    from .trainer import glorot_uniform

    rng = np.random.default_rng(seed)
    matrix = glorot_uniform(rng, (len(vocab), dim))
    provenance = [RANDOM] * len(vocab)
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split()
            word, values = parts[0], parts[1:]
            if len(values) != dim:
                raise ParseError(
                    f"line {lineno}: expected {dim} values for {word!r}, got {len(values)}")
            if word not in vocab:
                continue
            try:
                row = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: unreadable number ({exc})") from None
            idx = vocab.id(word)
            matrix[idx] = row
            provenance[idx] = PRETRAINED
    return EmbeddingTable(matrix, tuple(provenance))


def kept_indices(n: int, fraction: float, seed: int) -> set[int]:
    """Seeded priority order over ``n`` items, truncated to round(fraction*n).

    A larger fraction with the same seed always keeps a superset, which
    gives clean nested annotation-fraction sweeps.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"fraction must be in [0, 1], got {fraction}")
    count = int(round(fraction * n))
    priority = np.random.default_rng(seed).permutation(n)
    return set(int(i) for i in priority[:count])


def mask_token_annotation(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Keep token labels on a seeded round(fraction*n) subset of sentences;
    the rest keep only their sentence label."""
    for sentence in dataset:
        if sentence.token_labels is None:
            raise ValidationError(
                "mask_token_annotation requires a fully token-annotated dataset")
    keep = kept_indices(len(dataset), fraction, seed)
    masked = tuple(s if i in keep else s.without_token_labels()
                   for i, s in enumerate(dataset))
    return Dataset(masked)


TRIGGER_PREFIX = "zq"
_FILLER_ALPHABET = "abdehilmnorstuvw"
_TRIGGER_SUFFIXES = "aeiou"


def default_trigger_words(count: int = 2) -> tuple[str, ...]:
    """Deterministic trigger surfaces sharing the 'zq' character prefix,
    so the character encoder sees a label-correlated signal."""
    return tuple(TRIGGER_PREFIX + _TRIGGER_SUFFIXES[i % len(_TRIGGER_SUFFIXES)]
                 + ("x" * (i // len(_TRIGGER_SUFFIXES)))
                 for i in range(count))


def generate_synthetic(n_sentences: int, vocab_size: int = 50,
                       trigger_words: Sequence[str] | None = None,
                       max_len: int = 12, positive_rate: float = 0.5,
                       seed: int = 0) -> Dataset:
    """Seeded keyword-detection dataset.

    A sentence is positive iff it contains at least one trigger token, and
    exactly the trigger tokens carry label 1, so both sentence and token
    labels are clean by construction. Trigger words share a character
    prefix that filler words never use.
    """
    triggers = tuple(trigger_words) if trigger_words is not None else default_trigger_words()
    if not triggers:
        raise ValidationError("at least one trigger word is required")
    if vocab_size < len(triggers) + 2:
        raise ValidationError(
            f"vocab_size {vocab_size} too small for {len(triggers)} trigger words")
    if max_len < 2:
        raise ValidationError(
            "max_len must be >= 2 (positive sentences need a non-trigger token)")
    if not 0.0 < positive_rate < 1.0:
        raise ValidationError(f"positive_rate must be in (0, 1), got {positive_rate}")

    rng = np.random.default_rng(seed)
    fillers: list[str] = []
    taken = set(triggers)
    while len(fillers) < vocab_size - len(triggers):
        length = int(rng.integers(3, 8))
        word = "".join(_FILLER_ALPHABET[int(rng.integers(len(_FILLER_ALPHABET)))]
                       for _ in range(length))
        if word in taken or word.startswith(TRIGGER_PREFIX):
            continue
        taken.add(word)
        fillers.append(word)

    sentences = []
    for _ in range(n_sentences):
        positive = bool(rng.random() < positive_rate)
        if positive:
            length = int(rng.integers(2, max_len + 1))
            n_trig = 1 if length < 4 else int(rng.choice([1, 1, 1, 2]))
            trig_positions = set(int(p) for p in
                                 rng.choice(length, size=n_trig, replace=False))
            tokens, labels = [], []
            for pos in range(length):
                if pos in trig_positions:
                    tokens.append(str(rng.choice(triggers)))
                    labels.append(1)
                else:
                    tokens.append(str(rng.choice(fillers)))
                    labels.append(0)
        else:
            length = int(rng.integers(1, max_len + 1))
            tokens = [str(rng.choice(fillers)) for _ in range(length)]
            labels = [0] * length
        if rng.random() < 0.15:
            tokens[0] = tokens[0].capitalize()
        sentences.append(Sentence(tuple(tokens), int(positive), tuple(labels)))
    return Dataset(tuple(sentences))


def split_dataset(dataset: Dataset, *sizes: int) -> tuple[Dataset, ...]:
    """Cut consecutive, non-overlapping splits of the given sizes."""
    if sum(sizes) > len(dataset):
        raise ValidationError(
            f"cannot split {len(dataset)} sentences into parts of sizes {sizes}")
    parts = []
    offset = 0
    for size in sizes:
        parts.append(Dataset(dataset.sentences[offset:offset + size]))
        offset += size
    return tuple(parts)
