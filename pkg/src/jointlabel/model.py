"""The joint labeling architecture.

Per token: characters run through a bi-directional recurrence whose edge
states are projected (tanh) into a character vector, concatenated with the
word embedding, and fed to a word-level bi-directional recurrence. The two
directional states combine through a linear+tanh layer into the token
representation, which is scored by a small feed-forward head with a sigmoid
output. Those per-token scores double as (sum-normalized) attention weights
that pool the token representations into a sentence vector, scored by a
second sigmoid head.

Training-only heads predict the next/previous word from each directional
state, and the middle word from the character edge states of its neighbor
words; dropping their parameters leaves every inference quantity unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .corpus import CharVocab, Sentence, WordVocab
from .errors import ContractError, ShapeMismatchError

ARCH_ATTENTION = "attn"
ARCH_LAST = "last"
ARCHITECTURES = (ARCH_ATTENTION, ARCH_LAST)


@dataclass(frozen=True)
class ModelSizes:
    """Layer widths. Defaults follow the reference configuration; use
    :meth:`small` for desk-scale experiments and tests."""

    word_emb: int = 300
    char_emb: int = 50
    char_rnn: int = 100
    char_out: int = 100
    word_rnn: int = 300
    hidden: int = 200
    attn_hidden: int = 100
    sent_hidden: int = 200
    lm_hidden: int = 50

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not isinstance(value, int) or value < 1:
                raise ContractError(f"layer size {name} must be a positive int, got {value}")

    @classmethod
    def small(cls) -> "ModelSizes":
        return cls(word_emb=24, char_emb=12, char_rnn=12, char_out=12,
                   word_rnn=24, hidden=20, attn_hidden=12, sent_hidden=20,
                   lm_hidden=12)

    @classmethod
    def tiny(cls, emb: int = 8, rnn: int = 8, hidden: int = 6) -> "ModelSizes":
        return cls(word_emb=emb, char_emb=emb, char_rnn=rnn, char_out=hidden,
                   word_rnn=rnn, hidden=hidden, attn_hidden=hidden,
                   sent_hidden=hidden, lm_hidden=hidden)


LM_PREFIXES = ("lm_fwd_", "lm_bwd_", "charlm_")


def parameter_shapes(sizes: ModelSizes, n_words: int, n_chars: int,
                     arch: str = ARCH_ATTENTION,
                     include_lm: bool = True) -> dict[str, tuple[int, ...]]:
    """Name -> shape table for every learned tensor of the architecture."""
    if arch not in ARCHITECTURES:
        raise ContractError(f"unknown architecture {arch!r}")
    s = sizes
    word_in = s.word_emb + s.char_out
    shapes: dict[str, tuple[int, ...]] = {
        "word_emb": (n_words, s.word_emb),
        "char_emb": (n_chars, s.char_emb),
        "char_fwd_w": (s.char_emb, 4 * s.char_rnn),
        "char_fwd_u": (s.char_rnn, 4 * s.char_rnn),
        "char_fwd_b": (4 * s.char_rnn,),
        "char_bwd_w": (s.char_emb, 4 * s.char_rnn),
        "char_bwd_u": (s.char_rnn, 4 * s.char_rnn),
        "char_bwd_b": (4 * s.char_rnn,),
        "char_proj_w": (2 * s.char_rnn, s.char_out),
        "char_proj_b": (s.char_out,),
        "word_fwd_w": (word_in, 4 * s.word_rnn),
        "word_fwd_u": (s.word_rnn, 4 * s.word_rnn),
        "word_fwd_b": (4 * s.word_rnn,),
        "word_bwd_w": (word_in, 4 * s.word_rnn),
        "word_bwd_u": (s.word_rnn, 4 * s.word_rnn),
        "word_bwd_b": (4 * s.word_rnn,),
    }
    if arch == ARCH_ATTENTION:
        shapes.update({
            "combine_w": (2 * s.word_rnn, s.hidden),
            "combine_b": (s.hidden,),
            "score_hidden_w": (s.hidden, s.attn_hidden),
            "score_hidden_b": (s.attn_hidden,),
            "score_out_w": (s.attn_hidden,),
            "score_out_b": (),
            "sent_hidden_w": (s.hidden, s.sent_hidden),
        })
    else:
        shapes["sent_hidden_w"] = (2 * s.word_rnn, s.sent_hidden)
    shapes.update({
        "sent_hidden_b": (s.sent_hidden,),
        "sent_out_w": (s.sent_hidden,),
        "sent_out_b": (),
    })
    if include_lm:
        shapes.update({
            "lm_fwd_hidden_w": (s.word_rnn, s.lm_hidden),
            "lm_fwd_hidden_b": (s.lm_hidden,),
            "lm_fwd_out_w": (s.lm_hidden, n_words),
            "lm_fwd_out_b": (n_words,),
            "lm_bwd_hidden_w": (s.word_rnn, s.lm_hidden),
            "lm_bwd_hidden_b": (s.lm_hidden,),
            "lm_bwd_out_w": (s.lm_hidden, n_words),
            "lm_bwd_out_b": (n_words,),
            "charlm_hidden_w": (4 * s.char_rnn, s.lm_hidden),
            "charlm_hidden_b": (s.lm_hidden,),
            "charlm_out_w": (s.lm_hidden, n_words),
            "charlm_out_b": (n_words,),
        })
    return shapes


def is_lm_name(name: str) -> bool:
    return name.startswith(LM_PREFIXES)


class ModelParams:
    """Named tensors of one model instance, shape-checked at construction.

    The LM and char-LM heads are only needed during training; a params set
    without them is valid and encodes/classifies identically.
    """

    def __init__(self, sizes: ModelSizes, n_words: int, n_chars: int,
                 arch: str, values: Mapping[str, np.ndarray]):
        self.sizes = sizes
        self.n_words = n_words
        self.n_chars = n_chars
        self.arch = arch
        self.has_lm = any(is_lm_name(name) for name in values)
        expected = parameter_shapes(sizes, n_words, n_chars, arch,
                                    include_lm=self.has_lm)
        missing = sorted(set(expected) - set(values))
        extra = sorted(set(values) - set(expected))
        if missing or extra:
            raise ShapeMismatchError(
                f"parameter set mismatch: missing {missing}, unexpected {extra}")
        checked: dict[str, np.ndarray] = {}
        for name in expected:
            arr = ad.as_tensor(values[name], name)
            if arr.shape != expected[name]:
                raise ShapeMismatchError(
                    f"parameter {name!r}: expected shape {expected[name]}, got {arr.shape}")
            checked[name] = arr
        self.values = checked

    @classmethod
    def zeros(cls, sizes: ModelSizes, n_words: int, n_chars: int,
              arch: str = ARCH_ATTENTION, include_lm: bool = True) -> "ModelParams":
        shapes = parameter_shapes(sizes, n_words, n_chars, arch, include_lm)
        return cls(sizes, n_words, n_chars, arch,
                   {name: np.zeros(shape) for name, shape in shapes.items()})

    def copy(self) -> "ModelParams":
        return ModelParams(self.sizes, self.n_words, self.n_chars, self.arch,
                           {k: v.copy() for k, v in self.values.items()})

    def without_lm(self) -> "ModelParams":
        return ModelParams(self.sizes, self.n_words, self.n_chars, self.arch,
                           {k: v.copy() for k, v in self.values.items()
                            if not is_lm_name(k)})

    def as_nodes(self) -> dict[str, Node]:
        """Fresh parameter nodes over the (shared) value arrays."""
        return {name: ad.parameter(arr, name=name)
                for name, arr in self.values.items()}


@dataclass(frozen=True)
class DropoutMasks:
    """Externally generated masks; ``None`` means identity (inference)."""

    word: np.ndarray | None = None
    hidden: np.ndarray | None = None


@dataclass
class SentenceEncoding:
    """Graph nodes for every intermediate quantity of one sentence."""

    sentence: Sentence
    word_ids: np.ndarray
    char_fwd_last: list[Node]
    char_bwd_first: list[Node]
    char_vectors: Node
    inputs: Node
    states_fwd: Node
    states_bwd: Node
    combined: Node | None = None
    token_scores: Node | None = None
    attention: Node | None = None
    sentence_vector: Node | None = None
    sentence_score: Node | None = None
    lm_fwd_logits: Node | None = None
    lm_bwd_logits: Node | None = None
    charlm_logits: Node | None = None

    def __len__(self) -> int:
        return len(self.word_ids)


def recurrent_step(x: Node, h_prev: Node, c_prev: Node,
                   w: Node, u: Node, b: Node) -> tuple[Node, Node]:
    """One step of the gated recurrence, composed from primitive ops.

    Gate order along the 4H axis is [input, forget, output, candidate]:
    c = sigmoid(f)*c_prev + sigmoid(i)*tanh(cand), h = sigmoid(o)*tanh(c).
    The fused sequence kernel must match this step exactly.
    """
    hidden = u.shape[0]
    if (x.shape != (w.shape[0],) or h_prev.shape != (hidden,)
            or c_prev.shape != (hidden,) or w.shape[1] != 4 * hidden
            or u.shape[1] != 4 * hidden or b.shape != (4 * hidden,)):
        raise ShapeMismatchError(
            f"recurrent_step: x{x.shape} h{h_prev.shape} c{c_prev.shape} "
            f"w{w.shape} u{u.shape} b{b.shape}")
    pre = ad.add(ad.add(ad.matmul(x, w), ad.matmul(h_prev, u)), b)
    gate_in = ad.sigmoid(pre[0:hidden])
    gate_forget = ad.sigmoid(pre[hidden:2 * hidden])
    gate_out = ad.sigmoid(pre[2 * hidden:3 * hidden])
    candidate = ad.tanh(pre[3 * hidden:4 * hidden])
    c = ad.add(ad.mul(gate_forget, c_prev), ad.mul(gate_in, candidate))
    h = ad.mul(gate_out, ad.tanh(c))
    return h, c


def encode_chars(token: str, char_vocab: CharVocab,
                 nodes: Mapping[str, Node]) -> tuple[Node, Node, Node]:
    """Character-compose one token.

    Returns (vector, fwd_last, bwd_first): the tanh-projected character
    vector plus the two recurrence edge states kept for the char-LM head.
    """
    if len(token) == 0:
        raise ContractError("encode_chars: empty character sequence")
    ids = char_vocab.ids(token)
    emb = ad.gather_rows(nodes["char_emb"], ids)
    fwd = ad.lstm_sequence(emb, nodes["char_fwd_w"], nodes["char_fwd_u"],
                           nodes["char_fwd_b"])
    bwd = ad.lstm_sequence(emb, nodes["char_bwd_w"], nodes["char_bwd_u"],
                           nodes["char_bwd_b"], reverse=True)
    fwd_last = fwd[len(token) - 1]
    bwd_first = bwd[0]
    edges = ad.concat([fwd_last, bwd_first])
    vector = ad.tanh(ad.add(ad.matmul(edges, nodes["char_proj_w"]),
                            nodes["char_proj_b"]))
    return vector, fwd_last, bwd_first


def encode_sentence(sentence: Sentence, nodes: Mapping[str, Node],
                    word_vocab: WordVocab, char_vocab: CharVocab,
                    masks: DropoutMasks = DropoutMasks(),
                    char_cache: dict | None = None,
                    arch: str = ARCH_ATTENTION) -> SentenceEncoding:
    """Run the composition model over one sentence.

    ``char_cache`` (token surface -> edge-state nodes) lets repeated
    surfaces within one batch graph share their character subgraph.
    """
    n = len(sentence)
    if n < 1:
        raise ContractError("encode_sentence: empty sentence")
    word_ids = word_vocab.ids(sentence.lowercased)

    fwd_lasts: list[Node] = []
    bwd_firsts: list[Node] = []
    for token in sentence.char_seqs:
        if char_cache is not None and token in char_cache:
            fwd_last, bwd_first = char_cache[token]
        else:
            if len(token) == 0:
                raise ContractError("encode_sentence: empty character sequence")
            ids = char_vocab.ids(token)
            emb = ad.gather_rows(nodes["char_emb"], ids)
            fwd = ad.lstm_sequence(emb, nodes["char_fwd_w"],
                                   nodes["char_fwd_u"], nodes["char_fwd_b"])
            bwd = ad.lstm_sequence(emb, nodes["char_bwd_w"],
                                   nodes["char_bwd_u"], nodes["char_bwd_b"],
                                   reverse=True)
            fwd_last = fwd[len(token) - 1]
            bwd_first = bwd[0]
            if char_cache is not None:
                char_cache[token] = (fwd_last, bwd_first)
        fwd_lasts.append(fwd_last)
        bwd_firsts.append(bwd_first)

    edge_mat = ad.concat([ad.stack_rows(fwd_lasts), ad.stack_rows(bwd_firsts)], axis=1)
    char_vectors = ad.tanh(ad.add(ad.matmul(edge_mat, nodes["char_proj_w"]),
                                  nodes["char_proj_b"]))

    word_vectors = ad.gather_rows(nodes["word_emb"], word_ids)
    if masks.word is not None:
        word_vectors = ad.apply_mask(word_vectors, masks.word)
    inputs = ad.concat([word_vectors, char_vectors], axis=1)

    states_fwd = ad.lstm_sequence(inputs, nodes["word_fwd_w"],
                                  nodes["word_fwd_u"], nodes["word_fwd_b"])
    states_bwd = ad.lstm_sequence(inputs, nodes["word_bwd_w"],
                                  nodes["word_bwd_u"], nodes["word_bwd_b"],
                                  reverse=True)

    encoding = SentenceEncoding(
        sentence=sentence, word_ids=word_ids,
        char_fwd_last=fwd_lasts, char_bwd_first=bwd_firsts,
        char_vectors=char_vectors, inputs=inputs,
        states_fwd=states_fwd, states_bwd=states_bwd)

    if arch == ARCH_ATTENTION:
        both = ad.concat([states_fwd, states_bwd], axis=1)
        combined = ad.tanh(ad.add(ad.matmul(both, nodes["combine_w"]),
                                  nodes["combine_b"]))
        if masks.hidden is not None:
            combined = ad.apply_mask(combined, masks.hidden)
        encoding.combined = combined
    return encoding


def score_tokens(encoding: SentenceEncoding, nodes: Mapping[str, Node]) -> Node:
    """Per-token positive-label confidence in (0, 1), shape (N,)."""
    if encoding.combined is None:
        raise ContractError("score_tokens: encoding has no combined representation")
    hidden = ad.tanh(ad.add(ad.matmul(encoding.combined, nodes["score_hidden_w"]),
                            nodes["score_hidden_b"]))
    pre = ad.add(ad.matmul(hidden, nodes["score_out_w"]), nodes["score_out_b"])
    encoding.token_scores = ad.sigmoid(pre)
    return encoding.token_scores


def attend_and_classify(encoding: SentenceEncoding,
                        nodes: Mapping[str, Node]) -> tuple[Node, Node, Node]:
    """Sum-normalize token scores, pool, and score the sentence.

    The normalization denominator is a sum of sigmoid outputs, hence
    strictly positive. Returns (weights, sentence_vector, sentence_score).
    """
    scores = encoding.token_scores
    if scores is None:
        scores = score_tokens(encoding, nodes)
    weights = ad.div(scores, ad.reduce_sum(scores))
    weights_col = weights[:, np.newaxis]
    sentence_vector = ad.reduce_sum(ad.mul(weights_col, encoding.combined), axis=0)
    hidden = ad.tanh(ad.add(ad.matmul(sentence_vector, nodes["sent_hidden_w"]),
                            nodes["sent_hidden_b"]))
    score = ad.sigmoid(ad.add(ad.matmul(hidden, nodes["sent_out_w"]),
                              nodes["sent_out_b"]))
    encoding.attention = weights
    encoding.sentence_vector = sentence_vector
    encoding.sentence_score = score
    return weights, sentence_vector, score


def classify_from_last_states(encoding: SentenceEncoding,
                              nodes: Mapping[str, Node]) -> Node:
    """Baseline head: classify from the concatenated final directional states."""
    n = len(encoding)
    last = ad.concat([encoding.states_fwd[n - 1], encoding.states_bwd[0]])
    hidden = ad.tanh(ad.add(ad.matmul(last, nodes["sent_hidden_w"]),
                            nodes["sent_hidden_b"]))
    score = ad.sigmoid(ad.add(ad.matmul(hidden, nodes["sent_out_w"]),
                              nodes["sent_out_b"]))
    encoding.sentence_score = score
    return score


def lm_targets(word_ids: np.ndarray, vocab: WordVocab) -> tuple[np.ndarray, np.ndarray]:
    """Next-word and previous-word target ids, with boundary markers at the
    sentence edges so every position predicts in both directions."""
    fwd = np.concatenate([word_ids[1:], [vocab.end_id]]).astype(np.intp)
    bwd = np.concatenate([[vocab.start_id], word_ids[:-1]]).astype(np.intp)
    return fwd, bwd


def word_lm_heads(encoding: SentenceEncoding,
                  nodes: Mapping[str, Node]) -> tuple[Node, Node]:
    """Vocabulary logits predicting the next word from each forward state
    and the previous word from each backward state; both (N, |V|)."""
    if "lm_fwd_hidden_w" not in nodes:
        raise ContractError("word_lm_heads: LM parameters are absent")
    qf = ad.tanh(ad.add(ad.matmul(encoding.states_fwd, nodes["lm_fwd_hidden_w"]),
                        nodes["lm_fwd_hidden_b"]))
    logits_f = ad.add(ad.matmul(qf, nodes["lm_fwd_out_w"]), nodes["lm_fwd_out_b"])
    qb = ad.tanh(ad.add(ad.matmul(encoding.states_bwd, nodes["lm_bwd_hidden_w"]),
                        nodes["lm_bwd_hidden_b"]))
    logits_b = ad.add(ad.matmul(qb, nodes["lm_bwd_out_w"]), nodes["lm_bwd_out_b"])
    encoding.lm_fwd_logits = logits_f
    encoding.lm_bwd_logits = logits_b
    return logits_f, logits_b


def word_lm_distributions(encoding: SentenceEncoding,
                          nodes: Mapping[str, Node]) -> tuple[Node, Node]:
    logits_f, logits_b = word_lm_heads(encoding, nodes)
    return ad.softmax(logits_f, axis=-1), ad.softmax(logits_b, axis=-1)


def char_lm_logits(encoding: SentenceEncoding,
                   nodes: Mapping[str, Node]) -> Node | None:
    """Vocabulary logits predicting each interior word from the character
    edge states of its neighbors; (N-2, |V|), or None when N < 3."""
    if "charlm_hidden_w" not in nodes:
        raise ContractError("char_lm_logits: LM parameters are absent")
    n = len(encoding)
    if n < 3:
        return None
    rows = []
    for i in range(1, n - 1):
        rows.append(ad.concat([encoding.char_fwd_last[i - 1],
                               encoding.char_bwd_first[i - 1],
                               encoding.char_fwd_last[i + 1],
                               encoding.char_bwd_first[i + 1]]))
    context = ad.stack_rows(rows)
    hidden = ad.tanh(ad.add(ad.matmul(context, nodes["charlm_hidden_w"]),
                            nodes["charlm_hidden_b"]))
    logits = ad.add(ad.matmul(hidden, nodes["charlm_out_w"]),
                    nodes["charlm_out_b"])
    encoding.charlm_logits = logits
    return logits


def char_lm_head(encoding: SentenceEncoding, nodes: Mapping[str, Node],
                 position: int) -> Node:
    """Distribution over the vocabulary for the word at ``position``
    (0-based; valid range 1..N-2), from its neighbors' character states."""
    n = len(encoding)
    if not 1 <= position <= n - 2:
        raise ContractError(
            f"char_lm_head: position {position} outside interior range 1..{n - 2}")
    logits = char_lm_logits(encoding, nodes)
    return ad.softmax(logits[position - 1], axis=-1)


@dataclass
class Model:
    """Bundle of everything needed to encode and predict."""

    sizes: ModelSizes
    arch: str
    word_vocab: WordVocab
    char_vocab: CharVocab
    params: ModelParams

    def encode(self, sentence: Sentence, masks: DropoutMasks = DropoutMasks(),
               nodes: Mapping[str, Node] | None = None) -> SentenceEncoding:
        if nodes is None:
            nodes = self.params.as_nodes()
        encoding = encode_sentence(sentence, nodes, self.word_vocab,
                                   self.char_vocab, masks, arch=self.arch)
        if self.arch == ARCH_ATTENTION:
            score_tokens(encoding, nodes)
            attend_and_classify(encoding, nodes)
        else:
            classify_from_last_states(encoding, nodes)
        return encoding
