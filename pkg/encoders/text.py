"""
Word-level vocabulary, tokenizer and the text transformer f_T.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from autodiff import Parameter, Tensor, stack
from encoders.layers import LayerNorm, Linear, Module, TransformerBlock, gaussian
from errors import ArgumentError, ContractError, DimensionError

SPECIAL_TOKENS = ("<start>", "<end>", "<pad>", "<unk>")
START, END, PAD, UNK = 0, 1, 2, 3

_PUNCTUATION = re.compile(r"[^\w\s]")


def split_words(text: str) -> List[str]:
    """Lowercase, replace punctuation by spaces, split on whitespace."""
    return _PUNCTUATION.sub(" ", text.lower()).split()


@dataclass
class Vocabulary:
    """
    Ordered word list with the four special tokens at indices 0-3.

    The embedding table belongs to the text encoder; it is attached here so
    prompt initialization and nearest-word lookup read the same matrix.
    """

    words: List[str]
    embedding: Optional[Parameter] = None
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.words[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ArgumentError(f"vocabulary must start with {SPECIAL_TOKENS}")
        self.index = {}
        for i, word in enumerate(self.words):
            if word in self.index:
                raise ArgumentError(f"duplicate vocabulary word '{word}'")
            self.index[word] = i

    @classmethod
    def from_words(cls, words: Sequence[str]) -> "Vocabulary":
        return cls(list(SPECIAL_TOKENS) + list(words))

    @classmethod
    def from_file(cls, path) -> "Vocabulary":
        """One word per line; line n (1-based) becomes index n + 3."""
        words = []
        for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            word = line.strip()
            if not word:
                raise ArgumentError(f"{path}: blank vocabulary line {number}")
            words.append(word)
        return cls.from_words(words)

    def __len__(self) -> int:
        return len(self.words)

    def lookup(self, word: str) -> int:
        return self.index.get(word, UNK)

    @property
    def table(self) -> np.ndarray:
        if self.embedding is None:
            raise ContractError("vocabulary has no embedding table attached")
        return self.embedding.data

    def phrase_embedding(self, phrase: str) -> np.ndarray:
        """Mean of the word embeddings of a (possibly multi-word) phrase."""
        ids = [self.lookup(w) for w in split_words(phrase)] or [UNK]
        return self.table[ids].mean(axis=0)


def tokenize(text: str, vocab: Vocabulary, length: int) -> List[int]:
    """
    Map text to a fixed-length index sequence.

    Content is wrapped in <start>/<end>; unknown words become <unk>; content
    longer than length - 2 is truncated; the tail is padded with <pad>.
    """
    content = [vocab.lookup(w) for w in split_words(text)][: max(length - 2, 0)]
    ids = [START] + content + [END]
    return ids + [PAD] * (length - len(ids))


@dataclass
class TokenSequence:
    """
    Token embeddings [L, D] fed to the text encoder.

    `class_index` is the position of the category embedding among the
    content tokens (the tokens between <start> and <end>).
    """

    embeddings: Tensor
    content_mask: np.ndarray
    end_index: int
    class_index: Optional[int] = None

    @property
    def length(self) -> int:
        return self.embeddings.shape[0]


class TextEncoder(Module):
    """
    Causal pre-norm transformer pooled at the <end> token.

    Positions after <end> cannot influence the pooled output, so they are
    not evaluated.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        width: int,
        heads: int,
        depth: int,
        length: int,
        rng: np.random.Generator,
        mlp_ratio: int = 4,
        approximate: str = "tanh",
    ):
        super().__init__()
        self.width = width
        self.length = length
        self.depth = depth
        self.token_embedding = Parameter(gaussian(rng, (len(vocab), width)))
        self.position_embedding = Parameter(gaussian(rng, (length, width), std=0.01))
        for i in range(depth):
            setattr(self, f"block{i}", TransformerBlock(width, heads, rng, mlp_ratio, approximate))
        self.ln_final = LayerNorm(width)
        self.projection = Linear(width, width, rng, bias=False)
        self.vocab = Vocabulary(vocab.words, embedding=self.token_embedding)

    def embed(self, ids: Sequence[int]) -> TokenSequence:
        if len(ids) != self.length:
            raise DimensionError("token sequence length", (len(ids),), (self.length,))
        ids = np.asarray(ids)
        end = int(np.flatnonzero(ids == END)[0])
        mask = np.zeros(self.length, dtype=bool)
        mask[1:end] = True
        return TokenSequence(self.token_embedding[ids], mask, end)

    def embed_text(self, text: str) -> TokenSequence:
        return self.embed(tokenize(text, self.vocab, self.length))

    def encode(self, sequences: Sequence[TokenSequence]) -> Tensor:
        """Encode a batch of sequences into [S, D] features."""
        for seq in sequences:
            if seq.embeddings.shape != (self.length, self.width):
                raise DimensionError("text encoder input", seq.embeddings.shape, (self.length, self.width))
        ends = np.array([seq.end_index for seq in sequences])
        span = int(ends.max()) + 1

        x = stack([seq.embeddings for seq in sequences])[:, :span] + self.position_embedding[:span]
        causal = np.tril(np.ones((span, span), dtype=bool))
        for i in range(self.depth):
            x = getattr(self, f"block{i}")(x, causal)
        x = self.ln_final(x)
        pooled = x[np.arange(len(sequences)), ends]
        return self.projection(pooled)

    def text_encode(self, seq: TokenSequence) -> Tensor:
        """h^T = f_T(T) for one sequence, shape [D]."""
        return self.encode([seq])[0]

    def encode_texts(self, texts: Sequence[str]) -> Tensor:
        return self.encode([self.embed_text(t) for t in texts])
