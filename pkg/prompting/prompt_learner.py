"""
PromptLearner: learnable context vectors E shared across classes, one frozen
class-name embedding per category, and nearest-word interpretation of E.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from autodiff import Parameter, Tensor, concat
from encoders.layers import Module
from encoders.text import END, PAD, SPECIAL_TOKENS, START, TextEncoder, TokenSequence, Vocabulary, split_words
from errors import ArgumentError, DimensionError

logger = logging.getLogger(__name__)

POSITIONS = ("front", "middle", "end")


def init_context(
    context_length: int,
    dim: int,
    mode: str = "random",
    template: Optional[str] = None,
    seed: int = 0,
    vocab: Optional[Vocabulary] = None,
    std: float = 0.02,
) -> np.ndarray:
    """
    Initial context matrix E [M x D].

    Args:
        context_length: M
        dim: D
        mode: 'random' draws i.i.d. N(0, std^2); 'template' additionally
            copies the template's word embeddings into the first rows
        template: Words used in template mode
        seed: Seed of the Gaussian draw
        vocab: Vocabulary with an embedding table (template mode)
        std: Standard deviation of the Gaussian rows

    Returns:
        M x D array
    """
    rng = np.random.default_rng(seed)
    context = rng.normal(0.0, std, size=(context_length, dim))
    if mode == "random":
        return context
    if mode != "template":
        raise ArgumentError(f"unknown init mode '{mode}'")
    if template is None or vocab is None:
        raise ArgumentError("template mode needs a template and a vocabulary")
    ids = [vocab.lookup(w) for w in split_words(template)]
    if len(ids) > context_length:
        raise ArgumentError(f"template has {len(ids)} tokens but context length is {context_length}")
    context[: len(ids)] = vocab.table[ids]
    return context


def class_position(context_length: int, insert_position: str) -> int:
    if insert_position == "front":
        return 0
    if insert_position == "middle":
        return context_length // 2
    if insert_position == "end":
        return context_length
    raise ArgumentError(f"unknown insert position '{insert_position}'")


class PromptState(Module):
    """
    The whole tunable text-side state: E (trainable) and the class
    embeddings c_j (frozen; multi-word names are mean-pooled).
    """

    def __init__(
        self,
        vocab: Vocabulary,
        class_names: Sequence[str],
        context_length: int,
        insert_position: str = "middle",
        init_mode: str = "random",
        template: Optional[str] = None,
        seed: int = 0,
        std: float = 0.02,
        logit_scale: Optional[float] = None,
    ):
        super().__init__()
        if insert_position not in POSITIONS:
            raise ArgumentError(f"unknown insert position '{insert_position}'")
        self.class_names = list(class_names)
        self.context_length = context_length
        self.insert_position = insert_position
        dim = vocab.table.shape[1]
        self.E = Parameter(init_context(context_length, dim, init_mode, template, seed, vocab, std))
        self.class_embeddings = Parameter(
            np.stack([vocab.phrase_embedding(name) for name in self.class_names]), trainable=False
        )
        # log of the inverse temperature, only present when learned
        self.logit_scale = Parameter(np.array(logit_scale)) if logit_scale is not None else None

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def compose_prompt(state: PromptState, j: int, text_encoder: TextEncoder) -> TokenSequence:
    """
    T_j: context vectors with c_j inserted at index 0 (front), floor(M/2)
    (middle) or M (end), wrapped in <start>/<end> and padded.
    """
    m = state.context_length
    length = text_encoder.length
    if length < m + 3:
        raise DimensionError("text encoder length too short for the prompt", (length,), (m + 3,))
    position = class_position(m, state.insert_position)

    specials = text_encoder.token_embedding
    parts: List[Tensor] = [specials[[START]]]
    if position > 0:
        parts.append(state.E[:position])
    parts.append(state.class_embeddings[j : j + 1])
    if position < m:
        parts.append(state.E[position:])
    parts.append(specials[[END]])
    if length > m + 3:
        parts.append(specials[[PAD] * (length - m - 3)])

    mask = np.zeros(length, dtype=bool)
    mask[1 : m + 2] = True
    return TokenSequence(concat(parts, axis=0), mask, end_index=m + 2, class_index=position)


def class_text_features(state: PromptState, text_encoder: TextEncoder) -> Tensor:
    """h_j^T = f_T(T_j) for every class, shape [S, D]."""
    return text_encoder.encode([compose_prompt(state, j, text_encoder) for j in range(state.num_classes)])


def nearest_words(context, vocab: Vocabulary) -> List[Tuple[str, float]]:
    """
    For each context vector, the closest non-special vocabulary word by
    Euclidean distance (ties to the lowest index) and that distance.
    """
    context = context.data if isinstance(context, Tensor) else np.asarray(context, dtype=np.float64)
    offset = len(SPECIAL_TOKENS)
    candidates = vocab.table[offset:]
    diff = context[:, None, :] - candidates[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    best = np.argmin(dist, axis=1)
    return [(vocab.words[offset + int(i)], float(dist[row, i])) for row, i in enumerate(best)]
