"""Text self-similarity matching.

Derives a title vector from the prompt's token embeddings by sliding the
title tokens as a correlation kernel over the sentence, then fuses it with
the sentence embedding: the cosine similarity between the two becomes the
weight of the sentence term, and the sum is the self-support embedding the
rest of the pipeline aligns against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import cosine_similarity
from .validation import check_embedding_matrix, check_vector

SEQUENCE_LENGTH = 77
MAX_CONTENT = SEQUENCE_LENGTH - 2  # class + end markers
MAX_TITLE_LENGTH = 3
CLASS_TOKEN_ID = 49406
END_TOKEN_ID = 49407
PROMPT_TEMPLATE = "A photo of {title}"


@dataclass
class TokenSequence:
    """Fixed-length (77) token id sequence with marker and title metadata."""

    ids: np.ndarray
    class_index: int
    end_index: int
    title_start: int
    title_length: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.shape != (SEQUENCE_LENGTH,):
            raise ValueError(f"ids must have length {SEQUENCE_LENGTH}, got {self.ids.shape}")
        if np.any(self.ids < 0):
            raise ValueError("token ids must be nonnegative")
        if not (0 <= self.class_index < self.end_index < SEQUENCE_LENGTH):
            raise ValueError("class/end markers out of order")
        if np.any(self.ids[self.end_index + 1 :] != 0):
            raise ValueError("positions beyond the end marker must be zero")
        if not (1 <= self.title_length <= MAX_TITLE_LENGTH):
            raise ValueError(f"title length must be in 1..{MAX_TITLE_LENGTH}")
        if self.title_start <= self.class_index:
            raise ValueError("title must start after the class marker")
        if self.title_start + self.title_length > self.end_index:
            raise ValueError("title span extends past the content")

    @property
    def content_slice(self):
        return slice(self.class_index + 1, self.end_index)


@dataclass
class TextBundle:
    """All text-side vectors for one prompt."""

    token_embeddings: np.ndarray  # 77 x D
    sentence_embedding: np.ndarray  # D
    title_embedding: np.ndarray  # D
    self_support: np.ndarray  # D
    weight: float


def build_prompt(title: str) -> str:
    """Expand a bare title into the fixed prompt template."""
    if not isinstance(title, str) or not title.strip():
        raise ValueError("title must be a non-empty string")
    return PROMPT_TEMPLATE.format(title=title.strip())


def pad_tokens(raw_ids, title_span, class_id=CLASS_TOKEN_ID, end_id=END_TOKEN_ID) -> TokenSequence:
    """Frame raw content ids with class/end markers and zero padding.

    ``title_span`` is (start, length) in raw positions; it is re-indexed to
    the padded sequence and truncated to the 3-token kernel limit.
    """
    raw = np.asarray(raw_ids, dtype=np.int64).reshape(-1)
    n = raw.shape[0]
    if n == 0:
        raise ValueError("empty content")
    if n > MAX_CONTENT:
        raise ValueError(f"content too long: {n} > {MAX_CONTENT}")
    start, length = int(title_span[0]), int(title_span[1])
    if length < 1:
        raise ValueError("title span must have length >= 1")
    if start < 0 or start + length > n:
        raise ValueError("title span outside the raw content")
    ids = np.zeros(SEQUENCE_LENGTH, dtype=np.int64)
    ids[0] = class_id
    ids[1 : n + 1] = raw
    ids[n + 1] = end_id
    return TokenSequence(
        ids=ids,
        class_index=0,
        end_index=n + 1,
        title_start=start + 1,
        title_length=min(length, MAX_TITLE_LENGTH),
    )


def title_embedding(seq: TokenSequence, token_embeddings) -> np.ndarray:
    """Attention-pooled title vector from the token embedding sequence.

    The title window (length k <= 3) slides over the content positions as a
    1-D correlation kernel; window responses are softmax-normalized and used
    to average the window-mean vectors.
    """
    emb = check_embedding_matrix(token_embeddings, "token embeddings", rows=SEQUENCE_LENGTH)
    k = seq.title_length
    lo = seq.class_index + 1
    hi = seq.end_index  # exclusive
    if seq.title_start < lo or seq.title_start + k > hi:
        raise ValueError("title span outside the content")
    kernel = emb[seq.title_start : seq.title_start + k]  # k x D

    positions = np.arange(lo, hi - k + 1)
    responses = np.empty(positions.shape[0], dtype=np.float64)
    means = np.empty((positions.shape[0], emb.shape[1]), dtype=np.float64)
    for idx, p in enumerate(positions):
        window = emb[p : p + k]
        responses[idx] = float(np.sum(kernel * window))
        means[idx] = window.mean(axis=0)
    responses -= responses.max()  # stable softmax
    weights = np.exp(responses)
    weights /= weights.sum()
    return weights @ means


def tssm_fuse(sentence, title):
    """Fuse sentence and title embeddings into the self-support vector.

    Returns ``(weight, self_support)`` with ``weight`` the cosine similarity
    of the two inputs and ``self_support = weight * sentence + title``.
    """
    s = check_vector(sentence, "sentence embedding")
    t = check_vector(title, "title embedding", dim=s.shape[0])
    w = cosine_similarity(s, t)
    return w, w * s + t


def build_text_bundle(seq: TokenSequence, token_embeddings, sentence_embedding) -> TextBundle:
    """Run the full text branch: title pooling then self-support fusion."""
    emb = check_embedding_matrix(token_embeddings, "token embeddings", rows=SEQUENCE_LENGTH)
    sent = check_vector(sentence_embedding, "sentence embedding", dim=emb.shape[1])
    title = title_embedding(seq, emb)
    weight, support = tssm_fuse(sent, title)
    return TextBundle(
        token_embeddings=emb,
        sentence_embedding=sent,
        title_embedding=title,
        self_support=support,
        weight=weight,
    )


def _fnv1a_16(text: str) -> int:
    """Stable 16-bit hash (FNV-1a folded) of a string."""
    h = 0x811C9DC5
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return (h >> 16) ^ (h & 0xFFFF)


class MockTokenizer:
    """Whitespace tokenizer with hashed ids, for encoder-free runs.

    Word ids are derived from a stable 16-bit hash of the lowercased word,
    mapped away from the pad and marker ids. Real byte-pair token ids arrive
    through the same TokenSequence format from the exporter.
    """

    def encode(self, title: str) -> TokenSequence:
        prompt = build_prompt(title)
        words = prompt.split()
        title_words = title.strip().split()
        ids = [self.word_id(w) for w in words]
        start = len(words) - len(title_words)
        return pad_tokens(ids, (start, len(title_words)))

    @staticmethod
    def word_id(word: str) -> int:
        return 3 + (_fnv1a_16(word.lower()) % 49400)


class MockTextEncoder:
    """Deterministic per-id unit vectors standing in for a text encoder."""

    def __init__(self, dim=32, seed=0):
        self.dim = int(dim)
        self.seed = int(seed)

    def token_vector(self, token_id: int) -> np.ndarray:
        rng = np.random.default_rng((self.seed << 20) ^ (int(token_id) + 1))
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed(self, seq: TokenSequence) -> tuple[np.ndarray, np.ndarray]:
        """Returns (token embeddings 77 x D, sentence embedding D).

        The sentence vector is also written into the end-marker row, the
        position a contextual encoder summarizes into, so a stored token
        matrix carries the sentence embedding with it.
        """
        emb = np.stack([self.token_vector(t) for t in seq.ids])
        content = emb[seq.content_slice]
        sent = content.sum(axis=0)
        norm = np.linalg.norm(sent)
        if norm > 0:
            sent = sent / norm
        emb[seq.end_index] = sent
        return emb, sent
