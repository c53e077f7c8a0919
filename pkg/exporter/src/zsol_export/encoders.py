"""Text and image encoders behind one small interface.

``ClipEncoder`` wraps the frozen ViT-B/16 checkpoint when torch and
transformers can supply it. ``StubEncoder`` is a deterministic stand-in
for wiring and format tests on machines without the weights: hashed token
ids, seeded unit token vectors, and patch features from local pixel
statistics. Both emit the same record shapes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExportError

TOKEN_LENGTH = 77
MAX_TITLE_TOKENS = 3
PROMPT_TEMPLATE = "A photo of {title}"
PATCH_SIZE = 16


@dataclass
class TextRecord:
    """Everything export_text persists for one title."""

    ids: np.ndarray  # (77,) int
    title_start: int
    title_length: int
    class_index: int
    end_index: int
    token_embeddings: np.ndarray  # (77, dim) float
    sentence: np.ndarray  # (dim,) float


def build_prompt(title: str) -> str:
    title = title.strip()
    if not title:
        raise ExportError("title must be non-empty")
    return PROMPT_TEMPLATE.format(title=title)


def _djb2(text: str) -> int:
    h = 5381
    for ch in text.encode("utf-8"):
        h = ((h * 33) ^ ch) & 0xFFFFFFFF
    return h


class StubEncoder:
    """Deterministic encoder-free backend."""

    START_ID = 1
    END_ID = 2

    def __init__(self, dim=32, seed=0):
        self.dim = int(dim)
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed + 101)
        # fixed projection from raw patch statistics into embedding space
        self._mix = rng.standard_normal((5, self.dim))

    # -- text ------------------------------------------------------------

    def _word_id(self, word: str) -> int:
        return 3 + _djb2(word.lower()) % 49000

    def _token_vector(self, token_id: int) -> np.ndarray:
        rng = np.random.default_rng((self.seed << 18) ^ (int(token_id) + 7))
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed_text(self, title: str) -> TextRecord:
        prompt = build_prompt(title)
        words = prompt.split()
        n_title = len(title.strip().split())
        title_words = words[len(words) - n_title :][:MAX_TITLE_TOKENS]
        head = words[: len(words) - n_title]
        kept = head + title_words
        if len(kept) + 2 > TOKEN_LENGTH:
            raise ExportError(f"prompt too long for {TOKEN_LENGTH}-token sequence")
        ids = np.zeros(TOKEN_LENGTH, dtype=np.int64)
        ids[0] = self.START_ID
        for i, w in enumerate(kept, start=1):
            ids[i] = self._word_id(w)
        end_index = len(kept) + 1
        ids[end_index] = self.END_ID
        emb = np.stack([self._token_vector(t) for t in ids])
        sent = emb[1:end_index].sum(axis=0)
        sent = sent / np.linalg.norm(sent)
        emb[end_index] = sent
        return TextRecord(
            ids=ids,
            title_start=len(head) + 1,
            title_length=len(title_words),
            class_index=0,
            end_index=end_index,
            token_embeddings=emb,
            sentence=sent,
        )

    # -- image -----------------------------------------------------------

    def embed_window(self, window: np.ndarray) -> np.ndarray:
        """(H, W, 3) uint8 pixels -> (H/16, W/16, dim) patch features."""
        arr = np.asarray(window, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ExportError("window must be an H x W x 3 array")
        h, w, _ = arr.shape
        if h % PATCH_SIZE or w % PATCH_SIZE:
            raise ExportError(f"window sides must be multiples of {PATCH_SIZE}")
        gh, gw = h // PATCH_SIZE, w // PATCH_SIZE
        cells = arr.reshape(gh, PATCH_SIZE, gw, PATCH_SIZE, 3).mean(axis=(1, 3)) / 255.0
        ys, xs = np.meshgrid(np.arange(gh) / gh, np.arange(gw) / gw, indexing="ij")
        feats = np.concatenate([cells, ys[..., None], xs[..., None]], axis=2)
        out = feats @ self._mix
        norms = np.linalg.norm(out, axis=2, keepdims=True)
        return out / np.maximum(norms, 1e-12)


class ClipEncoder:
    """Frozen CLIP ViT-B/16 backend (needs torch, transformers, weights).

    Text tokens come from the byte-pair tokenizer; token-level embeddings
    are the final text-transformer states pushed through the text
    projection so every row lives in the shared image-text space, with the
    pooled sentence vector written into the end-marker row. Patch features
    are the final visual-transformer states before pooling; position
    embeddings are interpolated so 384-px windows yield a 24 x 24 grid.
    """

    CHECKPOINT = "openai/clip-vit-base-patch16"

    def __init__(self, device="cpu"):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as e:
            raise ExportError(f"CLIP backend needs torch and transformers: {e}") from e
        try:
            self._model = CLIPModel.from_pretrained(self.CHECKPOINT)
            self._processor = CLIPProcessor.from_pretrained(self.CHECKPOINT)
        except OSError as e:
            raise ExportError(f"cannot load {self.CHECKPOINT}: {e}") from e
        self._torch = torch
        self._device = device
        self._model.eval().to(device)
        self.dim = self._model.config.projection_dim

    def embed_text(self, title: str) -> TextRecord:
        torch = self._torch
        prompt = build_prompt(title)
        tok = self._processor.tokenizer
        enc = tok(prompt, padding="max_length", max_length=TOKEN_LENGTH, truncation=True)
        ids = np.asarray(enc["input_ids"], dtype=np.int64)
        title_ids = tok(title.strip(), add_special_tokens=False)["input_ids"]
        title_ids = title_ids[:MAX_TITLE_TOKENS]
        end_index = int(np.argmax(ids == tok.eos_token_id))
        start = _find_subsequence(ids[:end_index], title_ids)
        with torch.no_grad():
            out = self._model.text_model(
                input_ids=torch.tensor([list(ids)], device=self._device)
            )
            tokens = self._model.text_projection(out.last_hidden_state)[0]
            sentence = self._model.get_text_features(
                input_ids=torch.tensor([list(ids)], device=self._device)
            )[0]
        emb = tokens.cpu().numpy().astype(np.float64)
        sent = sentence.cpu().numpy().astype(np.float64)
        emb[end_index] = sent
        return TextRecord(
            ids=ids,
            title_start=start,
            title_length=len(title_ids),
            class_index=0,
            end_index=end_index,
            token_embeddings=emb,
            sentence=sent,
        )

    def embed_window(self, window: np.ndarray) -> np.ndarray:
        torch = self._torch
        arr = np.asarray(window, dtype=np.uint8)
        h, w, _ = arr.shape
        pixels = self._processor.image_processor(
            arr, do_resize=False, do_center_crop=False, return_tensors="pt"
        )["pixel_values"].to(self._device)
        with torch.no_grad():
            states = self._model.vision_model(
                pixel_values=pixels, interpolate_pos_encoding=True
            ).last_hidden_state[0, 1:]
        gh, gw = h // PATCH_SIZE, w // PATCH_SIZE
        return states.cpu().numpy().astype(np.float64).reshape(gh, gw, -1)


def _find_subsequence(haystack, needle) -> int:
    needle = list(needle)
    if not needle:
        raise ExportError("empty title token span")
    hay = list(haystack)
    for i in range(len(hay) - len(needle) + 1):
        if hay[i : i + len(needle)] == needle:
            return i
    raise ExportError("title tokens not found in prompt sequence")


def make_encoder(name: str, dim=32, seed=0, device="cpu"):
    if name == "stub":
        return StubEncoder(dim=dim, seed=seed)
    if name == "clip":
        return ClipEncoder(device=device)
    raise ExportError(f"unknown encoder {name!r} (expected 'stub' or 'clip')")
