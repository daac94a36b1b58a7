"""
Маленький decoder-only трансформер с захватом и патчингом residual stream.

Архитектура: pre-LN блоки, причинное multi-head внимание, GELU MLP,
позиционное кодирование rotary (как в Pythia) или обучаемое абсолютное
(как в GPT-2). Градиенты считает reverse-mode autograd torch.

Граница слоя l (h_{t,l}): l = 0 - выход эмбеддингов, l = i - выход
блока i, l = L - вход финальной нормализации и unembedding.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core.config import ModelConfig
from ..core.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

INIT_STD = 0.02


class CaptureMode(str, Enum):
    """Что записывать при прямом проходе."""
    NONE = "none"
    RESID = "resid"
    RESID_ATTN = "resid+attn"


@dataclass
class ForwardTrace:
    """
    Захваченные активации.

    resid: (batch, L + 1, T, d_model) - значения после патчей
    attn: (batch, L, n_heads, T, T) - построчно стохастические матрицы внимания
    """
    resid: torch.Tensor
    attn: Optional[torch.Tensor] = None

    @property
    def n_layers(self) -> int:
        return self.resid.shape[1] - 1


@dataclass
class PatchEdit:
    """
    Замена residual stream на границе слоя layer в позициях start..stop (включительно).

    vectors=None означает удаление представления (нулевые векторы).
    Векторы задаются формой (batch, n, d_model) или (n, d_model).
    """
    layer: int
    start: int
    stop: int
    vectors: Optional[torch.Tensor] = None


@dataclass
class PatchSpec:
    """Набор правок residual stream."""
    edits: List[PatchEdit] = field(default_factory=list)

    def for_layer(self, layer: int) -> List[PatchEdit]:
        return [e for e in self.edits if e.layer == layer]

    @classmethod
    def from_trace(
        cls, trace: ForwardTrace, layers: Optional[List[int]] = None
    ) -> "PatchSpec":
        """Патч, подставляющий все позиции указанных слоёв из трассы."""
        layers = list(range(trace.n_layers + 1)) if layers is None else layers
        T = trace.resid.shape[2]
        return cls([PatchEdit(l, 0, T - 1, trace.resid[:, l]) for l in layers])


class RotaryEmbedding(nn.Module):
    """Rotary позиционное кодирование (rotate-half) для головы размерности head_dim."""

    def __init__(
        self, head_dim: int, max_positions: int, base: float = 10000.0
    ) -> None:
        super().__init__()
        exponents = torch.arange(0, head_dim, 2, dtype=torch.float64) / head_dim
        inv_freq = 1.0 / (base**exponents)
        positions = torch.arange(max_positions, dtype=torch.float64)
        angles = torch.outer(positions, inv_freq)
        angles = torch.cat([angles, angles], dim=-1)
        self.register_buffer("cos", angles.cos().float(), persistent=False)
        self.register_buffer("sin", angles.sin().float(), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (batch, heads, T, head_dim)
        T = x.shape[-2]
        cos = self.cos[:T].to(x.dtype)
        sin = self.sin[:T].to(x.dtype)
        half = x.shape[-1] // 2
        rotated = torch.cat([-x[..., half:], x[..., :half]], dim=-1)
        return x * cos + rotated * sin


class CausalSelfAttention(nn.Module):
    """Multi-head внимание с причинной маской; возвращает и веса внимания."""

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.n_heads = cfg.n_heads
        self.head_dim = cfg.d_model // cfg.n_heads
        self.qkv = nn.Linear(cfg.d_model, 3 * cfg.d_model)
        self.out = nn.Linear(cfg.d_model, cfg.d_model)
        self.rotary = (
            RotaryEmbedding(self.head_dim, cfg.max_positions)
            if cfg.positional_scheme == "rotary"
            else None
        )

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        B, T, d = x.shape
        q, k, v = self.qkv(x).split(d, dim=-1)
        q = q.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        k = k.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        v = v.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        if self.rotary is not None:
            q = self.rotary(q)
            k = self.rotary(k)

        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        mask = torch.ones(T, T, dtype=torch.bool, device=x.device).triu(1)
        scores = scores.masked_fill(mask, float("-inf"))
        weights = F.softmax(scores, dim=-1)

        mixed = (weights @ v).transpose(1, 2).reshape(B, T, d)
        return self.out(mixed), weights


class MLP(nn.Module):
    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.fc = nn.Linear(cfg.d_model, cfg.d_mlp)
        self.proj = nn.Linear(cfg.d_mlp, cfg.d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.proj(F.gelu(self.fc(x)))


class Block(nn.Module):
    """Pre-LN блок: x + attn(ln(x)), затем x + mlp(ln(x))."""

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.ln_attn = nn.LayerNorm(cfg.d_model)
        self.attn = CausalSelfAttention(cfg)
        self.ln_mlp = nn.LayerNorm(cfg.d_model)
        self.mlp = MLP(cfg)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        attn_out, weights = self.attn(self.ln_attn(x))
        x = x + attn_out
        x = x + self.mlp(self.ln_mlp(x))
        return x, weights


class StateTrackingTransformer(nn.Module):
    """
    Decoder-only трансформер для word problem.

    Пример использования:
        model = init_model(ModelConfig(vocab_size=8))
        logits, trace = model(tokens, capture="resid+attn")
        edit = PatchEdit(2, 1, 5, clean[:, 2, 1:6])
        patched = model.forward_patched(tokens, PatchSpec([edit]))
    """

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        cfg.validate()
        self.config = cfg
        self.embed = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_embed = (
            nn.Embedding(cfg.max_positions, cfg.d_model)
            if cfg.positional_scheme == "learned"
            else None
        )
        self.blocks = nn.ModuleList([Block(cfg) for _ in range(cfg.n_layers)])
        self.ln_final = nn.LayerNorm(cfg.d_model)
        self.unembed = (
            None
            if cfg.tied_embeddings
            else nn.Linear(cfg.d_model, cfg.vocab_size, bias=False)
        )

    @property
    def n_layers(self) -> int:
        return self.config.n_layers

    def _check_tokens(self, tokens: torch.Tensor) -> None:
        if tokens.dim() != 2:
            raise DataError(
                f"tokens must be (batch, length), got shape {tuple(tokens.shape)}"
            )
        if tokens.shape[1] > self.config.max_positions:
            raise DataError(
                f"sequence length {tokens.shape[1]} "
                f"exceeds max_positions {self.config.max_positions}"
            )
        if tokens.numel() and (
            tokens.min() < 0 or tokens.max() >= self.config.vocab_size
        ):
            raise DataError(f"token id out of range [0, {self.config.vocab_size})")

    def embed_tokens(self, tokens: torch.Tensor) -> torch.Tensor:
        """h_{t,0}: эмбеддинг токена (+ позиция для learned-схемы)."""
        self._check_tokens(tokens)
        h = self.embed(tokens)
        if self.pos_embed is not None:
            h = h + self.pos_embed(torch.arange(tokens.shape[1], device=tokens.device))
        return h

    def unembed_resid(self, h: torch.Tensor) -> torch.Tensor:
        h = self.ln_final(h)
        if self.unembed is None:
            return h @ self.embed.weight.T
        return self.unembed(h)

    def forward(
        self,
        tokens: torch.Tensor,
        capture: str = "none",
        patch: Optional[PatchSpec] = None,
    ) -> Tuple[torch.Tensor, Optional[ForwardTrace]]:
        """
        Прямой проход.

        Args:
            tokens: Id токенов (batch, T)
            capture: "none", "resid" или "resid+attn"
            patch: Правки residual stream (применяются до следующего слоя)

        Returns:
            (logits (batch, T, vocab), трасса или None)
        """
        return self.forward_from_embeddings(self.embed_tokens(tokens), capture, patch)

    def forward_from_embeddings(
        self,
        h: torch.Tensor,
        capture: str = "none",
        patch: Optional[PatchSpec] = None,
    ) -> Tuple[torch.Tensor, Optional[ForwardTrace]]:
        """Прямой проход, начиная с готового h_{*,0}."""
        capture = CaptureMode(capture)
        if patch is not None:
            self._check_patch(patch, h.shape)

        resid: List[torch.Tensor] = []
        attn: List[torch.Tensor] = []

        h = self._apply_patch(h, 0, patch)
        if capture != CaptureMode.NONE:
            resid.append(h)
        for index, block in enumerate(self.blocks, start=1):
            h, weights = block(h)
            h = self._apply_patch(h, index, patch)
            if capture != CaptureMode.NONE:
                resid.append(h)
            if capture == CaptureMode.RESID_ATTN:
                attn.append(weights)

        logits = self.unembed_resid(h)
        if capture == CaptureMode.NONE:
            return logits, None
        trace = ForwardTrace(
            resid=torch.stack(resid, dim=1),
            attn=torch.stack(attn, dim=1) if attn else None,
        )
        return logits, trace

    def forward_patched(self, tokens: torch.Tensor, patch: PatchSpec) -> torch.Tensor:
        """Логиты при патче residual stream."""
        logits, _ = self.forward(tokens, patch=patch)
        return logits

    def _check_patch(self, patch: PatchSpec, shape: torch.Size) -> None:
        B, T, d = shape
        for edit in patch.edits:
            if not 0 <= edit.layer <= self.n_layers:
                raise DataError(f"patch layer {edit.layer} outside 0..{self.n_layers}")
            if not 0 <= edit.start <= edit.stop < T:
                raise DataError(
                    f"patch range {edit.start}..{edit.stop} outside 0..{T - 1}"
                )
            if edit.vectors is None:
                continue
            width = edit.stop - edit.start + 1
            shape = tuple(edit.vectors.shape)
            if shape not in ((width, d), (B, width, d)):
                raise DataError(
                    f"patch vectors of shape {shape} do not match range width {width}, "
                    f"batch {B}, d_model {d}"
                )

    @staticmethod
    def _apply_patch(
        h: torch.Tensor, layer: int, patch: Optional[PatchSpec]
    ) -> torch.Tensor:
        if patch is None:
            return h
        edits = patch.for_layer(layer)
        if not edits:
            return h
        h = h.clone()
        for edit in edits:
            if edit.vectors is None:
                h[:, edit.start : edit.stop + 1] = 0.0
            else:
                h[:, edit.start : edit.stop + 1] = edit.vectors.to(h.dtype)
        return h


def parameter_count(cfg: ModelConfig) -> int:
    """Число параметров в замкнутой форме."""
    d, m, V = cfg.d_model, cfg.d_mlp, cfg.vocab_size
    P, L = cfg.max_positions, cfg.n_layers
    per_layer = 4 * d + (3 * d * d + 3 * d) + (d * d + d) + (d * m + m) + (m * d + d)
    total = V * d + L * per_layer + 2 * d
    if cfg.positional_scheme == "learned":
        total += P * d
    if not cfg.tied_embeddings:
        total += d * V
    return total


def init_model(cfg: ModelConfig) -> StateTrackingTransformer:
    """
    Детерминированная инициализация по cfg.seed.

    Веса - нормальные с std 0.02 (выходные проекции блоков делятся на
    sqrt(2L)), смещения - нули, нормализации - единичные.
    """
    try:
        cfg.validate()
    except ConfigError:
        logger.error(f"Некорректная конфигурация модели: {cfg}")
        raise

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        model = StateTrackingTransformer(cfg)
        residual_std = INIT_STD / math.sqrt(2 * cfg.n_layers)
        for name, param in model.named_parameters():
            if name.endswith("bias"):
                nn.init.zeros_(param)
            elif ".ln_" in name or name.startswith("ln_"):
                nn.init.ones_(param)
            elif name.endswith("out.weight") or name.endswith("proj.weight"):
                nn.init.normal_(param, std=residual_std)
            else:
                nn.init.normal_(param, std=INIT_STD)

    logger.info(
        f"Модель инициализирована: {cfg.n_layers} слоёв, d_model={cfg.d_model}, "
        f"{parameter_count(cfg)} параметров, seed={cfg.seed}"
    )
    return model
