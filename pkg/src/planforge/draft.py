"""Stage-1 draft generator: shared token embeddings, one graph-convolution
propagation over the geometric stream, and a causal self-attention transformer
emitting 256-way coordinate logits."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import COORD_BINS, DomainError
from .objectives import soft_argmax  # noqa: F401  (re-exported for callers)


@dataclass
class ModelConfig:
    d_model: int = 128
    n_layers: int = 6
    n_heads: int = 8
    n_categories: int = 8
    max_len: int = 130
    gcn_layers: int = 1

    @property
    def vocab_size(self) -> int:
        return COORD_BINS + self.n_categories + 3

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        return cls(**doc)


def _init_module(m: nn.Module) -> None:
    if isinstance(m, (nn.Linear, nn.Embedding)):
        nn.init.normal_(m.weight, mean=0.0, std=0.02)
        if isinstance(m, nn.Linear) and m.bias is not None:
            nn.init.zeros_(m.bias)


class GraphConvLayer(nn.Module):
    """Single linear graph propagation: f(X, Â) = Â X W (no activation)."""

    def __init__(self, d_model: int):
        super().__init__()
        self.linear = nn.Linear(d_model, d_model, bias=False)

    def forward(self, x: torch.Tensor, adj: torch.Tensor) -> torch.Tensor:
        if adj.shape[-1] != x.shape[-2]:
            raise DomainError(f"adjacency {tuple(adj.shape)} does not match input {tuple(x.shape)}")
        return adj @ self.linear(x)


class SelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, causal: bool):
        super().__init__()
        if d_model % n_heads:
            raise DomainError("d_model must be divisible by n_heads")
        self.n_heads = n_heads
        self.causal = causal
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.proj = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        q, k, v = self.qkv(x).split(d, dim=-1)
        hd = d // self.n_heads
        q = q.view(b, t, self.n_heads, hd).transpose(1, 2)
        k = k.view(b, t, self.n_heads, hd).transpose(1, 2)
        v = v.view(b, t, self.n_heads, hd).transpose(1, 2)
        y = F.scaled_dot_product_attention(q, k, v, is_causal=self.causal)
        return self.proj(y.transpose(1, 2).reshape(b, t, d))


class TransformerBlock(nn.Module):
    def __init__(self, d_model: int, n_heads: int, causal: bool):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = SelfAttention(d_model, n_heads, causal)
        self.ln2 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(
            nn.Linear(d_model, 4 * d_model),
            nn.GELU(),
            nn.Linear(4 * d_model, d_model),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class DraftGenerator(nn.Module):
    """Autoregressive coordinate generator conditioned on a connectivity graph.

    One token-embedding table serves both the geometric and category streams;
    positional embeddings are separate. Categories are inputs, never predicted:
    the output head covers only the 256 coordinate bins.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.token_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_len, cfg.d_model)
        self.gcn = nn.ModuleList(GraphConvLayer(cfg.d_model) for _ in range(cfg.gcn_layers))
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.d_model, cfg.n_heads, causal=True) for _ in range(cfg.n_layers)
        )
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, COORD_BINS)
        self.apply(_init_module)

    def embed(
        self,
        tokens: torch.Tensor,
        categories: torch.Tensor,
        prop: torch.Tensor,
        positions: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """X = graph-propagated geometric embedding + category + positional."""
        if tokens.max() >= self.cfg.vocab_size or tokens.min() < 0:
            raise DomainError("token id outside vocabulary")
        if positions is None:
            positions = torch.arange(tokens.shape[-1], device=tokens.device)
            positions = positions.expand(tokens.shape)
        x_g = self.token_emb(tokens)
        for layer in self.gcn:
            x_g = layer(x_g, prop)
        x_c = self.token_emb(categories)
        x_p = self.pos_emb(positions)
        return x_g + x_c + x_p

    def forward(
        self,
        tokens: torch.Tensor,
        categories: torch.Tensor,
        prop: torch.Tensor,
        positions: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Per-position coordinate logits [B, T, 256]; position t predicts token t+1.

        `prop` must be the causal propagation matrix so the graph stream, like
        the attention stream, never reads past position t.
        """
        squeeze = tokens.ndim == 1
        if squeeze:
            tokens, categories, prop = tokens[None], categories[None], prop[None]
            if positions is not None:
                positions = positions[None]
        x = self.embed(tokens, categories, prop, positions)
        for block in self.blocks:
            x = block(x)
        logits = self.head(self.ln_f(x))
        return logits[0] if squeeze else logits

    @torch.no_grad()
    def step_decode(
        self,
        prefix_tokens: torch.Tensor,
        prefix_categories: torch.Tensor,
        prefix_prop: torch.Tensor,
        top_k: int = 5,
        temperature: float = 1.0,
    ) -> torch.Tensor:
        """Next-coordinate distribution over 256 bins, truncated to the top-k
        probabilities and renormalized."""
        if prefix_tokens.numel() == 0:
            raise DomainError("empty prefix")
        if not 1 <= top_k <= COORD_BINS:
            raise DomainError(f"top_k={top_k} outside [1, {COORD_BINS}]")
        logits = self.forward(prefix_tokens, prefix_categories, prefix_prop)[-1]
        probs = F.softmax(logits / temperature, dim=-1)
        if top_k < COORD_BINS:
            kept, idx = torch.topk(probs, top_k)
            probs = torch.zeros_like(probs)
            probs[idx] = kept / kept.sum()
        return probs

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
