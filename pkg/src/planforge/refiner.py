"""Stage-2 panoptic refinement network: bidirectional transformer plus GCN that
re-predicts every coordinate of the draft sequence, applied for several rounds.

The refiner consumes sequences without BoS/EoS (length 4N). Category and
positional embeddings are taken unchanged from the draft stage; only the
geometric embeddings are recomputed from the refined tokens each round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .core import COORD_BINS, ConfigurationError, DomainError
from .draft import DraftGenerator, GraphConvLayer, ModelConfig, TransformerBlock, _init_module


class PanopticRefiner(torch.nn.Module):
    """GCN + unmasked self-attention transformer over the full 4N sequence."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.gcn = torch.nn.ModuleList(
            GraphConvLayer(cfg.d_model) for _ in range(cfg.gcn_layers)
        )
        self.blocks = torch.nn.ModuleList(
            TransformerBlock(cfg.d_model, cfg.n_heads, causal=False)
            for _ in range(cfg.n_layers)
        )
        self.ln_f = torch.nn.LayerNorm(cfg.d_model)
        self.head = torch.nn.Linear(cfg.d_model, COORD_BINS)
        self.apply(_init_module)

    def forward(
        self,
        x_g: torch.Tensor,
        adj: torch.Tensor,
        x_c: torch.Tensor,
        x_p: torch.Tensor,
    ) -> torch.Tensor:
        squeeze = x_g.ndim == 2
        if squeeze:
            x_g, adj, x_c, x_p = x_g[None], adj[None], x_c[None], x_p[None]
        x_gr = x_g
        for layer in self.gcn:
            x_gr = layer(x_gr, adj)
        x = x_gr + x_c + x_p
        for block in self.blocks:
            x = block(x)
        out = self.head(self.ln_f(x))
        return out[0] if squeeze else out


def refine_once(
    draft: DraftGenerator,
    refiner: PanopticRefiner,
    coord_tokens: torch.Tensor,
    adj_hat: torch.Tensor,
    cached_x_c: torch.Tensor,
    cached_x_p: torch.Tensor,
) -> torch.Tensor:
    """One panoptic pass: re-embed the coordinates with the shared draft table,
    propagate over the full (uncausal) normalized adjacency, and emit logits
    [..., 4N, 256] where every position can depend on every input position."""
    if coord_tokens.shape[-1] % 4 != 0:
        raise DomainError(f"refiner input length {coord_tokens.shape[-1]} not divisible by 4")
    x_g = draft.token_emb(coord_tokens)
    return refiner(x_g, adj_hat, cached_x_c, cached_x_p)


def decode_greedy(logits: torch.Tensor) -> torch.Tensor:
    """Per-position argmax over bins; ties break toward the lower bin index."""
    arr = logits.detach().cpu().numpy()
    if np.isnan(arr).any():
        pos = int(np.argwhere(np.isnan(arr))[0][0])
        raise DomainError(f"NaN logits at position {pos}")
    return torch.from_numpy(np.argmax(arr, axis=-1)).long()


@dataclass
class RefinementTrace:
    """Coordinate sequences per refinement round; round 0 is the draft output."""

    iterations: list[torch.Tensor] = field(default_factory=list)

    @property
    def final(self) -> torch.Tensor:
        return self.iterations[-1]

    def to_lists(self) -> list[list[int]]:
        return [[int(v) for v in it] for it in self.iterations]


@torch.no_grad()
def refine_loop(
    draft: DraftGenerator,
    refiner: PanopticRefiner,
    coord_tokens: torch.Tensor,
    cat_tokens: torch.Tensor,
    adj_hat: torch.Tensor,
    n_r: int = 5,
    lock_mask: torch.Tensor | None = None,
    lock_values: torch.Tensor | None = None,
) -> RefinementTrace:
    """Apply the refiner for n_r rounds, greedy-decoding between rounds.

    Locked positions are restored after every decode so user-pinned coordinates
    survive all rounds (the refiner still reads them as context).
    """
    if n_r < 1:
        raise ConfigurationError(f"refinement iterations must be >= 1, got {n_r}")
    if coord_tokens.numel() and (coord_tokens.max() >= COORD_BINS or coord_tokens.min() < 0):
        raise DomainError("refiner input tokens must be coordinate bins")
    t = coord_tokens.shape[-1]
    positions = torch.arange(1, t + 1)  # draft-stage positions (BoS occupies 0)
    x_c = draft.token_emb(cat_tokens)
    x_p = draft.pos_emb(positions)
    current = coord_tokens.clone().long()
    if lock_mask is not None:
        current[lock_mask] = lock_values[lock_mask]
    trace = RefinementTrace([current.clone()])
    for _ in range(n_r):
        logits = refine_once(draft, refiner, current, adj_hat, x_c, x_p)
        current = decode_greedy(logits)
        if lock_mask is not None:
            current[lock_mask] = lock_values[lock_mask]
        trace.iterations.append(current.clone())
    return trace
