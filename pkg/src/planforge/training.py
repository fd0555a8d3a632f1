"""End-to-end training of the draft generator and panoptic refiner, plus the
checkpoint container shared with the inference engine and service."""

from __future__ import annotations

import hashlib
import io
import json
import random
from dataclasses import dataclass, asdict, field

import numpy as np
import torch

from .connectivity import (
    causal_propagation_matrix,
    build_sequence_connectivity,
    normalize_adjacency,
    room_connectivity,
)
from .core import (
    CategoryPositionStats,
    ConfigurationError,
    Floorplan,
    Vocabulary,
    compute_category_stats,
    flatten,
)
from .data import SynthSample
from .draft import DraftGenerator, ModelConfig
from .objectives import (
    LossReport,
    cross_entropy_mean,
    geometric_loss_batch,
)
from .refiner import PanopticRefiner, decode_greedy, refine_once

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    lr: float = 3e-4
    epochs: int = 20
    batch_size: int = 128
    n_r: int = 5
    seed: int = 0
    geometric_loss: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["model"] = self.model.to_dict()
        return doc


@dataclass
class EncodedSample:
    tokens: torch.Tensor       # [4N+2] long
    categories: torch.Tensor   # [4N+2] long
    prop: torch.Tensor         # [4N+1, 4N+1] causal propagation (input slice)
    adj_interior: torch.Tensor # [4N, 4N] full normalized adjacency, no specials
    gt_boxes: torch.Tensor     # [N, 4]


def encode_sample(sample: SynthSample) -> EncodedSample:
    """Flatten a sample and precompute its graph matrices for training."""
    fp = sample.floorplan
    seq = flatten(fp)
    ordered_ids = [f"e{e.room_index}" for e in fp.elements]
    A = room_connectivity(sample.diagram, ordered_ids)
    n = len(fp)
    A_S = build_sequence_connectivity(A, n)
    prop = causal_propagation_matrix(A_S)[:-1, :-1]  # model input drops EoS
    adj_int = normalize_adjacency(A_S[1 : 4 * n + 1, 1 : 4 * n + 1])
    boxes = torch.tensor([e.box.as_tuple() for e in fp.elements], dtype=torch.float32)
    return EncodedSample(
        tokens=torch.tensor(seq.tokens, dtype=torch.long),
        categories=torch.tensor(seq.categories, dtype=torch.long),
        prop=torch.tensor(prop, dtype=torch.float32),
        adj_interior=torch.tensor(adj_int, dtype=torch.float32),
        gt_boxes=boxes,
    )


def _batches(encoded: list[EncodedSample], batch_size: int, rng: random.Random):
    """Length-bucketed shuffled batches (sequences in a batch share N)."""
    buckets: dict[int, list[EncodedSample]] = {}
    for s in encoded:
        buckets.setdefault(len(s.tokens), []).append(s)
    order = []
    for length in sorted(buckets):
        items = buckets[length]
        rng.shuffle(items)
        for i in range(0, len(items), batch_size):
            order.append(items[i : i + batch_size])
    rng.shuffle(order)
    return order


def _stack_batch(batch: list[EncodedSample]):
    tokens = torch.stack([s.tokens for s in batch])
    categories = torch.stack([s.categories for s in batch])
    prop = torch.stack([s.prop for s in batch])
    adj = torch.stack([s.adj_interior for s in batch])
    boxes = torch.stack([s.gt_boxes for s in batch])
    return tokens, categories, prop, adj, boxes


def draft_step(draft: DraftGenerator, tokens, categories, prop):
    """Teacher-forced coordinate logits [B, 4N, 256] aligned with targets."""
    t = tokens.shape[1]
    logits = draft(tokens[:, :-1], categories[:, :-1], prop)
    n_coords = t - 2
    return logits[:, :n_coords], tokens[:, 1 : n_coords + 1]


def refinement_steps(
    draft: DraftGenerator,
    refiner: PanopticRefiner,
    start_coords: torch.Tensor,
    categories: torch.Tensor,
    adj_interior: torch.Tensor,
    n_r: int,
):
    """On-policy refinement rollout; gradients are isolated per round by the
    greedy decode between rounds."""
    b, t4 = start_coords.shape
    positions = torch.arange(1, t4 + 1).expand(b, t4)
    x_c = draft.token_emb(categories[:, 1 : t4 + 1])
    x_p = draft.pos_emb(positions)
    current = start_coords
    all_logits = []
    for _ in range(n_r):
        logits = refine_once(draft, refiner, current, adj_interior, x_c, x_p)
        all_logits.append(logits)
        current = decode_greedy(logits)
    return all_logits


def train(
    samples: list[SynthSample],
    cfg: TrainConfig,
    log_path=None,
) -> tuple[DraftGenerator, PanopticRefiner, CategoryPositionStats, list[dict]]:
    """Train both stages end-to-end with AdamW at a constant learning rate."""
    if not samples:
        raise ConfigurationError("empty training corpus")
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    vocab = samples[0].floorplan.vocab
    cfg.model.n_categories = vocab.n_categories
    stats = compute_category_stats([s.floorplan for s in samples])
    encoded = [encode_sample(s) for s in samples]
    draft = DraftGenerator(cfg.model)
    refiner = PanopticRefiner(cfg.model)
    params = list(draft.parameters()) + list(refiner.parameters())
    opt = torch.optim.AdamW(params, lr=cfg.lr)
    metrics: list[dict] = []
    log_fh = open(log_path, "w") if log_path else None
    step = 0
    for epoch in range(cfg.epochs):
        for batch in _batches(encoded, cfg.batch_size, rng):
            tokens, categories, prop, adj, boxes = _stack_batch(batch)
            coord_logits, targets = draft_step(draft, tokens, categories, prop)
            l_ar = cross_entropy_mean(
                coord_logits.reshape(-1, coord_logits.shape[-1]), targets.reshape(-1)
            )
            draft_coords = decode_greedy(coord_logits)
            ref_logits = refinement_steps(
                draft, refiner, draft_coords, categories, adj, cfg.n_r
            )
            l_refs = [
                cross_entropy_mean(lg.reshape(-1, lg.shape[-1]), targets.reshape(-1))
                for lg in ref_logits
            ]
            l_recon = l_ar + torch.stack(l_refs).mean()
            if cfg.geometric_loss:
                l_geo_draft = geometric_loss_batch(coord_logits, boxes)
                l_geo_ref = torch.stack(
                    [geometric_loss_batch(lg, boxes) for lg in ref_logits]
                ).mean()
            else:
                l_geo_draft = torch.zeros(())
                l_geo_ref = torch.zeros(())
            total = l_recon + l_geo_draft + l_geo_ref
            opt.zero_grad()
            total.backward()
            opt.step()
            step += 1
            report = LossReport(
                L_ar=float(l_ar.detach()),
                L_ref=[float(v.detach()) for v in l_refs],
                L_recon=float(l_recon.detach()),
                L_geo_draft=float(l_geo_draft.detach()),
                L_geo_refine=float(l_geo_ref.detach()),
            )
            doc = {"epoch": epoch, **report.to_dict(step=step)}
            metrics.append(doc)
            if log_fh:
                log_fh.write(json.dumps(doc) + "\n")
    if log_fh:
        log_fh.close()
    return draft, refiner, stats, metrics


@torch.no_grad()
def teacher_forced_accuracy(
    draft: DraftGenerator, samples: list[SynthSample], batch_size: int = 64
) -> float:
    """Fraction of coordinate tokens whose argmax prediction matches the target."""
    encoded = [encode_sample(s) for s in samples]
    correct = total = 0
    for batch in _batches(encoded, batch_size, random.Random(0)):
        tokens, categories, prop, _, _ = _stack_batch(batch)
        coord_logits, targets = draft_step(draft, tokens, categories, prop)
        pred = coord_logits.argmax(dim=-1)
        correct += int((pred == targets).sum())
        total += targets.numel()
    return correct / max(total, 1)


def save_checkpoint(
    path,
    draft: DraftGenerator,
    refiner: PanopticRefiner,
    stats: CategoryPositionStats,
    vocab: Vocabulary,
    train_cfg: TrainConfig | None = None,
) -> None:
    torch.save(
        {
            "format_version": CHECKPOINT_VERSION,
            "config": {
                "model": draft.cfg.to_dict(),
                "vocab_names": [c.name for c in vocab.categories],
                "vocab_version": vocab.version,
                "stats": stats.to_json(),
                "train": train_cfg.to_dict() if train_cfg else None,
            },
            "draft": draft.state_dict(),
            "refiner": refiner.state_dict(),
        },
        path,
    )


def load_checkpoint(path):
    """Returns (draft, refiner, stats, vocab, model_hash)."""
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if blob.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {blob.get('format_version')}")
    cfg = ModelConfig.from_dict(blob["config"]["model"])
    vocab = Vocabulary.from_names(blob["config"]["vocab_names"])
    if vocab.version != blob["config"]["vocab_version"]:
        raise ConfigurationError("checkpoint vocabulary hash mismatch")
    stats = CategoryPositionStats.from_json(blob["config"]["stats"])
    draft = DraftGenerator(cfg)
    draft.load_state_dict(blob["draft"])
    refiner = PanopticRefiner(cfg)
    refiner.load_state_dict(blob["refiner"])
    draft.eval()
    refiner.eval()
    buf = io.BytesIO()
    torch.save({"d": blob["draft"], "r": blob["refiner"]}, buf)
    model_hash = hashlib.sha1(buf.getvalue()).hexdigest()[:16]
    return draft, refiner, stats, vocab, model_hash
