"""Training objectives: cross-entropy reconstruction, soft-argmax decoding,
pairwise IoU matrices, and the geometric layout loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .core import COORD_BINS, DomainError


@dataclass
class LossReport:
    L_ar: float
    L_ref: list[float] = field(default_factory=list)
    L_recon: float = 0.0
    L_geo_draft: float = 0.0
    L_geo_refine: float = 0.0

    @property
    def total(self) -> float:
        return self.L_recon + self.L_geo_draft + self.L_geo_refine

    def to_dict(self, step: int | None = None) -> dict:
        doc = {
            "L_ar": self.L_ar,
            "L_ref": list(self.L_ref),
            "L_geo_draft": self.L_geo_draft,
            "L_geo_refine": self.L_geo_refine,
            "L_recon": self.L_recon,
            "total": self.total,
        }
        if step is not None:
            doc = {"step": step, **doc}
        return doc


def soft_argmax(logits: torch.Tensor) -> torch.Tensor:
    """Differentiable coordinate expectation Σ_j j·softmax(logits)_j over 256 bins.

    Works on any leading batch shape; the bin axis is the last one.
    """
    if logits.shape[-1] != COORD_BINS:
        raise DomainError(f"expected {COORD_BINS} bins, got {logits.shape[-1]}")
    if not torch.isfinite(logits).all():
        raise DomainError("non-finite logits passed to soft_argmax")
    probs = F.softmax(logits, dim=-1)
    bins = torch.arange(COORD_BINS, dtype=logits.dtype, device=logits.device)
    return (probs * bins).sum(dim=-1)


def box_iou(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """IoU of continuous boxes (xL, yT, xR, yB); 0/0 on degenerate pairs is 0."""
    a = torch.as_tensor(a, dtype=torch.float64) if not torch.is_tensor(a) else a
    b = torch.as_tensor(b, dtype=torch.float64) if not torch.is_tensor(b) else b
    ix = (torch.minimum(a[..., 2], b[..., 2]) - torch.maximum(a[..., 0], b[..., 0])).clamp(min=0)
    iy = (torch.minimum(a[..., 3], b[..., 3]) - torch.maximum(a[..., 1], b[..., 1])).clamp(min=0)
    inter = ix * iy
    area_a = (a[..., 2] - a[..., 0]).clamp(min=0) * (a[..., 3] - a[..., 1]).clamp(min=0)
    area_b = (b[..., 2] - b[..., 0]).clamp(min=0) * (b[..., 3] - b[..., 1]).clamp(min=0)
    union = area_a + area_b - inter
    return torch.where(union > 0, inter / union.clamp(min=1e-12), torch.zeros_like(inter))


def iou_matrix(boxes: torch.Tensor) -> torch.Tensor:
    """All pairwise IoUs of an [N, 4] box set; diagonal is 1 for positive-area boxes."""
    boxes = torch.as_tensor(boxes) if not torch.is_tensor(boxes) else boxes
    if boxes.ndim != 2 or boxes.shape[0] < 1:
        raise DomainError(f"expected [N, 4] boxes with N >= 1, got {tuple(boxes.shape)}")
    return box_iou(boxes[:, None, :], boxes[None, :, :])


def logits_to_boxes(coord_logits: torch.Tensor) -> torch.Tensor:
    """Soft-argmax an [4N, 256] coordinate logit block into [N, 4] continuous boxes."""
    if coord_logits.shape[0] % 4 != 0:
        raise DomainError(f"coordinate block length {coord_logits.shape[0]} not divisible by 4")
    coords = soft_argmax(coord_logits)
    return coords.reshape(-1, 4)


def geometric_loss(coord_logits: torch.Tensor, gt_boxes: torch.Tensor) -> torch.Tensor:
    """Mean L1 distance between generated and ground-truth pairwise IoU matrices.

    Averaged over the N(N-1)/2 unordered off-diagonal pairs; 0 when N < 2.
    """
    gen_boxes = logits_to_boxes(coord_logits)
    gt_boxes = torch.as_tensor(gt_boxes, dtype=gen_boxes.dtype) if not torch.is_tensor(gt_boxes) else gt_boxes
    n = gen_boxes.shape[0]
    if gt_boxes.shape != (n, 4):
        raise DomainError(f"gt_boxes shape {tuple(gt_boxes.shape)} != {(n, 4)}")
    if n < 2:
        return torch.zeros((), dtype=gen_boxes.dtype)
    g_gen = iou_matrix(gen_boxes)
    g_gt = iou_matrix(gt_boxes.to(gen_boxes.dtype))
    iu = torch.triu_indices(n, n, offset=1)
    return (g_gen[iu[0], iu[1]] - g_gt[iu[0], iu[1]]).abs().mean()


def geometric_loss_batch(coord_logits: torch.Tensor, gt_boxes: torch.Tensor) -> torch.Tensor:
    """Batched geometric loss: coord_logits [B, 4N, 256], gt_boxes [B, N, 4]."""
    b, t, _ = coord_logits.shape
    if t % 4 != 0:
        raise DomainError(f"coordinate block length {t} not divisible by 4")
    n = t // 4
    if n < 2:
        return torch.zeros((), dtype=coord_logits.dtype)
    gen = soft_argmax(coord_logits).reshape(b, n, 4)
    gt = gt_boxes.to(gen.dtype)
    g_gen = box_iou(gen[:, :, None, :], gen[:, None, :, :])
    g_gt = box_iou(gt[:, :, None, :], gt[:, None, :, :])
    iu = torch.triu_indices(n, n, offset=1)
    return (g_gen[:, iu[0], iu[1]] - g_gt[:, iu[0], iu[1]]).abs().mean()


def cross_entropy_mean(coord_logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean token cross-entropy over coordinate positions."""
    return F.cross_entropy(coord_logits, targets.long())


def reconstruction_loss(
    draft_logits: torch.Tensor,
    refine_logits: list[torch.Tensor],
    targets: torch.Tensor,
    geo_draft: torch.Tensor | float = 0.0,
    geo_refine: torch.Tensor | float = 0.0,
) -> tuple[torch.Tensor, LossReport]:
    """Combine per-stage cross-entropies: mean CE of the draft plus the mean CE
    over all refinement iterations, each averaged over sequence positions.

    Returns the differentiable total and an itemized report.
    """
    if draft_logits.shape[0] != targets.shape[0]:
        raise DomainError("draft logits / target length mismatch")
    l_ar = cross_entropy_mean(draft_logits, targets)
    l_refs = []
    for logits in refine_logits:
        if logits.shape[0] != targets.shape[0]:
            raise DomainError("refine logits / target length mismatch")
        l_refs.append(cross_entropy_mean(logits, targets))
    l_ref_term = torch.stack(l_refs).mean() if l_refs else torch.zeros_like(l_ar)
    l_recon = l_ar + l_ref_term
    geo_draft_t = torch.as_tensor(geo_draft, dtype=l_recon.dtype)
    geo_refine_t = torch.as_tensor(geo_refine, dtype=l_recon.dtype)
    total = l_recon + geo_draft_t + geo_refine_t
    report = LossReport(
        L_ar=float(l_ar.detach()),
        L_ref=[float(v.detach()) for v in l_refs],
        L_recon=float(l_recon.detach()),
        L_geo_draft=float(geo_draft_t.detach()),
        L_geo_refine=float(geo_refine_t.detach()),
    )
    return total, report
