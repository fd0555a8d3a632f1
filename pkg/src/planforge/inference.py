"""Student-forced generation from a bubble diagram: top-k sampling of the draft
sequence, constrained decoding for user-locked rooms, and orchestration of the
draft-to-refiner pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .connectivity import (
    BubbleDiagram,
    DiagramNode,
    build_sequence_connectivity,
    causal_propagation_matrix,
    normalize_adjacency,
    parse_bubble_diagram,
    room_connectivity,
)
from .core import (
    Box,
    CategoryPositionStats,
    Element,
    Floorplan,
    ValidationError,
    Vocabulary,
    floorplan_to_dict,
)
from .draft import DraftGenerator
from .evaluation import compatibility
from .refiner import PanopticRefiner, RefinementTrace, refine_loop


@dataclass(frozen=True)
class GenerationRequest:
    diagram: BubbleDiagram
    num_candidates: int = 1
    seed: int = 0
    top_k: int = 5
    refine_iters: int = 5
    locks: dict[str, Box] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_candidates < 1:
            raise ValidationError("num_candidates must be >= 1")
        if not 1 <= self.top_k <= 256:
            raise ValidationError(f"top_k {self.top_k} outside [1, 256]")
        if self.refine_iters < 1:
            raise ValidationError("refine_iters must be >= 1")
        known = {n.node_id for n in self.diagram.nodes}
        for room_id in self.locks:
            if room_id not in known:
                raise ValidationError(f"lock references unknown room {room_id!r}")


@dataclass
class Candidate:
    floorplan: Floorplan
    trace: RefinementTrace
    compatibility: int

    def to_dict(self) -> dict:
        return {
            "floorplan": floorplan_to_dict(self.floorplan),
            "trace": self.trace.to_lists(),
            "compatibility": self.compatibility,
        }


@dataclass
class GenerationResult:
    candidates: list[Candidate]
    request_seed: int
    model_hash: str

    def to_dict(self) -> dict:
        return {
            "candidates": [c.to_dict() for c in self.candidates],
            "request_seed": self.request_seed,
            "model_hash": self.model_hash,
        }


class GenerationPipeline:
    """Stateless orchestration over loaded read-only weights."""

    def __init__(
        self,
        draft: DraftGenerator,
        refiner: PanopticRefiner,
        stats: CategoryPositionStats,
        vocab: Vocabulary,
        model_hash: str = "unversioned",
    ):
        self.draft = draft
        self.refiner = refiner
        self.stats = stats
        self.vocab = vocab
        self.model_hash = model_hash

    def _sequence_inputs(self, ordered: list[DiagramNode], A: np.ndarray):
        n = len(ordered)
        A_S = build_sequence_connectivity(A, n)
        prop = torch.tensor(causal_propagation_matrix(A_S), dtype=torch.float32)
        adj_int = torch.tensor(
            normalize_adjacency(A_S[1 : 4 * n + 1, 1 : 4 * n + 1]), dtype=torch.float32
        )
        cats = [self.vocab.pad_id]
        for node in ordered:
            cats.extend([node.category.token] * 4)
        cats.append(self.vocab.pad_id)
        return prop, adj_int, torch.tensor(cats, dtype=torch.long)

    def _lock_arrays(self, ordered: list[DiagramNode], locks: dict[str, Box], n: int):
        if not locks:
            return None, None
        mask = torch.zeros(4 * n, dtype=torch.bool)
        values = torch.zeros(4 * n, dtype=torch.long)
        index = {node.node_id: i for i, node in enumerate(ordered)}
        for room_id, box in locks.items():
            i = index[room_id]
            mask[4 * i : 4 * i + 4] = True
            values[4 * i : 4 * i + 4] = torch.tensor(box.as_tuple(), dtype=torch.long)
        return mask, values

    @torch.no_grad()
    def _sample_draft(
        self,
        cat_tokens: torch.Tensor,
        prop: torch.Tensor,
        n: int,
        top_k: int,
        lock_mask,
        lock_values,
        gen: torch.Generator,
    ) -> torch.Tensor:
        tokens = torch.tensor([self.vocab.bos_id], dtype=torch.long)
        for pos in range(4 * n):
            if lock_mask is not None and lock_mask[pos]:
                nxt = lock_values[pos]
            else:
                t = tokens.shape[0]
                probs = self.draft.step_decode(
                    tokens, cat_tokens[:t], prop[:t, :t], top_k=top_k
                )
                nxt = torch.multinomial(probs, 1, generator=gen)[0]
            tokens = torch.cat([tokens, nxt.reshape(1)])
        return tokens[1:]

    def _to_floorplan(self, coords: torch.Tensor, ordered: list[DiagramNode]) -> Floorplan:
        elements = []
        for i, node in enumerate(ordered):
            xL, yT, xR, yB = (int(v) for v in coords[4 * i : 4 * i + 4])
            if xL > xR:
                xL, xR = xR, xL
            if yT > yB:
                yT, yB = yB, yT
            elements.append(Element(i, node.category, Box(xL, yT, xR, yB)))
        return Floorplan(tuple(elements), self.vocab)

    def generate(self, req: GenerationRequest) -> GenerationResult:
        """Per candidate i, a deterministic derived seed (seed + i) drives
        student-forced top-k sampling followed by the refinement loop."""
        ordered, A = parse_bubble_diagram(req.diagram, self.stats)
        n = len(ordered)
        prop, adj_int, cat_tokens = self._sequence_inputs(ordered, A)
        lock_mask, lock_values = self._lock_arrays(ordered, req.locks, n)
        candidates = []
        for i in range(req.num_candidates):
            gen = torch.Generator().manual_seed(req.seed + i)
            draft_coords = self._sample_draft(
                cat_tokens, prop, n, req.top_k, lock_mask, lock_values, gen
            )
            trace = refine_loop(
                self.draft,
                self.refiner,
                draft_coords,
                cat_tokens[1 : 4 * n + 1],
                adj_int,
                n_r=req.refine_iters,
                lock_mask=lock_mask,
                lock_values=lock_values,
            )
            fp = self._to_floorplan(trace.final, ordered)
            score = compatibility(req.diagram, fp)
            candidates.append(Candidate(fp, trace, score))
        return GenerationResult(candidates, req.seed, self.model_hash)

    def edit_and_refine(
        self,
        fp: Floorplan,
        edits: dict[int, Box],
        diagram: BubbleDiagram,
        iters: int = 5,
    ) -> tuple[Floorplan, RefinementTrace]:
        """Apply user box edits and re-run refinement with the edited rooms
        held fixed at every iteration."""
        index = {e.room_index: i for i, e in enumerate(fp.elements)}
        for room_index in edits:
            if room_index not in index:
                raise ValidationError(f"edit references unknown room index {room_index}")
        elements = list(fp.elements)
        for room_index, box in edits.items():
            old = elements[index[room_index]]
            elements[index[room_index]] = Element(room_index, old.category, box)
        edited = Floorplan(tuple(elements), fp.vocab)
        n = len(edited)
        # Candidates are laid out in the diagram's parse order, so the same
        # ordering recovers each element's graph row regardless of node naming.
        ordered, _ = parse_bubble_diagram(diagram, self.stats)
        if len(ordered) != n:
            raise ValidationError(
                "floorplan does not match the session diagram"
            )
        A = room_connectivity(diagram, [node.node_id for node in ordered])
        A_S = build_sequence_connectivity(A, n)
        adj_int = torch.tensor(
            normalize_adjacency(A_S[1 : 4 * n + 1, 1 : 4 * n + 1]), dtype=torch.float32
        )
        coords = torch.tensor(
            [v for e in edited.elements for v in e.box.as_tuple()], dtype=torch.long
        )
        cat_tokens = torch.tensor(
            [t for e in edited.elements for t in [e.category.token] * 4], dtype=torch.long
        )
        if iters == 0:
            return edited, RefinementTrace([coords])
        lock_mask = torch.zeros(4 * n, dtype=torch.bool)
        lock_values = coords.clone()
        for room_index in edits:
            i = index[room_index]
            lock_mask[4 * i : 4 * i + 4] = True
        trace = refine_loop(
            self.draft,
            self.refiner,
            coords,
            cat_tokens,
            adj_int,
            n_r=iters,
            lock_mask=lock_mask if edits else None,
            lock_values=lock_values if edits else None,
        )
        refined_elements = []
        for i, e in enumerate(edited.elements):
            xL, yT, xR, yB = (int(v) for v in trace.final[4 * i : 4 * i + 4])
            if xL > xR:
                xL, xR = xR, xL
            if yT > yB:
                yT, yB = yB, yT
            refined_elements.append(Element(e.room_index, e.category, Box(xL, yT, xR, yB)))
        return Floorplan(tuple(refined_elements), fp.vocab), trace
