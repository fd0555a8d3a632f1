"""Bubble diagram parsing and connectivity matrices for graph convolution.

The room-level matrix A is expanded token-wise to the sequence matrix A_S
(BoS/EoS rows forced to zero), then symmetrically normalized as
Â = D̃^{-1/2}(A_S + I)D̃^{-1/2}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import (
    CategoryPositionStats,
    RoomCategory,
    ValidationError,
    Vocabulary,
    DEFAULT_VOCAB,
    category_rank_order,
)


@dataclass(frozen=True)
class DiagramNode:
    node_id: str
    category: RoomCategory


@dataclass(frozen=True)
class BubbleDiagram:
    """User input graph: room/door nodes plus door-mediated connectivity edges."""

    nodes: tuple[DiagramNode, ...]
    edges: tuple[tuple[str, str], ...]
    vocab: Vocabulary = DEFAULT_VOCAB

    def __post_init__(self):
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate node ids in bubble diagram")
        known = set(ids)
        seen = set()
        for a, b in self.edges:
            if a == b:
                raise ValidationError(f"self-edge on node {a!r}")
            if a not in known or b not in known:
                raise ValidationError(f"edge ({a!r}, {b!r}) references unknown node")
            key = frozenset((a, b))
            if key in seen:
                raise ValidationError(f"duplicate edge ({a!r}, {b!r})")
            seen.add(key)

    def node(self, node_id: str) -> DiagramNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise ValidationError(f"unknown node {node_id!r}")

    @classmethod
    def from_dict(cls, doc: dict, vocab: Vocabulary = DEFAULT_VOCAB) -> "BubbleDiagram":
        try:
            nodes = tuple(
                DiagramNode(str(n["id"]), vocab.by_name(str(n["category"])))
                for n in doc["nodes"]
            )
            edges = tuple((str(a), str(b)) for a, b in doc["edges"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed bubble diagram document: {exc}") from exc
        return cls(nodes, edges, vocab)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.node_id, "category": n.category.name} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }


def room_connectivity(bd: BubbleDiagram, ordered_ids: list[str]) -> np.ndarray:
    """Room matrix A for an explicit node order: unit diagonal, room-door edges,
    and room-room edges for rooms sharing a door."""
    index = {node_id: i for i, node_id in enumerate(ordered_ids)}
    if len(index) != len(bd.nodes) or set(index) != {n.node_id for n in bd.nodes}:
        raise ValidationError("ordered_ids must be a permutation of the diagram's nodes")
    adj: dict[str, set[str]] = {n.node_id: set() for n in bd.nodes}
    A = np.eye(len(ordered_ids), dtype=np.float64)
    for a, b in bd.edges:
        adj[a].add(b)
        adj[b].add(a)
        A[index[a], index[b]] = 1.0
        A[index[b], index[a]] = 1.0
    for d in bd.nodes:
        if d.category.is_door:
            rooms = sorted(adj[d.node_id])
            for i, r1 in enumerate(rooms):
                for r2 in rooms[i + 1 :]:
                    A[index[r1], index[r2]] = 1.0
                    A[index[r2], index[r1]] = 1.0
    return A


def parse_bubble_diagram(
    bd: BubbleDiagram, stats: CategoryPositionStats
) -> tuple[list[DiagramNode], np.ndarray]:
    """Order diagram nodes by hybrid ranking and build the room connectivity matrix A.

    A[i][j] = 1 for room-door edges and for two rooms sharing a door; the
    diagonal is forced to 1 so the four tokens of one element stay mutually
    connected after sequence expansion.
    """
    adj: dict[str, set[str]] = {n.node_id: set() for n in bd.nodes}
    for a, b in bd.edges:
        na, nb = bd.node(a), bd.node(b)
        if na.category.is_door and nb.category.is_door:
            raise ValidationError(f"edge ({a!r}, {b!r}) connects two doors")
        adj[a].add(b)
        adj[b].add(a)
    for n in bd.nodes:
        if n.category.is_door and not adj[n.node_id]:
            raise ValidationError(f"door {n.node_id!r} has no incident room")

    order = category_rank_order(bd.vocab, stats)
    for n in bd.nodes:
        if n.category.name not in order:
            raise ValidationError(f"no position stats for category {n.category.name!r}")
    arrival = {n.node_id: i for i, n in enumerate(bd.nodes)}
    ordered = sorted(bd.nodes, key=lambda n: (order[n.category.name], arrival[n.node_id]))
    A = room_connectivity(bd, [n.node_id for n in ordered])
    return ordered, A


def build_sequence_connectivity(A: np.ndarray, n: int) -> np.ndarray:
    """Expand the N×N room matrix to the (4N+2)×(4N+2) token-level matrix A_S."""
    if A.shape != (n, n):
        raise ValidationError(f"A has shape {A.shape}, expected {(n, n)}")
    size = 4 * n + 2
    A_S = np.zeros((size, size), dtype=np.float64)
    if n:
        A_S[1 : 4 * n + 1, 1 : 4 * n + 1] = np.kron(A, np.ones((4, 4)))
    return A_S


def interior_connectivity(A: np.ndarray, n: int) -> np.ndarray:
    """4N×4N token matrix without BoS/EoS rows, as consumed by the refiner."""
    return build_sequence_connectivity(A, n)[1 : 4 * n + 1, 1 : 4 * n + 1]


def normalize_adjacency(A_S: np.ndarray) -> np.ndarray:
    """Symmetric normalization with self-loops: Â[i][j] = Ã[i][j]/√(d_i d_j)."""
    if A_S.ndim != 2 or A_S.shape[0] != A_S.shape[1]:
        raise ValidationError(f"adjacency must be square, got {A_S.shape}")
    A_tilde = A_S + np.eye(A_S.shape[0])
    d = A_tilde.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return A_tilde * np.outer(inv_sqrt, inv_sqrt)


def causal_mask_adjacency(A_S: np.ndarray, t: int) -> np.ndarray:
    """Normalized adjacency of the leading t×t submatrix (recomputed, not truncated)."""
    if not 1 <= t <= A_S.shape[0]:
        raise IndexError(f"t={t} outside [1, {A_S.shape[0]}]")
    return normalize_adjacency(A_S[:t, :t])


def causal_propagation_matrix(A_S: np.ndarray) -> np.ndarray:
    """Lower-triangular matrix C with row t equal to the last row of
    normalize_adjacency(A_S[:t+1, :t+1]).

    Multiplying C @ X applies, at every position simultaneously, the graph
    propagation a step-by-step decoder would see with only the prefix graph.
    C[t, j] = Ã[t, j] / sqrt(S[t, t] · S[j, t]) for j ≤ t, where S[j, t] is
    node j's degree within the first t+1 tokens.
    """
    size = A_S.shape[0]
    A_tilde = A_S + np.eye(size)
    prefix_deg = np.cumsum(A_tilde, axis=1)  # prefix_deg[j, t] = Σ_{k≤t} Ã[j, k]
    C = np.zeros_like(A_tilde)
    for t in range(size):
        d_t = prefix_deg[t, t]
        d_j = prefix_deg[: t + 1, t]
        C[t, : t + 1] = A_tilde[t, : t + 1] / np.sqrt(d_t * d_j)
    return C


def matrix_to_dict(m: np.ndarray) -> dict:
    return {"shape": list(m.shape), "data": [float(x) for x in m.ravel()]}


def matrix_from_dict(doc: dict) -> np.ndarray:
    return np.array(doc["data"], dtype=np.float64).reshape(doc["shape"])


def diagram_to_json(bd: BubbleDiagram) -> str:
    return json.dumps(bd.to_dict())


def diagram_from_json(text: str, vocab: Vocabulary = DEFAULT_VOCAB) -> BubbleDiagram:
    return BubbleDiagram.from_dict(json.loads(text), vocab)
