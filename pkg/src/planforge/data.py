"""Corpus ingestion, noise filtering, split construction, and a procedural
synthetic floorplan generator for desk-scale training and testing."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

import networkx as nx

from .connectivity import BubbleDiagram, DiagramNode
from .core import (
    Box,
    ConfigurationError,
    DomainError,
    Element,
    Floorplan,
    FRONT_DOOR,
    INTERIOR_DOOR,
    Vocabulary,
    DEFAULT_VOCAB,
    compute_category_stats,
    floorplan_from_dict,
    floorplan_to_dict,
    hybrid_sort,
    quantize,
)

LIVING_ROOM = "living_room"

GRID = 16          # guillotine cuts snap to this pitch
MIN_ROOM = 48      # minimum room side
DOOR_HALF = 4      # door segments span center ± DOOR_HALF
WALL_MARGIN = 10   # door keeps this distance from shared-wall endpoints


@dataclass(frozen=True)
class RawSample:
    """Pre-vectorization sample: labeled polygons in the unit square."""

    polygons: tuple[tuple[str, tuple[tuple[float, float], ...]], ...]
    source_id: str = ""


@dataclass(frozen=True)
class SplitSpec:
    mode: str  # "separate" | "mixed"
    seed: int
    held_out_room_count: int | None = None
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.mode not in ("separate", "mixed"):
            raise ConfigurationError(f"unknown split mode {self.mode!r}")
        if self.mode == "separate" and self.held_out_room_count is None:
            raise ConfigurationError("separate mode requires held_out_room_count")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigurationError("split fractions must sum to 1")


@dataclass(frozen=True)
class SynthSample:
    floorplan: Floorplan
    diagram: BubbleDiagram

    def to_dict(self) -> dict:
        return {"floorplan": floorplan_to_dict(self.floorplan), "diagram": self.diagram.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict, vocab: Vocabulary = DEFAULT_VOCAB) -> "SynthSample":
        return cls(
            floorplan_from_dict(doc["floorplan"], vocab),
            BubbleDiagram.from_dict(doc["diagram"], vocab),
        )


def vectorize_to_boxes(raw: RawSample, vocab: Vocabulary = DEFAULT_VOCAB) -> Floorplan:
    """Replace every polygon by its quantized axis-aligned bounding box.

    Rooms keep input order and precede doors; living-room overlap trimming is
    a render-time concern, not applied here.
    """
    rooms, doors = [], []
    for cat_name, verts in raw.polygons:
        cat = vocab.by_name(cat_name)
        xs = [p[0] for p in verts]
        ys = [p[1] for p in verts]
        if not verts or min(xs) < 0 or max(xs) > 1 or min(ys) < 0 or max(ys) > 1:
            raise DomainError(f"polygon for {cat_name!r} outside unit square in {raw.source_id!r}")
        box = Box(quantize(min(xs)), quantize(min(ys)), quantize(max(xs)), quantize(max(ys)))
        (doors if cat.is_door else rooms).append((cat, box))
    elements = tuple(
        Element(i, cat, box) for i, (cat, box) in enumerate(rooms + doors)
    )
    return Floorplan(elements, vocab)


def overlap_fraction(door: Box, room: Box) -> float:
    """Fraction of the door's area inside the room (door-relative by design).

    A zero-area door counts as fully overlapping only when its segment lies
    strictly inside the room.
    """
    door_area = (door.xR - door.xL) * (door.yB - door.yT)
    if door_area == 0:
        strictly_inside = (
            door.xL > room.xL and door.xR < room.xR and door.yT > room.yT and door.yB < room.yB
        )
        return 1.0 if strictly_inside else 0.0
    ix = max(0, min(door.xR, room.xR) - max(door.xL, room.xL))
    iy = max(0, min(door.yB, room.yB) - max(door.yT, room.yT))
    return (ix * iy) / door_area


def filter_noisy(
    fp: Floorplan, tau: float = 0.5, strict_front: bool = True
) -> tuple[bool, str | None]:
    """Vectorization-noise filter: discard plans whose front doors overlap any
    room (zero tolerance when strict_front), or whose interior doors overlap a
    non-living room by more than tau."""
    rooms = fp.rooms
    for d in fp.doors:
        for r in rooms:
            frac = overlap_fraction(d.box, r.box)
            if d.category.name == FRONT_DOOR:
                limit = 0.0 if strict_front else tau
                if frac > limit:
                    return False, f"front door {d.room_index} overlaps room {r.room_index}"
            elif r.category.name != LIVING_ROOM and frac > tau:
                return False, (
                    f"interior door {d.room_index} overlaps room {r.room_index} "
                    f"by {frac:.2f} > {tau}"
                )
    return True, None


def _diagram_graph(bd: BubbleDiagram) -> nx.Graph:
    g = nx.Graph()
    for n in bd.nodes:
        g.add_node(n.node_id, category=n.category.name)
    g.add_edges_from(bd.edges)
    return g


def diagram_hash(bd: BubbleDiagram) -> str:
    """Canonical hash of the category-labeled diagram, up to isomorphism."""
    return nx.weisfeiler_lehman_graph_hash(_diagram_graph(bd), node_attr="category")


def room_count(sample: SynthSample) -> int:
    return len(sample.floorplan.rooms)


def make_splits(
    corpus: list[SynthSample], spec: SplitSpec
) -> dict[str, list[SynthSample]]:
    """Deterministic corpus partition.

    separate: test holds exactly the reserved room count, train/val the rest.
    mixed: isomorphism classes of bubble diagrams never straddle splits.
    """
    rng = random.Random(spec.seed)
    if spec.mode == "separate":
        test = [s for s in corpus if room_count(s) == spec.held_out_room_count]
        rest = [s for s in corpus if room_count(s) != spec.held_out_room_count]
        rng.shuffle(rest)
        f_train = spec.fractions[0] / (spec.fractions[0] + spec.fractions[1])
        cut = int(round(len(rest) * f_train))
        splits = {"train": rest[:cut], "val": rest[cut:], "test": test}
    else:
        groups: dict[str, list[SynthSample]] = {}
        for s in corpus:
            groups.setdefault(diagram_hash(s.diagram), []).append(s)
        keys = sorted(groups)
        rng.shuffle(keys)
        total = len(corpus)
        splits = {"train": [], "val": [], "test": []}
        targets = {
            "train": spec.fractions[0] * total,
            "val": spec.fractions[1] * total,
            "test": spec.fractions[2] * total,
        }
        for key in keys:
            name = min(splits, key=lambda k: len(splits[k]) - targets[k])
            splits[name].extend(groups[key])
    for name, part in splits.items():
        if not part:
            raise ConfigurationError(f"split {name!r} is empty under {spec}")
    return splits


def _snap_mid(lo: int, hi: int) -> int | None:
    """Grid-aligned cut nearest the midpoint of [lo, hi], honouring MIN_ROOM."""
    cands = [c for c in range(lo + MIN_ROOM, hi - MIN_ROOM + 1) if c % GRID == 0]
    if not cands:
        return None
    mid = (lo + hi) / 2
    return min(cands, key=lambda c: (abs(c - mid), c))


def _guillotine(n_rooms: int) -> list[tuple[int, int, int, int]] | None:
    """Partition (0,0,255,255) into n_rooms leaves with a fixed split policy.

    The first cut reserves the top strip for the living room; the remainder is
    split by halving the largest leaf along its longer side.  The layout is a
    pure function of n_rooms, so room geometry stays predictable while the
    connectivity sampled on top of it varies.
    """
    if n_rooms < 2:
        return [(0, 0, 255, 255)] if n_rooms == 1 else None
    top = (0, 0, 255, 128)
    leaves = [(0, 128, 255, 255)]
    while len(leaves) < n_rooms - 1:
        order = sorted(
            range(len(leaves)),
            key=lambda i: -(leaves[i][2] - leaves[i][0]) * (leaves[i][3] - leaves[i][1]),
        )
        for i in order:
            xL, yT, xR, yB = leaves[i]
            cuts = []
            if xR - xL >= yB - yT:
                cuts = [("v", _snap_mid(xL, xR)), ("h", _snap_mid(yT, yB))]
            else:
                cuts = [("h", _snap_mid(yT, yB)), ("v", _snap_mid(xL, xR))]
            axis, c = next(((a, c) for a, c in cuts if c is not None), (None, None))
            if axis is None:
                continue
            if axis == "v":
                leaves[i : i + 1] = [(xL, yT, c, yB), (c, yT, xR, yB)]
            else:
                leaves[i : i + 1] = [(xL, yT, xR, c), (xL, c, xR, yB)]
            break
        else:
            return None
    return [top] + sorted(leaves, key=lambda b: (b[1], b[0]))


def _shared_walls(boxes: list[tuple[int, int, int, int]]):
    """Pairs of rooms sharing a wall segment long enough for a door."""
    walls = []
    need = 2 * (WALL_MARGIN + DOOR_HALF)
    for i, a in enumerate(boxes):
        for j, b in enumerate(boxes):
            if j <= i:
                continue
            if a[2] == b[0] or b[2] == a[0]:  # vertical wall
                x = a[2] if a[2] == b[0] else b[2]
                lo, hi = max(a[1], b[1]), min(a[3], b[3])
                if hi - lo >= need:
                    walls.append((i, j, "v", x, lo, hi))
            if a[3] == b[1] or b[3] == a[1]:  # horizontal wall
                y = a[3] if a[3] == b[1] else b[3]
                lo, hi = max(a[0], b[0]), min(a[2], b[2])
                if hi - lo >= need:
                    walls.append((i, j, "h", y, lo, hi))
    return walls


def _door_box(axis: str, line: int, lo: int, hi: int) -> Box:
    center = (lo + hi) // 2
    if axis == "v":
        return Box(line, center - DOOR_HALF, line, center + DOOR_HALF)
    return Box(center - DOOR_HALF, line, center + DOOR_HALF, line)


def _hull_edges(box: tuple[int, int, int, int]):
    """Hull-facing edges of a room as (axis, line, lo, hi)."""
    xL, yT, xR, yB = box
    edges = []
    if xL == 0:
        edges.append(("v", 0, yT, yB))
    if xR == 255:
        edges.append(("v", 255, yT, yB))
    if yT == 0:
        edges.append(("h", 0, xL, xR))
    if yB == 255:
        edges.append(("h", 255, xL, xR))
    need = 2 * (WALL_MARGIN + DOOR_HALF)
    return [e for e in edges if e[3] - e[2] >= need]


def _synth_one(
    rng: random.Random, n_rooms: int, vocab: Vocabulary
) -> SynthSample | None:
    boxes = _guillotine(n_rooms)
    if boxes is None:
        return None
    walls = _shared_walls(boxes)
    adjacency = nx.Graph()
    adjacency.add_nodes_from(range(n_rooms))
    wall_by_pair = {}
    for i, j, axis, line, lo, hi in walls:
        adjacency.add_edge(i, j)
        wall_by_pair[(i, j)] = (axis, line, lo, hi)
    if not nx.is_connected(adjacency):
        return None

    # categories: living room takes the top strip, the rest cycle the vocab so
    # the category at each position follows from the room count alone
    other = [c for c in vocab.categories if not c.is_door and c.name != LIVING_ROOM]
    cats = [vocab.by_name(LIVING_ROOM)] + [other[i % len(other)] for i in range(n_rooms - 1)]

    # a uniformly weighted random spanning tree of doors keeps every room
    # reachable; connectivity is the main source of corpus diversity
    for a, b in adjacency.edges:
        adjacency[a][b]["weight"] = rng.random()
    tree_edges = nx.minimum_spanning_edges(adjacency, data=False)
    door_edges = sorted(tuple(sorted(e)) for e in tree_edges)
    extra = [tuple(sorted(e)) for e in adjacency.edges if tuple(sorted(e)) not in door_edges]
    rng.shuffle(extra)
    door_edges += extra[: rng.randint(0, min(1, len(extra)))]
    door_edges.sort()

    elements = [Element(i, cats[i], Box(*boxes[i])) for i in range(n_rooms)]
    diagram_edges: list[tuple[str, str]] = []
    next_idx = n_rooms
    interior = vocab.interior_door
    for i, j in door_edges:
        axis, line, lo, hi = wall_by_pair[(i, j)]
        door = Element(next_idx, interior, _door_box(axis, line, lo, hi))
        elements.append(door)
        diagram_edges += [(f"e{next_idx}", f"e{i}"), (f"e{next_idx}", f"e{j}")]
        next_idx += 1

    # front door centred on a hull edge of the first room (the living strip)
    edges = _hull_edges(boxes[0])
    if not edges:
        return None
    axis, line, lo, hi = edges[0]
    front = Element(next_idx, vocab.front_door, _door_box(axis, line, lo, hi))
    elements.append(front)
    diagram_edges.append((f"e{next_idx}", "e0"))

    fp = Floorplan(tuple(elements), vocab)
    nodes = tuple(DiagramNode(f"e{e.room_index}", e.category) for e in elements)
    diagram = BubbleDiagram(nodes, tuple(diagram_edges), vocab)
    return SynthSample(fp, diagram)


def synth_corpus(
    n: int,
    room_count_range: tuple[int, int] = (4, 8),
    seed: int = 0,
    vocab: Vocabulary = DEFAULT_VOCAB,
) -> list[SynthSample]:
    """Procedurally generate n valid samples, hybrid-sorted against the
    corpus's own category statistics; every output passes filter_noisy."""
    if n < 1:
        raise ConfigurationError("synth_corpus needs n >= 1")
    rng = random.Random(seed)
    samples: list[SynthSample] = []
    attempts = 0
    while len(samples) < n:
        attempts += 1
        if attempts > 100 * n:
            raise ConfigurationError("synthetic generation failed to converge")
        n_rooms = rng.randint(*room_count_range)
        sample = _synth_one(rng, n_rooms, vocab)
        if sample is None:
            continue
        keep, _ = filter_noisy(sample.floorplan)
        if keep:
            samples.append(sample)
    stats = compute_category_stats([s.floorplan for s in samples])
    return [SynthSample(hybrid_sort(s.floorplan, stats), s.diagram) for s in samples]


def write_corpus(path, samples: list[SynthSample]) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict()) + "\n")


def read_corpus(path, vocab: Vocabulary = DEFAULT_VOCAB) -> list[SynthSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                samples.append(SynthSample.from_dict(json.loads(line), vocab))
    return samples
