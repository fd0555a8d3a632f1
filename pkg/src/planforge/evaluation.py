"""Evaluation: graph reconstruction from geometry, compatibility via exact
graph edit distance, rasterization, FID-style diversity, and SVG rendering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable
from xml.sax.saxutils import escape

import networkx as nx
import numpy as np
import scipy.linalg
from shapely.geometry import box as shapely_box
from shapely.ops import unary_union

from .connectivity import BubbleDiagram
from .core import (
    Box,
    Element,
    Floorplan,
    FRONT_DOOR,
    INTERIOR_DOOR,
    PlanforgeError,
)
from .data import LIVING_ROOM

OUTSIDE = "outside"

# HouseGAN++-style legend
DEFAULT_COLORS = {
    "living_room": "#EE4D4D",
    "bedroom": "#FFD500",
    "kitchen": "#C67C7B",
    "bathroom": "#BEBEBE",
    "balcony": "#BA8285",
    "storage": "#7B8CDE",
    "interior_door": "#727171",
    "front_door": "#D3A2C7",
    "_background": "#FFFFFF",
}


def _dilated(b: Box, eps: int) -> tuple[int, int, int, int]:
    return (b.xL - eps, b.yT - eps, b.xR + eps, b.yB + eps)


def _touches(a: tuple[int, int, int, int], b: Box) -> bool:
    return a[0] <= b.xR and b.xL <= a[2] and a[1] <= b.yB and b.yT <= a[3]


def diagram_to_graph(bd: BubbleDiagram) -> nx.Graph:
    """Category-labeled evaluation graph of a bubble diagram.

    Adds the door-derived room-room edges and a virtual outside node wired to
    every front door, mirroring reconstruct_graph's edge semantics.
    """
    g = nx.Graph()
    for n in bd.nodes:
        g.add_node(n.node_id, category=n.category.name)
    g.add_node(OUTSIDE, category=OUTSIDE)
    door_rooms: dict[str, list[str]] = {}
    for a, b in bd.edges:
        g.add_edge(a, b)
        na, nb = bd.node(a), bd.node(b)
        if na.category.is_door:
            door_rooms.setdefault(a, []).append(b)
        if nb.category.is_door:
            door_rooms.setdefault(b, []).append(a)
    for door_id, rooms in door_rooms.items():
        if bd.node(door_id).category.name == INTERIOR_DOOR:
            for i, r1 in enumerate(rooms):
                for r2 in rooms[i + 1 :]:
                    g.add_edge(r1, r2)
    for n in bd.nodes:
        if n.category.name == FRONT_DOOR:
            g.add_edge(n.node_id, OUTSIDE)
    return g


def reconstruct_graph(fp: Floorplan, eps: int = 2) -> nx.Graph:
    """Infer the connectivity graph from generated geometry.

    A door connects a room when their boxes intersect after dilating the door
    by eps bins; an interior door touching >= 2 rooms induces pairwise
    room-room edges; a front door touching the outer hull of all rooms
    connects to the virtual outside node.
    """
    g = nx.Graph()
    for e in fp.elements:
        g.add_node(f"e{e.room_index}", category=e.category.name)
    g.add_node(OUTSIDE, category=OUTSIDE)
    rooms = fp.rooms
    if rooms:
        hull = (
            min(r.box.xL for r in rooms),
            min(r.box.yT for r in rooms),
            max(r.box.xR for r in rooms),
            max(r.box.yB for r in rooms),
        )
    else:
        hull = None
    for d in fp.doors:
        dil = _dilated(d.box, eps)
        touched = [r for r in rooms if _touches(dil, r.box)]
        for r in touched:
            g.add_edge(f"e{d.room_index}", f"e{r.room_index}")
        if d.category.name == INTERIOR_DOOR:
            for i, r1 in enumerate(touched):
                for r2 in touched[i + 1 :]:
                    g.add_edge(f"e{r1.room_index}", f"e{r2.room_index}")
        elif hull is not None:
            on_hull = (
                dil[0] <= hull[0]
                or dil[1] <= hull[1]
                or dil[2] >= hull[2]
                or dil[3] >= hull[3]
            )
            if on_hull:
                g.add_edge(f"e{d.room_index}", OUTSIDE)
    return g


@dataclass(frozen=True)
class GedResult:
    value: int
    exact: bool


def _node_lower_bound(remaining1: dict[str, int], remaining2: dict[str, int]) -> int:
    cats = set(remaining1) | set(remaining2)
    return sum(abs(remaining1.get(c, 0) - remaining2.get(c, 0)) for c in cats)


def _exact_ged(g1: nx.Graph, g2: nx.Graph, best: int) -> int:
    """Branch-and-bound over injective category-preserving mappings.

    Node insert/delete cost 1, edge insert/delete cost 1, substitution only
    between equal-category nodes (cost 0).
    """
    nodes1 = sorted(g1.nodes, key=lambda u: -g1.degree[u])
    nodes2 = list(g2.nodes)
    cat1 = nx.get_node_attributes(g1, "category")
    cat2 = nx.get_node_attributes(g2, "category")
    adj1 = {u: set(g1.adj[u]) for u in g1.nodes}
    adj2 = {v: set(g2.adj[v]) for v in g2.nodes}

    best_found = best

    def remaining_counts(i: int, used: set) -> int:
        r1: dict[str, int] = {}
        for u in nodes1[i:]:
            r1[cat1[u]] = r1.get(cat1[u], 0) + 1
        r2: dict[str, int] = {}
        for v in nodes2:
            if v not in used:
                r2[cat2[v]] = r2.get(cat2[v], 0) + 1
        return _node_lower_bound(r1, r2)

    def finish_cost(mapping: dict, used: set) -> int:
        # unused g2 nodes are insertions, as is every g2 edge touching one
        unused = [v for v in nodes2 if v not in used]
        cost = len(unused)
        unused_set = set(unused)
        for a, b in g2.edges:
            if a in unused_set or b in unused_set:
                cost += 1
        return cost

    def dfs(i: int, mapping: dict, used: set, cost: int):
        nonlocal best_found
        if cost + remaining_counts(i, used) >= best_found:
            return
        if i == len(nodes1):
            total = cost + finish_cost(mapping, used)
            if total < best_found:
                best_found = total
            return
        u = nodes1[i]
        for v in nodes2:
            if v in used or cat2[v] != cat1[u]:
                continue
            extra = 0
            for u2, v2 in mapping.items():
                e1 = u2 in adj1[u]
                e2 = v2 is not None and v2 in adj2[v]
                if e1 != e2:
                    extra += 1
            mapping[u] = v
            used.add(v)
            dfs(i + 1, mapping, used, cost + extra)
            used.discard(v)
            del mapping[u]
        extra = 1 + sum(1 for u2 in mapping if u2 in adj1[u])
        mapping[u] = None
        dfs(i + 1, mapping, used, cost + extra)
        del mapping[u]

    dfs(0, {}, set(), 0)
    return best_found


def _greedy_ged(g1: nx.Graph, g2: nx.Graph) -> int:
    """Upper bound from a degree-greedy category-preserving matching."""
    cat1 = nx.get_node_attributes(g1, "category")
    cat2 = nx.get_node_attributes(g2, "category")
    mapping: dict = {}
    used: set = set()
    for u in sorted(g1.nodes, key=lambda u: -g1.degree[u]):
        candidates = [v for v in g2.nodes if v not in used and cat2[v] == cat1[u]]
        if not candidates:
            mapping[u] = None
            continue
        best_v = min(candidates, key=lambda v: abs(g2.degree[v] - g1.degree[u]))
        mapping[u] = best_v
        used.add(best_v)
    cost = sum(1 for v in mapping.values() if v is None)
    cost += sum(1 for v in g2.nodes if v not in used)
    mapped = {u: v for u, v in mapping.items() if v is not None}
    for a, b in g1.edges:
        va, vb = mapping.get(a), mapping.get(b)
        if va is None or vb is None or not g2.has_edge(va, vb):
            cost += 1
    inv = {v: u for u, v in mapped.items()}
    for a, b in g2.edges:
        ua, ub = inv.get(a), inv.get(b)
        if ua is None or ub is None or not g1.has_edge(ua, ub):
            cost += 1
    return cost


def graph_edit_distance(g1: nx.Graph, g2: nx.Graph, exact_budget: int = 12) -> GedResult:
    """Exact labeled GED within the search budget; greedy upper bound beyond."""
    match = nx.algorithms.isomorphism.categorical_node_match("category", None)
    if nx.is_isomorphic(g1, g2, node_match=match):
        return GedResult(0, True)
    upper = _greedy_ged(g1, g2)
    if max(g1.number_of_nodes(), g2.number_of_nodes()) <= exact_budget:
        return GedResult(_exact_ged(g1, g2, upper + 1), True)
    return GedResult(upper, False)


def compatibility(diagram: BubbleDiagram, fp: Floorplan, eps: int = 2,
                  exact_budget: int = 12) -> int:
    """GED between the input diagram's graph and the graph reconstructed from
    the generated geometry; lower is better, 0 means fully compatible."""
    return graph_edit_distance(
        diagram_to_graph(diagram), reconstruct_graph(fp, eps), exact_budget
    ).value


def trim_living_overlap(fp: Floorplan):
    """Render-only geometry: the living room's box minus other rooms' boxes.

    Returns a list of (element, shapely geometry); model-facing boxes untouched.
    """
    geoms = []
    rooms = fp.rooms
    for e in fp.elements:
        geom = shapely_box(e.box.xL, e.box.yT, e.box.xR, e.box.yB)
        if e.category.name == LIVING_ROOM:
            others = [
                shapely_box(r.box.xL, r.box.yT, r.box.xR, r.box.yB)
                for r in rooms
                if r.room_index != e.room_index
            ]
            if others:
                geom = geom.difference(unary_union(others))
        geoms.append((e, geom))
    return geoms


def rasterize(fp: Floorplan, size: int = 256) -> np.ndarray:
    """Paint elements onto a category-indexed grid; -1 is background.

    Elements are painted in plan order (rooms before doors under the door-last
    invariant) so doors land on top; pixels are corner-inclusive.
    """
    grid = np.full((size, size), -1, dtype=np.int16)
    scale = size / 256.0
    for e in fp.elements:
        x0 = int(np.floor(e.box.xL * scale))
        y0 = int(np.floor(e.box.yT * scale))
        x1 = int(np.floor(e.box.xR * scale))
        y1 = int(np.floor(e.box.yB * scale))
        grid[y0 : y1 + 1, x0 : x1 + 1] = e.category.id
    return grid


FeatureExtractor = Callable[[list[np.ndarray]], np.ndarray]


def default_feature_extractor(rasters: list[np.ndarray]) -> np.ndarray:
    """Deterministic random-projection features over downsampled category maps.

    A fixed-seed linear projection of 16x16 category histogram pools; a stand-in
    for pretrained convolutional features at desk scale.
    """
    feats = []
    n_cats = 16
    for r in rasters:
        size = r.shape[0]
        block = size // 16
        pooled = np.zeros((16, 16, n_cats), dtype=np.float64)
        for by in range(16):
            for bx in range(16):
                patch = r[by * block : (by + 1) * block, bx * block : (bx + 1) * block]
                ids, counts = np.unique(patch[patch >= 0], return_counts=True)
                for i, c in zip(ids, counts):
                    if i < n_cats:
                        pooled[by, bx, i] = c / patch.size
        feats.append(pooled.ravel())
    x = np.stack(feats)
    rng = np.random.default_rng(1234)
    proj = rng.standard_normal((x.shape[1], 64)) / np.sqrt(x.shape[1])
    return x @ proj


def frechet_distance(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray
) -> float:
    """Fréchet distance between two Gaussians."""
    diff = mu1 - mu2
    covmean = scipy.linalg.sqrtm(sigma1 @ sigma2)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    val = diff @ diff + np.trace(sigma1 + sigma2 - 2.0 * covmean)
    return float(max(val, 0.0))


def fid_diversity(
    generated: Iterable[np.ndarray],
    reference: Iterable[np.ndarray],
    feature_extractor: FeatureExtractor = default_feature_extractor,
) -> float:
    """FID between Gaussian fits of generated vs reference feature sets."""
    f_gen = feature_extractor(list(generated))
    f_ref = feature_extractor(list(reference))
    if f_gen.shape[0] < 2 or f_ref.shape[0] < 2:
        raise PlanforgeError("FID requires at least 2 samples per set")
    mu1, mu2 = f_gen.mean(axis=0), f_ref.mean(axis=0)
    s1 = np.cov(f_gen, rowvar=False)
    s2 = np.cov(f_ref, rowvar=False)
    return frechet_distance(mu1, np.atleast_2d(s1), mu2, np.atleast_2d(s2))


def _svg_polygon(geom, fill: str, klass: str) -> str:
    polys = getattr(geom, "geoms", [geom])
    parts = []
    for poly in polys:
        if poly.is_empty:
            continue
        pts = " ".join(f"{x:g},{y:g}" for x, y in poly.exterior.coords)
        parts.append(f'<polygon class="{klass}" points="{pts}" fill="{fill}"/>')
    return "".join(parts)


def render_svg(
    fp: Floorplan,
    legend: dict[str, str] | None = None,
    size: int = 256,
    trim_living: bool = True,
) -> str:
    """Deterministic SVG document: one shape per element, doors on top."""
    colors = dict(DEFAULT_COLORS)
    if legend:
        colors.update(legend)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 256 256">',
        f'<rect class="canvas" x="0" y="0" width="256" height="256" '
        f'fill="{colors["_background"]}"/>',
    ]
    geoms = trim_living_overlap(fp) if trim_living else [
        (e, shapely_box(e.box.xL, e.box.yT, e.box.xR, e.box.yB)) for e in fp.elements
    ]
    for e, geom in geoms:
        fill = colors.get(e.category.name, "#888888")
        title = escape(f"{e.category.name} #{e.room_index}")
        if e.category.is_door:
            # pad degenerate door boxes to 2 units so they stay visible
            b = e.box
            w = max(b.xR - b.xL, 2)
            h = max(b.yB - b.yT, 2)
            x = b.xL - (w - (b.xR - b.xL)) / 2
            y = b.yT - (h - (b.yB - b.yT)) / 2
            body = (
                f'<rect x="{x:g}" y="{y:g}" width="{w}" height="{h}" fill="{fill}"/>'
            )
        else:
            body = _svg_polygon(geom, fill, "part")
        out.append(f'<g class="element"><title>{title}</title>{body}</g>')
    out.append("</svg>")
    return "".join(out)
