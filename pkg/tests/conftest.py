import random

import pytest
import torch

from planforge.core import (
    Box,
    DEFAULT_VOCAB,
    Element,
    Floorplan,
    compute_category_stats,
    hybrid_sort,
)

torch.set_num_threads(1)


def random_floorplan(rng: random.Random, n_rooms=None, n_doors=None) -> Floorplan:
    """Random valid floorplan: rooms first, doors last (codec-level validity only)."""
    vocab = DEFAULT_VOCAB
    n_rooms = rng.randint(1, 8) if n_rooms is None else n_rooms
    n_doors = rng.randint(0, 4) if n_doors is None else n_doors
    room_cats = [c for c in vocab.categories if not c.is_door]
    elements = []
    idx = 0
    for _ in range(n_rooms):
        xs = sorted(rng.randrange(256) for _ in range(2))
        ys = sorted(rng.randrange(256) for _ in range(2))
        cat = rng.choice(room_cats)
        elements.append(Element(idx, cat, Box(xs[0], ys[0], xs[1], ys[1])))
        idx += 1
    door_cats = [vocab.interior_door] * n_doors + [vocab.front_door]
    for cat in door_cats[: n_doors + rng.randint(0, 1)]:
        xs = sorted(rng.randrange(256) for _ in range(2))
        ys = sorted(rng.randrange(256) for _ in range(2))
        elements.append(Element(idx, cat, Box(xs[0], ys[0], xs[1], ys[1])))
        idx += 1
    # keep interior doors before front doors
    rooms = [e for e in elements if not e.category.is_door]
    interior = [e for e in elements if e.category.name == "interior_door"]
    front = [e for e in elements if e.category.name == "front_door"]
    return Floorplan(tuple(rooms + interior + front), vocab)


def sorted_random_floorplan(rng: random.Random, **kw) -> Floorplan:
    fp = random_floorplan(rng, **kw)
    stats = compute_category_stats([fp])
    return hybrid_sort(fp, stats)


@pytest.fixture
def rng():
    return random.Random(1234)


def brute_force_ged(g1, g2) -> int:
    """Exhaustive labeled GED oracle for small graphs.

    Enumerates every injective category-preserving node mapping; unmapped
    nodes are deleted/inserted at unit cost and edge cost is the symmetric
    difference of the edge sets under the mapping.
    """
    import itertools

    n1, n2 = list(g1.nodes), list(g2.nodes)
    best = len(n1) + len(n2) + g1.number_of_edges() + g2.number_of_edges()
    for k in range(min(len(n1), len(n2)) + 1):
        for sub1 in itertools.combinations(n1, k):
            for sub2 in itertools.permutations(n2, k):
                if any(
                    g1.nodes[a]["category"] != g2.nodes[b]["category"]
                    for a, b in zip(sub1, sub2)
                ):
                    continue
                m = dict(zip(sub1, sub2))
                cost = (len(n1) - k) + (len(n2) - k)
                matched = set()
                for a, b in g1.edges:
                    if a in m and b in m and g2.has_edge(m[a], m[b]):
                        matched.add(frozenset((m[a], m[b])))
                    else:
                        cost += 1
                for a, b in g2.edges:
                    if frozenset((a, b)) not in matched:
                        cost += 1
                if cost < best:
                    best = cost
    return best
