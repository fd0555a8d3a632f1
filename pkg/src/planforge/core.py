"""Core floorplan domain types, coordinate quantization, sequence codec, and sorting."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field


class PlanforgeError(Exception):
    """Base class for all planforge errors."""


class DomainError(PlanforgeError):
    """A value lies outside its documented domain."""


class OrderingError(PlanforgeError):
    """A floorplan violates the required element ordering."""


class ParseError(PlanforgeError):
    """A serialized sequence or document is malformed."""


class ConfigurationError(PlanforgeError):
    """Required configuration (stats, vocabulary, ...) is missing or inconsistent."""


class ValidationError(PlanforgeError):
    """User-supplied input failed validation."""


COORD_BINS = 256

INTERIOR_DOOR = "interior_door"
FRONT_DOOR = "front_door"

# Default room vocabulary; configurable, doors must occupy the two highest ids.
DEFAULT_CATEGORY_NAMES = [
    "living_room",
    "bedroom",
    "kitchen",
    "bathroom",
    "balcony",
    "storage",
    INTERIOR_DOOR,
    FRONT_DOOR,
]


@dataclass(frozen=True)
class RoomCategory:
    id: int
    name: str

    @property
    def token(self) -> int:
        return COORD_BINS + self.id

    @property
    def is_door(self) -> bool:
        return self.name in (INTERIOR_DOOR, FRONT_DOOR)


@dataclass(frozen=True)
class Vocabulary:
    """Token vocabulary: 256 coordinate bins, category tokens, reserved specials."""

    categories: tuple[RoomCategory, ...]

    def __post_init__(self):
        names = [c.name for c in self.categories]
        if [c.id for c in self.categories] != list(range(len(names))):
            raise ConfigurationError("category ids must be 0..N_c-1 in order")
        if names[-2:] != [INTERIOR_DOOR, FRONT_DOOR]:
            raise ConfigurationError(
                "the two highest category ids must be interior_door then front_door"
            )
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate category names")

    @classmethod
    def from_names(cls, names=DEFAULT_CATEGORY_NAMES) -> "Vocabulary":
        return cls(tuple(RoomCategory(i, n) for i, n in enumerate(names)))

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def bos_id(self) -> int:
        return COORD_BINS + self.n_categories

    @property
    def eos_id(self) -> int:
        return COORD_BINS + self.n_categories + 1

    @property
    def pad_id(self) -> int:
        return COORD_BINS + self.n_categories + 2

    @property
    def size(self) -> int:
        """Total number of token ids (coordinates + categories + specials)."""
        return COORD_BINS + self.n_categories + 3

    @property
    def version(self) -> str:
        h = hashlib.sha1("|".join(c.name for c in self.categories).encode())
        return h.hexdigest()[:12]

    def by_name(self, name: str) -> RoomCategory:
        for c in self.categories:
            if c.name == name:
                return c
        raise ValidationError(f"unknown category {name!r}")

    def by_token(self, token: int) -> RoomCategory:
        idx = token - COORD_BINS
        if not 0 <= idx < self.n_categories:
            raise ParseError(f"token {token} is not a category token")
        return self.categories[idx]

    @property
    def interior_door(self) -> RoomCategory:
        return self.categories[-2]

    @property
    def front_door(self) -> RoomCategory:
        return self.categories[-1]


DEFAULT_VOCAB = Vocabulary.from_names()


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with quantized corner coordinates in [0, 255].

    Degenerate (zero width/height) boxes are legal; doors are thin.
    """

    xL: int
    yT: int
    xR: int
    yB: int

    def __post_init__(self):
        for v in (self.xL, self.yT, self.xR, self.yB):
            if not (isinstance(v, int) and 0 <= v < COORD_BINS):
                raise DomainError(f"coordinate {v!r} outside [0, {COORD_BINS - 1}]")
        if self.xL > self.xR or self.yT > self.yB:
            raise DomainError(f"inverted box {(self.xL, self.yT, self.xR, self.yB)}")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.xL + self.xR) / 2.0, (self.yT + self.yB) / 2.0)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.xL, self.yT, self.xR, self.yB)


@dataclass(frozen=True)
class Element:
    room_index: int
    category: RoomCategory
    box: Box


@dataclass(frozen=True)
class Floorplan:
    elements: tuple[Element, ...]
    vocab: Vocabulary = DEFAULT_VOCAB

    def __post_init__(self):
        indices = [e.room_index for e in self.elements]
        if len(set(indices)) != len(indices):
            raise DomainError("room_index values must be unique within a floorplan")

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def rooms(self) -> list[Element]:
        return [e for e in self.elements if not e.category.is_door]

    @property
    def doors(self) -> list[Element]:
        return [e for e in self.elements if e.category.is_door]


@dataclass(frozen=True)
class TokenSequence:
    """Flattened layout: tokens, parallel category tokens, parallel positions."""

    tokens: tuple[int, ...]
    categories: tuple[int, ...]
    positions: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.tokens) == len(self.categories) == len(self.positions)):
            raise ParseError("tokens/categories/positions lengths differ")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class CategoryPositionStats:
    """Per-category mean box center (x̄, ȳ) over a training corpus."""

    means: dict[str, tuple[float, float]]

    def to_json(self) -> str:
        return json.dumps(
            {k: [round(v[0], 6), round(v[1], 6)] for k, v in sorted(self.means.items())}
        )

    @classmethod
    def from_json(cls, text: str) -> "CategoryPositionStats":
        raw = json.loads(text)
        return cls({k: (float(v[0]), float(v[1])) for k, v in raw.items()})


@dataclass
class RepairReport:
    """Records boxes canonicalized during unflattening."""

    swapped_elements: list[int] = field(default_factory=list)

    @property
    def repaired(self) -> bool:
        return bool(self.swapped_elements)


def quantize(x: float) -> int:
    """Map x in [0, 1] to an 8-bit bin with round-half-up."""
    if not (0.0 <= x <= 1.0) or math.isnan(x):
        raise DomainError(f"quantize input {x!r} outside [0, 1]")
    return min(COORD_BINS - 1, int(math.floor(x * (COORD_BINS - 1) + 0.5)))


def dequantize(q: int) -> float:
    if not 0 <= q < COORD_BINS:
        raise DomainError(f"dequantize input {q!r} outside [0, 255]")
    return q / (COORD_BINS - 1)


def flatten(fp: Floorplan, vocab: Vocabulary | None = None) -> TokenSequence:
    """Flatten a sorted floorplan into the 1-D token sequence [BoS, r_1..r_N, EoS]."""
    vocab = vocab or fp.vocab
    seen_door = False
    for e in fp.elements:
        if e.category.is_door:
            seen_door = True
        elif seen_door:
            raise OrderingError("room element appears after a door element")
    tokens = [vocab.bos_id]
    categories = [vocab.pad_id]
    for e in fp.elements:
        tokens.extend(e.box.as_tuple())
        categories.extend([e.category.token] * 4)
    tokens.append(vocab.eos_id)
    categories.append(vocab.pad_id)
    return TokenSequence(tuple(tokens), tuple(categories), tuple(range(len(tokens))))


def unflatten(
    seq: TokenSequence, vocab: Vocabulary = DEFAULT_VOCAB
) -> tuple[Floorplan, RepairReport]:
    """Inverse of flatten; inverted boxes are canonicalized by swapping, not rejected."""
    toks = seq.tokens
    if len(toks) < 2 or len(toks) % 4 != 2:
        raise ParseError(f"sequence length {len(toks)} is not 4N+2")
    if toks[0] != vocab.bos_id:
        raise ParseError(f"position 0: expected BoS {vocab.bos_id}, got {toks[0]}")
    if toks[-1] != vocab.eos_id:
        raise ParseError(f"position {len(toks) - 1}: expected EoS {vocab.eos_id}, got {toks[-1]}")
    report = RepairReport()
    elements = []
    n = (len(toks) - 2) // 4
    for i in range(n):
        base = 1 + 4 * i
        xL, yT, xR, yB = toks[base : base + 4]
        for p, v in enumerate((xL, yT, xR, yB)):
            if not 0 <= v < COORD_BINS:
                raise ParseError(f"position {base + p}: token {v} is not a coordinate")
        if xL > xR:
            xL, xR = xR, xL
            report.swapped_elements.append(i)
        if yT > yB:
            yT, yB = yB, yT
            if i not in report.swapped_elements:
                report.swapped_elements.append(i)
        category = vocab.by_token(seq.categories[base])
        elements.append(Element(i, category, Box(xL, yT, xR, yB)))
    return Floorplan(tuple(elements), vocab), report


def compute_category_stats(corpus: list[Floorplan]) -> CategoryPositionStats:
    """Mean box center per category over every element occurrence in the corpus."""
    if not corpus:
        raise ConfigurationError("cannot compute category stats on an empty corpus")
    sums: dict[str, list[float]] = {}
    for fp in corpus:
        for e in fp.elements:
            cx, cy = e.box.center
            acc = sums.setdefault(e.category.name, [0.0, 0.0, 0.0])
            acc[0] += cx
            acc[1] += cy
            acc[2] += 1.0
    return CategoryPositionStats(
        {name: (sx / cnt, sy / cnt) for name, (sx, sy, cnt) in sums.items()}
    )


def category_rank_order(vocab: Vocabulary, stats: CategoryPositionStats) -> dict[str, int]:
    """Rank categories: rooms in reading order of mean centers (ȳ, x̄, id), doors last."""
    rooms = [c for c in vocab.categories if not c.is_door]
    ranked = sorted(
        (c for c in rooms if c.name in stats.means),
        key=lambda c: (stats.means[c.name][1], stats.means[c.name][0], c.id),
    )
    order = {c.name: i for i, c in enumerate(ranked)}
    order[INTERIOR_DOOR] = len(rooms)
    order[FRONT_DOOR] = len(rooms) + 1
    return order


def hybrid_sort(fp: Floorplan, stats: CategoryPositionStats) -> Floorplan:
    """Sort elements by corpus-average category position, doors forced last.

    Within a category the key is (yT, xL, room_index).
    """
    order = category_rank_order(fp.vocab, stats)
    for e in fp.elements:
        if e.category.name not in order:
            raise ConfigurationError(f"no position stats for category {e.category.name!r}")
    key = lambda e: (order[e.category.name], e.box.yT, e.box.xL, e.room_index)
    return Floorplan(tuple(sorted(fp.elements, key=key)), fp.vocab)


def floorplan_to_dict(fp: Floorplan) -> dict:
    return {
        "vocab_version": fp.vocab.version,
        "elements": [
            {
                "room_index": e.room_index,
                "category": e.category.name,
                "box": list(e.box.as_tuple()),
            }
            for e in fp.elements
        ],
    }


def floorplan_from_dict(doc: dict, vocab: Vocabulary = DEFAULT_VOCAB) -> Floorplan:
    if doc.get("vocab_version") not in (None, vocab.version):
        raise ParseError(
            f"vocab_version {doc.get('vocab_version')!r} does not match {vocab.version!r}"
        )
    elements = []
    for raw in doc["elements"]:
        cat = vocab.by_name(raw["category"])
        xL, yT, xR, yB = raw["box"]
        elements.append(Element(int(raw["room_index"]), cat, Box(xL, yT, xR, yB)))
    return Floorplan(tuple(elements), vocab)
