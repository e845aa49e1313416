"""Node and event geometry for a single fully connected sensor cluster.

Conventions used throughout the package:

* A cluster is a flat, ordered list of awake node positions, cluster head
  (CH) included, plus one free event point. The event does not have to
  coincide with any node.
* The cluster is fully connected by assumption, so no adjacency structure
  is stored; every pairwise distance is meaningful.
* Distances are plain Euclidean distances in metres.
* Generators place nodes inside the region; validation only warns when a
  point falls outside, since hand-built geometries are legitimate inputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError

# Lattice membership / coincidence comparisons use this relative slack.
_GEOM_EPS = 1e-9


@dataclass(frozen=True)
class Position:
    """A planar point in metres."""

    x: float
    y: float

    def __post_init__(self):
        fx, fy = float(self.x), float(self.y)
        if not (math.isfinite(fx) and math.isfinite(fy)):
            raise InvalidArgumentError(f"position coordinates must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "x", fx)
        object.__setattr__(self, "y", fy)

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def as_position(value) -> Position:
    """Coerce a Position or an (x, y) pair into a Position."""
    if isinstance(value, Position):
        return value
    try:
        x, y = value
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"expected a position or (x, y) pair, got {value!r}") from None
    return Position(float(x), float(y))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x_min, x_max] x [y_min, y_max] in metres."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(float(v)) for v in vals):
            raise InvalidArgumentError(f"region bounds must be finite, got {vals}")
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise InvalidArgumentError(f"region has negative extent: {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, pos: Position, slack: float = 0.0) -> bool:
        return (
            self.x_min - slack <= pos.x <= self.x_max + slack
            and self.y_min - slack <= pos.y <= self.y_max + slack
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def as_rect(value) -> Rect:
    """Coerce a Rect or a [x_min, y_min, x_max, y_max] sequence into a Rect."""
    if isinstance(value, Rect):
        return value
    try:
        x0, y0, x1, y1 = value
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"expected a region or 4-element bounds, got {value!r}") from None
    return Rect(float(x0), float(y0), float(x1), float(y1))


@dataclass(frozen=True)
class Topology:
    """Immutable cluster geometry: region, event point, CH index, node list.

    ``nodes`` holds every awake node including the CH; ``ch`` is the CH's
    index into that list. ``total_deployed`` optionally records how many
    nodes exist in the whole deployment (awake plus sleeping) and is used
    for reporting only.
    """

    region: Rect
    event: Position
    ch: int
    nodes: tuple[Position, ...]
    label: str = ""
    total_deployed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "region", as_rect(self.region))
        object.__setattr__(self, "event", as_position(self.event))
        object.__setattr__(self, "nodes", tuple(as_position(p) for p in self.nodes))
        if len(self.nodes) < 1:
            raise InvalidArgumentError("a cluster needs at least one node (the CH)")
        if not isinstance(self.ch, (int, np.integer)) or not 0 <= int(self.ch) < len(self.nodes):
            raise InvalidArgumentError(f"CH index {self.ch!r} out of range for {len(self.nodes)} nodes")
        object.__setattr__(self, "ch", int(self.ch))
        if self.total_deployed is not None:
            if int(self.total_deployed) < len(self.nodes):
                raise InvalidArgumentError("total_deployed cannot be below the awake node count")
            object.__setattr__(self, "total_deployed", int(self.total_deployed))
        slack = _GEOM_EPS * max(1.0, self.region.width, self.region.height)
        outside = [i for i, p in enumerate(self.nodes) if not self.region.contains(p, slack)]
        if outside:
            warnings.warn(
                f"{len(outside)} node(s) lie outside the region (first: index {outside[0]})",
                stacklevel=2,
            )

    @property
    def m(self) -> int:
        """Number of awake nodes, CH included."""
        return len(self.nodes)

    @property
    def ch_position(self) -> Position:
        return self.nodes[self.ch]

    @cached_property
    def coords(self) -> np.ndarray:
        arr = np.array([(p.x, p.y) for p in self.nodes], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def event_distances(self) -> np.ndarray:
        """d(S, node_i) for every node, in node order."""
        d = np.hypot(self.coords[:, 0] - self.event.x, self.coords[:, 1] - self.event.y)
        d.setflags(write=False)
        return d

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """Symmetric pairwise node distances with a zero diagonal."""
        dx = self.coords[:, 0][:, None] - self.coords[:, 0][None, :]
        dy = self.coords[:, 1][:, None] - self.coords[:, 1][None, :]
        d = np.hypot(dx, dy)
        d.setflags(write=False)
        return d

    @property
    def d_s_ch(self) -> float:
        return float(self.event_distances[self.ch])

    @property
    def non_ch_indices(self) -> np.ndarray:
        return np.array([i for i in range(self.m) if i != self.ch], dtype=int)

    def subset(self, indices: Sequence[int]) -> "Topology":
        """Cluster restricted to the given node indices (must include the CH)."""
        idx = [int(i) for i in indices]
        if len(idx) == 0:
            raise InvalidArgumentError("subset needs at least one node index")
        if len(set(idx)) != len(idx):
            raise InvalidArgumentError("subset indices must be unique")
        if any(i < 0 or i >= self.m for i in idx):
            raise InvalidArgumentError("subset index out of range")
        if self.ch not in idx:
            raise InvalidArgumentError("subset must include the CH")
        return replace(
            self,
            ch=idx.index(self.ch),
            nodes=tuple(self.nodes[i] for i in idx),
        )

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "region": list(self.region.as_tuple()),
            "event": [self.event.x, self.event.y],
            "ch_index": self.ch,
            "nodes": [[p.x, p.y] for p in self.nodes],
            "label": self.label,
        }
        if self.total_deployed is not None:
            doc["total_deployed"] = self.total_deployed
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "Topology":
        try:
            return cls(
                region=as_rect(doc["region"]),
                event=as_position(doc["event"]),
                ch=int(doc["ch_index"]),
                nodes=tuple(as_position(p) for p in doc["nodes"]),
                label=str(doc.get("label", "")),
                total_deployed=doc.get("total_deployed"),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"topology document missing field {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """Plain node table (index,x,y,is_ch) for plotting."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["index", "x", "y", "is_ch"])
        for i, p in enumerate(self.nodes):
            writer.writerow([i, format(p.x, ".17g"), format(p.y, ".17g"), int(i == self.ch)])
        return buf.getvalue()


def load_topology(path) -> Topology:
    with open(path, "r", encoding="utf-8") as fh:
        return Topology.from_json(fh.read())


def save_topology(topology: Topology, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(topology.to_json())
        fh.write("\n")


# -- generators -----------------------------------------------------------


def make_circle(m: int, radius: float, center=Position(0.0, 0.0)) -> Topology:
    """m nodes equally spaced on a circle around the event.

    Node k sits at angle 2*pi*k/m measured from the positive x axis, so
    node 0 (the CH) is due east of the event. Every node is exactly
    ``radius`` metres from the event.
    """
    if int(m) < 1:
        raise InvalidArgumentError(f"node count must be >= 1, got {m}")
    if not radius > 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius}")
    m = int(m)
    center = as_position(center)
    nodes = []
    for k in range(m):
        ang = 2.0 * math.pi * k / m
        nodes.append(Position(center.x + radius * math.cos(ang), center.y + radius * math.sin(ang)))
    region = Rect(center.x - radius, center.y - radius, center.x + radius, center.y + radius)
    return Topology(
        region=region,
        event=center,
        ch=0,
        nodes=tuple(nodes),
        label=f"circle m={m} r={radius:g}",
    )


def make_grid(spacing: float, region, event, ch_corner) -> Topology:
    """Lattice of nodes over the region, event free, CH nearest a corner.

    The lattice includes both edges when the region extent is an exact
    multiple of the spacing. A lattice point coinciding with the event
    location is dropped: the event is a free point of the field, not a
    sensor, and keeping a node there would double-count the event position.
    """
    region = as_rect(region)
    event = as_position(event)
    ch_corner = as_position(ch_corner)
    if not spacing > 0:
        raise InvalidArgumentError(f"spacing must be positive, got {spacing}")
    if region.width <= 0 or region.height <= 0:
        raise InvalidArgumentError("grid region must have positive width and height")
    if spacing > region.width or spacing > region.height:
        raise InvalidArgumentError(
            f"spacing {spacing:g} exceeds region extent {region.width:g} x {region.height:g}"
        )
    nx = int(math.floor(region.width / spacing + _GEOM_EPS)) + 1
    ny = int(math.floor(region.height / spacing + _GEOM_EPS)) + 1
    coincide_tol = _GEOM_EPS * max(spacing, 1.0)
    nodes = []
    for iy in range(ny):
        for ix in range(nx):
            p = Position(region.x_min + ix * spacing, region.y_min + iy * spacing)
            if p.distance_to(event) <= coincide_tol:
                continue
            nodes.append(p)
    if not nodes:
        raise InvalidArgumentError("grid produced no nodes after excluding the event point")
    ch = min(
        range(len(nodes)),
        key=lambda i: (nodes[i].distance_to(ch_corner), nodes[i].x, nodes[i].y, i),
    )
    return Topology(
        region=region,
        event=event,
        ch=ch,
        nodes=tuple(nodes),
        label=f"grid spacing={spacing:g} m={len(nodes)}",
    )


def make_random(m: int, region, event, ch="random", seed: int = 0) -> Topology:
    """CH plus m-1 uniformly random nodes over the region.

    The CH occupies index 0, either at the given position or drawn
    uniformly when ``ch == "random"`` (the CH draw happens first, then the
    remaining nodes, so the two modes consume the generator identically).
    The same seed always reproduces the same topology.
    """
    if int(m) < 1:
        raise InvalidArgumentError(f"node count must be >= 1, got {m}")
    m = int(m)
    region = as_rect(region)
    event = as_position(event)
    rng = np.random.default_rng(seed)
    if isinstance(ch, str):
        if ch != "random":
            raise InvalidArgumentError(f"ch must be a position or 'random', got {ch!r}")
        cx = rng.uniform(region.x_min, region.x_max)
        cy = rng.uniform(region.y_min, region.y_max)
        ch_pos = Position(float(cx), float(cy))
    else:
        ch_pos = as_position(ch)
    xs = rng.uniform(region.x_min, region.x_max, size=m - 1)
    ys = rng.uniform(region.y_min, region.y_max, size=m - 1)
    nodes = (ch_pos,) + tuple(Position(float(x), float(y)) for x, y in zip(xs, ys))
    return Topology(
        region=region,
        event=event,
        ch=0,
        nodes=nodes,
        label=f"random m={m} seed={seed}",
    )


def elect_cluster_head(topology: Topology, seed: int) -> Topology:
    """Re-elect the CH by a seeded uniform draw over node indices."""
    rng = np.random.default_rng(seed)
    return replace(topology, ch=int(rng.integers(0, topology.m)))


def order_by_event_distance(topology: Topology, direction: str = "nearest-first") -> list[int]:
    """Permutation of node indices sorted by distance to the event.

    The CH is pinned to the front so every prefix of the returned order is
    a valid cluster. Ties break by (x, y, index) ascending in both
    directions, which keeps the order deterministic on symmetric
    geometries such as grids.
    """
    if direction not in ("nearest-first", "farthest-first"):
        raise InvalidArgumentError(f"direction must be nearest-first or farthest-first, got {direction!r}")
    sign = 1.0 if direction == "nearest-first" else -1.0
    d = topology.event_distances
    others = [i for i in range(topology.m) if i != topology.ch]
    others.sort(key=lambda i: (sign * d[i], topology.nodes[i].x, topology.nodes[i].y, i))
    return [topology.ch] + others
