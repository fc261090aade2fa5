"""Finite graph windows with enumerable, deterministically ordered edge lists.

Every builder iterates vertices in lexicographic coordinate order and, per
vertex, emits edges toward lexicographically larger endpoints in a fixed
offset order.  Identical inputs therefore always produce identical edge
orderings, which is what ties the per-edge random streams down.

Edges carrying probability zero are omitted by default: they can never open,
and for heavy-tailed sequences they would dominate the edge list.  Pass
``keep_zero_probability=True`` to the long-range builders to keep them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterator

import numpy as np

from .embedding import EmbeddedGraph, SlabCoord
from .rng import coordinate_edge_keys
from .sequences import ProbabilitySequence


class ConfigError(Exception):
    """Inconsistent window or experiment specification."""


@dataclass
class GraphWindow:
    """A finite graph with per-edge open probabilities.

    ``terminals`` names the vertex sets events refer to: crossing windows
    carry ``left``/``right``, radial windows carry ``origin``/``boundary``.
    ``edge_keys`` are coordinate-derived 64-bit identifiers used by the keyed
    (shared-uniform) sampling mode; they exist for planar families only.
    """

    family: str
    coords: np.ndarray  # (n_vertices, dim) int64
    edges_u: np.ndarray  # (n_edges,) int32
    edges_v: np.ndarray  # (n_edges,) int32
    probs: np.ndarray  # (n_edges,) float64
    lengths: np.ndarray  # (n_edges,) int32 lattice length of each edge
    terminals: dict[str, np.ndarray] = field(default_factory=dict)
    origin_index: int | None = None
    edge_keys: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return int(self.coords.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges_u.shape[0])

    def edge_endpoint_coords(self) -> tuple[np.ndarray, np.ndarray]:
        return self.coords[self.edges_u], self.coords[self.edges_v]

    def edge_pairs(self) -> Iterator[tuple[tuple, tuple, float]]:
        for u, v, p in zip(self.edges_u, self.edges_v, self.probs):
            yield tuple(self.coords[u]), tuple(self.coords[v]), float(p)

    def index_of(self, coord) -> int:
        if not hasattr(self, "_index_cache"):
            self._index_cache = {tuple(int(c) for c in row): i for i, row in enumerate(self.coords)}
        return self._index_cache[tuple(int(c) for c in coord)]

    def describe(self) -> str:
        parts = [f"{key}={value}" for key, value in sorted(self.meta.items())]
        return f"{self.family}({', '.join(parts)})"


def _finish(
    family: str,
    coords: list[tuple],
    edges: list[tuple[int, int, float, int]],
    terminals: dict[str, list[int]],
    origin_index: int | None,
    meta: dict,
    with_keys: bool,
) -> GraphWindow:
    coord_array = np.array(coords, dtype=np.int64).reshape(len(coords), -1)
    edges_u = np.array([e[0] for e in edges], dtype=np.int32)
    edges_v = np.array([e[1] for e in edges], dtype=np.int32)
    probs = np.array([e[2] for e in edges], dtype=np.float64)
    lengths = np.array([e[3] for e in edges], dtype=np.int32)
    window = GraphWindow(
        family=family,
        coords=coord_array,
        edges_u=edges_u,
        edges_v=edges_v,
        probs=probs,
        lengths=lengths,
        terminals={name: np.array(idx, dtype=np.int64) for name, idx in terminals.items()},
        origin_index=origin_index,
        meta=meta,
    )
    if with_keys and edges:
        window.edge_keys = coordinate_edge_keys(coord_array[edges_u], coord_array[edges_v])
    elif with_keys:
        window.edge_keys = np.empty(0, dtype=np.uint64)
    return window


def _long_range_edges(
    seq: ProbabilitySequence,
    coords: list[tuple[int, int]],
    index: dict[tuple[int, int], int],
    max_span: int,
    keep_zero_probability: bool,
) -> list[tuple[int, int, float, int]]:
    cap = max_span if seq.truncation is None else min(seq.truncation, max_span)
    if keep_zero_probability:
        lengths = list(range(1, cap + 1))
    else:
        lengths = seq.supported_lengths(cap)
    probabilities = {n: seq.probability(n) for n in lengths}
    edges = []
    for (x, y) in coords:
        i = index[(x, y)]
        for n in lengths:
            j = index.get((x + n, y))
            if j is not None:
                edges.append((i, j, probabilities[n], n))
        for n in lengths:
            j = index.get((x, y + n))
            if j is not None:
                edges.append((i, j, probabilities[n], n))
    return edges


def long_range_box_window(
    seq: ProbabilitySequence,
    x_extent: tuple[int, int],
    y_extent: tuple[int, int],
    keep_zero_probability: bool = False,
) -> GraphWindow:
    """Plain planar long-range box with inclusive extents and no terminals.

    Useful for pair-connectivity events and as raw material for randomized
    oracle windows; crossing and radial windows wrap the same edge rule with
    terminal sets attached.
    """
    (x_lo, x_hi), (y_lo, y_hi) = x_extent, y_extent
    if x_hi < x_lo or y_hi < y_lo:
        raise ConfigError("box extents must be nonempty")
    coords = [(x, y) for x in range(x_lo, x_hi + 1) for y in range(y_lo, y_hi + 1)]
    index = {c: i for i, c in enumerate(coords)}
    span = max(x_hi - x_lo, y_hi - y_lo, 1)
    edges = _long_range_edges(seq, coords, index, span, keep_zero_probability)
    meta = {"x": list(x_extent), "y": list(y_extent), "seq": seq.describe()}
    return _finish("z2-long-range", coords, edges, {}, None, meta, with_keys=True)


def long_range_crossing_window(
    seq: ProbabilitySequence,
    side: int,
    keep_zero_probability: bool = False,
) -> GraphWindow:
    """Planar long-range rectangle ``{0..side+1} x {0..side}`` for sponge crossings.

    The crossing event joins the ``x = 0`` column to the ``x = side + 1``
    column; at open probability one-half with nearest-neighbor edges the
    crossing probability is exactly one-half, which calibrates estimators.
    """
    if side < 1:
        raise ConfigError("crossing window needs side >= 1")
    coords = [(x, y) for x in range(side + 2) for y in range(side + 1)]
    index = {c: i for i, c in enumerate(coords)}
    edges = _long_range_edges(seq, coords, index, side + 1, keep_zero_probability)
    terminals = {
        "left": [index[(0, y)] for y in range(side + 1)],
        "right": [index[(side + 1, y)] for y in range(side + 1)],
    }
    meta = {"L": side, "seq": seq.describe()}
    return _finish("z2-long-range", coords, edges, terminals, None, meta, with_keys=True)


def long_range_radial_window(
    seq: ProbabilitySequence,
    radius: int,
    keep_zero_probability: bool = False,
) -> GraphWindow:
    """Planar long-range box ``[-radius, radius]^2`` around the origin.

    The boundary terminal is the box rim (sup-norm exactly ``radius``); the
    origin-to-boundary event is the finite-volume stand-in for reaching
    infinity.
    """
    if radius < 1:
        raise ConfigError("radial window needs radius >= 1")
    span = range(-radius, radius + 1)
    coords = [(x, y) for x in span for y in span]
    index = {c: i for i, c in enumerate(coords)}
    edges = _long_range_edges(seq, coords, index, 2 * radius, keep_zero_probability)
    boundary = [i for i, (x, y) in enumerate(coords) if max(abs(x), abs(y)) == radius]
    terminals = {"origin": [index[(0, 0)]], "boundary": boundary}
    meta = {"radius": radius, "seq": seq.describe()}
    return _finish(
        "z2-long-range", coords, edges, terminals, index[(0, 0)], meta, with_keys=True
    )


def grid_crossing_window(dimension: int, p: float, side: int) -> GraphWindow:
    """Nearest-neighbor box in ``dimension`` axes, ``{0..side+1} x {0..side}^(d-1)``."""
    if dimension < 2:
        raise ConfigError("grid family needs dimension >= 2")
    if side < 1:
        raise ConfigError("crossing window needs side >= 1")
    ranges = [range(side + 2)] + [range(side + 1)] * (dimension - 1)
    return _axis_box_window(
        family=f"z{dimension}",
        ranges=ranges,
        p=p,
        crossing_axis=0,
        meta={"d": dimension, "p": p, "L": side},
    )


def slab_crossing_window(dimension: int, thickness: int, p: float, side: int) -> GraphWindow:
    """Slab box: two infinite axes at crossing aspect, confined axes at full thickness."""
    if dimension < 2:
        raise ConfigError("slab family needs dimension >= 2")
    if thickness < 1:
        raise ConfigError("slab thickness must be >= 1")
    if side < 1:
        raise ConfigError("crossing window needs side >= 1")
    ranges = [range(side + 2), range(side + 1)] + [range(thickness)] * (dimension - 2)
    return _axis_box_window(
        family=f"slab-d{dimension}-k{thickness}",
        ranges=ranges,
        p=p,
        crossing_axis=0,
        meta={"d": dimension, "K": thickness, "p": p, "L": side},
    )


def _axis_box_window(family, ranges, p, crossing_axis, meta) -> GraphWindow:
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"edge probability {p} outside [0, 1]")
    coords = [c for c in product(*ranges)]
    index = {c: i for i, c in enumerate(coords)}
    edges = []
    for c in coords:
        i = index[c]
        for axis in range(len(ranges)):
            neighbor = c[:axis] + (c[axis] + 1,) + c[axis + 1 :]
            j = index.get(neighbor)
            if j is not None:
                edges.append((i, j, p, 1))
    lo = ranges[crossing_axis].start
    hi = ranges[crossing_axis].stop - 1
    terminals = {
        "left": [i for i, c in enumerate(coords) if c[crossing_axis] == lo],
        "right": [i for i, c in enumerate(coords) if c[crossing_axis] == hi],
    }
    return _finish(family, coords, edges, terminals, None, meta, with_keys=False)


def grid_radial_window(dimension: int, p: float, radius: int) -> GraphWindow:
    """Nearest-neighbor box ``[-radius, radius]^d`` with rim boundary."""
    if dimension < 2:
        raise ConfigError("grid family needs dimension >= 2")
    if radius < 1:
        raise ConfigError("radial window needs radius >= 1")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"edge probability {p} outside [0, 1]")
    span = range(-radius, radius + 1)
    coords = [c for c in product(*[span] * dimension)]
    index = {c: i for i, c in enumerate(coords)}
    edges = []
    for c in coords:
        i = index[c]
        for axis in range(dimension):
            neighbor = c[:axis] + (c[axis] + 1,) + c[axis + 1 :]
            j = index.get(neighbor)
            if j is not None:
                edges.append((i, j, p, 1))
    origin = index[(0,) * dimension]
    boundary = [i for i, c in enumerate(coords) if max(abs(v) for v in c) == radius]
    terminals = {"origin": [origin], "boundary": boundary}
    meta = {"d": dimension, "p": p, "radius": radius}
    return _finish(f"z{dimension}", coords, edges, terminals, origin, meta, with_keys=False)


def slab_radial_window(dimension: int, thickness: int, p: float, radius: int) -> GraphWindow:
    """Slab box radial window: infinite axes span ``[-radius, radius]``."""
    if dimension < 2 or thickness < 1 or radius < 1:
        raise ConfigError("slab radial window needs dimension >= 2, thickness >= 1, radius >= 1")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"edge probability {p} outside [0, 1]")
    span = range(-radius, radius + 1)
    ranges = [span, span] + [range(thickness)] * (dimension - 2)
    coords = [c for c in product(*ranges)]
    index = {c: i for i, c in enumerate(coords)}
    edges = []
    for c in coords:
        i = index[c]
        for axis in range(dimension):
            neighbor = c[:axis] + (c[axis] + 1,) + c[axis + 1 :]
            j = index.get(neighbor)
            if j is not None:
                edges.append((i, j, p, 1))
    origin = index[(0, 0) + (0,) * (dimension - 2)]
    boundary = [i for i, c in enumerate(coords) if max(abs(c[0]), abs(c[1])) == radius]
    terminals = {"origin": [origin], "boundary": boundary}
    meta = {"d": dimension, "K": thickness, "p": p, "radius": radius}
    return _finish(
        f"slab-d{dimension}-k{thickness}", coords, edges, terminals, origin, meta, with_keys=False
    )


def embedded_radial_window(
    graph: EmbeddedGraph,
    seq: ProbabilitySequence,
    radius: int,
) -> GraphWindow:
    """The embedded graph restricted to the lattice box ``[-radius, radius]^2``.

    Edge probabilities are inherited from the ambient sequence at each edge's
    scale length.  The boundary terminal holds every window vertex with at
    least one embedded-graph neighbor outside the box: a coarse vertex set
    rarely touches the exact rim, so "about to leave the box" is the honest
    boundary notion here.
    """
    if radius < 1:
        raise ConfigError("radial window needs radius >= 1")
    scales = graph.scales.scales
    top = scales[-1]
    smallest = scales[0]
    coarse_lo = -(radius // top) - 1
    coarse_hi = radius // top + 1
    vertical_lo = -(radius // smallest) - 1
    vertical_hi = radius // smallest + 1
    members: list[tuple[SlabCoord, tuple[int, int]]] = []
    for coarse in range(coarse_lo, coarse_hi + 1):
        for vertical in range(vertical_lo, vertical_hi + 1):
            for confined in product(range(graph.params.thickness), repeat=graph.params.confined_axes):
                coord = SlabCoord(confined, coarse, vertical)
                point = graph.encode(coord)
                if max(abs(point[0]), abs(point[1])) <= radius:
                    members.append((coord, point))
    members.sort(key=lambda item: item[1])
    coords = [point for _, point in members]
    index = {point: i for i, (_, point) in enumerate(members)}
    if (0, 0) not in index:
        raise ConfigError("embedded window does not contain the origin")

    probabilities = {n: seq.probability(n) for n in scales}
    edges = []
    boundary = set()
    for coord, point in members:
        i = index[point]
        x, y = point
        for n in scales:
            j = index.get((x + n, y))
            if j is not None:
                edges.append((i, j, probabilities[n], n))
        j = index.get((x, y + smallest))
        if j is not None:
            edges.append((i, j, probabilities[smallest], smallest))
        for neighbor in graph.coord_neighbors(coord):
            nx, ny = graph.encode(neighbor)
            if max(abs(nx), abs(ny)) > radius:
                boundary.add(i)
                break
    terminals = {"origin": [index[(0, 0)]], "boundary": sorted(boundary)}
    meta = {
        "radius": radius,
        "d": graph.params.dimension,
        "K": graph.params.thickness,
        "scales": list(scales),
        "seq": seq.describe(),
    }
    return _finish("embedded", coords, edges, terminals, index[(0, 0)], meta, with_keys=True)


def build_window(family: str, **spec) -> GraphWindow:
    """Dispatch a window description to its builder; unknown keys are errors."""
    try:
        if family in ("z2-long-range", "z2"):
            seq = spec.pop("seq", None)
            if seq is None:
                seq = ProbabilitySequence.constant(spec.pop("p")).truncate(spec.pop("N", 1))
            if "radius" in spec:
                return long_range_radial_window(seq, spec.pop("radius"), **spec)
            if "x_extent" in spec:
                return long_range_box_window(seq, spec.pop("x_extent"), spec.pop("y_extent"), **spec)
            return long_range_crossing_window(seq, spec.pop("L"), **spec)
        if family == "zd":
            if "radius" in spec:
                return grid_radial_window(spec.pop("d"), spec.pop("p"), spec.pop("radius"), **spec)
            return grid_crossing_window(spec.pop("d"), spec.pop("p"), spec.pop("L"), **spec)
        if family == "slab":
            if "radius" in spec:
                return slab_radial_window(
                    spec.pop("d"), spec.pop("K"), spec.pop("p"), spec.pop("radius"), **spec
                )
            return slab_crossing_window(
                spec.pop("d"), spec.pop("K"), spec.pop("p"), spec.pop("L"), **spec
            )
        if family == "embedded":
            return embedded_radial_window(spec.pop("graph"), spec.pop("seq"), spec.pop("radius"), **spec)
    except KeyError as exc:
        raise ConfigError(f"window family {family!r} is missing parameter {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"bad parameters for window family {family!r}: {exc}") from None
    raise ConfigError(f"unknown window family {family!r}")
