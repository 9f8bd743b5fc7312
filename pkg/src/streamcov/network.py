"""Graphs with Euclidean edges and directed Euclidean trees (stream networks).

A location on the network is an edge id plus an offset measured from the
edge's tail vertex.  On a directed tree the head of every edge is its
downstream end, so following heads leads to the outlet.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import (
    BadOutlet,
    Disconnected,
    FlowUnconnectedPair,
    InvalidPoint,
    MultiEdge,
    NetworkError,
    NonpositiveLength,
    NonpositiveOmega,
    NotATree,
    NotDirected,
    SelfEdge,
    SingularLaplacian,
)

__all__ = [
    "Edge",
    "PointOnNetwork",
    "Network",
    "FlowKind",
    "FlowRelation",
    "SiteGeometry",
    "validate_network",
    "geodesic_distance",
    "geodesic_matrix",
    "resistance_distance",
    "resistance_matrix",
    "flow_relation",
    "tailup_weight",
    "site_geometry",
    "subdivide_edge",
    "random_tree",
    "random_points",
    "read_network",
    "parse_network",
    "format_network",
]


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    length: float
    omega: float = 1.0


@dataclass(frozen=True)
class PointOnNetwork:
    edge: str
    offset: float

    @classmethod
    def parse(cls, text: str) -> "PointOnNetwork":
        """Parse ``<edge-id>:<offset>``."""
        edge, sep, offset = text.strip().rpartition(":")
        if not sep or not edge:
            raise InvalidPoint(f"expected '<edge>:<offset>', got {text!r}")
        try:
            return cls(edge, float(offset))
        except ValueError as exc:
            raise InvalidPoint(f"bad offset in {text!r}") from exc

    def __str__(self) -> str:
        return f"{self.edge}:{self.offset:.17g}"


class Network:
    """Finite simple connected graph whose edges are line segments.

    Parameters
    ----------
    edges : iterable of Edge
    outlet : str, optional
        Most downstream vertex.  Required for directed-tree semantics.
    directed : bool, optional
        Defaults to ``outlet is not None``.
    vertices : iterable of str, optional
        Extra (isolated) vertices; normally inferred from the edges.
    validate : bool
        Run :func:`validate_network` on construction.
    """

    def __init__(
        self,
        edges: Iterable[Edge],
        outlet: str | None = None,
        directed: bool | None = None,
        vertices: Iterable[str] | None = None,
        validate: bool = True,
    ):
        self.edge_list: list[Edge] = list(edges)
        self.edges: dict[str, Edge] = {e.id: e for e in self.edge_list}
        verts: list[str] = list(vertices) if vertices is not None else []
        seen = set(verts)
        for e in self.edge_list:
            for v in (e.tail, e.head):
                if v not in seen:
                    seen.add(v)
                    verts.append(v)
        self.vertices: list[str] = verts
        self.vindex: dict[str, int] = {v: i for i, v in enumerate(verts)}
        self.outlet = outlet
        self.directed = (outlet is not None) if directed is None else bool(directed)
        if validate:
            validate_network(self)

    def __repr__(self) -> str:
        kind = "directed tree" if self.directed else "network"
        return f"<{kind}: {len(self.vertices)} vertices, {len(self.edge_list)} edges>"

    # -- structure ------------------------------------------------------------

    @cached_property
    def degree(self) -> dict[str, int]:
        deg = {v: 0 for v in self.vertices}
        for e in self.edge_list:
            deg[e.tail] += 1
            deg[e.head] += 1
        return deg

    @property
    def is_tree(self) -> bool:
        return len(self.edge_list) == len(self.vertices) - 1 and self._n_components() == 1

    @property
    def leaf_count(self) -> int:
        """Number of degree-one vertices (the outlet included when it has degree one)."""
        return sum(1 for d in self.degree.values() if d == 1)

    def _adjacency(self) -> csr_matrix:
        n = len(self.vertices)
        rows = [self.vindex[e.tail] for e in self.edge_list]
        cols = [self.vindex[e.head] for e in self.edge_list]
        w = [e.length for e in self.edge_list]
        return csr_matrix((w + w, (rows + cols, cols + rows)), shape=(n, n))

    def _n_components(self) -> int:
        if not self.vertices:
            return 0
        return connected_components(self._adjacency(), directed=False)[0]

    @cached_property
    def vertex_distances(self) -> np.ndarray:
        """All-pairs shortest-path lengths between vertices."""
        return shortest_path(self._adjacency(), method="D", directed=False)

    # -- directed-tree helpers ------------------------------------------------

    def _require_directed(self) -> None:
        if not self.directed or self.outlet is None:
            raise NotDirected("operation requires a directed tree with an outlet")

    @cached_property
    def down_edge(self) -> dict[str, Edge]:
        """Vertex -> its unique downstream edge (absent for the outlet)."""
        self._require_directed()
        return {e.tail: e for e in self.edge_list}

    @cached_property
    def upstream_edges(self) -> dict[str, list[Edge]]:
        ups: dict[str, list[Edge]] = {v: [] for v in self.vertices}
        for e in self.edge_list:
            ups[e.head].append(e)
        return ups

    @cached_property
    def outlet_distance(self) -> dict[str, float]:
        """Vertex -> stream distance to the outlet."""
        self._require_directed()
        dist: dict[str, float] = {}
        for v in self.vertices:
            path = []
            w = v
            while w not in dist and w != self.outlet:
                path.append(w)
                w = self.down_edge[w].head
            acc = 0.0 if w == self.outlet else dist[w]
            for u in reversed(path):
                acc += self.down_edge[u].length
                dist[u] = acc
        dist[self.outlet] = 0.0
        return dist

    @cached_property
    def downstream_path(self) -> dict[str, tuple[str, ...]]:
        """Vertex -> vertices from itself to the outlet, inclusive."""
        self._require_directed()
        out: dict[str, tuple[str, ...]] = {self.outlet: (self.outlet,)}
        for v in self.vertices:
            chain = []
            w = v
            while w not in out:
                chain.append(w)
                w = self.down_edge[w].head
            tail = out[w]
            for u in reversed(chain):
                tail = (u,) + tail
                out[u] = tail
        return out

    # -- points ---------------------------------------------------------------

    def check_point(self, p: PointOnNetwork) -> Edge:
        e = self.edges.get(p.edge)
        if e is None:
            raise InvalidPoint(f"unknown edge {p.edge!r}")
        if not (0.0 <= p.offset <= e.length) or math.isnan(p.offset):
            raise InvalidPoint(f"offset {p.offset} outside [0, {e.length}] on edge {p.edge!r}")
        return e

    def point_key(self, p: PointOnNetwork) -> tuple:
        """Hashable identity of a location; vertex points share one key across edges."""
        e = self.check_point(p)
        if p.offset == 0.0:
            return ("v", e.tail)
        if p.offset == e.length:
            return ("v", e.head)
        return ("e", e.id, p.offset)

    def vertex_point(self, v: str) -> PointOnNetwork:
        for e in self.edge_list:
            if e.tail == v:
                return PointOnNetwork(e.id, 0.0)
            if e.head == v:
                return PointOnNetwork(e.id, e.length)
        raise InvalidPoint(f"vertex {v!r} has no incident edge")

    def omega_at(self, p: PointOnNetwork) -> float:
        """Flow weight at ``p``; a vertex takes the weight of the flow leaving it."""
        e = self.check_point(p)
        key = self.point_key(p)
        if key[0] == "e" or not self.directed:
            return e.omega
        v = key[1]
        if v != self.outlet:
            return self.down_edge[v].omega
        return float(sum(x.omega for x in self.edge_list if x.head == v))


def validate_network(net: Network) -> None:
    """Raise a :class:`NetworkError` subclass unless ``net`` is a valid graph with Euclidean edges.

    Non-additive flow weights at junctions only trigger a warning.
    """
    pairs = set()
    for e in net.edge_list:
        if e.tail == e.head:
            raise SelfEdge(f"edge {e.id!r} joins {e.tail!r} to itself")
        key = frozenset((e.tail, e.head))
        if key in pairs:
            raise MultiEdge(f"more than one edge between {e.tail!r} and {e.head!r}")
        pairs.add(key)
        if not (e.length > 0) or not math.isfinite(e.length):
            raise NonpositiveLength(f"edge {e.id!r} has length {e.length}")
        if not (e.omega > 0) or not math.isfinite(e.omega):
            raise NonpositiveOmega(f"edge {e.id!r} has omega {e.omega}")
    if len(net.edges) != len(net.edge_list):
        raise NetworkError("duplicate edge ids")
    if not net.vertices:
        raise Disconnected("network has no vertices")
    if net._n_components() != 1:
        raise Disconnected("network is not connected")

    if net.outlet is not None and net.outlet not in net.vindex:
        raise BadOutlet(f"outlet {net.outlet!r} is not a vertex")
    if not net.directed:
        return
    if net.outlet is None:
        raise BadOutlet("directed network needs an outlet")
    if len(net.edge_list) != len(net.vertices) - 1:
        raise NotATree("directed network must be a tree")
    out_deg = {v: 0 for v in net.vertices}
    for e in net.edge_list:
        out_deg[e.tail] += 1
    if out_deg[net.outlet] != 0:
        raise BadOutlet(f"outlet {net.outlet!r} has an outgoing edge")
    bad = [v for v, k in out_deg.items() if v != net.outlet and k != 1]
    if bad:
        raise BadOutlet(f"edges are not all oriented toward the outlet (at {bad[0]!r})")

    for v in net.vertices:
        ups = net.upstream_edges[v]
        if not ups or v == net.outlet:
            continue
        down = next(e for e in net.edge_list if e.tail == v)
        total = sum(e.omega for e in ups)
        if not math.isclose(down.omega, total, rel_tol=1e-6):
            warnings.warn(
                f"omega not additive at junction {v!r}: {down.omega} != {total}",
                stacklevel=2,
            )


# -- distances ----------------------------------------------------------------


def _ends(net: Network, p: PointOnNetwork) -> tuple[Edge, list[tuple[int, float]]]:
    e = net.check_point(p)
    return e, [(net.vindex[e.tail], p.offset), (net.vindex[e.head], e.length - p.offset)]


def geodesic_distance(net: Network, p: PointOnNetwork, q: PointOnNetwork) -> float:
    """Length of the shortest path between two points through the network."""
    if net.point_key(p) == net.point_key(q):
        return 0.0
    D = net.vertex_distances
    ep, ends_p = _ends(net, p)
    eq, ends_q = _ends(net, q)
    best = abs(p.offset - q.offset) if ep.id == eq.id else math.inf
    for x, dx in ends_p:
        for y, dy in ends_q:
            best = min(best, dx + D[x, y] + dy)
    return float(best)


def geodesic_matrix(
    net: Network,
    points: Sequence[PointOnNetwork],
    others: Sequence[PointOnNetwork] | None = None,
) -> np.ndarray:
    """Dense geodesic distances between ``points`` (rows) and ``others`` (columns)."""
    sym = others is None
    others = points if others is None else others
    D = net.vertex_distances

    def unpack(pts):
        idx = np.empty((len(pts), 2), dtype=int)
        off = np.empty((len(pts), 2))
        eid = []
        pos = np.empty(len(pts))
        keys = []
        for i, p in enumerate(pts):
            e, ends = _ends(net, p)
            idx[i] = [ends[0][0], ends[1][0]]
            off[i] = [ends[0][1], ends[1][1]]
            eid.append(e.id)
            pos[i] = p.offset
            keys.append(net.point_key(p))
        return idx, off, np.array(eid, dtype=object), pos, keys

    ip, op, ep, pp, kp = unpack(points)
    iq, oq, eq, pq, kq = unpack(others)
    out = np.full((len(points), len(others)), np.inf)
    for a in range(2):
        for b in range(2):
            cand = op[:, a, None] + D[np.ix_(ip[:, a], iq[:, b])] + oq[None, :, b]
            np.minimum(out, cand, out=out)
    same_edge = ep[:, None] == eq[None, :]
    direct = np.abs(pp[:, None] - pq[None, :])
    out = np.where(same_edge, np.minimum(out, direct), out)
    for i, k in enumerate(kp):
        for j, k2 in enumerate(kq):
            if k == k2:
                out[i, j] = 0.0
    if sym:
        out = 0.5 * (out + out.T)
    return out


def _subdivided_laplacian(net: Network, points: Sequence[PointOnNetwork]):
    """Insert every point as a vertex; return (laplacian, node index per point)."""
    node_of_key: dict[tuple, int] = {("v", v): i for i, v in enumerate(net.vertices)}
    n_nodes = len(net.vertices)
    interior: dict[str, set[float]] = {}
    for p in points:
        key = net.point_key(p)
        if key[0] == "e":
            interior.setdefault(p.edge, set()).add(p.offset)
    rows: list[int] = []
    cols: list[int] = []
    cond: list[float] = []
    for e in net.edge_list:
        stops = sorted(interior.get(e.id, ()))
        chain = [node_of_key[("v", e.tail)]]
        for s in stops:
            node_of_key[("e", e.id, s)] = n_nodes
            chain.append(n_nodes)
            n_nodes += 1
        chain.append(node_of_key[("v", e.head)])
        cuts = [0.0] + stops + [e.length]
        for k in range(len(chain) - 1):
            rows.append(chain[k])
            cols.append(chain[k + 1])
            cond.append(1.0 / (cuts[k + 1] - cuts[k]))
    L = np.zeros((n_nodes, n_nodes))
    for i, j, c in zip(rows, cols, cond):
        L[i, j] -= c
        L[j, i] -= c
        L[i, i] += c
        L[j, j] += c
    index = [node_of_key[net.point_key(p)] for p in points]
    return L, index


def resistance_matrix(net: Network, points: Sequence[PointOnNetwork]) -> np.ndarray:
    """Effective resistance between points, edge resistance equal to edge length.

    The host edges are subdivided at every point and the vertex resistances
    are read off the Laplacian pseudoinverse.
    """
    L, index = _subdivided_laplacian(net, points)
    w, V = np.linalg.eigh(L)
    scale = max(abs(w[-1]), 1.0)
    null = w < 1e-11 * scale
    if null.sum() != 1:
        raise SingularLaplacian(f"Laplacian has {int(null.sum())} null directions; network disconnected")
    inv = np.where(null, 0.0, 1.0 / np.where(null, 1.0, w))
    Vi = V[index]
    Lp = (Vi * inv) @ Vi.T
    diag = np.diag(Lp)
    R = diag[:, None] + diag[None, :] - 2.0 * Lp
    R = 0.5 * (R + R.T)
    R[R < 0] = 0.0
    keys = [net.point_key(p) for p in points]
    for i, k in enumerate(keys):
        for j in range(i, len(keys)):
            if keys[j] == k:
                R[i, j] = R[j, i] = 0.0
    return R


def resistance_distance(net: Network, p: PointOnNetwork, q: PointOnNetwork) -> float:
    return float(resistance_matrix(net, [p, q])[0, 1])


def subdivide_edge(net: Network, edge_id: str, offset: float, new_vertex: str | None = None):
    """Split ``edge_id`` at ``offset``; return the new network and a point translator.

    Orientation and omega carry over to both halves.
    """
    e = net.edges[edge_id]
    if not (0.0 < offset < e.length):
        raise InvalidPoint("subdivision offset must be interior")
    v = new_vertex or f"{edge_id}@{offset:g}"
    first = Edge(f"{edge_id}.0", e.tail, v, offset, e.omega)
    second = Edge(f"{edge_id}.1", v, e.head, e.length - offset, e.omega)
    edges = []
    for x in net.edge_list:
        edges.extend([first, second] if x.id == edge_id else [x])
    new = Network(edges, outlet=net.outlet, directed=net.directed)

    def translate(p: PointOnNetwork) -> PointOnNetwork:
        if p.edge != edge_id:
            return p
        if p.offset <= offset:
            return PointOnNetwork(first.id, p.offset)
        return PointOnNetwork(second.id, p.offset - offset)

    return new, translate


# -- flow ---------------------------------------------------------------------


class FlowKind(enum.Enum):
    SAME = "same"
    CONNECTED = "connected"
    UNCONNECTED = "unconnected"


@dataclass(frozen=True)
class FlowRelation:
    """Flow relation between two sites.

    ``d`` is the stream distance.  For unconnected pairs ``a <= b`` are the
    distances from the two sites down to their common junction.
    """

    kind: FlowKind
    d: float
    a: float = 0.0
    b: float = 0.0

    @classmethod
    def connected(cls, d: float) -> "FlowRelation":
        return cls(FlowKind.SAME if d == 0 else FlowKind.CONNECTED, float(d), 0.0, float(d))

    @classmethod
    def unconnected(cls, a: float, b: float) -> "FlowRelation":
        a, b = sorted((float(a), float(b)))
        return cls(FlowKind.UNCONNECTED, a + b, a, b)

    @property
    def is_connected(self) -> bool:
        return self.kind is not FlowKind.UNCONNECTED


@dataclass(frozen=True)
class _FlowInfo:
    edge: Edge
    offset: float
    to_outlet: float
    head_path: tuple[str, ...]


def _flow_info(net: Network, p: PointOnNetwork) -> _FlowInfo:
    e = net.check_point(p)
    path = net.downstream_path[e.head]
    return _FlowInfo(e, p.offset, e.length - p.offset + net.outlet_distance[e.head], path)


def _lies_below(net: Network, q: _FlowInfo, p: _FlowInfo) -> bool:
    """True if site q sits on site p's path to the outlet."""
    if q.edge.id == p.edge.id:
        return q.offset >= p.offset
    path = p.head_path
    if q.offset == 0.0 and q.edge.tail in path:
        return True
    if q.offset == q.edge.length and q.edge.head in path:
        return True
    # interior of an edge strictly on the downstream path
    return q.edge.tail in path and q.edge.tail != net.outlet and net.down_edge[q.edge.tail].id == q.edge.id


def _relation(net: Network, fp: _FlowInfo, fq: _FlowInfo) -> FlowRelation:
    if _lies_below(net, fq, fp) or _lies_below(net, fp, fq):
        return FlowRelation.connected(abs(fp.to_outlet - fq.to_outlet))
    below_q = set(fq.head_path)
    junction = next(v for v in fp.head_path if v in below_q)
    dj = net.outlet_distance[junction]
    return FlowRelation.unconnected(fp.to_outlet - dj, fq.to_outlet - dj)


def flow_relation(net: Network, p: PointOnNetwork, q: PointOnNetwork) -> FlowRelation:
    """Classify two sites as the same point, flow-connected, or flow-unconnected."""
    net._require_directed()
    if net.point_key(p) == net.point_key(q):
        return FlowRelation(FlowKind.SAME, 0.0)
    return _relation(net, _flow_info(net, p), _flow_info(net, q))


def tailup_weight(net: Network, p: PointOnNetwork, q: PointOnNetwork) -> float:
    """Flow-splitting weight ``min(sqrt(w_p/w_q), sqrt(w_q/w_p))`` for connected sites."""
    if not flow_relation(net, p, q).is_connected:
        raise FlowUnconnectedPair(f"{p} and {q} are flow-unconnected")
    wp, wq = net.omega_at(p), net.omega_at(q)
    return math.sqrt(min(wp, wq) / max(wp, wq))


@dataclass
class SiteGeometry:
    """Pairwise spatial quantities for a list of sites, computed once per dataset.

    ``connected``, ``a``, ``b`` and ``weight`` are ``None`` on undirected
    networks.  For connected pairs ``a = 0`` and ``b = d``.
    """

    sites: list[PointOnNetwork]
    d: np.ndarray
    same: np.ndarray
    metric: str
    leaves: int
    is_tree: bool
    connected: np.ndarray | None = None
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    weight: np.ndarray | None = None

    @property
    def directed(self) -> bool:
        return self.connected is not None

    def take(self, rows, cols) -> "SiteGeometry":
        """Sub-block for site index arrays ``rows`` x ``cols`` (``same`` kept as site identity)."""
        ix = np.ix_(np.asarray(rows), np.asarray(cols))
        pick = lambda m: None if m is None else m[ix]
        return SiteGeometry(
            [self.sites[i] for i in rows],
            self.d[ix],
            self.same[ix],
            self.metric,
            self.leaves,
            self.is_tree,
            pick(self.connected),
            pick(self.a),
            pick(self.b),
            pick(self.weight),
        )


def site_geometry(net: Network, sites: Sequence[PointOnNetwork], metric: str = "auto") -> SiteGeometry:
    """Distances, flow relations and tail-up weights among ``sites``.

    ``metric`` is ``"geodesic"``, ``"resistance"`` or ``"auto"`` (geodesic on
    trees, resistance otherwise; the two coincide on trees).
    """
    sites = list(sites)
    tree = net.is_tree
    if metric == "auto":
        metric = "geodesic" if tree else "resistance"
    if metric == "geodesic":
        d = geodesic_matrix(net, sites)
    elif metric == "resistance":
        d = resistance_matrix(net, sites)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    keys = [net.point_key(p) for p in sites]
    n = len(sites)
    same = np.array([[keys[i] == keys[j] for j in range(n)] for i in range(n)], dtype=bool).reshape(n, n)
    d = np.where(same, 0.0, d)
    geom = SiteGeometry(sites, d, same, metric, net.leaf_count, tree)
    if not net.directed:
        return geom

    info = [_flow_info(net, p) for p in sites]
    omega = [net.omega_at(p) for p in sites]
    conn = np.ones((n, n), dtype=bool)
    a = np.zeros((n, n))
    b = d.copy()
    weight = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if same[i, j]:
                continue
            rel = _relation(net, info[i], info[j])
            if rel.is_connected:
                wi, wj = omega[i], omega[j]
                weight[i, j] = weight[j, i] = math.sqrt(min(wi, wj) / max(wi, wj))
            else:
                conn[i, j] = conn[j, i] = False
                a[i, j] = a[j, i] = rel.a
                b[i, j] = b[j, i] = rel.b
                weight[i, j] = weight[j, i] = 0.0
    geom.connected, geom.a, geom.b, geom.weight = conn, a, b, weight
    return geom


# -- random instances ---------------------------------------------------------


def random_tree(
    n_edges: int,
    rng: np.random.Generator,
    length_range: tuple[float, float] = (0.5, 2.0),
    omega_range: tuple[float, float] = (1.0, 10.0),
) -> Network:
    """Random directed tree rooted at outlet ``v0`` with additive omega."""
    heads = [int(rng.integers(0, i)) for i in range(1, n_edges + 1)]
    lengths = rng.uniform(*length_range, size=n_edges)
    children: dict[int, list[int]] = {}
    for i, h in enumerate(heads, start=1):
        children.setdefault(h, []).append(i)
    omega = {}
    for i in range(n_edges, 0, -1):  # children always have larger indices
        kids = children.get(i, [])
        omega[i] = sum(omega[k] for k in kids) if kids else float(rng.uniform(*omega_range))
    edges = [
        Edge(f"e{i}", f"v{i}", f"v{h}", float(lengths[i - 1]), omega[i])
        for i, h in enumerate(heads, start=1)
    ]
    return Network(edges, outlet="v0")


def random_points(net: Network, n: int, rng: np.random.Generator) -> list[PointOnNetwork]:
    """Points drawn uniformly by length over the network."""
    lengths = np.array([e.length for e in net.edge_list])
    which = rng.choice(len(lengths), size=n, p=lengths / lengths.sum())
    return [
        PointOnNetwork(net.edge_list[k].id, float(rng.uniform(0.0, net.edge_list[k].length)))
        for k in which
    ]


# -- text format --------------------------------------------------------------


def parse_network(text: str, directed: bool | None = None) -> Network:
    """Parse ``E <id> <tail> <head> <length> <omega>`` records and an optional ``OUTLET <v>``."""
    edges = []
    outlet = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0].upper()
        if tag == "OUTLET" and len(parts) == 2:
            outlet = parts[1]
        elif tag == "E" and len(parts) in (5, 6):
            omega = float(parts[5]) if len(parts) == 6 else 1.0
            edges.append(Edge(parts[1], parts[2], parts[3], float(parts[4]), omega))
        else:
            raise NetworkError(f"line {lineno}: cannot parse {raw!r}")
    return Network(edges, outlet=outlet, directed=directed)


def read_network(path: str | Path) -> Network:
    return parse_network(Path(path).read_text())


def format_network(net: Network) -> str:
    lines = []
    if net.outlet is not None:
        lines.append(f"OUTLET {net.outlet}")
    for e in net.edge_list:
        lines.append(f"E {e.id} {e.tail} {e.head} {e.length:.17g} {e.omega:.17g}")
    return "\n".join(lines) + "\n"
