import heapq
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from streamcov.errors import (
    BadOutlet,
    Disconnected,
    FlowUnconnectedPair,
    InvalidPoint,
    MultiEdge,
    NonpositiveLength,
    NonpositiveOmega,
    NotATree,
    NotDirected,
    SelfEdge,
)
from streamcov.network import (
    Edge,
    FlowKind,
    FlowRelation,
    Network,
    PointOnNetwork,
    flow_relation,
    format_network,
    geodesic_distance,
    geodesic_matrix,
    parse_network,
    random_points,
    random_tree,
    resistance_distance,
    resistance_matrix,
    site_geometry,
    subdivide_edge,
    tailup_weight,
)

P = PointOnNetwork


# -- independent oracles ------------------------------------------------------


def _subdivided_graph(net, points):
    """Vertex-level adjacency list with every point inserted as its own node."""
    cuts = {e.id: {0.0, e.length} for e in net.edge_list}
    for p in points:
        cuts[p.edge].add(p.offset)
    node = {}

    def nid(eid, off):
        e = net.edges[eid]
        if off == 0.0:
            return ("v", e.tail)
        if off == e.length:
            return ("v", e.head)
        return (eid, off)

    adj = {}
    for e in net.edge_list:
        offs = sorted(cuts[e.id])
        for lo, hi in zip(offs, offs[1:]):
            u, v = nid(e.id, lo), nid(e.id, hi)
            adj.setdefault(u, []).append((v, hi - lo))
            adj.setdefault(v, []).append((u, hi - lo))
    return adj, [nid(p.edge, p.offset) for p in points]


def _dijkstra(adj, src):
    dist = {src: 0.0}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            if d + w < dist.get(v, math.inf):
                dist[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return dist


def _resistance_oracle(net, points):
    """Effective resistance by grounding one node and solving a linear system per pair."""
    adj, ids = _subdivided_graph(net, points)
    nodes = list(adj)
    ix = {n: i for i, n in enumerate(nodes)}
    L = np.zeros((len(nodes), len(nodes)))
    for u, nbrs in adj.items():
        for v, w in nbrs:
            L[ix[u], ix[v]] -= 1.0 / w
            L[ix[u], ix[u]] += 1.0 / w
    R = np.zeros((len(points), len(points)))
    for i, p in enumerate(ids):
        for j, q in enumerate(ids):
            if ix[p] == ix[q]:
                continue
            ground = ix[q]
            keep = [k for k in range(len(nodes)) if k != ground]
            b = np.zeros(len(nodes))
            b[ix[p]] = 1.0
            pot = np.linalg.solve(L[np.ix_(keep, keep)], b[keep])
            R[i, j] = pot[keep.index(ix[p])]
    return R


# -- construction -------------------------------------------------------------


def test_network_basic_structure(ytree):
    assert ytree.is_tree
    assert ytree.leaf_count == 3  # two sources plus the outlet
    assert ytree.outlet_distance == {"l1": 3.5, "l2": 2.5, "j": 1.5, "o": 0.0}
    assert ytree.downstream_path["l1"] == ("l1", "j", "o")


@pytest.mark.parametrize(
    "edges, outlet, err",
    [
        ([Edge("a", "x", "x", 1.0)], None, SelfEdge),
        ([Edge("a", "x", "y", 1.0), Edge("b", "y", "x", 2.0)], None, MultiEdge),
        ([Edge("a", "x", "y", 0.0)], None, NonpositiveLength),
        ([Edge("a", "x", "y", -1.0)], None, NonpositiveLength),
        ([Edge("a", "x", "y", 1.0, 0.0)], None, NonpositiveOmega),
        ([Edge("a", "x", "y", 1.0), Edge("b", "z", "w", 1.0)], None, Disconnected),
        ([Edge("a", "x", "y", 1.0)], "q", BadOutlet),
        ([Edge("a", "x", "y", 1.0)], "x", BadOutlet),
        ([Edge("a", "x", "y", 1.0), Edge("b", "y", "z", 1.0), Edge("c", "z", "x", 1.0)], "x", NotATree),
    ],
)
def test_network_rejects_invalid(edges, outlet, err):
    with pytest.raises(err):
        Network(edges, outlet=outlet)


def test_directed_requires_outlet_and_orientation():
    with pytest.raises(BadOutlet):
        Network([Edge("a", "x", "y", 1.0)], directed=True)
    # edge pointing away from the outlet
    with pytest.raises(BadOutlet):
        Network([Edge("a", "x", "y", 1.0), Edge("b", "z", "y", 1.0)], outlet="x")


def test_nonadditive_omega_warns():
    with pytest.warns(UserWarning, match="not additive"):
        Network([Edge("a", "x", "j", 1.0, 1.0), Edge("b", "y", "j", 1.0, 1.0), Edge("c", "j", "o", 1.0, 5.0)], "o")


def test_random_tree_is_valid_and_additive(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        net = random_tree(25, rng)
    assert net.is_tree and net.directed and net.outlet == "v0"
    assert len(net.edge_list) == 25


def test_invalid_points(ytree):
    with pytest.raises(InvalidPoint):
        ytree.check_point(P("nope", 0.0))
    with pytest.raises(InvalidPoint):
        ytree.check_point(P("e2", 1.5))
    with pytest.raises(InvalidPoint):
        P.parse("e2-0.5")
    assert P.parse("e2:0.25") == P("e2", 0.25)
    assert P.parse(str(P("e1", 0.1))) == P("e1", 0.1)


def test_vertex_points_share_identity(ytree):
    assert ytree.point_key(P("e1", 2.0)) == ytree.point_key(P("e3", 0.0)) == ("v", "j")


def test_format_parse_roundtrip(rng):
    net = random_tree(10, rng)
    again = parse_network(format_network(net))
    assert again.edge_list == net.edge_list and again.outlet == net.outlet


def test_parse_network_comments_and_errors():
    net = parse_network("# a comment\nE a x y 1.5\nE b z y 2 # trailing\n")
    assert not net.directed and net.edges["a"].omega == 1.0
    with pytest.raises(Exception):
        parse_network("X junk\n")


# -- distances ----------------------------------------------------------------


def test_geodesic_matches_dijkstra_on_cycle_graph(rng):
    edges = [
        Edge("a", "p", "q", 1.0),
        Edge("b", "q", "r", 2.0),
        Edge("c", "r", "p", 2.5),
        Edge("d", "r", "s", 0.7),
        Edge("e", "s", "p", 1.2),
    ]
    net = Network(edges)
    pts = random_points(net, 12, rng) + [P("a", 0.0), P("b", 2.0)]
    adj, ids = _subdivided_graph(net, pts)
    G = geodesic_matrix(net, pts)
    for i, u in enumerate(ids):
        dist = _dijkstra(adj, u)
        for j, v in enumerate(ids):
            assert G[i, j] == pytest.approx(dist[v], abs=1e-12)
            assert geodesic_distance(net, pts[i], pts[j]) == pytest.approx(dist[v], abs=1e-12)


def test_same_edge_points_geodesic(ytree):
    assert geodesic_distance(ytree, P("e1", 0.25), P("e1", 1.75)) == pytest.approx(1.5)
    assert geodesic_distance(ytree, P("e1", 0.5), P("e2", 0.5)) == pytest.approx(1.5 + 0.5)


def test_triangle_resistance(triangle):
    x, y = triangle.vertex_point("x"), triangle.vertex_point("y")
    assert resistance_distance(triangle, x, y) == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert geodesic_distance(triangle, x, y) == pytest.approx(1.0)
    # midpoint of an edge: series 0.5 against parallel path 2.5
    m = P("a", 0.5)
    assert resistance_distance(triangle, x, m) == pytest.approx(0.5 * 2.5 / 3.0, abs=1e-12)


def test_resistance_matches_grounded_solve(rng):
    net = Network(
        [
            Edge("a", "p", "q", 1.0),
            Edge("b", "q", "r", 2.0),
            Edge("c", "r", "p", 2.5),
            Edge("d", "r", "s", 0.7),
            Edge("e", "s", "p", 1.2),
        ]
    )
    pts = random_points(net, 6, rng) + [P("a", 1.0)]
    np.testing.assert_allclose(resistance_matrix(net, pts), _resistance_oracle(net, pts), atol=1e-10)


def test_resistance_equals_geodesic_on_trees(rng):
    for _ in range(5):
        net = random_tree(int(rng.integers(2, 20)), rng)
        pts = random_points(net, 15, rng)
        np.testing.assert_allclose(resistance_matrix(net, pts), geodesic_matrix(net, pts), atol=1e-9)


def test_resistance_is_not_geodesic_off_trees(triangle, rng):
    pts = random_points(triangle, 8, rng)
    R, G = resistance_matrix(triangle, pts), geodesic_matrix(triangle, pts)
    off = ~np.eye(len(pts), dtype=bool)
    assert np.all(R[off] < G[off])


def test_subdivide_edge_preserves_distances(ytree, rng):
    pts = random_points(ytree, 6, rng)
    new, tr = subdivide_edge(ytree, "e1", 0.8)
    assert len(new.edge_list) == len(ytree.edge_list) + 1
    np.testing.assert_allclose(geodesic_matrix(new, [tr(p) for p in pts]), geodesic_matrix(ytree, pts), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n_edges=st.integers(1, 12))
def test_geodesic_metric_axioms(seed, n_edges):
    r = np.random.default_rng(seed)
    net = random_tree(n_edges, r)
    pts = random_points(net, 6, r)
    D = geodesic_matrix(net, pts)
    assert np.allclose(D, D.T)
    assert np.all(np.diag(D) == 0)
    assert np.all(D[:, :, None] <= D[:, None, :] + D.T[None, :, :] + 1e-12)


# -- flow relations -----------------------------------------------------------


def test_flow_relation_cases(ytree):
    r = flow_relation(ytree, P("e1", 0.5), P("e3", 1.0))
    assert r.kind is FlowKind.CONNECTED and r.d == pytest.approx(1.5 + 1.0)
    r = flow_relation(ytree, P("e1", 0.5), P("e2", 0.25))
    assert r.kind is FlowKind.UNCONNECTED
    assert (r.a, r.b) == pytest.approx((0.75, 1.5))
    assert r.a + r.b == pytest.approx(r.d)
    assert flow_relation(ytree, P("e1", 2.0), P("e3", 0.0)).kind is FlowKind.SAME
    # a site at the junction is downstream of both branches
    assert flow_relation(ytree, P("e2", 0.3), P("e1", 2.0)).is_connected


def test_flow_relation_needs_direction(triangle):
    with pytest.raises(NotDirected):
        flow_relation(triangle, P("a", 0.1), P("b", 0.1))


def test_flow_relation_constructors_sort_a_b():
    r = FlowRelation.unconnected(3.0, 1.0)
    assert (r.a, r.b, r.d) == (1.0, 3.0, 4.0)
    assert FlowRelation.connected(0.0).kind is FlowKind.SAME


def test_tailup_weight(ytree):
    w = tailup_weight(ytree, P("e1", 0.5), P("e3", 1.0))
    assert w == pytest.approx(math.sqrt(3.0 / 4.0))
    with pytest.raises(FlowUnconnectedPair):
        tailup_weight(ytree, P("e1", 0.5), P("e2", 0.5))


def _brute_relation(net, p, q):
    """Flow relation from explicit downstream point lists."""
    def down_dist(x):
        e = net.edges[x.edge]
        return e.length - x.offset + net.outlet_distance[e.head]

    def on_path(x, y):
        # is y downstream of (or equal to) x?
        ex, ey = net.edges[x.edge], net.edges[y.edge]
        if ex.id == ey.id:
            return y.offset >= x.offset
        verts = set(net.downstream_path[ex.head])
        edges_below = {net.down_edge[v].id for v in verts if v != net.outlet}
        return ey.id in edges_below or (y.offset == 0 and ey.tail in verts) or (y.offset == ey.length and ey.head in verts)

    dp, dq = down_dist(p), down_dist(q)
    if on_path(p, q) or on_path(q, p):
        return True, abs(dp - dq)
    common = [v for v in net.downstream_path[net.edges[p.edge].head] if v in net.downstream_path[net.edges[q.edge].head]]
    j = net.outlet_distance[common[0]]
    return False, (dp - j, dq - j)


def test_site_geometry_matches_brute_force(rng):
    for _ in range(4):
        net = random_tree(12, rng)
        pts = random_points(net, 14, rng) + [net.vertex_point("v3")]
        g = site_geometry(net, pts)
        assert g.leaves == net.leaf_count and g.is_tree
        for i in range(len(pts)):
            for j in range(len(pts)):
                if i == j:
                    assert g.same[i, j]
                    continue
                conn, val = _brute_relation(net, pts[i], pts[j])
                assert g.connected[i, j] == conn
                if conn:
                    assert g.d[i, j] == pytest.approx(val, abs=1e-12)
                    assert g.a[i, j] == 0.0 and g.b[i, j] == pytest.approx(g.d[i, j])
                    assert 0 < g.weight[i, j] <= 1
                else:
                    assert g.a[i, j] == pytest.approx(min(val), abs=1e-12)
                    assert g.b[i, j] == pytest.approx(max(val), abs=1e-12)
                    assert g.a[i, j] + g.b[i, j] == pytest.approx(g.d[i, j], abs=1e-12)
                    assert g.weight[i, j] == 0.0


def test_site_geometry_undirected_has_no_flow(triangle, rng):
    g = site_geometry(triangle, random_points(triangle, 5, rng))
    assert g.connected is None and g.metric == "resistance" and not g.is_tree
    with pytest.raises(ValueError):
        site_geometry(triangle, random_points(triangle, 2, rng), metric="manhattan")


def test_vertex_omega_is_outgoing_flow(ytree):
    # the junction carries the flow of its outgoing edge; the outlet the sum of its inflows
    j = ytree.vertex_point("j")
    assert ytree.omega_at(j) == 4.0
    assert ytree.omega_at(ytree.vertex_point("o")) == 4.0
    l1 = PointOnNetwork("e1", 1.0)
    g = site_geometry(ytree, [l1, j])
    assert g.weight[0, 1] == pytest.approx(math.sqrt(3.0 / 4.0))
