"""s-t max-flow / min-cut with two reusable search trees (Boykov-Kolmogorov).

Arcs come in sister pairs ``2e`` (u->v) and ``2e + 1`` (v->u).  Terminal
links are stored per node as a single signed residual: positive means
capacity from the source, negative capacity to the sink.
"""
from __future__ import annotations

import numba
import numpy as np

FREE, SRC, SNK = 0, 1, 2
TERMINAL, ORPHAN = -1, -2
_INF_D = 1 << 60


class FlowGraph:
    """Capacitated graph with source/sink links; capacities must be non-negative.

    After :func:`maxflow`, ``residual`` holds the arc residuals and
    ``terminal_residual`` the signed terminal residual of every node.
    """

    def __init__(self, node_count: int = 0):
        self.node_count = node_count
        self._u, self._v, self._cuv, self._cvu = [], [], [], []
        self.cap_source = np.zeros(node_count)
        self.cap_sink = np.zeros(node_count)
        self.residual = None
        self.terminal_residual = None

    def add_nodes(self, count: int) -> range:
        start = self.node_count
        self.node_count += count
        self.cap_source = np.concatenate([self.cap_source, np.zeros(count)])
        self.cap_sink = np.concatenate([self.cap_sink, np.zeros(count)])
        return range(start, self.node_count)

    def add_tedge(self, i: int, cap_source: float, cap_sink: float) -> None:
        if cap_source < 0 or cap_sink < 0:
            raise ValueError("terminal capacities must be non-negative")
        self.cap_source[i] += cap_source
        self.cap_sink[i] += cap_sink

    def add_edge(self, u: int, v: int, cap_uv: float, cap_vu: float = 0.0) -> None:
        if not (0 <= u < self.node_count and 0 <= v < self.node_count) or u == v:
            raise ValueError(f"bad edge ({u}, {v})")
        self.add_edges([u], [v], [cap_uv], [cap_vu])

    def add_edges(self, u, v, cap_uv, cap_vu=None) -> None:
        """Vectorized :meth:`add_edge`."""
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        cap_uv = np.broadcast_to(np.asarray(cap_uv, dtype=np.float64), u.shape)
        cap_vu = np.zeros(u.shape) if cap_vu is None else np.broadcast_to(np.asarray(cap_vu, dtype=np.float64), u.shape)
        if len(u) and (cap_uv.min() < 0 or cap_vu.min() < 0):
            raise ValueError("edge capacities must be non-negative")
        self._u.append(u)
        self._v.append(v)
        self._cuv.append(np.array(cap_uv))
        self._cvu.append(np.array(cap_vu))

    def add_tedges(self, nodes, cap_source, cap_sink) -> None:
        nodes = np.asarray(nodes, dtype=np.int64)
        cs = np.broadcast_to(np.asarray(cap_source, dtype=np.float64), nodes.shape)
        ct = np.broadcast_to(np.asarray(cap_sink, dtype=np.float64), nodes.shape)
        if len(nodes) and (cs.min() < 0 or ct.min() < 0):
            raise ValueError("terminal capacities must be non-negative")
        np.add.at(self.cap_source, nodes, cs)
        np.add.at(self.cap_sink, nodes, ct)

    def _cat(self, chunks, dtype):
        return np.concatenate(chunks).astype(dtype) if chunks else np.zeros(0, dtype=dtype)

    @property
    def edge_count(self) -> int:
        return sum(len(u) for u in self._u)

    @property
    def edges(self) -> list[tuple[int, int, float, float]]:
        cols = [self._cat(c, d) for c, d in ((self._u, np.int64), (self._v, np.int64),
                                             (self._cuv, float), (self._cvu, float))]
        return [(int(a), int(b), float(c), float(d)) for a, b, c, d in zip(*cols)]

    def arc_arrays(self):
        u = self._cat(self._u, np.int64)
        v = self._cat(self._v, np.int64)
        heads = np.empty(2 * len(u), dtype=np.int64)
        heads[0::2], heads[1::2] = v, u
        tails = np.empty_like(heads)
        tails[0::2], tails[1::2] = u, v
        caps = np.empty(2 * len(u))
        caps[0::2], caps[1::2] = self._cat(self._cuv, float), self._cat(self._cvu, float)
        return tails, heads, caps

    def arc_flows(self) -> np.ndarray:
        """Flow on every (u -> v) edge after :func:`maxflow`, net of the reverse direction."""
        if self.residual is None:
            raise RuntimeError("run maxflow first")
        _, _, caps = self.arc_arrays()
        return (caps - self.residual)[0::2]

    def cut_value(self, source_side) -> float:
        """Capacity of the cut induced by a source-side indicator."""
        side = np.asarray(source_side, dtype=bool)
        total = self.cap_sink[side].sum() + self.cap_source[~side].sum()
        tails, heads, caps = self.arc_arrays()
        crossing = side[tails] & ~side[heads] if len(tails) else np.zeros(0, dtype=bool)
        return float(total + caps[crossing].sum())


@numba.njit(cache=True)
def _parent_node(parent_arc, tree_kind, heads):
    # source tree stores the arc parent->child, sink tree child->parent
    if tree_kind == SRC:
        return heads[parent_arc ^ 1]
    return heads[parent_arc]


@numba.njit(cache=True)
def _bk(n, heads, first, adj, rcap, tr):
    tree = np.zeros(n, dtype=np.int8)
    parent = np.full(n, ORPHAN, dtype=np.int64)
    ts = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    inq = np.zeros(n, dtype=np.bool_)
    qhead = 0
    qcount = 0
    orphans = np.empty(n, dtype=np.int64)
    flow = 0.0

    for i in range(n):
        if tr[i] > 0:
            tree[i] = SRC
        elif tr[i] < 0:
            tree[i] = SNK
        if tree[i] != FREE:
            parent[i] = TERMINAL
            dist[i] = 1
            queue[(qhead + qcount) % n] = i
            qcount += 1
            inq[i] = True
    time = 0

    while True:
        i = -1
        while qcount > 0:
            cand = queue[qhead]
            qhead = (qhead + 1) % n
            qcount -= 1
            inq[cand] = False
            if tree[cand] != FREE:
                i = cand
                break
        if i < 0:
            break

        bridge = -1
        ti = tree[i]
        for p in range(first[i], first[i + 1]):
            a = adj[p]
            j = heads[a]
            if ti == SRC:
                if rcap[a] <= 0:
                    continue
                link = a
            else:
                if rcap[a ^ 1] <= 0:
                    continue
                link = a ^ 1
            if tree[j] == FREE:
                tree[j] = ti
                parent[j] = link
                ts[j] = ts[i]
                dist[j] = dist[i] + 1
                if not inq[j]:
                    queue[(qhead + qcount) % n] = j
                    qcount += 1
                    inq[j] = True
            elif tree[j] != ti:
                bridge = link
                break
            elif ts[j] <= ts[i] and dist[j] > dist[i]:
                parent[j] = link
                ts[j] = ts[i]
                dist[j] = dist[i] + 1
        time += 1
        if bridge < 0:
            continue
        # i may still have unexplored residual arcs
        if not inq[i]:
            qhead = (qhead - 1) % n
            queue[qhead] = i
            qcount += 1
            inq[i] = True

        # augment along source ~> x -> y ~> sink
        f = rcap[bridge]
        x = heads[bridge ^ 1]
        while parent[x] != TERMINAL:
            pa = parent[x]
            if rcap[pa] < f:
                f = rcap[pa]
            x = heads[pa ^ 1]
        if tr[x] < f:
            f = tr[x]
        y = heads[bridge]
        while parent[y] != TERMINAL:
            pa = parent[y]
            if rcap[pa] < f:
                f = rcap[pa]
            y = heads[pa]
        if -tr[y] < f:
            f = -tr[y]

        rcap[bridge] -= f
        rcap[bridge ^ 1] += f
        ohead = 0
        norph = 0
        x = heads[bridge ^ 1]
        while parent[x] != TERMINAL:
            pa = parent[x]
            rcap[pa] -= f
            rcap[pa ^ 1] += f
            nxt = heads[pa ^ 1]
            if rcap[pa] <= 0:
                parent[x] = ORPHAN
                orphans[norph] = x
                norph += 1
            x = nxt
        tr[x] -= f
        if tr[x] <= 0:
            parent[x] = ORPHAN
            orphans[norph] = x
            norph += 1
        y = heads[bridge]
        while parent[y] != TERMINAL:
            pa = parent[y]
            rcap[pa] -= f
            rcap[pa ^ 1] += f
            nxt = heads[pa]
            if rcap[pa] <= 0:
                parent[y] = ORPHAN
                orphans[norph] = y
                norph += 1
            y = nxt
        tr[y] += f
        if tr[y] >= 0:
            parent[y] = ORPHAN
            orphans[norph] = y
            norph += 1
        flow += f

        # adoption; a node sits in the orphan ring at most once at a time
        time += 1
        while norph > 0:
            x = orphans[ohead]
            ohead = (ohead + 1) % n
            norph -= 1
            tx = tree[x]
            best = -1
            dmin = _INF_D
            for p in range(first[x], first[x + 1]):
                a = adj[p]
                j = heads[a]
                if tree[j] != tx:
                    continue
                link = a ^ 1 if tx == SRC else a
                if rcap[link] <= 0:
                    continue
                # trace j back to a terminal
                d = 0
                k = j
                valid = False
                while True:
                    if ts[k] == time:
                        d += dist[k]
                        valid = True
                        break
                    pk = parent[k]
                    d += 1
                    if pk == TERMINAL:
                        ts[k] = time
                        dist[k] = 1
                        valid = True
                        break
                    if pk == ORPHAN:
                        break
                    k = _parent_node(pk, tx, heads)
                if valid:
                    if d < dmin:
                        best = link
                        dmin = d
                    k = j
                    dd = d
                    while ts[k] != time:
                        ts[k] = time
                        dist[k] = dd
                        dd -= 1
                        k = _parent_node(parent[k], tx, heads)
            if best >= 0:
                parent[x] = best
                ts[x] = time
                dist[x] = dmin + 1
                continue
            for p in range(first[x], first[x + 1]):
                a = adj[p]
                j = heads[a]
                if tree[j] != tx:
                    continue
                link = a ^ 1 if tx == SRC else a
                if rcap[link] > 0 and not inq[j]:
                    queue[(qhead + qcount) % n] = j
                    qcount += 1
                    inq[j] = True
                pj = parent[j]
                if pj >= 0 and _parent_node(pj, tx, heads) == x:
                    parent[j] = ORPHAN
                    orphans[(ohead + norph) % n] = j
                    norph += 1
            tree[x] = FREE
            parent[x] = ORPHAN
    return flow


@numba.njit(cache=True)
def _source_side(n, heads, first, adj, rcap, tr):
    side = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for i in range(n):
        if tr[i] > 0:
            side[i] = True
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        i = stack[top]
        for p in range(first[i], first[i + 1]):
            a = adj[p]
            j = heads[a]
            if not side[j] and rcap[a] > 0:
                side[j] = True
                stack[top] = j
                top += 1
    return side


def maxflow(graph: FlowGraph) -> tuple[float, np.ndarray]:
    """Maximum flow value and the minimal source-side set of a minimum cut."""
    n = graph.node_count
    if n == 0:
        graph.residual = np.zeros(0)
        graph.terminal_residual = np.zeros(0)
        return 0.0, np.zeros(0, dtype=bool)
    tails, heads, caps = graph.arc_arrays()
    order = np.argsort(tails, kind="stable")
    first = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(tails, minlength=n), out=first[1:])
    rcap = caps.copy()
    cs, ct = graph.cap_source, graph.cap_sink
    base = float(np.minimum(cs, ct).sum())
    tr = cs - ct
    flow = _bk(n, heads, first, order, rcap, tr)
    graph.residual = rcap
    graph.terminal_residual = tr
    side = _source_side(n, heads, first, order, rcap, tr)
    return base + flow, side
