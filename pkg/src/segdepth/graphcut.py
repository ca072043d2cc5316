"""Binary graph-cut moves over the multiview segment graph.

Each move gives every non-frozen segment a choice between its current label
(x = 0, sink side) and a proposed label (x = 1, source side).  Expansion
proposes one label for everybody; fusion proposes a second full labeling.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .energy import Labeling, MatchTables, MultiviewData, total_energy
from .maxflow import FlowGraph, maxflow

log = logging.getLogger(__name__)

ACCEPT_TOL = 1e-9
REGULAR_TOL = 1e-9


@dataclass
class MoveResult:
    labeling: Labeling
    energy_before: float
    energy_after: float
    changed: int
    node_count: int = 0
    truncated: int = 0
    accepted: bool = False


@dataclass
class _Terms:
    """Pairwise tables over binary variables; -1 marks a fixed (x = 0) side."""
    u: list
    v: list
    t: list   # each (n, 4): T00, T01, T10, T11

    def add(self, u, v, t00, t01, t10, t11):
        keep = (t00 != 0) | (t01 != 0) | (t10 != 0) | (t11 != 0)
        if keep.any():
            self.u.append(np.asarray(u)[keep])
            self.v.append(np.asarray(v)[keep])
            self.t.append(np.column_stack([t00, t01, t10, t11])[keep])


def move_terms(data: MultiviewData, tables: MatchTables, current: Labeling, proposal):
    """Collect pairwise tables of the binary move ``current`` -> ``proposal``.

    Returns ``(node_ids, lab0, lab1, terms)`` where ``node_ids[c][s]`` is the
    graph node of segment s (-1 when frozen).
    """
    node_ids, var, lab0, lab1 = [], [], [], []
    next_id = 0
    for c in range(data.view_count):
        active = ~current.frozen[c]
        ids = np.full(len(active), -1, dtype=np.int64)
        ids[active] = np.arange(next_id, next_id + active.sum())
        next_id += int(active.sum())
        cur = current.labels[c]
        alt = np.where(active, np.asarray(proposal[c], dtype=np.int64), cur)
        node_ids.append(ids)
        # a segment whose two options coincide cannot change anything
        var.append(np.where(alt != cur, ids, -1))
        lab0.append(cur)
        lab1.append(alt)

    terms = _Terms([], [], [])
    for c, seg in enumerate(data.segmentations):
        s, t = seg.edges[:, 0], seg.edges[:, 1]
        w = 2.0 * data.betas[c]
        a0, a1, b0, b1 = lab0[c][s], lab1[c][s], lab0[c][t], lab1[c][t]
        terms.add(var[c][s], var[c][t], w * np.abs(a0 - b0), w * np.abs(a0 - b1),
                  w * np.abs(a1 - b0), w * np.abs(a1 - b1))

    for pair in data.view_pairs():
        c, c2 = pair
        segs = np.arange(data.segmentations[c].count)
        for side, own in ((0, lab0[c]), (1, lab1[c])):
            p = tables.partners(pair, segs, own)
            r = tables.reward(pair, segs, own)
            ok = (p >= 0) & (r != 0)
            # the alternative branch only exists for segments that can switch
            if side == 1:
                ok &= var[c] >= 0
            s_ok, p_ok, r_ok, own_ok = segs[ok], p[ok], r[ok], own[ok]
            hit0 = r_ok * (lab0[c2][p_ok] == own_ok)
            hit1 = r_ok * (lab1[c2][p_ok] == own_ok)
            zero = np.zeros(len(s_ok))
            if side == 0:
                terms.add(var[c][s_ok], var[c2][p_ok], hit0, hit1, zero, zero)
            else:
                terms.add(var[c][s_ok], var[c2][p_ok], zero, zero, hit0, hit1)
    return node_ids, lab0, lab1, terms


def build_graph(node_count: int, terms: _Terms) -> tuple[FlowGraph, int]:
    """Flow graph of the (truncated-to-regular) binary energy; returns it with the truncation count."""
    g = FlowGraph(node_count)
    if not terms.u:
        return g, 0
    u = np.concatenate(terms.u)
    v = np.concatenate(terms.v)
    t = np.concatenate(terms.t).copy()
    unary = np.zeros(node_count)

    only_u = (u >= 0) & (v < 0)
    np.add.at(unary, u[only_u], t[only_u, 2] - t[only_u, 0])
    only_v = (u < 0) & (v >= 0)
    np.add.at(unary, v[only_v], t[only_v, 1] - t[only_v, 0])

    both = (u >= 0) & (v >= 0)
    u, v, t = u[both], v[both], t[both]
    excess = t[:, 0] + t[:, 3] - t[:, 1] - t[:, 2]
    bad = excess > REGULAR_TOL
    truncated = int(bad.sum())
    if truncated:
        # raise the smaller off-diagonal entry: an upper bound that leaves T00 exact
        col = np.where(t[bad, 1] <= t[bad, 2], 1, 2)
        t[np.flatnonzero(bad), col] += excess[bad]
    np.add.at(unary, u, t[:, 2] - t[:, 0])
    np.add.at(unary, v, t[:, 3] - t[:, 2])
    w = np.maximum(0.0, t[:, 1] + t[:, 2] - t[:, 0] - t[:, 3])
    nz = w > 0
    g.add_edges(v[nz], u[nz], w[nz])
    g.add_tedges(np.arange(node_count), np.maximum(0.0, -unary), np.maximum(0.0, unary))
    return g, truncated


def binary_move(data: MultiviewData, tables: MatchTables, current: Labeling, proposal,
                energy_before: float | None = None) -> MoveResult:
    if energy_before is None:
        energy_before = total_energy(current, data)
    node_ids, lab0, lab1, terms = move_terms(data, tables, current, proposal)
    n = current.active_count
    graph, truncated = build_graph(n, terms)
    _, take = maxflow(graph)
    new = current.copy()
    changed = 0
    for c in range(data.view_count):
        ids = node_ids[c]
        active = ids >= 0
        pick = np.zeros(len(ids), dtype=bool)
        pick[active] = take[ids[active]]
        new.labels[c] = np.where(pick, lab1[c], lab0[c])
        changed += int((new.labels[c] != lab0[c]).sum())
    if changed == 0:
        return MoveResult(current, energy_before, energy_before, 0, n, truncated, False)
    energy_after = total_energy(new, data)
    if energy_after < energy_before - ACCEPT_TOL:
        return MoveResult(new, energy_before, energy_after, changed, n, truncated, True)
    return MoveResult(current, energy_before, energy_before, 0, n, truncated, False)


def expansion_move(labeling: Labeling, alpha: int, data: MultiviewData, tables: MatchTables,
                   energy_before: float | None = None) -> MoveResult:
    """Every non-frozen segment either keeps its label or switches to ``alpha``."""
    proposal = [np.full(len(l), alpha, dtype=np.int64) for l in labeling.labels]
    return binary_move(data, tables, labeling, proposal, energy_before)


def fuse_two(labeling_a: Labeling, labeling_b: Labeling, data: MultiviewData, tables: MatchTables,
             energy_a: float | None = None) -> MoveResult:
    """Per-segment choice between two labelings; ``labeling_a`` is the protected one."""
    return binary_move(data, tables, labeling_a, labeling_b.labels, energy_a)


def run_alpha_expansion(initial: Labeling, data: MultiviewData, tables: MatchTables,
                        labels=None, max_cycles: int = 2, history: list | None = None) -> Labeling:
    """Sweep expansion moves over ``labels`` (ascending) until a cycle brings no gain."""
    labels = np.arange(data.label_space.levels) if labels is None else np.sort(np.asarray(labels))
    current = initial
    energy = total_energy(current, data)
    if history is not None:
        history.append(energy)
    if len(labels) < 2 or current.active_count == 0:
        return current
    for cycle in range(max_cycles):
        improved = False
        for alpha in labels:
            res = expansion_move(current, int(alpha), data, tables, energy)
            if res.accepted:
                current, energy, improved = res.labeling, res.energy_after, True
            if history is not None:
                history.append(energy)
        log.debug("cycle %d: energy %.3f", cycle, energy)
        if not improved:
            break
    return current


def initial_labeling(data: MultiviewData, tables: MatchTables, labels, base: Labeling | None = None) -> Labeling:
    """Winner-take-all start: each active segment takes the label with the lowest summed matching cost.

    Out-of-view matches count as ``K`` (the point where the reward vanishes).
    ``base`` supplies frozen segments and their labels.
    """
    labels = np.sort(np.asarray(labels, dtype=np.int64))
    tables.ensure(labels)
    out, frozen = [], []
    for c in range(data.view_count):
        n = data.segmentations[c].count
        score = np.zeros((n, len(labels)))
        for c2 in data.topology[c]:
            m = tables.cost[c, c2][:, labels]
            score += np.where(np.isnan(m), data.params.K, m)
        wta = labels[np.argmin(score, axis=1)]
        if base is not None:
            wta = np.where(base.frozen[c], base.labels[c], wta)
            frozen.append(base.frozen[c])
        out.append(wta)
    return Labeling(out, frozen)
