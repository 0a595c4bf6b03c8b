"""Exact s-t min cut / max flow on sparse graphs.

This is the computational kernel under all the energy minimization in the
package. The solver is the Boykov-Kolmogorov augmenting-path algorithm:
two search trees are grown from source and sink, reused between
augmentations, with orphaned subtrees re-adopted instead of rebuilt.

Capacities are 64-bit floats (the unaries are log-likelihoods, so no
integer scaling is applied). Terminal capacities are folded into a single
per-node residual before the search, which shifts the flow by a constant
that is added back at the end.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

SOURCE = 0
SINK = 1

# parent-arc sentinels
_TERMINAL = -1
_NO_PARENT = -2
_ORPHAN = -3

_FREE, _S, _T = 0, 1, 2


class FlowNetwork:
    """Sparse s-t network: per-node terminal capacities plus an arc list.

    Arcs are stored in sister pairs (arc ``a`` and ``a ^ 1`` point in
    opposite directions), the layout the solver operates on directly.
    """

    def __init__(self, node_count: int):
        if node_count < 0:
            raise ValueError("node_count must be nonnegative")
        self.node_count = node_count
        self.source_cap = [0.0] * node_count
        self.sink_cap = [0.0] * node_count
        self.first = [-1] * node_count  # head of each node's arc list
        self.arc_head = []
        self.arc_cap = []
        self.arc_next = []

    @staticmethod
    def _check_cap(cap):
        cap = float(cap)
        if not (cap >= 0.0 and np.isfinite(cap)):
            raise ValueError(f"capacities must be finite and >= 0, got {cap}")
        return cap

    def add_terminal(self, i: int, cap_source, cap_sink) -> None:
        """Add capacity source->i and i->sink (accumulates over calls)."""
        self.source_cap[i] += self._check_cap(cap_source)
        self.sink_cap[i] += self._check_cap(cap_sink)

    def add_edge(self, i: int, j: int, cap, rev_cap) -> None:
        """Add an arc pair i->j with ``cap`` and j->i with ``rev_cap``."""
        if i == j:
            raise ValueError(f"self-edge at node {i}")
        for tail, h, c in ((i, j, self._check_cap(cap)),
                           (j, i, self._check_cap(rev_cap))):
            self.arc_head.append(h)
            self.arc_cap.append(c)
            self.arc_next.append(self.first[tail])
            self.first[tail] = len(self.arc_head) - 1


@dataclass(frozen=True)
class MinCutResult:
    flow_value: float
    side: np.ndarray  # (node_count,), SOURCE or SINK

    def __post_init__(self):
        self.side.setflags(write=False)


def min_cut(net: FlowNetwork) -> MinCutResult:
    """Compute the max flow and a minimum cut of ``net``.

    The returned flow equals the capacity of the cut induced by ``side``,
    and no cut has smaller capacity. Nodes reachable from the source in
    the final residual graph are labeled SOURCE; in particular free nodes
    fall on the SINK side.
    """
    n = net.node_count
    if n == 0:
        return MinCutResult(0.0, np.zeros(0, dtype=np.uint8))

    first = net.first
    head = net.arc_head
    nxt = net.arc_next
    rescap = list(net.arc_cap)

    # fold terminal capacities: tr > 0 means residual from source,
    # tr < 0 residual to sink; min(src, snk) flows immediately
    tr = [0.0] * n
    flow = 0.0
    for i in range(n):
        s, t = net.source_cap[i], net.sink_cap[i]
        flow += min(s, t)
        tr[i] = s - t

    tree = [_FREE] * n
    parent = [_NO_PARENT] * n
    active = deque()
    in_active = [False] * n
    orphans = deque()

    def activate(i):
        if not in_active[i]:
            in_active[i] = True
            active.append(i)

    for i in range(n):
        if tr[i] > 0.0:
            tree[i] = _S
            parent[i] = _TERMINAL
            activate(i)
        elif tr[i] < 0.0:
            tree[i] = _T
            parent[i] = _TERMINAL
            activate(i)

    def origin_is_terminal(q):
        # walk to the root; valid parents only (orphans sever the walk)
        while True:
            p = parent[q]
            if p == _TERMINAL:
                return True
            if p < 0:  # _NO_PARENT or _ORPHAN
                return False
            q = head[p]

    def adopt():
        while orphans:
            x = orphans.popleft()
            side_tree = tree[x]
            new_parent = -1
            a = first[x]
            while a != -1:
                q = head[a]
                if tree[q] == side_tree:
                    res = rescap[a ^ 1] if side_tree == _S else rescap[a]
                    if res > 0.0 and origin_is_terminal(q):
                        new_parent = a
                        break
                a = nxt[a]
            if new_parent != -1:
                parent[x] = new_parent
                continue
            # no parent found: x leaves the tree
            a = first[x]
            while a != -1:
                q = head[a]
                if tree[q] == side_tree:
                    res = rescap[a ^ 1] if side_tree == _S else rescap[a]
                    if res > 0.0:
                        activate(q)
                    pq = parent[q]
                    if pq >= 0 and head[pq] == x:
                        parent[q] = _ORPHAN
                        orphans.append(q)
                a = nxt[a]
            tree[x] = _FREE
            parent[x] = _NO_PARENT

    def augment(ca):
        nonlocal flow
        # ca points from the S side to the T side
        s_start = head[ca ^ 1]
        t_start = head[ca]

        bottleneck = rescap[ca]
        x = s_start
        while parent[x] != _TERMINAL:
            a = parent[x]
            if rescap[a ^ 1] < bottleneck:
                bottleneck = rescap[a ^ 1]
            x = head[a]
        s_root = x
        if tr[s_root] < bottleneck:
            bottleneck = tr[s_root]
        x = t_start
        while parent[x] != _TERMINAL:
            a = parent[x]
            if rescap[a] < bottleneck:
                bottleneck = rescap[a]
            x = head[a]
        t_root = x
        if -tr[t_root] < bottleneck:
            bottleneck = -tr[t_root]

        rescap[ca] -= bottleneck
        rescap[ca ^ 1] += bottleneck
        x = s_start
        while parent[x] != _TERMINAL:
            a = parent[x]
            rescap[a ^ 1] -= bottleneck
            rescap[a] += bottleneck
            if rescap[a ^ 1] <= 0.0:
                parent[x] = _ORPHAN
                orphans.append(x)
            x = head[a]
        tr[s_root] -= bottleneck
        if tr[s_root] <= 0.0:
            parent[s_root] = _ORPHAN
            orphans.append(s_root)
        x = t_start
        while parent[x] != _TERMINAL:
            a = parent[x]
            rescap[a] -= bottleneck
            rescap[a ^ 1] += bottleneck
            if rescap[a] <= 0.0:
                parent[x] = _ORPHAN
                orphans.append(x)
            x = head[a]
        tr[t_root] += bottleneck
        if tr[t_root] >= 0.0:
            parent[t_root] = _ORPHAN
            orphans.append(t_root)

        flow += bottleneck

    while active:
        p = active.popleft()
        in_active[p] = False
        if tree[p] == _FREE:
            continue
        connecting = -1
        a = first[p]
        if tree[p] == _S:
            while a != -1:
                if rescap[a] > 0.0:
                    q = head[a]
                    tq = tree[q]
                    if tq == _FREE:
                        tree[q] = _S
                        parent[q] = a ^ 1
                        activate(q)
                    elif tq == _T:
                        connecting = a
                        break
                a = nxt[a]
        else:
            while a != -1:
                if rescap[a ^ 1] > 0.0:
                    q = head[a]
                    tq = tree[q]
                    if tq == _FREE:
                        tree[q] = _T
                        parent[q] = a ^ 1
                        activate(q)
                    elif tq == _S:
                        connecting = a ^ 1
                        break
                a = nxt[a]
        if connecting != -1:
            activate(p)  # p may have further growth after the augmentation
            augment(connecting)
            adopt()

    # label sides by residual reachability from the source
    side = np.full(n, SINK, dtype=np.uint8)
    bfs = deque()
    for i in range(n):
        if tr[i] > 0.0:
            side[i] = SOURCE
            bfs.append(i)
    while bfs:
        u = bfs.popleft()
        a = first[u]
        while a != -1:
            if rescap[a] > 0.0:
                v = head[a]
                if side[v] == SINK:
                    side[v] = SOURCE
                    bfs.append(v)
            a = nxt[a]
    return MinCutResult(float(flow), side)
