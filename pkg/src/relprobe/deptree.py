"""Dependency tree algorithms: construction, depth, span roots, shortest paths, pruning."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class DepTree:
    """Rooted tree over token indices. parent[i] is None for the root."""

    root: int
    parent: tuple
    children: tuple

    def __len__(self):
        return len(self.parent)


@dataclass(frozen=True)
class SdpResult:
    """Shortest dependency path between two span-root tokens.

    path runs from the head-side endpoint to the tail-side endpoint; lca is
    the deepest common ancestor; depth = max(#edges lca->head endpoint,
    #edges lca->tail endpoint).
    """

    path: tuple
    lca: int
    depth: int


def build_tree(dep_head):
    """Build a DepTree from 1-based parent indices (0 marks the root token)."""
    n = len(dep_head)
    if n == 0:
        raise ValueError("empty dep_head")
    roots = [i for i, h in enumerate(dep_head) if h == 0]
    if not roots:
        raise ValueError("no root token (no dep_head value of 0)")
    if len(roots) > 1:
        raise ValueError("multiple root tokens at indices %s" % (roots,))
    for i, h in enumerate(dep_head):
        if not (0 <= h <= n):
            raise ValueError("dep_head[%d]=%d out of range [0, %d]" % (i, h, n))
    parent = [h - 1 if h > 0 else None for h in dep_head]
    children = [[] for _ in range(n)]
    for i, p in enumerate(parent):
        if p is not None:
            children[p].append(i)
    # every node must reach the root without revisiting anything
    for i in range(n):
        seen = set()
        j = i
        while parent[j] is not None:
            if j in seen:
                raise ValueError("cycle detected through token %d" % i)
            seen.add(j)
            j = parent[j]
            if len(seen) > n:
                raise ValueError("cycle detected through token %d" % i)
    return DepTree(
        root=roots[0],
        parent=tuple(parent),
        children=tuple(tuple(c) for c in children),
    )


def tree_depth(t: DepTree) -> int:
    """Maximum number of edges on any root-to-leaf path (single node -> 0)."""
    best = 0
    stack = [(t.root, 0)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        for c in t.children[node]:
            stack.append((c, d + 1))
    return best


def span_root(t: DepTree, span) -> int:
    """Token in the span whose parent lies outside it.

    Leftmost such token if the annotation is non-projective; span.end when
    every token's parent is internal (degenerate annotation).
    """
    members = set(range(span.start, span.end + 1))
    for i in range(span.start, span.end + 1):
        p = t.parent[i]
        if p is None or p not in members:
            return i
    return span.end


def _depth_of(t: DepTree, node: int) -> int:
    d = 0
    while t.parent[node] is not None:
        node = t.parent[node]
        d += 1
    return d


def sdp(t: DepTree, head, tail) -> SdpResult:
    """Unique tree path between span_root(head) and span_root(tail)."""
    a = span_root(t, head)
    b = span_root(t, tail)
    da, db = _depth_of(t, a), _depth_of(t, b)
    up_a, up_b = [a], [b]
    x, y = a, b
    while da > db:
        x = t.parent[x]
        up_a.append(x)
        da -= 1
    while db > da:
        y = t.parent[y]
        up_b.append(y)
        db -= 1
    while x != y:
        x = t.parent[x]
        y = t.parent[y]
        up_a.append(x)
        up_b.append(y)
    lca = x
    # up_a ends at lca; up_b ends at lca as well
    path = tuple(up_a + up_b[-2::-1]) if len(up_b) > 1 else tuple(up_a)
    depth = max(len(up_a) - 1, len(up_b) - 1)
    return SdpResult(path=path, lca=lca, depth=depth)


def prune(t: DepTree, p: SdpResult, k) -> set:
    """Token indices within undirected tree distance k of any SDP node.

    k may be math.inf to keep every token.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    n = len(t)
    if math.isinf(k):
        return set(range(n))
    neighbors = [list(t.children[i]) for i in range(n)]
    for i in range(n):
        if t.parent[i] is not None:
            neighbors[i].append(t.parent[i])
    dist = {node: 0 for node in p.path}
    q = deque(p.path)
    while q:
        node = q.popleft()
        if dist[node] == k:
            continue
        for nb in neighbors[node]:
            if nb not in dist:
                dist[nb] = dist[node] + 1
                q.append(nb)
    return set(dist)
