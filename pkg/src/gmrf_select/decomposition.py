"""Tree decompositions in the normalized form the message-passing DP expects:
every non-leaf cluster has degree exactly 3, the last cluster is empty and is a
leaf, m >= n, and a valid elimination order is stored as a witness.

Also: the PACE-style file format, and a balanced decomposition constructor for
trees (width <= 5, logarithmic height) built from recursive separators.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    InvalidDecomposition,
    InvariantViolation,
    NotATree,
    ParseError,
    WidthMismatch,
)


@dataclass(frozen=True)
class TreeDecomposition:
    """Normalized tree decomposition.

    ``clusters[t]`` is a frozenset of 1-based graph vertices; cluster indices
    are 0-based with the empty cluster last. ``tree_edges`` are unordered pairs
    of cluster indices. ``elimination_order`` lists all graph vertices, first
    eliminated first.
    """

    n: int
    clusters: tuple[frozenset, ...]
    tree_edges: tuple[tuple[int, int], ...]
    elimination_order: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.clusters)

    @property
    def width(self) -> int:
        return max((len(c) for c in self.clusters), default=1) - 1

    @property
    def root(self) -> int:
        """Index of the empty leaf cluster the messages flow toward."""
        return self.m - 1

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.m)]
        for a, b in self.tree_edges:
            adj[a].append(b)
            adj[b].append(a)
        return [sorted(nb) for nb in adj]

    @property
    def height(self) -> int:
        """Longest cluster-to-root path, in edges."""
        adj = self.neighbors()
        depth = {self.root: 0}
        stack = [self.root]
        best = 0
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in depth:
                    depth[v] = depth[u] + 1
                    best = max(best, depth[v])
                    stack.append(v)
        return best

    def separator(self, i: int, j: int) -> frozenset:
        return self.clusters[i] & self.clusters[j]


def validate_axioms(clusters, tree_edges, n, graph_edges):
    """Check the decomposition axioms against the graph; raise InvalidDecomposition."""
    m = len(clusters)
    adj = [[] for _ in range(m)]
    for a, b in tree_edges:
        if not (0 <= a < m and 0 <= b < m) or a == b:
            raise InvalidDecomposition(f"bad tree edge ({a}, {b})")
        adj[a].append(b)
        adj[b].append(a)
    if len(tree_edges) != m - 1:
        raise InvalidDecomposition(
            f"{len(tree_edges)} tree edges for {m} clusters; a tree needs {m - 1}")
    seen = {0} if m else set()
    stack = [0] if m else []
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != m:
        raise InvalidDecomposition("cluster tree is disconnected")
    covered = set().union(*clusters) if clusters else set()
    missing = set(range(1, n + 1)) - covered
    if missing:
        raise InvalidDecomposition(f"vertices {sorted(missing)} in no cluster")
    if covered - set(range(1, n + 1)):
        raise InvalidDecomposition(
            f"cluster vertices {sorted(covered - set(range(1, n + 1)))} outside 1..{n}")
    for (u, v) in graph_edges:
        if not any(u in c and v in c for c in clusters):
            raise InvalidDecomposition(f"graph edge ({u}, {v}) inside no cluster")
    # running intersection: the clusters holding v induce a connected subtree
    for v in range(1, n + 1):
        holding = [t for t in range(m) if v in clusters[t]]
        start = holding[0]
        hold_set = set(holding)
        comp = {start}
        stack = [start]
        while stack:
            for w in adj[stack.pop()]:
                if w in hold_set and w not in comp:
                    comp.add(w)
                    stack.append(w)
        if comp != hold_set:
            raise InvalidDecomposition(
                f"clusters containing vertex {v} do not form a subtree")


def _leaf_strip_order(clusters, tree_edges) -> tuple[int, ...]:
    """Elimination order: repeatedly strip a smallest-index leaf cluster and
    eliminate the vertices private to it."""
    m = len(clusters)
    adj = {t: set() for t in range(m)}
    for a, b in tree_edges:
        adj[a].add(b)
        adj[b].add(a)
    alive = set(range(m))
    order = []
    while len(alive) > 1:
        leaf = min(t for t in alive if len(adj[t]) <= 1)
        parent = next(iter(adj[leaf]))
        order.extend(sorted(v for v in clusters[leaf]
                            if v not in clusters[parent] and v not in order))
        adj[parent].discard(leaf)
        adj[leaf].clear()
        alive.discard(leaf)
    last = alive.pop()
    order.extend(sorted(v for v in clusters[last] if v not in order))
    return tuple(order)


def check_elimination_order(order, n, graph_edges, clusters):
    """Verify the order is perfect for the decomposition: at each step the
    eliminated vertex plus its remaining (fill) neighbors fit in one cluster."""
    if sorted(order) != list(range(1, n + 1)):
        raise InvalidDecomposition("elimination order is not a permutation of 1..n")
    adj = {v: set() for v in range(1, n + 1)}
    for u, v in graph_edges:
        adj[u].add(v)
        adj[v].add(u)
    for v in order:
        closure = adj[v] | {v}
        if not any(closure <= c for c in clusters):
            raise InvalidDecomposition(
                f"eliminating {v}: neighborhood {sorted(closure)} fits no cluster")
        for a in adj[v]:
            adj[a].discard(v)
            adj[a].update(adj[v] - {a})
    return True


def normalize(clusters, tree_edges, n, graph_edges) -> TreeDecomposition:
    """Bring a valid decomposition into normalized form: binary internal degree,
    empty leaf cluster last, m >= n, elimination-order witness attached.
    Cluster duplication never changes the width."""
    clusters = [frozenset(c) for c in clusters]
    tree_edges = [tuple(e) for e in tree_edges]
    validate_axioms(clusters, tree_edges, n, graph_edges)

    adj = {t: set() for t in range(len(clusters))}
    for a, b in tree_edges:
        adj[a].add(b)
        adj[b].add(a)

    def new_cluster(content, attach_to):
        t = len(clusters)
        clusters.append(frozenset(content))
        adj[t] = {attach_to}
        adj[attach_to].add(t)
        return t

    # split clusters of degree > 3 into chains of duplicates
    pending = [t for t in adj if len(adj[t]) > 3]
    while pending:
        t = pending.pop()
        while len(adj[t]) > 3:
            moved = sorted(adj[t])[2:]
            dup = len(clusters)
            clusters.append(clusters[t])
            adj[dup] = set()
            for nb in moved:
                adj[t].discard(nb)
                adj[nb].discard(t)
                adj[nb].add(dup)
                adj[dup].add(nb)
            adj[t].add(dup)
            adj[dup].add(t)
            t = dup

    # attach the empty cluster, preferring a degree-2 host
    hosts = [t for t in adj if len(adj[t]) == 2]
    if hosts:
        host = min(hosts)
    elif len(clusters) == 1:
        host = 0
    else:
        host = min(t for t in adj if len(adj[t]) == 1)
    empty = new_cluster((), host)

    # non-leaf degree-2 clusters get a twin leaf
    changed = True
    while changed:
        changed = False
        for t in sorted(adj):
            if len(adj[t]) == 2:
                new_cluster(clusters[t], t)
                changed = True

    # pad until m >= n: turn a non-empty leaf into an internal cluster with two twins
    while len(clusters) < n:
        leaf = min(t for t in adj if len(adj[t]) == 1 and t != empty)
        new_cluster(clusters[leaf], leaf)
        new_cluster(clusters[leaf], leaf)

    # reindex so the empty cluster is last
    order_idx = [t for t in range(len(clusters)) if t != empty] + [empty]
    remap = {old: new for new, old in enumerate(order_idx)}
    out_clusters = tuple(clusters[old] for old in order_idx)
    out_edges = tuple(sorted((min(remap[a], remap[b]), max(remap[a], remap[b]))
                             for a in adj for b in adj[a] if a < b))

    elim = _leaf_strip_order(out_clusters, out_edges)
    td = TreeDecomposition(n, out_clusters, out_edges, elim)
    _validate_normalized(td, graph_edges)
    return td


def _validate_normalized(td: TreeDecomposition, graph_edges):
    validate_axioms(td.clusters, td.tree_edges, td.n, graph_edges)
    if td.clusters[td.root]:
        raise InvariantViolation("last cluster is not empty")
    adj = td.neighbors()
    if len(adj[td.root]) != 1:
        raise InvariantViolation("empty cluster is not a leaf")
    for t, nb in enumerate(adj):
        if len(nb) not in (0, 1, 3):
            raise InvariantViolation(f"cluster {t} has degree {len(nb)}")
    if td.m < td.n:
        raise InvariantViolation(f"m = {td.m} < n = {td.n}")
    check_elimination_order(td.elimination_order, td.n, graph_edges, td.clusters)


# ---------------------------------------------------------------------------
# PACE-style file format
# ---------------------------------------------------------------------------

def read_td_text(text: str):
    """Parse `s td m width+1 n`, bag lines `b i v1 ...`, and edge lines `i j`.
    Returns (clusters 0-based list, tree edges 0-based, n)."""
    header = None
    bags = {}
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "s":
            if header is not None:
                raise ParseError(f"line {lineno}: duplicate 's td' header")
            if len(parts) != 5 or parts[1] != "td":
                raise ParseError(f"line {lineno}: malformed header {raw!r}")
            try:
                header = tuple(int(x) for x in parts[2:])
            except ValueError:
                raise ParseError(f"line {lineno}: non-integer header field")
        elif parts[0] == "b":
            if header is None:
                raise ParseError(f"line {lineno}: bag before 's td' header")
            try:
                idx = int(parts[1])
                verts = [int(x) for x in parts[2:]]
            except (ValueError, IndexError):
                raise ParseError(f"line {lineno}: malformed bag line {raw!r}")
            if idx in bags:
                raise ParseError(f"line {lineno}: duplicate bag {idx}")
            bags[idx] = frozenset(verts)
        else:
            if header is None:
                raise ParseError(f"line {lineno}: edge before 's td' header")
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: malformed edge line {raw!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ParseError(f"line {lineno}: non-integer edge {raw!r}")
    if header is None:
        raise ParseError("missing 's td' header")
    m, width_plus_1, n = header
    if set(bags) != set(range(1, m + 1)):
        raise ParseError(f"bag indices {sorted(bags)} != 1..{m}")
    actual = max((len(b) for b in bags.values()), default=0)
    if actual > width_plus_1:
        raise WidthMismatch(
            f"declared width+1 = {width_plus_1} but a bag has {actual} vertices")
    clusters = [bags[i] for i in range(1, m + 1)]
    zero_edges = [(a - 1, b - 1) for a, b in edges]
    return clusters, zero_edges, n


def write_td_text(td: TreeDecomposition) -> str:
    lines = [f"s td {td.m} {td.width + 1} {td.n}"]
    for t, c in enumerate(td.clusters, start=1):
        lines.append("b " + " ".join([str(t)] + [str(v) for v in sorted(c)]))
    for a, b in td.tree_edges:
        lines.append(f"{a + 1} {b + 1}")
    return "\n".join(lines) + "\n"


def parse_and_normalize(source, model) -> TreeDecomposition:
    """Read a PACE-style decomposition (path or literal text) and normalize it
    for the model's graph."""
    try:
        with open(source) as fh:
            text = fh.read()
    except (OSError, TypeError):
        text = source
    clusters, edges, n = read_td_text(text)
    if n != model.n:
        raise InvalidDecomposition(f"decomposition is for n = {n}, model has n = {model.n}")
    return normalize(clusters, edges, model.n, model.graph_edges())


# ---------------------------------------------------------------------------
# balanced decompositions for trees
# ---------------------------------------------------------------------------

def balance_for_tree(n: int, edges) -> TreeDecomposition:
    """Balanced decomposition of a tree: width <= 5 (actually <= 2), height
    logarithmic in n, in normalized form.

    Recursive vertex separators: each piece carries at most 2 boundary
    vertices; the separator joins the bag with the boundary, and the remaining
    components are packed into two child pieces of balanced size.
    """
    edges = [(min(u, v), max(u, v)) for u, v in edges]
    if len(edges) != n - 1 or any(u == v for u, v in edges):
        raise NotATree(f"{len(edges)} edges on {n} vertices is not a tree")
    adj = {v: set() for v in range(1, n + 1)}
    for u, v in edges:
        if v in adj[u]:
            raise NotATree(f"duplicate edge ({u}, {v})")
        adj[u].add(v)
        adj[v].add(u)
    seen = {1}
    stack = [1]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != n:
        raise NotATree("graph is disconnected")

    clusters: list[frozenset] = []
    tree_links: list[tuple[int, int]] = []

    def components_without(piece: set, c: int) -> list[set]:
        comps = []
        left = piece - {c}
        while left:
            start = min(left)
            comp = {start}
            frontier = [start]
            while frontier:
                for w in adj[frontier.pop()]:
                    if w in left and w not in comp:
                        comp.add(w)
                        frontier.append(w)
            comps.append(comp)
            left -= comp
        return comps

    def path_between(piece: set, a: int, b: int) -> list[int]:
        prev = {a: a}
        frontier = [a]
        while frontier:
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if w in piece and w not in prev:
                        prev[w] = u
                        nxt.append(w)
            frontier = nxt
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        return path

    def build(piece: set, boundary: frozenset) -> int:
        if len(piece) <= 3:
            clusters.append(frozenset(piece))
            return len(clusters) - 1
        if len(boundary) == 2:
            b1, b2 = sorted(boundary)
            candidates = path_between(piece, b1, b2)
        else:
            candidates = sorted(piece)
        best = None
        for c in sorted(candidates):
            comps = components_without(piece, c)
            if len(comps) < 2:
                continue
            worst = max(len(x) for x in comps)
            if best is None or (worst, c) < best[:2]:
                best = (worst, c, comps)
        if best is None:  # every candidate is a leaf of the piece
            c = min(v for v in candidates if len(adj[v] & piece) > 1)
            best = (len(piece) - 1, c, components_without(piece, c))
        _, c, comps = best
        groups: list[list[set]] = [[], []]
        sizes = [0, 0]
        seeded = {}
        for t, b in enumerate(sorted(boundary - {c})):
            comp = next(x for x in comps if b in x)
            slot = seeded.get(id(comp))
            if slot is None:
                slot = t if t < 2 else (0 if sizes[0] <= sizes[1] else 1)
                groups[slot].append(comp)
                sizes[slot] += len(comp)
                seeded[id(comp)] = slot
        rest = [x for x in comps if id(x) not in seeded]
        for comp in sorted(rest, key=lambda x: (-len(x), min(x))):
            slot = 0 if sizes[0] <= sizes[1] else 1
            groups[slot].append(comp)
            sizes[slot] += len(comp)
        node = len(clusters)
        clusters.append(frozenset(boundary | {c}))
        for grp in groups:
            if not grp:
                continue
            sub_piece = set().union(*grp) | {c}
            sub_boundary = frozenset((boundary & sub_piece) | {c})
            child = build(sub_piece, sub_boundary)
            tree_links.append((node, child))
        return node

    build(set(range(1, n + 1)), frozenset())
    td = normalize(clusters, tree_links, n, edges)
    if td.width > 5:
        raise InvariantViolation(f"balanced decomposition width {td.width} > 5")
    import math
    bound = 2 * math.ceil(math.log(2 * n) / math.log(5.0 / 4.0))
    if td.height > bound:
        raise InvariantViolation(
            f"balanced decomposition height {td.height} exceeds {bound}")
    return td
