"""Gaussian MRF and Gaussian free field models, the average prediction-error
objective and its evaluation paths, effective resistance, and the tree-GMRF to
GFF reduction.

Vertices are labeled 1..n throughout, matching the file formats. Models are
immutable after construction; every query is a pure function, so concurrent
reads are safe. The covariance of a GMRF is materialized once, lazily.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    DisconnectedFromS,
    DisconnectedGraph,
    IndependentPairPresent,
    InfeasibleParameters,
    InvariantViolation,
    NotATree,
    NotUnitRegular,
    SingularObservationBlock,
    SingularSubmatrix,
)
from .linalg import SupportedMatrix

INDEPENDENCE_TOL = 1e-12  # |Sigma_ij| below this (relative) counts as independent


class GffModel:
    """Gaussian free field: a connected weighted graph with edge resistances
    and one vertex pinned to zero (the pin is always treated as observed and
    never consumes selection budget).
    """

    def __init__(self, n: int, edges, pin: int = 1):
        if n < 2:
            raise InfeasibleParameters(f"a GFF needs at least 2 vertices, got {n}")
        if not 1 <= pin <= n:
            raise InfeasibleParameters(f"pin {pin} outside 1..{n}")
        seen = {}
        for (u, v, r) in edges:
            if u == v:
                raise InvariantViolation(f"self-loop at vertex {u}")
            if not (1 <= u <= n and 1 <= v <= n):
                raise InvariantViolation(f"edge ({u},{v}) outside 1..{n}")
            if not (np.isfinite(r) and r > 0):
                raise InvariantViolation(f"resistance {r} on edge ({u},{v}) not in (0, inf)")
            key = (min(u, v), max(u, v))
            if key in seen and abs(seen[key] - r) > 1e-12 * r:
                raise InvariantViolation(f"conflicting resistances on edge {key}")
            seen[key] = float(r)
        self.n = n
        self.pin = pin
        self.edges = tuple((u, v, seen[(u, v)]) for (u, v) in sorted(seen))
        self._check_connected()
        self._laplacian = None
        self._reduced_cov = None

    def _check_connected(self):
        adj = {v: [] for v in range(1, self.n + 1)}
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {1}
        stack = [1]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != self.n:
            missing = sorted(set(range(1, self.n + 1)) - seen)
            raise DisconnectedGraph(f"vertices {missing} unreachable from 1")

    def graph_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, v, _ in self.edges]

    @property
    def vertices(self) -> range:
        return range(1, self.n + 1)

    def precision(self) -> SupportedMatrix:
        """The full n x n Laplacian (rows sum to zero); cached."""
        if self._laplacian is None:
            self._laplacian = laplacian(self)
        return self._laplacian

    def reduced_covariance(self) -> np.ndarray:
        """Covariance of the non-pin variables, indexed by sorted(V \\ {pin})."""
        if self._reduced_cov is None:
            rest = [v for v in self.vertices if v != self.pin]
            lap = self.precision()
            idx = lap.positions(rest)
            cov = np.linalg.inv(lap.block[np.ix_(idx, idx)])
            cov.setflags(write=False)
            self._reduced_cov = cov
        return self._reduced_cov

    def covariance(self) -> np.ndarray:
        """Full n x n covariance; the pin's row and column are zero."""
        rest = [v for v in self.vertices if v != self.pin]
        out = np.zeros((self.n, self.n))
        idx = np.array([v - 1 for v in rest])
        out[np.ix_(idx, idx)] = self.reduced_covariance()
        return out


class GmrfModel:
    """Gaussian MRF given by a full-rank precision matrix; the graph is exactly
    the nonzero pattern of the off-diagonal entries."""

    def __init__(self, precision):
        if isinstance(precision, SupportedMatrix):
            if len(precision.support) != precision.ambient_dim:
                raise InvariantViolation("precision must have full support 1..n")
            mat = precision
        else:
            mat = SupportedMatrix.from_dense(np.asarray(precision, dtype=float))
        w = np.linalg.eigvalsh(mat.block)
        if w[0] <= 0:
            raise InvariantViolation(
                f"precision not positive definite (lambda_min = {w[0]:.3e})")
        self.n = mat.ambient_dim
        self.precision_matrix = mat
        self._covariance = None

    def precision(self) -> SupportedMatrix:
        return self.precision_matrix

    @property
    def vertices(self) -> range:
        return range(1, self.n + 1)

    def graph_edges(self) -> list[tuple[int, int]]:
        lam = self.precision_matrix.block
        scale = np.abs(lam).max()
        out = []
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if abs(lam[i, j]) > 1e-14 * scale:
                    out.append((i + 1, j + 1))
        return out

    def covariance(self) -> np.ndarray:
        if self._covariance is None:
            cov = np.linalg.inv(self.precision_matrix.block)
            cov = 0.5 * (cov + cov.T)
            cov.setflags(write=False)
            self._covariance = cov
        return self._covariance

    @classmethod
    def from_covariance(cls, sigma) -> "GmrfModel":
        sigma = np.asarray(sigma, dtype=float)
        lam = np.linalg.inv(sigma)
        return cls(0.5 * (lam + lam.T))


@dataclass(frozen=True)
class Guarantee:
    factor: float
    source: str


@dataclass(frozen=True)
class SelectionReport:
    """Result of one selection run. ``err_value`` is always recomputed from the
    model by ``err``, never taken from solver internals."""

    selected: tuple[int, ...]
    err_value: float
    solver: str
    n: int
    budget_or_alpha: float | int | None
    guarantee: Guarantee | None = None
    wall_time: float | None = None
    details: dict = field(default_factory=dict)


def make_report(model, selected, solver, budget_or_alpha,
                guarantee=None, started=None, details=None) -> SelectionReport:
    sel = tuple(sorted(set(selected)))
    wall = (time.perf_counter() - started) if started is not None else None
    return SelectionReport(
        selected=sel,
        err_value=err(model, sel),
        solver=solver,
        n=model.n,
        budget_or_alpha=budget_or_alpha,
        guarantee=guarantee,
        wall_time=wall,
        details=dict(details or {}),
    )


# ---------------------------------------------------------------------------
# the objective and its evaluation paths
# ---------------------------------------------------------------------------

def laplacian(gff: GffModel) -> SupportedMatrix:
    """Graph Laplacian: off-diagonal -1/r_ij, diagonal the row's conductance sum."""
    lam = np.zeros((gff.n, gff.n))
    for u, v, r in gff.edges:
        c = 1.0 / r
        lam[u - 1, u - 1] += c
        lam[v - 1, v - 1] += c
        lam[u - 1, v - 1] -= c
        lam[v - 1, u - 1] -= c
    return SupportedMatrix.from_dense(lam)


def _effective_observed(model, subset) -> frozenset:
    s = frozenset(subset)
    if isinstance(model, GffModel):
        s = s | {model.pin}
    if not s <= set(model.vertices):
        raise InvariantViolation(f"selection {sorted(s)} outside 1..{model.n}")
    return s


def err(model, subset) -> float:
    """Average expected squared prediction error of the unobserved variables:
    (1/n) Tr(Lambda[Sbar, Sbar]^-1). For a GFF the pin is auto-inserted into the
    observed set and Lambda is the full Laplacian."""
    s = _effective_observed(model, subset)
    sbar = tuple(v for v in model.vertices if v not in s)
    if not sbar:
        return 0.0
    sub = linalg.obs(model.precision(), s)
    try:
        return linalg.trace_of_inverse(sub) / model.n
    except linalg.SingularMatrix as exc:
        raise SingularSubmatrix(
            f"unobserved block on {sbar} is singular: {exc}") from exc


def conditional_variance(model, i: int, subset) -> float:
    """V[X_i | X_S] via the covariance route; 0 when i is observed."""
    s = _effective_observed(model, subset)
    if i in s:
        return 0.0
    if isinstance(model, GffModel):
        rest = [v for v in model.vertices if v != model.pin]
        pos = {v: p for p, v in enumerate(rest)}
        sigma = model.reduced_covariance()
        s_idx = [pos[v] for v in sorted(s - {model.pin})]
        i_idx = pos[i]
    else:
        sigma = model.covariance()
        s_idx = [v - 1 for v in sorted(s)]
        i_idx = i - 1
    if not s_idx:
        return float(sigma[i_idx, i_idx])
    ss = sigma[np.ix_(s_idx, s_idx)]
    si = sigma[s_idx, i_idx]
    try:
        sol = np.linalg.solve(ss, si)
    except np.linalg.LinAlgError as exc:
        raise SingularObservationBlock(f"Sigma[S,S] singular for S={sorted(s)}") from exc
    return float(sigma[i_idx, i_idx] - si @ sol)


def predictor_weights(model, i: int, subset) -> tuple[tuple[int, ...], np.ndarray]:
    """Weights of the best linear predictor of X_i from X_S.

    Returns (sorted observed indices, weights in that order). For a GMRF this is
    Sigma[S,S]^-1 Sigma[S,i]; for a GFF (pin auto-inserted, where the weight on
    the pinned variable is immaterial) the harmonic weights
    -Lambda[Sbar,Sbar]^-1 Lambda[Sbar,S] of the full Laplacian are returned.
    """
    s = _effective_observed(model, subset)
    if i in s:
        raise InvariantViolation(f"target {i} is observed")
    order = tuple(sorted(s))
    if isinstance(model, GffModel):
        lap = model.precision()
        sbar = tuple(v for v in model.vertices if v not in s)
        bi = lap.positions(sbar)
        si = lap.positions(order)
        try:
            w_all = -np.linalg.solve(lap.block[np.ix_(bi, bi)], lap.block[np.ix_(bi, si)])
        except np.linalg.LinAlgError as exc:
            raise SingularObservationBlock(
                f"unobserved block singular for S={order}") from exc
        return order, w_all[sbar.index(i)]
    sigma = model.covariance()
    s_idx = [v - 1 for v in order]
    try:
        w = np.linalg.solve(sigma[np.ix_(s_idx, s_idx)], sigma[s_idx, i - 1])
    except np.linalg.LinAlgError as exc:
        raise SingularObservationBlock(f"Sigma[S,S] singular for S={order}") from exc
    return order, w


def effective_resistance(gff: GffModel, i: int, subset) -> float:
    """R_eff(i, S): contract S to one node, inject unit current at i, and read
    off the potential. Assembled from the edge list, independently of the
    precision-matrix machinery."""
    s = frozenset(subset)
    if not s:
        raise InvariantViolation("S must be nonempty")
    if i in s:
        raise InvariantViolation(f"vertex {i} is in S")
    adj = {v: [] for v in gff.vertices}
    for u, v, _ in gff.edges:
        adj[u].append(v)
        adj[v].append(u)
    reach = set(s)
    stack = list(s)
    while stack:
        for w in adj[stack.pop()]:
            if w not in reach:
                reach.add(w)
                stack.append(w)
    if i not in reach:
        raise DisconnectedFromS(f"vertex {i} not connected to S={sorted(s)}")
    rest = [v for v in gff.vertices if v not in s]
    pos = {v: p for p, v in enumerate(rest)}
    a = np.zeros((len(rest), len(rest)))
    for u, v, r in gff.edges:
        c = 1.0 / r
        if u in pos and v in pos:
            a[pos[u], pos[u]] += c
            a[pos[v], pos[v]] += c
            a[pos[u], pos[v]] -= c
            a[pos[v], pos[u]] -= c
        elif u in pos:
            a[pos[u], pos[u]] += c
        elif v in pos:
            a[pos[v], pos[v]] += c
    rhs = np.zeros(len(rest))
    rhs[pos[i]] = 1.0
    x = np.linalg.solve(a, rhs)
    return float(x[pos[i]])


def electrical_flow(gff: GffModel, i: int, subset):
    """The unit electrical flow from S to i: a dict (u, v) -> flow value with
    f(u,v) = (phi_u - phi_v)/r_uv, where phi solves the contracted system.
    Used by the Thomson-principle cross-checks."""
    s = frozenset(subset)
    rest = [v for v in gff.vertices if v not in s]
    pos = {v: p for p, v in enumerate(rest)}
    a = np.zeros((len(rest), len(rest)))
    for u, v, r in gff.edges:
        c = 1.0 / r
        if u in pos and v in pos:
            a[pos[u], pos[u]] += c
            a[pos[v], pos[v]] += c
            a[pos[u], pos[v]] -= c
            a[pos[v], pos[u]] -= c
        elif u in pos:
            a[pos[u], pos[u]] += c
        elif v in pos:
            a[pos[v], pos[v]] += c
    rhs = np.zeros(len(rest))
    rhs[pos[i]] = 1.0
    phi = np.linalg.solve(a, rhs)

    def potential(v):
        return phi[pos[v]] if v in pos else 0.0

    flow = {}
    for u, v, r in gff.edges:
        # injecting at i makes current run i -> S; negate so the flow runs S -> i
        f = (potential(v) - potential(u)) / r
        flow[(u, v)] = f
        flow[(v, u)] = -f
    return flow


def flow_energy(gff: GffModel, flow) -> float:
    """(1/2) sum over ordered pairs of f(u,v)^2 r_uv."""
    total = 0.0
    for u, v, r in gff.edges:
        total += flow[(u, v)] ** 2 * r
    return total


def regular_tightness(gff: GffModel, subset) -> tuple[float, bool]:
    """Lower bound (1 - |S|/n)/d for d-regular unit-resistance graphs, and
    whether it is attained (iff the complement is an independent set).

    The given S is used as-is (no pin insertion); S must be nonempty unless it
    is the full vertex set.
    """
    degree = {v: 0 for v in gff.vertices}
    for u, v, r in gff.edges:
        if abs(r - 1.0) > 1e-12:
            raise NotUnitRegular(f"edge ({u},{v}) has resistance {r} != 1")
        degree[u] += 1
        degree[v] += 1
    degs = set(degree.values())
    if len(degs) != 1:
        raise NotUnitRegular(f"graph is not regular (degrees {sorted(degs)})")
    d = degs.pop()
    s = frozenset(subset)
    sbar = [v for v in gff.vertices if v not in s]
    bound = (1.0 - len(s) / gff.n) / d
    if not sbar:
        return (0.0, True)
    if not s:
        raise SingularSubmatrix("S empty: err is undefined on the full Laplacian")
    err_s = linalg.trace_of_inverse(linalg.obs(gff.precision(), s)) / gff.n
    sbar_set = set(sbar)
    independent = not any(u in sbar_set and v in sbar_set for u, v, _ in gff.edges)
    attained = abs(err_s - bound) <= 1e-9
    if independent != attained:
        raise InvariantViolation(
            f"tightness mismatch: independent={independent} but err={err_s!r}, "
            f"bound={bound!r}")
    return (bound, independent)


# ---------------------------------------------------------------------------
# tree-GMRF -> GFF reduction
# ---------------------------------------------------------------------------

def tree_gmrf_to_gff(model: GmrfModel):
    """Rescale a tree GMRF so its precision becomes diagonally dominant with
    non-positive off-diagonals, then realize it as the conditional law of a GFF
    given observed auxiliary vertices.

    Returns (w, gff, observed_tail): the conditional distribution of the GFF's
    first n variables given the tail equals the law of (w_1 X_1, ..., w_n X_n).
    """
    n = model.n
    edges = model.graph_edges()
    if len(edges) != n - 1:
        raise NotATree(f"graph has {len(edges)} edges, a tree on {n} vertices needs {n - 1}")
    adj = {v: [] for v in model.vertices}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {1}
    order = [1]
    stack = [1]
    parent = {1: 0}
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = u
                order.append(v)
                stack.append(v)
    if len(seen) != n:
        raise NotATree("graph is disconnected")

    sigma = model.covariance()
    diag = np.sqrt(np.diag(sigma))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(sigma[i, j]) <= INDEPENDENCE_TOL * diag[i] * diag[j]:
                raise IndependentPairPresent(
                    f"variables {i + 1} and {j + 1} are independent")

    lam = model.precision_matrix.block
    # root-to-leaf sign pass: make every scaled off-diagonal non-positive
    sign = np.zeros(n)
    sign[0] = 1.0
    for v in order[1:]:
        p = parent[v]
        sign[v - 1] = -np.sign(lam[p - 1, v - 1]) * sign[p - 1]
    b = np.outer(sign, sign) * lam
    scale = np.abs(b).max()
    row_sums = b.sum(axis=1)
    if row_sums.min() >= -1e-12 * scale:
        mag = np.ones(n)
    else:
        # B is SPD with non-positive off-diagonals, so B^-1 1 > 0 entrywise and
        # the scaled row sums become exactly a_i > 0.
        mag = np.linalg.solve(b, np.ones(n))
        if mag.min() <= 0:
            raise InvariantViolation("magnitude schedule not positive")
    lam_scaled = (mag[:, None] * mag[None, :]) * b
    w = sign / mag

    rs = lam_scaled.sum(axis=1)
    rs_tol = 1e-12 * np.abs(np.diag(lam_scaled)).max()
    gff_edges = []
    for u, v in edges:
        c = -lam_scaled[u - 1, v - 1]
        if c <= 0:
            raise InvariantViolation(f"scaled edge ({u},{v}) lost its coupling")
        gff_edges.append((u, v, 1.0 / c))
    tail = []
    for v in model.vertices:
        if rs[v - 1] > rs_tol:
            aux = n + len(tail) + 1
            tail.append(aux)
            gff_edges.append((v, aux, 1.0 / rs[v - 1]))
    if not tail:
        raise InvariantViolation("no strictly dominant row; precision not PD?")
    gff = GffModel(n + len(tail), gff_edges, pin=tail[0])
    return w, gff, tuple(tail)


# ---------------------------------------------------------------------------
# seeded random instances
# ---------------------------------------------------------------------------

def random_gff(n: int, density: float = 0.3,
               resistance_range=(0.5, 2.0), seed: int = 0) -> GffModel:
    """Connected random GFF: a random spanning tree plus extra edges with the
    given per-pair probability; resistances log-uniform in the range."""
    if n < 2:
        raise InfeasibleParameters(f"n must be >= 2, got {n}")
    lo, hi = resistance_range
    if not (0 < lo <= hi and np.isfinite(hi)):
        raise InfeasibleParameters(f"bad resistance range {resistance_range}")
    rng = np.random.default_rng(seed)

    def draw_r():
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    edges = []
    present = set()
    for v in range(2, n + 1):
        u = int(rng.integers(1, v))
        edges.append((u, v, draw_r()))
        present.add((u, v))
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            if (u, v) not in present and rng.random() < density:
                edges.append((u, v, draw_r()))
    return GffModel(n, edges, pin=1)


def random_gmrf(n: int, tree_width_hint: int = 2,
                condition_cap: float = 1e4, seed: int = 0) -> GmrfModel:
    """Random GMRF whose graph is a partial k-tree of width <= tree_width_hint,
    with the condition number capped by a uniform diagonal shift."""
    if n < 2:
        raise InfeasibleParameters(f"n must be >= 2, got {n}")
    if condition_cap <= 1:
        raise InfeasibleParameters(f"condition cap must exceed 1, got {condition_cap}")
    w = max(1, min(tree_width_hint, n - 1))
    rng = np.random.default_rng(seed)
    cliques = [tuple(range(1, w + 2))] if n > w else [tuple(range(1, n + 1))]
    edge_set = set()
    for c in cliques:
        for a in c:
            for b in c:
                if a < b:
                    edge_set.add((a, b))
    for v in range(w + 2, n + 1):
        base = cliques[int(rng.integers(0, len(cliques)))]
        keep = sorted(rng.choice(len(base), size=min(w, len(base)), replace=False))
        sub = tuple(base[t] for t in keep)
        for u in sub:
            edge_set.add((min(u, v), max(u, v)))
        cliques.append(sub + (v,))
    lam = np.zeros((n, n))
    for u, v in sorted(edge_set):
        val = float(rng.uniform(0.1, 1.0) * rng.choice([-1.0, 1.0]))
        lam[u - 1, v - 1] = val
        lam[v - 1, u - 1] = val
    lam[np.diag_indices(n)] = np.abs(lam).sum(axis=1) + rng.uniform(0.1, 1.0, size=n)
    eig = np.linalg.eigvalsh(lam)
    if eig[-1] / eig[0] > condition_cap:
        shift = (eig[-1] - condition_cap * eig[0]) / (condition_cap - 1.0)
        lam += shift * np.eye(n)
    return GmrfModel(lam)
