"""Dense symmetric linear algebra over support-indexed matrices.

A SupportedMatrix is an n-dimensional symmetric PSD matrix that is zero outside
a support set V of (1-based) indices; only the V x V block is stored. These
carry precision matrices, cluster factors and message arguments everywhere else
in the package. All operations are pure: inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    IndexOutOfSupport,
    SingularComplement,
    SingularMatrix,
    SupportMismatch,
)

# Relative tolerances, against lambda_max of the block in question.
PSD_TOL = 1e-10          # allowed eigenvalue dip below zero for "PSD"
RANK_TOL = 1e-12         # smallest/largest eigenvalue ratio counted as full rank
ZERO_EIG_CUTOFF = 1e-12  # eigenvalues below lambda_max * this count as zero
SANDWICH_TOL = 1e-10     # slack in PSD-order comparisons


@dataclass(frozen=True)
class SupportedMatrix:
    """Symmetric matrix of ambient dimension n supported on V x V.

    ``support`` is a sorted tuple of 1-based indices; ``block`` is the dense
    |V| x |V| slice in support order. Entries outside V x V are implicitly 0.
    """

    ambient_dim: int
    support: tuple[int, ...]
    block: np.ndarray = field(repr=False)

    def __post_init__(self):
        support = tuple(sorted(self.support))
        object.__setattr__(self, "support", support)
        if any(i < 1 or i > self.ambient_dim for i in support):
            raise IndexOutOfSupport(
                f"support {support} not within 1..{self.ambient_dim}")
        if len(set(support)) != len(support):
            raise IndexOutOfSupport(f"duplicate indices in support {support}")
        block = np.array(self.block, dtype=float)
        k = len(support)
        if block.shape != (k, k):
            raise ValueError(f"block shape {block.shape} != ({k}, {k})")
        if k and not np.allclose(block, block.T, atol=1e-12 * (1.0 + np.abs(block).max())):
            raise ValueError("block is not symmetric")
        block = 0.5 * (block + block.T)
        block.setflags(write=False)
        object.__setattr__(self, "block", block)

    # -- construction helpers --

    @classmethod
    def zeros(cls, ambient_dim: int, support=()) -> "SupportedMatrix":
        k = len(tuple(support))
        return cls(ambient_dim, tuple(support), np.zeros((k, k)))

    @classmethod
    def from_dense(cls, dense: np.ndarray, support=None) -> "SupportedMatrix":
        """Wrap a full n x n array, restricting to ``support`` (default: all indices)."""
        dense = np.asarray(dense, dtype=float)
        n = dense.shape[0]
        if support is None:
            support = tuple(range(1, n + 1))
        support = tuple(sorted(support))
        idx = np.array([i - 1 for i in support], dtype=int)
        return cls(n, support, dense[np.ix_(idx, idx)])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.ambient_dim, self.ambient_dim))
        idx = np.array([i - 1 for i in self.support], dtype=int)
        if len(idx):
            out[np.ix_(idx, idx)] = self.block
        return out

    # -- indexing --

    def positions(self, indices) -> np.ndarray:
        """Positions of ``indices`` within the stored block (must lie in support)."""
        pos = {v: p for p, v in enumerate(self.support)}
        try:
            return np.array([pos[i] for i in indices], dtype=int)
        except KeyError as exc:
            raise IndexOutOfSupport(
                f"index {exc.args[0]} not in support {self.support}") from exc

    def entry(self, i: int, j: int) -> float:
        pos = {v: p for p, v in enumerate(self.support)}
        if i in pos and j in pos:
            return float(self.block[pos[i], pos[j]])
        if i < 1 or i > self.ambient_dim or j < 1 or j > self.ambient_dim:
            raise IndexOutOfSupport(f"({i}, {j}) outside ambient 1..{self.ambient_dim}")
        return 0.0

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        if not self.support:
            return True
        w = np.linalg.eigvalsh(self.block)
        scale = max(abs(w[0]), abs(w[-1]), 1.0)
        return w[0] >= -tol * scale


def add(a: SupportedMatrix, b: SupportedMatrix) -> SupportedMatrix:
    """Entrywise sum; the result is supported on the union of supports."""
    if a.ambient_dim != b.ambient_dim:
        raise SupportMismatch(
            f"ambient dims differ: {a.ambient_dim} vs {b.ambient_dim}")
    support = tuple(sorted(set(a.support) | set(b.support)))
    k = len(support)
    out = np.zeros((k, k))
    pos = {v: p for p, v in enumerate(support)}
    for m in (a, b):
        if m.support:
            idx = np.array([pos[v] for v in m.support], dtype=int)
            out[np.ix_(idx, idx)] += m.block
    return SupportedMatrix(a.ambient_dim, support, out)


def obs(m: SupportedMatrix, observed) -> SupportedMatrix:
    """Observe the variables in ``observed``: zero out their rows and columns.

    The result is supported on V \\ observed and agrees with ``m`` there.
    """
    observed = frozenset(observed)
    if not observed <= set(m.support):
        missing = sorted(observed - set(m.support))
        raise IndexOutOfSupport(f"observed indices {missing} outside support")
    keep = tuple(v for v in m.support if v not in observed)
    idx = m.positions(keep)
    return SupportedMatrix(m.ambient_dim, keep, m.block[np.ix_(idx, idx)])


def marginal(m: SupportedMatrix, delta) -> SupportedMatrix:
    """Precision of the marginal over ``delta``: the Schur complement
    M[D,D] - M[D,E] M[E,E]^-1 M[E,D] with E = support \\ delta.
    """
    delta = frozenset(delta)
    if not delta <= set(m.support):
        missing = sorted(delta - set(m.support))
        raise IndexOutOfSupport(f"marginal target {missing} outside support")
    keep = tuple(v for v in m.support if v in delta)
    elim = tuple(v for v in m.support if v not in delta)
    if not elim:
        return m
    ki = m.positions(keep)
    ei = m.positions(elim)
    e_block = m.block[np.ix_(ei, ei)]
    w = np.linalg.eigvalsh(e_block)
    if w[0] <= RANK_TOL * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise SingularComplement(
            f"eliminated block on {elim} is rank-deficient "
            f"(eig range [{w[0]:.3e}, {w[-1]:.3e}])")
    if not keep:
        return SupportedMatrix.zeros(m.ambient_dim)
    cross = m.block[np.ix_(ei, ki)]
    schur = m.block[np.ix_(ki, ki)] - cross.T @ np.linalg.solve(e_block, cross)
    return SupportedMatrix(m.ambient_dim, keep, schur)


def trace_of_inverse(m: SupportedMatrix) -> float:
    """Tr(M[V,V]^-1) via Cholesky column solves; 0 for empty support.

    Tr(A^-1) = ||L^-1||_F^2 for A = L L^t, so no explicit inverse is formed.
    """
    if not m.support:
        return 0.0
    try:
        chol = np.linalg.cholesky(m.block)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"support block not positive definite: {exc}") from exc
    inv_l = scipy.linalg.solve_triangular(
        chol, np.eye(len(m.support)), lower=True, check_finite=False)
    return float(np.sum(inv_l * inv_l))


def diag_of_inverse(m: SupportedMatrix, subset) -> float:
    """Sum over t in ``subset`` of (M[V,V]^-1)[t,t], via Cholesky column solves."""
    subset = tuple(v for v in subset)
    if not subset:
        return 0.0
    idx = m.positions(subset)
    try:
        chol = np.linalg.cholesky(m.block)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"support block not positive definite: {exc}") from exc
    rhs = np.zeros((len(m.support), len(subset)))
    rhs[idx, np.arange(len(subset))] = 1.0
    half = scipy.linalg.solve_triangular(chol, rhs, lower=True, check_finite=False)
    return float(np.sum(half * half))


def eig_extremes(m: SupportedMatrix) -> tuple[float, float]:
    """(smallest nonzero eigenvalue, largest eigenvalue) of the support block.

    Eigenvalues below lambda_max * 1e-12 count as zero. Empty support, or a
    block with no nonzero eigenvalues, yields (0.0, 0.0) by convention.
    """
    if not m.support:
        return (0.0, 0.0)
    w = np.linalg.eigvalsh(m.block)
    lam_max = float(w[-1])
    cutoff = abs(lam_max) * ZERO_EIG_CUTOFF
    nonzero = w[np.abs(w) > cutoff]
    if len(nonzero) == 0:
        return (0.0, 0.0)
    return (float(nonzero[0]), lam_max)


def psd_sandwich_check(a: SupportedMatrix, b: SupportedMatrix, eps: float) -> bool:
    """True iff e^-eps B <= A <= e^eps B in the PSD order, within tolerance."""
    if a.ambient_dim != b.ambient_dim or a.support != b.support:
        raise SupportMismatch(
            f"supports differ: {a.support} vs {b.support}")
    if not a.support:
        return True
    tol = SANDWICH_TOL * max(float(np.linalg.eigvalsh(b.block)[-1]), 0.0)
    upper = np.exp(eps) * b.block - a.block
    lower = a.block - np.exp(-eps) * b.block
    return (float(np.linalg.eigvalsh(upper)[0]) >= -tol
            and float(np.linalg.eigvalsh(lower)[0]) >= -tol)


def parse_matrix_text(text: str, first_line: int = 1):
    """Parse the matrix text format: ``n k``, a line of k ascending 1-based
    support indices (blank for k = 0), then k rows of k entries.

    Returns (SupportedMatrix, number of lines consumed). ``first_line`` is only
    used to report 1-based line numbers in errors.
    """
    lines = text.splitlines()

    def fail(offset, msg):
        from .errors import ParseError
        raise ParseError(f"line {first_line + offset}: {msg}")

    if not lines:
        fail(0, "missing matrix header")
    head = lines[0].split()
    if len(head) != 2:
        fail(0, f"expected 'n k', got {lines[0]!r}")
    try:
        n, k = int(head[0]), int(head[1])
    except ValueError:
        fail(0, f"non-integer matrix header {lines[0]!r}")
    if n < 0 or k < 0 or k > n:
        fail(0, f"invalid dimensions n={n} k={k}")
    if len(lines) < 2 + k:
        fail(len(lines) - 1, f"expected support line and {k} rows")
    support_tokens = lines[1].split()
    if len(support_tokens) != k:
        fail(1, f"expected {k} support indices, got {len(support_tokens)}")
    try:
        support = tuple(int(t) for t in support_tokens)
    except ValueError:
        fail(1, f"non-integer support index in {lines[1]!r}")
    if list(support) != sorted(set(support)):
        fail(1, "support indices must be strictly ascending")
    rows = []
    for r in range(k):
        tokens = lines[2 + r].split()
        if len(tokens) != k:
            fail(2 + r, f"expected {k} entries, got {len(tokens)}")
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            fail(2 + r, f"non-numeric entry in {lines[2 + r]!r}")
    block = np.array(rows) if k else np.zeros((0, 0))
    try:
        mat = SupportedMatrix(n, support, block)
    except (ValueError, IndexOutOfSupport) as exc:
        fail(0, str(exc))
    return mat, 2 + k


def format_matrix_text(m: SupportedMatrix) -> str:
    """Serialize in the matrix text format (12 significant digits)."""
    lines = [f"{m.ambient_dim} {len(m.support)}",
             " ".join(str(i) for i in m.support)]
    for row in m.block:
        lines.append(" ".join(f"{x:.12g}" for x in row))
    return "\n".join(lines) + "\n"
