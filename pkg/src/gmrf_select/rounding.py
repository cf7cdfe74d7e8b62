"""The two epsilon-net rounding schemes for precision matrices.

GFF mode rounds off-diagonal magnitudes and row sums of diagonally-dominant
M-matrices onto a geometric grid anchored at the model's conductance range.
SVD mode rounds eigenvalues onto a geometric grid and eigenvector columns onto
a canonical sphere net, then re-orthonormalizes. Both are deterministic maps
into finite nets; rounded fixed points round to themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EigenvalueOutOfRange,
    InvariantViolation,
    OutOfGridRange,
    RankDeficient,
)
from .linalg import SupportedMatrix

GFF_CLASS_TOL = 1e-9   # relative slack for the dd / non-positive-off-diagonal class
RANGE_SLACK = 1e-9     # relative slack on grid range containment


def log_grid_snap(value: float, base: float, step: float, top_index: int) -> float:
    """Nearest grid point base * e^(k*step), k in 0..top_index, in log distance;
    ties toward the lower point."""
    t = math.log(value / base) / step
    k = math.ceil(t - 0.5)
    k = min(max(k, 0), top_index)
    return base * math.exp(k * step)


def is_gff_class(block: np.ndarray, tol: float = GFF_CLASS_TOL,
                 abs_tol: float = 0.0) -> bool:
    """Diagonally dominant with non-positive off-diagonal entries (within
    relative tolerance, or the absolute floor for numerically-zero matrices)."""
    if block.size == 0:
        return True
    cut = max(tol * np.abs(block).max(), abs_tol, 1e-300)
    off = block - np.diag(np.diag(block))
    return off.max(initial=0.0) <= cut and block.sum(axis=1).min() >= -cut


def gff_relation_eps(q: SupportedMatrix, q2: SupportedMatrix,
                     zero_tol: float = 0.0) -> float:
    """Smallest eps for which the element-wise relation holds between two
    matrices of the dd/M-matrix class: every off-diagonal magnitude and every
    row sum within a factor e^(+-eps). Returns inf if a zero pairs with a
    nonzero (beyond zero_tol)."""
    if q.support != q2.support:
        return math.inf
    k = len(q.support)
    worst = 0.0
    pairs = []
    a, b = q.block, q2.block
    for i in range(k):
        for j in range(i + 1, k):
            pairs.append((abs(a[i, j]), abs(b[i, j])))
    rs_a, rs_b = a.sum(axis=1), b.sum(axis=1)
    for i in range(k):
        pairs.append((rs_a[i], rs_b[i]))
    for x, y in pairs:
        x = 0.0 if abs(x) <= zero_tol else x
        y = 0.0 if abs(y) <= zero_tol else y
        if x == 0.0 and y == 0.0:
            continue
        if x <= 0.0 or y <= 0.0:
            return math.inf
        worst = max(worst, abs(math.log(y / x)))
    return worst


@dataclass(frozen=True)
class GffRounder:
    """Element-wise rounding onto the geometric grid {0} u {c_l e^(k eps)}.

    ``range_factor`` widens the runtime containment check (values must lie in
    [c_l, c_h] up to rounding slack); the DP passes the accumulated drift
    allowance, the public contract keeps the tight default.
    """

    c_l: float
    c_h: float
    eps: float
    range_factor: float = 1.0

    @classmethod
    def for_model(cls, gff, eps: float, range_factor: float = 1.0) -> "GffRounder":
        resistances = [r for _, _, r in gff.edges]
        max_c = 1.0 / min(resistances)          # largest |Lambda_ij|
        min_c = 1.0 / max(resistances)          # smallest nonzero |Lambda_ij|
        c_l = min_c ** 2 / (gff.n * max_c)
        # Row sums are conductances to a *contracted set* (observed plus pin),
        # which reach the total incident conductance: a star center with all
        # leaves observed has row sum (n-1)*max_c, above the pairwise ceiling
        # n*max_c/2. Use the total-graph-conductance ceiling instead; every
        # pairwise or set conductance is at most the sum of all edge
        # conductances, which is below n^2 * max_c / 2.
        c_h = gff.n ** 2 * max_c / 2.0
        return cls(c_l=c_l, c_h=c_h, eps=eps, range_factor=range_factor)

    @property
    def top_index(self) -> int:
        return int(math.floor(math.log(self.c_h / self.c_l) / self.eps))

    @property
    def zero_tol(self) -> float:
        # numerically-zero band: well below the legitimate value range, well
        # above float round-off accumulated at the c_h scale
        return min(0.5 * self.c_l * math.exp(-self.eps / 2.0) / self.range_factor,
                   1e-10 * self.c_h)

    def snap(self, value: float) -> float:
        if abs(value) <= self.zero_tol:
            return 0.0
        lo = self.c_l * math.exp(-self.eps / 2.0) * (1.0 - RANGE_SLACK) / self.range_factor
        hi = self.c_h * math.exp(self.eps / 2.0) * (1.0 + RANGE_SLACK) * self.range_factor
        if not lo <= value <= hi:
            raise OutOfGridRange(
                f"value {value!r} outside [{lo:.6e}, {hi:.6e}] "
                f"(grid [{self.c_l:.6e}, {self.c_h:.6e}], eps={self.eps:.3e})")
        return log_grid_snap(value, self.c_l, self.eps, self.top_index)

    def round(self, p: SupportedMatrix) -> SupportedMatrix:
        if not p.support:
            return p
        if not is_gff_class(p.block, abs_tol=self.zero_tol):
            raise InvariantViolation(
                "matrix outside the diagonally-dominant M-matrix class")
        k = len(p.support)
        out = np.zeros((k, k))
        row_sums = p.block.sum(axis=1)
        for i in range(k):
            for j in range(i + 1, k):
                mag = self.snap(abs(p.block[i, j]))
                out[i, j] = out[j, i] = -mag
        for i in range(k):
            out[i, i] = self.snap(row_sums[i]) + np.abs(out[i]).sum() - abs(out[i, i])
        return SupportedMatrix(p.ambient_dim, p.support, out)

    def in_net(self, p: SupportedMatrix) -> bool:
        rounded = self.round(p)
        return np.array_equal(rounded.block, p.block)


def canonical_ray(z: np.ndarray, pitch: float) -> np.ndarray:
    """Deterministic unit representative of the line through z: scale so the
    largest-magnitude coordinate is exactly 1, quantize the rest at ``pitch``
    (ties toward -inf), clip to [-1, 1], renormalize. Idempotent on its image
    up to a global sign."""
    m = int(np.argmax(np.abs(z)))
    y = z / z[m]
    q = pitch * np.ceil(y / pitch - 0.5)
    q = np.clip(q, -1.0, 1.0)
    q[m] = 1.0
    return q / np.linalg.norm(q)


def ordered_gram_schmidt(columns: np.ndarray) -> np.ndarray:
    out = columns.copy()
    k = out.shape[1]
    for i in range(k):
        for j in range(i):
            out[:, i] -= (out[:, j] @ out[:, i]) * out[:, j]
        norm = np.linalg.norm(out[:, i])
        if norm < 1e-12:
            raise InvariantViolation("Gram-Schmidt collapsed a column")
        out[:, i] /= norm
    return out


@dataclass(frozen=True)
class SvdRounder:
    """Eigendecomposition-based rounding: eigenvalues onto the geometric grid
    anchored at lambda_min(Lambda)/m, eigenvector columns onto the canonical
    sphere net, Gram-Schmidt in column order."""

    lam_lo: float   # lambda_min(Lambda) / m
    lam_hi: float   # lambda_max(Lambda)
    eps: float
    range_factor: float = 1.0

    @classmethod
    def for_system(cls, lam_min: float, lam_max: float, m: int, eps: float,
                   range_factor: float = 1.0) -> "SvdRounder":
        return cls(lam_lo=lam_min / m, lam_hi=lam_max, eps=eps,
                   range_factor=range_factor)

    @property
    def top_index(self) -> int:
        return int(math.floor(math.log(self.lam_hi / self.lam_lo) / (self.eps / 2.0)))

    def eps1(self, k: int) -> float:
        nominal = (self.lam_lo / self.lam_hi) ** 2 * self.eps ** 2 / (1e4 * k ** 3)
        return min(nominal, 1.0 / (k * (4.0 * math.sqrt(2.0) + 4.0)))

    def snap_eig(self, value: float) -> float:
        lo = (self.lam_lo * math.exp(-self.eps / 2.0) * (1.0 - RANGE_SLACK)
              / self.range_factor - RANGE_SLACK * self.lam_hi)
        hi = self.lam_hi * math.exp(self.eps / 2.0) * (1.0 + RANGE_SLACK) * self.range_factor
        if not lo <= value <= hi:
            raise EigenvalueOutOfRange(
                f"eigenvalue {value!r} outside [{self.lam_lo:.6e}, {self.lam_hi:.6e}]")
        return log_grid_snap(max(value, self.lam_lo), self.lam_lo, self.eps / 2.0,
                             self.top_index)

    def round(self, p: SupportedMatrix) -> SupportedMatrix:
        if not p.support:
            return p
        k = len(p.support)
        w, u = np.linalg.eigh(p.block)
        if w[0] <= 1e-12 * max(w[-1], 0.0):
            raise RankDeficient(
                f"matrix on {p.support} has eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}]")
        d = np.array([self.snap_eig(x) for x in w])
        pitch = self.eps1(k) / math.sqrt(k)
        cols = np.column_stack([canonical_ray(u[:, i], pitch) for i in range(k)])
        u2 = ordered_gram_schmidt(cols)
        out = (u2 * d) @ u2.T
        return SupportedMatrix(p.ambient_dim, p.support, 0.5 * (out + out.T))


def gff_round(p: SupportedMatrix, eps: float,
              conductance_range: tuple[float, float]) -> SupportedMatrix:
    """Function form of the element-wise rounding; range = (c_l, c_h)."""
    c_l, c_h = conductance_range
    return GffRounder(c_l=c_l, c_h=c_h, eps=eps).round(p)


def svd_round(p: SupportedMatrix, eps: float,
              eig_range: tuple[float, float]) -> SupportedMatrix:
    """Function form of the eigendecomposition rounding;
    range = (lambda_min(Lambda)/m, lambda_max(Lambda))."""
    lo, hi = eig_range
    return SvdRounder(lam_lo=lo, lam_hi=hi, eps=eps).round(p)
