"""Self-contained numerical kernel.

Dense symmetric eigendecomposition (cyclic Jacobi with parallel round-robin
ordering), constrained generalized inverse, greedy pivot selection for
nonsingular principal submatrices, adaptive Gauss-Kronrod quadrature, a
bisection root finder, the special functions needed for calibration
(logit/logistic, regularized incomplete beta and gamma, standard normal CDF),
and a seedable counter-based random source.

Everything here is pure: inputs are never mutated and identical inputs give
bitwise-identical outputs.  The only stateful object is RandomSource, which
is single-owner by convention (one stream per task).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketingError, NumericalError, RankDeficiencyError, ValidationError

__all__ = [
    "EigenDecomposition",
    "RandomSource",
    "constrained_geninv",
    "eigen_sym",
    "find_root",
    "inc_beta",
    "inc_gamma_upper",
    "integrate",
    "logistic",
    "logit",
    "nonsingular_subset",
    "norm_cdf",
    "rank_from_eigenvalues",
    "symmetrize",
]

# Relative eigenvalue threshold below which a direction counts as null space.
NULL_SPACE_RTOL = 1e-10


def symmetrize(m: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Validate that ``m`` is square and symmetric within ``rtol`` (relative
    to its largest entry) and return the exactly symmetric average."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise ValidationError("matrix dimension must be >= 1")
    scale = np.abs(m).max()
    asym = np.abs(m - m.T).max()
    if scale > 0 and asym > rtol * scale:
        raise ValidationError(
            f"matrix is not symmetric: max|M - M^T| = {asym:.3e} exceeds "
            f"{rtol:.1e} * max|M| = {rtol * scale:.3e}"
        )
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (descending) and orthonormal eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def _round_robin_rounds(n: int) -> list[np.ndarray]:
    """Tournament schedule: n-1 (or n) rounds of disjoint index pairs that
    together cover every pair (p, q), p < q, exactly once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                pairs.append((a, b) if a < b else (b, a))
        rounds.append(np.asarray(pairs, dtype=np.intp))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def eigen_sym(m: np.ndarray, tol: float = 1e-13, max_sweeps: int = 50) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi
    rotations.

    One sweep visits every off-diagonal pair once, scheduled in round-robin
    rounds of disjoint pairs so each round is applied as a batched orthogonal
    update.  Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol`` times the matrix norm.  Rotations with pivots below
    ``1e-14 * ||M||_F / n`` are skipped; they only churn rounding noise.
    """
    a = symmetrize(m)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return EigenDecomposition(values=np.diag(a).copy(), vectors=v)
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return EigenDecomposition(values=np.zeros(n), vectors=v)
    target = (tol * norm) ** 2
    skip = 1e-14 * norm / n
    rounds = _round_robin_rounds(n)
    for _ in range(max_sweeps):
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        if float((off * off).sum()) <= target:
            break
        for pairs in rounds:
            p = pairs[:, 0]
            q = pairs[:, 1]
            apq = a[p, q]
            active = np.abs(apq) > skip
            if not active.any():
                continue
            p = p[active]
            q = q[active]
            apq = apq[active]
            diff = a[q, q] - a[p, p]
            with np.errstate(over="ignore", invalid="ignore"):
                tau = diff / (2.0 * apq)
                t = np.sign(tau) / (np.abs(tau) + np.hypot(1.0, tau))
                t[tau == 0.0] = 1.0
                t[~np.isfinite(tau)] = 0.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cc = c[:, None]
            ss = s[:, None]
            rp = a[p, :]
            rq = a[q, :]
            a[p, :] = cc * rp - ss * rq
            a[q, :] = ss * rp + cc * rq
            cp = a[:, p].copy()
            cq = a[:, q].copy()
            a[:, p] = c * cp - s * cq
            a[:, q] = s * cp + c * cq
            vp = v[:, p].copy()
            vq = v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    else:
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        if float((off * off).sum()) > (100.0 * tol * norm) ** 2:
            raise NumericalError(
                f"Jacobi eigensolver did not converge in {max_sweeps} sweeps"
            )
    w = np.diag(a).copy()
    order = np.argsort(w)[::-1]
    return EigenDecomposition(values=w[order], vectors=v[:, order])


def rank_from_eigenvalues(values: np.ndarray, rtol: float = NULL_SPACE_RTOL) -> int:
    """Numerical rank: eigenvalues below ``rtol`` times the largest magnitude
    count as zero."""
    values = np.asarray(values, dtype=float)
    scale = np.abs(values).max() if values.size else 0.0
    if scale == 0.0:
        return 0
    return int((np.abs(values) > rtol * scale).sum())


def constrained_geninv(q: np.ndarray, constraints: np.ndarray | None = None) -> np.ndarray:
    """Generalized inverse of a PSD matrix restricted to the subspace
    orthogonal to the given constraint rows.

    The constraint rows must span the null space of ``q`` (they may also cut
    further); the result annihilates every constraint row.  Raises
    RankDeficiencyError when the restriction of ``q`` is still singular,
    i.e. the constraints do not cover its null space.
    """
    q = symmetrize(q)
    m = q.shape[0]
    if constraints is None:
        cons = np.zeros((0, m))
    else:
        cons = np.atleast_2d(np.asarray(constraints, dtype=float))
        if cons.size == 0:
            cons = np.zeros((0, m))
        elif cons.shape[1] != m:
            raise ValidationError(
                f"constraint rows have length {cons.shape[1]}, expected {m}"
            )
    basis = _orthonormal_rows(cons)
    comp = _complement_basis(basis, m)
    if comp.shape[1] == 0:
        return np.zeros((m, m))
    reduced = comp.T @ q @ comp
    eig = eigen_sym(reduced)
    vals = eig.values
    top = vals.max() if vals.size else 0.0
    if top <= 0.0 or vals.min() <= NULL_SPACE_RTOL * top:
        raise RankDeficiencyError(
            "constraints do not span the null space of the structure matrix"
        )
    inv_reduced = (eig.vectors / vals) @ eig.vectors.T
    out = comp @ inv_reduced @ comp.T
    return 0.5 * (out + out.T)


def _orthonormal_rows(rows: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormalize rows by modified Gram-Schmidt, dropping dependent ones."""
    kept: list[np.ndarray] = []
    for r in rows:
        w = r.astype(float).copy()
        for b in kept:
            w -= (b @ w) * b
        for b in kept:  # second pass for numerical safety
            w -= (b @ w) * b
        norm = float(np.linalg.norm(w))
        if norm > tol * max(1.0, float(np.linalg.norm(r))):
            kept.append(w / norm)
    return np.array(kept) if kept else np.zeros((0, rows.shape[1] if rows.ndim == 2 else 0))


def _complement_basis(rows: np.ndarray, m: int) -> np.ndarray:
    """Columns spanning the orthogonal complement of the given orthonormal rows."""
    want = m - rows.shape[0]
    cols: list[np.ndarray] = []
    for i in range(m):
        if len(cols) == want:
            break
        w = np.zeros(m)
        w[i] = 1.0
        for _ in range(2):
            for r in rows:
                w -= (r @ w) * r
            for b in cols:
                w -= (b @ w) * b
        norm = float(np.linalg.norm(w))
        if norm > 1e-8:
            cols.append(w / norm)
    if len(cols) != want:
        raise NumericalError("failed to build a complement basis for the constraints")
    return np.column_stack(cols) if cols else np.zeros((m, 0))


def nonsingular_subset(m: np.ndarray, rtol: float = NULL_SPACE_RTOL) -> np.ndarray:
    """Indices of a maximal principal submatrix of the PSD matrix ``m`` that
    is numerically nonsingular, chosen by greedy pivoted Cholesky.

    Pivots stop once the largest remaining Schur-complement diagonal drops
    below ``rtol`` times the largest initial diagonal.
    """
    m = symmetrize(m)
    size = m.shape[0]
    d = np.diag(m).astype(float).copy()
    top = d.max(initial=0.0)
    if top <= 0.0:
        return np.zeros(0, dtype=int)
    thresh = rtol * top
    low = np.zeros((size, 0))
    chosen: list[int] = []
    taken = np.zeros(size, dtype=bool)
    while True:
        d_masked = np.where(taken, -np.inf, d)
        j = int(np.argmax(d_masked))
        if d_masked[j] <= thresh:
            break
        col = m[:, j] - low @ low[j, :]
        col = col / math.sqrt(d[j])
        low = np.column_stack([low, col])
        d = d - col * col
        taken[j] = True
        chosen.append(j)
        if len(chosen) == size:
            break
    return np.array(sorted(chosen), dtype=int)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

# 15-point Kronrod extension of 7-point Gauss (positive half, QUADPACK qk15).
_XGK = np.array([
    0.9914553711208126392069, 0.9491079123427585245262,
    0.8648644233597690727897, 0.7415311855993944398639,
    0.5860872354676911302941, 0.4058451513773971669066,
    0.2077849550078984676007, 0.0,
])
_WGK = np.array([
    0.0229353220105292249637, 0.0630920926299785532907,
    0.1047900103222501838399, 0.1406532597155259187452,
    0.1690047266392679028266, 0.1903505780647854099133,
    0.2044329400752988924142, 0.2094821410847278280130,
])
_WG = np.array([
    0.1294849661688696932706, 0.2797053914892766679015,
    0.3818300505051189449504, 0.4179591836734693877551,
])


def _kronrod_panel(f, a: float, b: float) -> tuple[float, float]:
    """(K15 estimate, |K15 - G7| error proxy) on one panel."""
    h = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    fk = 0.0
    fg = 0.0
    for i in range(7):
        x = h * _XGK[i]
        y1 = f(mid - x)
        y2 = f(mid + x)
        fk += _WGK[i] * (y1 + y2)
        if i % 2 == 1:
            fg += _WG[i // 2] * (y1 + y2)
    fc = f(mid)
    fk += _WGK[7] * fc
    fg += _WG[3] * fc
    k15 = fk * h
    g7 = fg * h
    return k15, abs(k15 - g7)


def integrate(f, a: float, b: float, tol: float = 1e-10, max_panels: int = 4096) -> float:
    """Adaptive Gauss-Kronrod quadrature with absolute tolerance ``tol``.

    ``b`` may be ``math.inf``; the tail is folded onto (0, 1) with the
    substitution x = a + u/(1-u).  Integrable endpoint singularities must be
    handled by the caller with a suitable substitution (the split-prior
    module maps densities onto the distance scale before integrating).
    """
    if not (a <= b):
        raise ValidationError(f"integration bounds must satisfy a <= b, got ({a}, {b})")
    if a == b:
        return 0.0
    if math.isinf(b):
        if math.isinf(a):
            raise ValidationError("doubly infinite ranges are not supported")
        g = f

        def folded(u: float) -> float:
            if u >= 1.0:
                return 0.0
            w = 1.0 - u
            return g(a + u / w) / (w * w)

        return integrate(folded, 0.0, 1.0, tol=tol, max_panels=max_panels)

    total, err = _kronrod_panel(f, a, b)
    panels = [(err, a, b, total)]
    n_splits = 0
    while sum(p[0] for p in panels) > tol:
        n_splits += 1
        if n_splits > max_panels:
            raise NumericalError(
                f"quadrature did not reach tol={tol:g} after {max_panels} subdivisions"
            )
        panels.sort(key=lambda p: p[0])
        worst = panels.pop()
        _, lo, hi, _ = worst
        mid = 0.5 * (lo + hi)
        left = _kronrod_panel(f, lo, mid)
        right = _kronrod_panel(f, mid, hi)
        panels.append((left[1], lo, mid, left[0]))
        panels.append((right[1], mid, hi, right[0]))
    return float(sum(p[3] for p in panels))


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------


def find_root(g, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Bisection on a bracketing interval: g(lo) and g(hi) must not share a
    strict sign.  Returns the midpoint of the final bracket, reproducibly."""
    if not (lo < hi):
        raise ValidationError(f"need lo < hi, got ({lo}, {hi})")
    flo = g(lo)
    fhi = g(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise BracketingError(
            f"no sign change on bracket ({lo:g}, {hi:g}): g(lo)={flo:g}, g(hi)={fhi:g}"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if (hi - lo) * 0.5 < tol:
            return mid
        fm = g(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo = mid
            flo = fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------


def logit(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValidationError(f"logit argument must be in (0, 1), got {p}")
    return math.log(p / (1.0 - p))


def logistic(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def norm_cdf(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _beta_cont_frac(a: float, b: float, x: float, max_iter: int = 500) -> float:
    """Lentz continued fraction for the regularized incomplete beta."""
    tiny = 1e-300
    eps = 3e-16
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise NumericalError(f"incomplete beta continued fraction stalled (a={a}, b={b}, x={x})")


def inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise ValidationError(f"incomplete beta needs a, b > 0, got ({a}, {b})")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _beta_cont_frac(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _beta_cont_frac(b, a, 1.0 - x) / b


def inc_gamma_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x); used for chi-square tails."""
    if a <= 0.0 or x < 0.0:
        raise ValidationError(f"inc_gamma_upper needs a > 0, x >= 0, got ({a}, {x})")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        # series for P(a, x), then complement
        term = 1.0 / a
        total = term
        ap = a
        for _ in range(1000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        else:
            raise NumericalError("incomplete gamma series stalled")
        p = total * math.exp(-x + a * math.log(x) - math.lgamma(a))
        return 1.0 - p
    # Lentz continued fraction for Q(a, x)
    tiny = 1e-300
    b0 = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b0
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b0 += 2.0
        d = an * d + b0
        if abs(d) < tiny:
            d = tiny
        c = b0 + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:
        raise NumericalError("incomplete gamma continued fraction stalled")
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


# ---------------------------------------------------------------------------
# random source
# ---------------------------------------------------------------------------


@dataclass
class RandomSource:
    """Seedable counter-based random stream (Philox 4x64).

    The 128-bit Philox key is ``seed | (stream << 64)``, so a given
    (seed, stream) pair produces the same draws on every platform.  Use
    :meth:`substream` to derive independent streams for parallel tasks;
    never share one instance between tasks.
    """

    seed: int
    stream: int = 0
    algorithm: str = field(default="philox4x64", init=False)

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if not 0 <= int(self.stream) < 2**64:
            raise ValidationError("stream must be a 64-bit unsigned integer")
        self._gen = np.random.Generator(
            np.random.Philox(key=int(self.seed) | (int(self.stream) << 64))
        )

    def substream(self, index: int) -> "RandomSource":
        """Independent stream derived from the same seed; index >= 0."""
        return RandomSource(seed=self.seed, stream=index + 1)

    def uniform(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def gamma(self, shape: float, n: int) -> np.ndarray:
        return self._gen.gamma(shape, size=n)
