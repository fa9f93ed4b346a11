"""Exact sparse linear algebra over the integers.

Everything here is unbounded-integer arithmetic; no floating point. The
Smith normal form picks pivots by minimal absolute value and reduces with
nearest-quotient remainders to control entry growth. For large blocks the
pivot search runs on a mod-p shadow of the matrix so that candidate
scanning stays cheap even when entries are huge; the shadow only guides
choices and every actual elimination is exact.
"""

from __future__ import annotations

__all__ = [
    "SparseInt",
    "SNFResult",
    "xgcd",
    "smith_normal_form",
    "invariant_factors",
    "rank",
    "kernel_basis",
    "solve_int",
]

_SHADOW_PRIME = (1 << 61) - 1


def xgcd(a, b):
    """Extended gcd: returns (g, x, y) with a*x + b*y = g and g >= 0."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


class SparseInt:
    """Sparse integer matrix with synchronized row and column indexes.

    Mutating helpers keep both views consistent; elimination code relies on
    being able to enumerate the nonzeros of a row or a column in O(size).
    """

    __slots__ = ("nrows", "ncols", "row", "col")

    def __init__(self, nrows, ncols, entries=None):
        self.nrows = nrows
        self.ncols = ncols
        self.row = [dict() for _ in range(nrows)]
        self.col = [dict() for _ in range(ncols)]
        if entries:
            for (i, j), v in entries.items():
                self.set(i, j, v)

    @classmethod
    def identity(cls, n):
        m = cls(n, n)
        for i in range(n):
            m.set(i, i, 1)
        return m

    @classmethod
    def from_dense(cls, rows):
        m = cls(len(rows), len(rows[0]) if rows else 0)
        for i, r in enumerate(rows):
            for j, v in enumerate(r):
                if v:
                    m.set(i, j, v)
        return m

    def to_dense(self):
        out = [[0] * self.ncols for _ in range(self.nrows)]
        for i, r in enumerate(self.row):
            for j, v in r.items():
                out[i][j] = v
        return out

    def copy(self):
        m = SparseInt(self.nrows, self.ncols)
        for i, r in enumerate(self.row):
            for j, v in r.items():
                m.row[i][j] = v
                m.col[j][i] = v
        return m

    def get(self, i, j):
        return self.row[i].get(j, 0)

    def set(self, i, j, v):
        if v:
            self.row[i][j] = v
            self.col[j][i] = v
        else:
            self.row[i].pop(j, None)
            self.col[j].pop(i, None)

    def add(self, i, j, dv):
        if dv:
            self.set(i, j, self.row[i].get(j, 0) + dv)

    @property
    def nnz(self):
        return sum(len(r) for r in self.row)

    def entries(self):
        for i, r in enumerate(self.row):
            for j, v in r.items():
                yield i, j, v

    # -- elementary operations -------------------------------------------

    def add_row(self, i, j, c):
        """row i += c * row j."""
        if not c or i == j:
            if i == j and c:
                raise ValueError("add_row with i == j")
            return
        for k, v in list(self.row[j].items()):
            self.add(i, k, c * v)

    def add_col(self, j, i, c):
        """col j += c * col i."""
        if not c or i == j:
            if i == j and c:
                raise ValueError("add_col with i == j")
            return
        for k, v in list(self.col[i].items()):
            self.add(k, j, c * v)

    def swap_rows(self, i, j):
        if i == j:
            return
        ri, rj = self.row[i], self.row[j]
        for k in set(ri) | set(rj):
            vi, vj = ri.get(k, 0), rj.get(k, 0)
            self.set(i, k, vj)
            self.set(j, k, vi)

    def swap_cols(self, i, j):
        if i == j:
            return
        ci, cj = self.col[i], self.col[j]
        for k in set(ci) | set(cj):
            vi, vj = ci.get(k, 0), cj.get(k, 0)
            self.set(k, i, vj)
            self.set(k, j, vi)

    def zero_row(self, i):
        for j in list(self.row[i]):
            del self.col[j][i]
        self.row[i].clear()

    def zero_col(self, j):
        for i in list(self.col[j]):
            del self.row[i][j]
        self.col[j].clear()

    def submatrix(self, rows, cols):
        """New matrix from the given row and column index sequences."""
        rows = list(rows)
        cols = list(cols)
        colmap = {old: new for new, old in enumerate(cols)}
        out = SparseInt(len(rows), len(cols))
        for new_i, old_i in enumerate(rows):
            for old_j, v in self.row[old_i].items():
                new_j = colmap.get(old_j)
                if new_j is not None:
                    out.row[new_i][new_j] = v
                    out.col[new_j][new_i] = v
        return out

    def scale_row(self, i, c):
        for k, v in list(self.row[i].items()):
            self.set(i, k, c * v)

    def scale_col(self, j, c):
        for k, v in list(self.col[j].items()):
            self.set(k, j, c * v)

    def two_by_two_rows(self, i, j, a, b, c, d):
        """(row i, row j) <- (a*row i + b*row j, c*row i + d*row j)."""
        ri = dict(self.row[i])
        rj = dict(self.row[j])
        for k in set(ri) | set(rj):
            vi, vj = ri.get(k, 0), rj.get(k, 0)
            self.set(i, k, a * vi + b * vj)
            self.set(j, k, c * vi + d * vj)

    def two_by_two_cols(self, i, j, a, b, c, d):
        """(col i, col j) <- (a*col i + c*col j, b*col i + d*col j).

        Matches right-multiplication by the matrix [[a, b], [c, d]] placed
        on columns (i, j).
        """
        ci = dict(self.col[i])
        cj = dict(self.col[j])
        for k in set(ci) | set(cj):
            vi, vj = ci.get(k, 0), cj.get(k, 0)
            self.set(k, i, a * vi + c * vj)
            self.set(k, j, b * vi + d * vj)

    # -- algebra ----------------------------------------------------------

    def matvec(self, v):
        """Matrix times sparse vector (dict col -> value)."""
        out = {}
        for j, x in v.items():
            if not x:
                continue
            for i, a in self.col[j].items():
                out[i] = out.get(i, 0) + a * x
        return {i: x for i, x in out.items() if x}

    def rmatvec(self, v):
        """Sparse row vector (dict row -> value) times matrix."""
        out = {}
        for i, x in v.items():
            if not x:
                continue
            for j, a in self.row[i].items():
                out[j] = out.get(j, 0) + x * a
        return {j: x for j, x in out.items() if x}

    def matmul(self, other):
        if self.ncols != other.nrows:
            raise ValueError("shape mismatch")
        out = SparseInt(self.nrows, other.ncols)
        for i, r in enumerate(self.row):
            acc = {}
            for k, a in r.items():
                for j, b in other.row[k].items():
                    acc[j] = acc.get(j, 0) + a * b
            for j, v in acc.items():
                if v:
                    out.row[i][j] = v
                    out.col[j][i] = v
        return out

    def transpose(self):
        out = SparseInt(self.ncols, self.nrows)
        for i, r in enumerate(self.row):
            for j, v in r.items():
                out.row[j][i] = v
                out.col[i][j] = v
        return out

    def column(self, j):
        return dict(self.col[j])

    def is_zero(self):
        return all(not r for r in self.row)

    def __eq__(self, other):
        if not isinstance(other, SparseInt):
            return NotImplemented
        return (self.nrows, self.ncols) == (other.nrows, other.ncols) and \
            self.row == other.row

    def __repr__(self):
        return "SparseInt(%dx%d, nnz=%d)" % (self.nrows, self.ncols, self.nnz)


def _nearest_div(v, p):
    """Quotient q minimizing |v - q*p|."""
    q, r = divmod(v, p)
    if 2 * abs(r) > abs(p):
        q += 1
    return q


class SNFResult:
    """D = U * A * V with U, V unimodular and D in Smith normal form.

    ``uinv`` and ``vinv`` are the inverses of U and V, tracked during the
    reduction so that downstream presentation arithmetic never has to
    invert anything.
    """

    __slots__ = ("d", "u", "v", "uinv", "vinv", "rank")

    def __init__(self, d, u, v, uinv, vinv, rank_):
        self.d = d
        self.u = u
        self.v = v
        self.uinv = uinv
        self.vinv = vinv
        self.rank = rank_

    def diagonal(self):
        return [self.d.get(k, k) for k in range(self.rank)]


class _Shadow:
    """Mod-p mirror of the working matrix, used only to pick pivots."""

    __slots__ = ("row", "col")

    def __init__(self, m):
        self.row = [dict() for _ in range(m.nrows)]
        self.col = [dict() for _ in range(m.ncols)]
        for i, j, v in m.entries():
            w = v % _SHADOW_PRIME
            self.row[i][j] = w
            self.col[j][i] = w


def smith_normal_form(a, transforms=True, shadow_threshold=64):
    """Smith normal form of a SparseInt.

    Pivots are chosen by minimal absolute value; when the active block is
    larger than ``shadow_threshold`` on both sides, candidate scanning runs
    on a mod-p shadow so huge entries never slow down the search. Returns
    an SNFResult (with identity transforms left untracked if
    ``transforms`` is false).
    """
    d = a.copy()
    r, c = d.nrows, d.ncols
    if transforms:
        u = SparseInt.identity(r)
        uinv = SparseInt.identity(r)
        v = SparseInt.identity(c)
        vinv = SparseInt.identity(c)
    else:
        u = uinv = v = vinv = None

    use_shadow = min(r, c) > shadow_threshold
    shadow = _Shadow(d) if use_shadow else None

    def sset(i, j, val):
        if shadow is None:
            return
        w = val % _SHADOW_PRIME
        if w:
            shadow.row[i][j] = w
            shadow.col[j][i] = w
        else:
            shadow.row[i].pop(j, None)
            shadow.col[j].pop(i, None)

    def row_op(i, j, q):
        # row i += q * row j
        for k, val in list(d.row[j].items()):
            d.add(i, k, q * val)
            sset(i, k, d.get(i, k))
        if transforms:
            u.add_row(i, j, q)
            uinv.add_col(j, i, -q)

    def col_op(j, i, q):
        # col j += q * col i
        for k, val in list(d.col[i].items()):
            d.add(k, j, q * val)
            sset(k, j, d.get(k, j))
        if transforms:
            v.add_col(j, i, q)
            vinv.add_row(i, j, -q)

    def swap_rows(i, j):
        if i == j:
            return
        d.swap_rows(i, j)
        if shadow is not None:
            ri, rj = shadow.row[i], shadow.row[j]
            for k in set(ri) | set(rj):
                vi, vj = ri.get(k, 0), rj.get(k, 0)
                sset_raw(i, k, vj)
                sset_raw(j, k, vi)
        if transforms:
            u.swap_rows(i, j)
            uinv.swap_cols(i, j)

    def sset_raw(i, j, w):
        if w:
            shadow.row[i][j] = w
            shadow.col[j][i] = w
        else:
            shadow.row[i].pop(j, None)
            shadow.col[j].pop(i, None)

    def swap_cols(i, j):
        if i == j:
            return
        d.swap_cols(i, j)
        if shadow is not None:
            ci, cj = shadow.col[i], shadow.col[j]
            for k in set(ci) | set(cj):
                vi, vj = ci.get(k, 0), cj.get(k, 0)
                if vj:
                    shadow.col[i][k] = vj
                    shadow.row[k][i] = vj
                else:
                    shadow.col[i].pop(k, None)
                    shadow.row[k].pop(i, None)
                if vi:
                    shadow.col[j][k] = vi
                    shadow.row[k][j] = vi
                else:
                    shadow.col[j].pop(k, None)
                    shadow.row[k].pop(j, None)
        if transforms:
            v.swap_cols(i, j)
            vinv.swap_rows(i, j)

    def negate_row(i):
        d.scale_row(i, -1)
        if shadow is not None:
            for k in list(shadow.row[i]):
                sset_raw(i, k, (-shadow.row[i][k]) % _SHADOW_PRIME)
        if transforms:
            u.scale_row(i, -1)
            uinv.scale_col(i, -1)

    def pick_pivot(t):
        best = None
        if shadow is not None:
            for i in range(t, r):
                for j, w in shadow.row[i].items():
                    if j < t:
                        continue
                    val = d.get(i, j)
                    if not val:
                        continue
                    key = abs(val)
                    if best is None or key < best[0]:
                        best = (key, i, j)
                        if key == 1:
                            return (i, j)
            if best is not None:
                return (best[1], best[2])
            # shadow may hide entries divisible by the prime
        for i in range(t, r):
            for j, val in d.row[i].items():
                if j < t or not val:
                    continue
                key = abs(val)
                if best is None or key < best[0]:
                    best = (key, i, j)
                    if key == 1:
                        return (i, j)
        return None if best is None else (best[1], best[2])

    t = 0
    while t < min(r, c):
        piv = pick_pivot(t)
        if piv is None:
            break
        swap_rows(t, piv[0])
        swap_cols(t, piv[1])
        while True:
            p = d.get(t, t)
            # clear below
            touched = False
            for i in [i for i in d.col[t] if i > t]:
                val = d.get(i, t)
                if not val:
                    continue
                q = _nearest_div(val, p)
                if q:
                    row_op(i, t, -q)
                    touched = True
            resid = [(abs(d.get(i, t)), i) for i in d.col[t]
                     if i > t and d.get(i, t)]
            if resid:
                swap_rows(t, min(resid)[1])
                continue
            # clear to the right
            p = d.get(t, t)
            for j in [j for j in d.row[t] if j > t]:
                val = d.get(t, j)
                if not val:
                    continue
                q = _nearest_div(val, p)
                if q:
                    col_op(j, t, -q)
                    touched = True
            residc = [(abs(d.get(t, j)), j) for j in d.row[t]
                      if j > t and d.get(t, j)]
            if residc:
                swap_cols(t, min(residc)[1])
                continue
            # clearing the row can refill the column; loop until both clean
            if not any(i > t and d.get(i, t) for i in d.col[t]):
                break
        t += 1

    # divisibility chain
    for k in range(t):
        for l in range(k + 1, t):
            d1 = d.get(k, k)
            d2 = d.get(l, l)
            if d2 % d1 == 0:
                continue
            g, x, y = xgcd(d1, d2)
            m1, m2 = d1 // g, d2 // g
            # [[x, y], [-m2, m1]] * diag(d1, d2) * [[1, -y*m2], [1, x*m1]]
            # equals diag(g, lcm); both factors are unimodular
            if transforms:
                u.two_by_two_rows(k, l, x, y, -m2, m1)
                uinv.two_by_two_cols(k, l, m1, -y, m2, x)
                v.two_by_two_cols(k, l, 1, -y * m2, 1, x * m1)
                vinv.two_by_two_rows(k, l, x * m1, y * m2, -1, 1)
            d.set(k, k, g)
            d.set(l, l, d1 * m2)

    for k in range(t):
        if d.get(k, k) < 0:
            negate_row(k)

    return SNFResult(d, u, v, uinv, vinv, t)


def invariant_factors(a, shadow_threshold=64):
    """Nonzero diagonal of the Smith form, in divisibility order."""
    res = smith_normal_form(a, transforms=False,
                            shadow_threshold=shadow_threshold)
    return res.diagonal()


def rank(a):
    return smith_normal_form(a, transforms=False).rank


def kernel_basis(a):
    """Columns spanning the integer kernel of ``a`` (a saturated, hence
    full, sublattice basis). Returns a (ncols x k) SparseInt."""
    res = smith_normal_form(a)
    k = a.ncols - res.rank
    out = SparseInt(a.ncols, k)
    for idx in range(k):
        j = res.rank + idx
        for i, val in res.v.col[j].items():
            out.set(i, idx, val)
    return out


def solve_int(a, b):
    """Solve a * X = b over the integers; b is a SparseInt with matching
    row count. Returns X or None when no integral solution exists."""
    if a.nrows != b.nrows:
        raise ValueError("shape mismatch")
    res = smith_normal_form(a)
    ub = res.u.matmul(b)
    y = SparseInt(a.ncols, b.ncols)
    for i in range(ub.nrows):
        for j, val in ub.row[i].items():
            if i >= res.rank:
                return None
            dk = res.d.get(i, i)
            q, rem = divmod(val, dk)
            if rem:
                return None
            y.set(i, j, q)
    return res.v.matmul(y)
