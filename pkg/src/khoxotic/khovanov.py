"""Khovanov homology over the integers.

The chain complex is the cube of resolutions of an oriented diagram with
coefficients in the rank-two Frobenius algebra V = Z<1, X>:

    m(1,1) = 1    m(1,X) = m(X,1) = X    m(X,X) = 0
    delta(1) = 1*X + X*1                 delta(X) = X*X

Gradings: i = |v| - n_minus and j = deg + |v| + n_plus - 2*n_minus, where
|v| counts the 1-resolutions of the cube vertex v and deg sums +1 per
circle labeled 1 and -1 per circle labeled X.  Edge signs alternate by the
parity of 1-entries before the changed coordinate, crossings in input
order.  Circles of a resolution are ordered by their smallest arc label
(crossingless input circles carry negative sentinel labels), which keeps
every basis reproducible across runs.

Homology groups are presented, not just measured: each bidegree keeps a
saturated basis of cycles and the unimodular change of basis splitting off
the boundary lattice, so integer classes can be written in coordinates and
integer functionals evaluated on them exactly.

The rational deformation used for filtration degrees adds the corrections
m(X,X) = 1 and delta(X) += 1*1, each raising the quantum grading by four.
All of its arithmetic is still integral; rationality only enters through
rank arguments, which are computed exactly.
"""

from __future__ import annotations

import heapq
import itertools
from collections import namedtuple

from .linalg import SparseInt, kernel_basis, smith_normal_form, solve_int
from .link_core import Diagram, parse_pd, serialize

__all__ = [
    "CONVENTION_VERSION",
    "SmoothingState",
    "BigradedChainComplex",
    "LeeComplexQ",
    "ChainMapData",
    "BigradedGroup",
    "LeeCycle",
    "resolve_state",
    "build_complex",
    "simplify",
    "eliminate_pairs",
    "homology",
    "lee_complex",
    "lee_generator",
    "filtration_degree",
]

# Bump when any basis ordering or sign convention changes; cached results
# are keyed by it.
CONVENTION_VERSION = 1


class SmoothingState:
    """The circles of one full resolution of a diagram.

    ``circles`` is a tuple of sorted arc tuples; a crossingless input
    circle with id k appears as the single sentinel label -(k + 1), so its
    identity is stable across diagrams that share circle ids.  Circles are
    ordered by smallest label.
    """

    __slots__ = ("vertex", "circles", "keys", "arc_circle")

    def __init__(self, vertex, circles):
        self.vertex = vertex
        self.circles = circles
        self.keys = tuple(c[0] for c in circles)
        self.arc_circle = {}
        for idx, circle in enumerate(circles):
            for a in circle:
                if a > 0:
                    self.arc_circle[a] = idx

    def __len__(self):
        return len(self.circles)

    def __repr__(self):
        return "SmoothingState(v=%d, circles=%d)" % (self.vertex,
                                                     len(self.circles))


def resolve_state(diagram, vertex):
    """Circles of the resolution chosen by the bits of ``vertex``."""
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        if a not in parent:
            parent[a] = a
        if b not in parent:
            parent[b] = b
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for p, t in enumerate(diagram.crossings):
        if vertex >> p & 1:
            union(t[0], t[3])
            union(t[1], t[2])
        else:
            union(t[0], t[1])
            union(t[2], t[3])
    groups = {}
    for a in parent:
        groups.setdefault(find(a), []).append(a)
    circles = [tuple(sorted(g)) for g in groups.values()]
    for k in diagram.circles:
        circles.append((-(k + 1),))
    circles.sort(key=lambda c: c[0])
    return SmoothingState(vertex, tuple(circles))


def _normalize_window(window):
    """Accepts None or a pair (i_range, j_range), each None or (lo, hi)."""
    if window is None:
        return None, None, None, None
    try:
        irange, jrange = window
    except (TypeError, ValueError):
        raise ValueError("window must be a pair (i_range, j_range)")
    ilo = ihi = jlo = jhi = None
    if irange is not None:
        try:
            ilo, ihi = irange
        except (TypeError, ValueError):
            raise ValueError("i range must be None or (lo, hi)")
        if ilo > ihi:
            raise ValueError("empty homological window")
    if jrange is not None:
        try:
            jlo, jhi = jrange
        except (TypeError, ValueError):
            raise ValueError("j range must be None or (lo, hi)")
        if jlo > jhi:
            raise ValueError("empty quantum window")
    return ilo, ihi, jlo, jhi


class BigradedChainComplex:
    """Cube-of-resolutions chain complex with integer coefficients.

    ``gens[i]`` is the ordered basis of homological degree i, each entry a
    pair (vertex, labels) of bitmasks where a set label bit marks an X.
    ``qdeg[i]`` holds the parallel quantum degrees.  ``diff[i]`` maps
    degree i to i+1; entry (r, c) is the coefficient of target r in the
    image of source c.  ``valid`` is the inclusive range of homological
    degrees whose homology the stored layers determine (windowed builds
    carry one margin layer on each side).
    """

    lee = False

    def __init__(self, gens, qdeg, diff, n_plus, n_minus, valid=None,
                 diagram=None, states=None, window=None):
        self.gens = gens
        self.qdeg = qdeg
        self.diff = diff
        self.n_plus = n_plus
        self.n_minus = n_minus
        self.valid = valid
        self.diagram = diagram
        self.states = states
        self.window = window
        self.index = {
            i: {g: k for k, g in enumerate(layer)}
            for i, layer in gens.items()
        }

    def layers(self):
        return sorted(self.gens)

    def layer_size(self, i):
        return len(self.gens.get(i, ()))

    def total_generators(self):
        return sum(len(layer) for layer in self.gens.values())

    def state(self, vertex):
        if self.states is not None and vertex in self.states:
            return self.states[vertex]
        if self.diagram is None:
            raise ValueError("complex carries no diagram data")
        return resolve_state(self.diagram, vertex)

    def differential(self, i):
        """The matrix out of degree i, materialized even when empty."""
        m = self.diff.get(i)
        if m is not None:
            return m
        return SparseInt(self.layer_size(i + 1), self.layer_size(i))

    def valid_degrees(self):
        degrees = self.layers()
        if self.valid is None:
            return degrees
        lo, hi = self.valid
        return [i for i in degrees if lo <= i <= hi]

    def euler_characteristic(self):
        """Graded Euler characteristic as a dict j -> coefficient.

        Meaningful for unwindowed complexes, where it equals the graded
        Euler characteristic of homology.
        """
        out = {}
        for i, qs in self.qdeg.items():
            s = -1 if i & 1 else 1
            for j in qs:
                out[j] = out.get(j, 0) + s
        return {j: v for j, v in sorted(out.items()) if v}

    def validate(self):
        """Assert the structural invariants exactly."""
        for i, layer in self.gens.items():
            if len(self.qdeg[i]) != len(layer):
                raise AssertionError("qdeg length mismatch at degree %d" % i)
        for i, m in self.diff.items():
            if m.nrows != self.layer_size(i + 1) or \
                    m.ncols != self.layer_size(i):
                raise AssertionError("differential shape at degree %d" % i)
            qs, qt = self.qdeg[i], self.qdeg[i + 1]
            for r, c, _ in m.entries():
                dj = qt[r] - qs[c]
                ok = dj == 4 or dj == 0 if self.lee else dj == 0
                if not ok:
                    raise AssertionError(
                        "differential entry changes quantum degree by %d"
                        % dj)
        for i in self.diff:
            nxt = self.diff.get(i + 1)
            if nxt is not None and not nxt.matmul(self.diff[i]).is_zero():
                raise AssertionError("d o d != 0 at degree %d" % i)
        return True

    def to_json(self):
        layers = []
        for i in self.layers():
            layers.append([i, [[g[0], g[1]] for g in self.gens[i]],
                           list(self.qdeg[i])])
        diff = []
        for i in sorted(self.diff):
            diff.append([i, sorted((r, c, v)
                                   for r, c, v in self.diff[i].entries())])
        return {
            "format": "kh-complex/1",
            "convention": CONVENTION_VERSION,
            "lee": self.lee,
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "valid": list(self.valid) if self.valid is not None else None,
            "window": self.window,
            "diagram": serialize(self.diagram) if self.diagram else None,
            "layers": layers,
            "diff": diff,
        }

    @classmethod
    def from_json(cls, data):
        if data.get("format") != "kh-complex/1":
            raise ValueError("not a serialized chain complex")
        if data.get("convention") != CONVENTION_VERSION:
            raise ValueError("convention version mismatch")
        gens = {}
        qdeg = {}
        for i, layer, qs in data["layers"]:
            gens[i] = tuple((v, l) for v, l in layer)
            qdeg[i] = tuple(qs)
        diff = {}
        for i, entries in data["diff"]:
            m = SparseInt(len(gens.get(i + 1, ())), len(gens.get(i, ())))
            for r, c, v in entries:
                m.set(r, c, v)
            diff[i] = m
        diagram = parse_pd(data["diagram"]) if data.get("diagram") else None
        valid = tuple(data["valid"]) if data.get("valid") else None
        window = data.get("window")
        if window is not None:
            window = tuple(tuple(r) if r is not None else None
                           for r in window)
        out = LeeComplexQ if data.get("lee") else cls
        return out(gens, qdeg, diff, data["n_plus"], data["n_minus"],
                   valid=valid, diagram=diagram, window=window)

    def __repr__(self):
        return "%s(%d generators, degrees %s)" % (
            type(self).__name__, self.total_generators(),
            self.layers() or "[]")


class LeeComplexQ(BigradedChainComplex):
    """The deformed complex; ``qdeg`` is the quantum filtration.

    Entries are integers, viewed inside the rational complex; only the
    filtration arguments need rational coefficients and those reduce to
    exact integer rank computations.
    """

    lee = True


def _layer_labels(circle_count, base_j, jlo, jhi):
    """Label bitmasks for one vertex, ascending, restricted to the
    quantum window when one is given."""
    if jlo is None and jhi is None:
        return range(1 << circle_count)
    out = []
    for x_count in range(circle_count + 1):
        deg = circle_count - 2 * x_count
        j = base_j + deg
        if (jlo is not None and j < jlo) or (jhi is not None and j > jhi):
            continue
        if x_count == 0:
            out.append(0)
        else:
            for combo in itertools.combinations(range(circle_count),
                                                x_count):
                mask = 0
                for b in combo:
                    mask |= 1 << b
                out.append(mask)
    out.sort()
    return out


def _label_degree(labels, circle_count):
    return circle_count - 2 * bin(labels).count("1")


def _build(diagram, window, lee):
    n = len(diagram.crossings)
    nm, np_ = diagram.n_minus, diagram.n_plus
    ilo, ihi, jlo, jhi = _normalize_window(window)
    if lee and window is not None:
        raise ValueError("the deformed complex does not support windows")
    wlo = 0 if ilo is None else max(0, ilo - 1 + nm)
    whi = n if ihi is None else min(n, ihi + 1 + nm)

    states = {}
    gens = {}
    qdeg = {}
    for w in range(wlo, whi + 1):
        layer = []
        qs = []
        base_j = w + np_ - 2 * nm
        for combo in itertools.combinations(range(n), w):
            v = 0
            for p in combo:
                v |= 1 << p
            states[v] = resolve_state(diagram, v)
        for v in sorted(s for s in states
                        if bin(s).count("1") == w):
            c = len(states[v].circles)
            for labels in _layer_labels(c, base_j, jlo, jhi):
                layer.append((v, labels))
                qs.append(base_j + _label_degree(labels, c))
        i = w - nm
        gens[i] = tuple(layer)
        qdeg[i] = tuple(qs)

    index = {i: {g: k for k, g in enumerate(layer)}
             for i, layer in gens.items()}

    diff = {}
    for w in range(wlo, whi):
        i = w - nm
        src, tgt = gens[i], gens[i + 1]
        if not src or not tgt:
            continue
        mat = SparseInt(len(tgt), len(src))
        tgt_index = index[i + 1]
        pos = 0
        while pos < len(src):
            v = src[pos][0]
            end = pos
            while end < len(src) and src[end][0] == v:
                end += 1
            s_state = states[v]
            s_keys = s_state.keys
            for p in range(n):
                if v >> p & 1:
                    continue
                v2 = v | (1 << p)
                t_state = states[v2]
                sign = -1 if bin(v & ((1 << p) - 1)).count("1") & 1 else 1
                t = diagram.crossings[p]
                c1 = s_state.arc_circle[t[0]]
                c2 = s_state.arc_circle[t[2]]
                t_key_index = {key: k for k, key in enumerate(t_state.keys)}
                perm = [t_key_index.get(key, -1) for key in s_keys]
                if c1 != c2:
                    merge = True
                    out1 = t_state.arc_circle[t[0]]
                    perm[c1] = perm[c2] = -1
                else:
                    merge = False
                    out1 = t_state.arc_circle[t[0]]
                    out2 = t_state.arc_circle[t[1]]
                    if out1 == out2:
                        raise AssertionError(
                            "resolution change did not split a circle")
                    perm[c1] = -1
                if perm.count(-1) != (2 if merge else 1):
                    raise AssertionError(
                        "untouched circle failed to match across the edge")
                for k in range(pos, end):
                    _, labels = src[k]
                    common = 0
                    m = labels
                    while m:
                        lsb = m & -m
                        b = perm[lsb.bit_length() - 1]
                        if b >= 0:
                            common |= 1 << b
                        m ^= lsb
                    if merge:
                        x = v_and(labels, c1)
                        y = v_and(labels, c2)
                        if x and y:
                            if lee:
                                _emit(mat, tgt_index, v2, common, k, sign)
                        elif x or y:
                            _emit(mat, tgt_index, v2,
                                  common | (1 << out1), k, sign)
                        else:
                            _emit(mat, tgt_index, v2, common, k, sign)
                    else:
                        if v_and(labels, c1):
                            _emit(mat, tgt_index, v2,
                                  common | (1 << out1) | (1 << out2),
                                  k, sign)
                            if lee:
                                _emit(mat, tgt_index, v2, common, k, sign)
                        else:
                            _emit(mat, tgt_index, v2,
                                  common | (1 << out2), k, sign)
                            _emit(mat, tgt_index, v2,
                                  common | (1 << out1), k, sign)
            pos = end
        diff[i] = mat

    if ilo is None and ihi is None:
        valid = None
    else:
        valid = (wlo + 1 - nm if ilo is not None and wlo > 0 else wlo - nm,
                 whi - 1 - nm if ihi is not None and whi < n else whi - nm)
    cls = LeeComplexQ if lee else BigradedChainComplex
    win = None
    if window is not None:
        win = ((ilo, ihi) if (ilo, ihi) != (None, None) else None,
               (jlo, jhi) if (jlo, jhi) != (None, None) else None)
    return cls(gens, qdeg, diff, np_, nm, valid=valid, diagram=diagram,
               states=states, window=win)


def v_and(labels, bit):
    return labels >> bit & 1


def _emit(mat, tgt_index, v2, labels, col, coeff):
    row = tgt_index.get((v2, labels))
    if row is None:
        raise AssertionError("differential target missing from basis")
    mat.add(row, col, coeff)


def build_complex(diagram, window=None):
    """The Khovanov chain complex of an oriented diagram.

    ``window`` is None or a pair (i_range, j_range).  A homological range
    (a, b) generates cube layers a-1 .. b+1 so that homology is correct on
    [a, b]; a quantum range is exact since the differential preserves the
    quantum degree.  A window excluding everything yields an empty
    complex.
    """
    if not isinstance(diagram, Diagram):
        raise TypeError("expected a Diagram")
    return _build(diagram, window, lee=False)


def lee_complex(diagram):
    """The deformed complex of a diagram, always built in full."""
    if not isinstance(diagram, Diagram):
        raise TypeError("expected a Diagram")
    return _build(diagram, None, lee=True)


# ---------------------------------------------------------------------------
# chain maps and elementary reduction


class ChainMapData:
    """A chain map between bigraded complexes.

    ``mats[i]`` sends layer i of the source to layer i of the target;
    ``jshift`` is the quantum bidegree (homological shift is always 0
    here).  Entries commute with the differentials exactly; ``verify``
    asserts it.
    """

    __slots__ = ("source", "target", "mats", "jshift")

    def __init__(self, source, target, mats, jshift=0):
        self.source = source
        self.target = target
        self.mats = mats
        self.jshift = jshift

    @classmethod
    def identity(cls, complex_):
        mats = {i: SparseInt.identity(complex_.layer_size(i))
                for i in complex_.layers()}
        return cls(complex_, complex_, mats)

    def matrix(self, i):
        m = self.mats.get(i)
        if m is not None:
            return m
        return SparseInt(self.target.layer_size(i), self.source.layer_size(i))

    def compose(self, other):
        """self after other; other.target must be self.source."""
        if other.target is not self.source:
            raise ValueError("chain maps not composable")
        mats = {}
        for i in set(self.mats) | set(other.mats):
            m = self.matrix(i).matmul(other.matrix(i))
            if m.nrows and m.ncols:
                mats[i] = m
        return ChainMapData(other.source, self.target, mats,
                            self.jshift + other.jshift)

    def verify(self):
        """Assert exact commutation with the differentials."""
        degrees = set(self.source.gens) | set(self.target.gens)
        for i in sorted(degrees):
            left = self.target.differential(i).matmul(self.matrix(i))
            right = self.matrix(i + 1).matmul(self.source.differential(i))
            if left != right:
                raise AssertionError(
                    "chain map fails to commute with d at degree %d" % i)
        return True

    def verify_bidegree(self):
        sq, tq = self.source.qdeg, self.target.qdeg
        for i, m in self.mats.items():
            for r, c, _ in m.entries():
                if tq[i][r] - sq[i][c] != self.jshift:
                    raise AssertionError("chain map entry off bidegree")
        return True

    def __repr__(self):
        return "ChainMapData(jshift=%d, degrees=%s)" % (
            self.jshift, sorted(self.mats))


SimplifyResult = namedtuple("SimplifyResult",
                            ["complex", "to_reduced", "from_reduced"])


def _compact(C, diffs, fmats, gmats, removed):
    gens = {}
    qdeg = {}
    alive = {}
    for i in C.layers():
        keep = [k for k in range(C.layer_size(i)) if k not in removed[i]]
        alive[i] = keep
        gens[i] = tuple(C.gens[i][k] for k in keep)
        qdeg[i] = tuple(C.qdeg[i][k] for k in keep)
    diff = {}
    for i, m in diffs.items():
        sub = m.submatrix(alive[i + 1], alive[i])
        diff[i] = sub
    reduced = type(C)(gens, qdeg, diff, C.n_plus, C.n_minus,
                      valid=C.valid, diagram=C.diagram, states=C.states,
                      window=C.window)
    to_mats = {}
    from_mats = {}
    for i in C.layers():
        n = C.layer_size(i)
        to_mats[i] = fmats[i].submatrix(alive[i], range(n))
        from_mats[i] = gmats[i].submatrix(range(n), alive[i])
    to_map = ChainMapData(C, reduced, to_mats)
    from_map = ChainMapData(reduced, C, from_mats)
    return SimplifyResult(reduced, to_map, from_map)


def _cancel(diffs, fmats, gmats, removed, i, a, b, eps):
    mat = diffs[i]
    alpha = dict(mat.col[a])
    beta = dict(mat.row[b])
    for w, bw in beta.items():
        if w != a:
            mat.add_col(w, a, -eps * bw)
    mat.zero_col(a)
    mat.zero_row(b)
    if i - 1 in diffs:
        diffs[i - 1].zero_row(a)
    if i + 1 in diffs:
        diffs[i + 1].zero_col(b)
    for y, ay in alpha.items():
        if y != b:
            fmats[i + 1].add_row(y, b, -eps * ay)
    fmats[i + 1].zero_row(b)
    fmats[i].zero_row(a)
    for w, bw in beta.items():
        if w != a:
            gmats[i].add_col(w, a, -eps * bw)
    gmats[i].zero_col(a)
    gmats[i + 1].zero_col(b)
    removed[i].add(a)
    removed[i + 1].add(b)
    return alpha, beta


def _eliminate(C, prescribed):
    diffs = {i: m.copy() for i, m in C.diff.items()}
    fmats = {i: SparseInt.identity(C.layer_size(i)) for i in C.layers()}
    gmats = {i: SparseInt.identity(C.layer_size(i)) for i in C.layers()}
    removed = {i: set() for i in C.layers()}

    if prescribed is not None:
        for i, a, b in prescribed:
            if i not in diffs:
                raise ValueError("no differential at degree %d" % i)
            eps = diffs[i].get(b, a)
            if eps not in (1, -1):
                raise ValueError(
                    "prescribed pivot (%d, %d, %d) is not a unit entry"
                    % (i, a, b))
            _cancel(diffs, fmats, gmats, removed, i, a, b, eps)
        return _compact(C, diffs, fmats, gmats, removed)

    for i in sorted(diffs):
        mat = diffs[i]
        heap = []
        for r, c, val in mat.entries():
            if val == 1 or val == -1:
                cost = (len(mat.col[c]) - 1) * (len(mat.row[r]) - 1)
                heap.append((cost, r, c))
        heapq.heapify(heap)
        while heap:
            cost, b, a = heapq.heappop(heap)
            val = mat.get(b, a)
            if val not in (1, -1):
                continue
            cur = (len(mat.col[a]) - 1) * (len(mat.row[b]) - 1)
            if cur > cost:
                heapq.heappush(heap, (cur, b, a))
                continue
            alpha, beta = _cancel(diffs, fmats, gmats, removed, i, a, b, val)
            for w in beta:
                if w == a:
                    continue
                for y in alpha:
                    if y == b:
                        continue
                    nv = mat.get(y, w)
                    if nv == 1 or nv == -1:
                        c2 = (len(mat.col[w]) - 1) * (len(mat.row[y]) - 1)
                        heapq.heappush(heap, (c2, y, w))
    return _compact(C, diffs, fmats, gmats, removed)


def simplify(C):
    """Reduce a complex by cancelling unit differential entries.

    Returns (reduced, to_reduced, from_reduced) where the maps form a
    homotopy equivalence; to_reduced composed with from_reduced is the
    identity of the reduced complex on the nose.  Pivots are chosen
    greedily to minimize fill-in, scanning degree by degree.
    """
    return _eliminate(C, None)


def eliminate_pairs(C, pairs):
    """Cancel the prescribed unit entries, in order.

    Each pair is (degree, source_index, target_index) naming an entry of
    the degree-``i`` differential that must be +1 or -1 at the time it is
    cancelled.  Used to realize specific local homotopy equivalences whose
    pivots are known in advance.
    """
    return _eliminate(C, list(pairs))


# ---------------------------------------------------------------------------
# homology presentations


class GroupSummand:
    """One bidegree of a homology presentation.

    ``kernel`` is a saturated basis of cycles (columns, in local
    coordinates over ``indices``); ``u``/``factors`` bring the boundary
    lattice to diagonal form in those coordinates.  ``gens`` holds the
    chosen generators as chain vectors: torsion generators first (orders
    in ``torsion``), then ``free_rank`` free generators.
    """

    __slots__ = ("i", "j", "indices", "kernel", "u", "factors", "torsion",
                 "free_rank", "gens")

    def __init__(self, i, j, indices, kernel, u, factors, gens):
        self.i = i
        self.j = j
        self.indices = indices
        self.kernel = kernel
        self.u = u
        self.factors = factors
        self.torsion = tuple(d for d in factors if d > 1)
        self.free_rank = kernel.ncols - len(factors)
        self.gens = gens

    @property
    def gen_count(self):
        return len(self.torsion) + self.free_rank

    def is_trivial(self):
        return self.free_rank == 0 and not self.torsion

    def reduce_cycle(self, local_vec):
        """Coordinates of a cycle on the presentation generators.

        ``local_vec`` is a dict over local positions.  Torsion coordinates
        are reduced into [0, order); raises ValueError when the vector is
        not a cycle.
        """
        col = SparseInt(len(self.indices), 1)
        for k, v in local_vec.items():
            col.set(k, 0, v)
        x = solve_int(self.kernel, col)
        if x is None:
            raise ValueError("vector is not a cycle in this bidegree")
        y = self.u.matmul(x)
        coords = []
        for t, d in enumerate(self.factors):
            if d > 1:
                coords.append(y.get(t, 0) % d)
        for t in range(len(self.factors), self.kernel.ncols):
            coords.append(y.get(t, 0))
        return tuple(coords)

    def chain_vector(self, coords):
        """Chain representative (dict over local positions) of the class
        with the given presentation coordinates."""
        if len(coords) != self.gen_count:
            raise ValueError("coordinate length mismatch")
        out = {}
        for t, c in enumerate(coords):
            if not c:
                continue
            for k, v in self.gens.col[t].items():
                out[k] = out.get(k, 0) + c * v
        return {k: v for k, v in out.items() if v}

    def to_json(self):
        return {
            "i": self.i,
            "j": self.j,
            "indices": list(self.indices),
            "kernel": sorted(self.kernel.entries()),
            "kernel_cols": self.kernel.ncols,
            "u": sorted(self.u.entries()),
            "factors": list(self.factors),
            "gens": sorted(self.gens.entries()),
        }

    @classmethod
    def from_json(cls, data):
        n = len(data["indices"])
        kernel = SparseInt(n, data["kernel_cols"])
        for r, c, v in data["kernel"]:
            kernel.set(r, c, v)
        k = kernel.ncols
        u = SparseInt(k, k)
        for r, c, v in data["u"]:
            u.set(r, c, v)
        factors = tuple(data["factors"])
        gen_count = sum(1 for d in factors if d > 1) + (k - len(factors))
        gens = SparseInt(n, gen_count)
        for r, c, v in data["gens"]:
            gens.set(r, c, v)
        return cls(data["i"], data["j"], tuple(data["indices"]), kernel, u,
                   factors, gens)


class BigradedGroup:
    """Bigraded homology with torsion and retained presentations.

    Equality compares isomorphism types (free rank and torsion per
    bidegree); the presentations themselves are basis-dependent.
    """

    def __init__(self, summands, complex_=None):
        self.summands = summands
        self.complex = complex_

    def summand(self, i, j):
        return self.summands.get((i, j))

    def free_rank(self, i, j):
        s = self.summands.get((i, j))
        return s.free_rank if s is not None else 0

    def torsion(self, i, j):
        s = self.summands.get((i, j))
        return s.torsion if s is not None else ()

    def bidegrees(self):
        return sorted(k for k, s in self.summands.items()
                      if not s.is_trivial())

    def isomorphism_type(self):
        return {k: (s.free_rank, s.torsion)
                for k, s in sorted(self.summands.items())
                if not s.is_trivial()}

    def total_rank(self):
        return sum(s.free_rank for s in self.summands.values())

    def poincare_polynomial(self):
        """Dict j -> dict i -> free rank, for reports."""
        out = {}
        for (i, j), s in sorted(self.summands.items()):
            if s.free_rank:
                out.setdefault(j, {})[i] = s.free_rank
        return out

    def reduce_cycle(self, i, j, vec):
        """Coordinates of a cycle given over global layer-i positions."""
        s = self.summands.get((i, j))
        if s is None:
            if not vec:
                return ()
            raise ValueError("no cycles at bidegree (%d, %d)" % (i, j))
        posmap = {g: k for k, g in enumerate(s.indices)}
        local = {}
        for g, v in vec.items():
            if not v:
                continue
            k = posmap.get(g)
            if k is None:
                raise ValueError("vector leaves bidegree (%d, %d)" % (i, j))
            local[k] = v
        return s.reduce_cycle(local)

    def chain_representative(self, i, j, coords):
        s = self.summands.get((i, j))
        if s is None:
            raise ValueError("no summand at bidegree (%d, %d)" % (i, j))
        local = s.chain_vector(coords)
        return {s.indices[k]: v for k, v in local.items()}

    def __eq__(self, other):
        if not isinstance(other, BigradedGroup):
            return NotImplemented
        return self.isomorphism_type() == other.isomorphism_type()

    def __repr__(self):
        parts = []
        for (i, j) in self.bidegrees():
            s = self.summands[(i, j)]
            desc = []
            if s.free_rank == 1:
                desc.append("Z")
            elif s.free_rank:
                desc.append("Z^%d" % s.free_rank)
            desc.extend("Z/%d" % d for d in s.torsion)
            parts.append("(%d,%d): %s" % (i, j, "+".join(desc)))
        return "BigradedGroup{%s}" % ", ".join(parts)

    def to_json(self):
        return {
            "format": "kh-group/1",
            "convention": CONVENTION_VERSION,
            "summands": [s.to_json()
                         for _, s in sorted(self.summands.items())],
        }

    @classmethod
    def from_json(cls, data):
        if data.get("format") != "kh-group/1":
            raise ValueError("not a serialized homology group")
        if data.get("convention") != CONVENTION_VERSION:
            raise ValueError("convention version mismatch")
        summands = {}
        for sd in data["summands"]:
            s = GroupSummand.from_json(sd)
            summands[(s.i, s.j)] = s
        return cls(summands)


def homology(C):
    """Bigraded homology of a complex, with presentations retained.

    For windowed complexes only the degrees the window certifies are
    reported.
    """
    by_q = {}
    for i in C.layers():
        buckets = {}
        for k, j in enumerate(C.qdeg[i]):
            buckets.setdefault(j, []).append(k)
        by_q[i] = buckets

    summands = {}
    for i in C.valid_degrees():
        for j, indices in by_q[i].items():
            rows_out = by_q.get(i + 1, {}).get(j, [])
            d_out = C.differential(i).submatrix(rows_out, indices)
            kernel = kernel_basis(d_out)
            if kernel.ncols == 0 and not indices:
                continue
            cols_in = by_q.get(i - 1, {}).get(j, [])
            d_in = C.differential(i - 1).submatrix(indices, cols_in)
            rel = solve_int(kernel, d_in)
            if rel is None:
                raise AssertionError(
                    "boundaries are not cycles at (%d, %d)" % (i, j))
            snf = smith_normal_form(rel)
            factors = tuple(snf.diagonal())
            gens_all = kernel.matmul(snf.uinv)
            keep = [t for t, d in enumerate(factors) if d > 1]
            keep.extend(range(len(factors), kernel.ncols))
            gens = gens_all.submatrix(range(gens_all.nrows), keep)
            summands[(i, j)] = GroupSummand(i, j, tuple(indices), kernel,
                                            snf.u, factors, gens)
    return BigradedGroup(summands, C)


# ---------------------------------------------------------------------------
# the deformation and filtration degrees


LeeCycle = namedtuple("LeeCycle", ["degree", "vertex", "vector",
                                   "orientation"])


def lee_generator(D, orientation):
    """The deformed cycle attached to an orientation assignment.

    ``orientation`` gives +1 or -1 per component of ``D`` (+1 keeps the
    diagram's own orientation).  The cycle lives in the all-oriented
    resolution; its circles receive the two idempotent-like labels
    X + 1 and X - 1 in a proper two-coloring of the circle adjacency
    graph, seeded with X + 1 on the lowest circle of each connected part.
    Either seeding yields a cycle; the choice is fixed for determinism.
    Returns a LeeCycle whose vector maps basis labels (vertex, labels) to
    coefficients, resolvable against any complex of ``D`` that contains
    the oriented resolution.
    """
    if len(orientation) != D.n_components:
        raise ValueError("orientation must cover every component")
    if any(o not in (1, -1) for o in orientation):
        raise ValueError("orientation entries must be +1 or -1")
    n = len(D.crossings)
    v = 0
    for p, t in enumerate(D.crossings):
        cu = D.component_of[t[0]]
        co = D.component_of[t[1]]
        sign = D.signs[p] * orientation[cu] * orientation[co]
        if sign < 0:
            v |= 1 << p
    state = resolve_state(D, v)
    c = len(state.circles)
    adj = {k: set() for k in range(c)}
    for p, t in enumerate(D.crossings):
        if v >> p & 1:
            e = (state.arc_circle[t[0]], state.arc_circle[t[1]])
        else:
            e = (state.arc_circle[t[0]], state.arc_circle[t[2]])
        if e[0] == e[1]:
            raise AssertionError(
                "oriented resolution pairs a circle with itself")
        adj[e[0]].add(e[1])
        adj[e[1]].add(e[0])
    color = {}
    for seed in range(c):
        if seed in color:
            continue
        color[seed] = 0
        queue = [seed]
        while queue:
            u = queue.pop()
            for w in adj[u]:
                if w not in color:
                    color[w] = color[u] ^ 1
                    queue.append(w)
                elif color[w] == color[u]:
                    raise AssertionError(
                        "circle adjacency graph is not two-colorable")
    bmask = 0
    for k in range(c):
        if color[k]:
            bmask |= 1 << k
    degree = bin(v).count("1") - D.n_minus
    vector = {}
    for labels in range(1 << c):
        ones_on_b = bin(bmask & ~labels & ((1 << c) - 1)).count("1")
        vector[(v, labels)] = -1 if ones_on_b & 1 else 1
    return LeeCycle(degree, v, vector, tuple(orientation))


def _positions(L, cycle):
    idx = L.index.get(cycle.degree)
    if idx is None:
        raise ValueError("cycle degree missing from the complex")
    out = {}
    for g, coeff in cycle.vector.items():
        k = idx.get(g)
        if k is None:
            raise ValueError("cycle generator missing from the complex")
        out[k] = coeff
    return out


def filtration_degree(L, cycle):
    """Largest quantum filtration level reached by the class of ``cycle``.

    The filtration places a chain at the minimum quantum degree of its
    support; the degree of a class is the maximum over representatives,
    decided by exact rank comparisons.  Raises ValueError when the input
    is not a cycle; returns None for a boundary (the class is zero).
    """
    if not isinstance(L, LeeComplexQ):
        raise TypeError("expected the deformed complex")
    i = cycle.degree
    z = _positions(L, cycle)
    out = L.diff.get(i)
    if out is not None and out.matvec(z):
        raise ValueError("not a cycle in the deformed complex")
    if not z:
        return None
    qs = L.qdeg[i]
    inc = L.diff.get(i - 1)

    def solvable(level):
        rows = [k for k, q in enumerate(qs) if q < level]
        if not rows:
            return True
        if inc is None:
            return all(z.get(k, 0) == 0 for k in rows)
        ncols = inc.ncols
        aug = inc.submatrix(rows, range(ncols))
        plain_rank = smith_normal_form(aug, transforms=False).rank
        aug2 = SparseInt(len(rows), ncols + 1)
        for r, c, val in aug.entries():
            aug2.set(r, c, val)
        for r, k in enumerate(rows):
            if z.get(k, 0):
                aug2.set(r, ncols, z[k])
        aug_rank = smith_normal_form(aug2, transforms=False).rank
        return aug_rank == plain_rank

    levels = sorted(set(qs))
    top = levels[-1] + 1
    if solvable(top):
        return None
    lo, hi = 0, len(levels) - 1
    best = levels[0]
    while lo <= hi:
        mid = (lo + hi) // 2
        if solvable(levels[mid]):
            best = levels[mid]
            lo = mid + 1
        else:
            hi = mid - 1
    return best
