"""Independent brute-force Khovanov homology oracle.

This module is deliberately self-contained: it has its own PD parser, its own
orientation propagation, its own circle counting, and it does all linear
algebra densely through sympy's Smith normal form. It never imports the
package under test. Test modules compare the package's output against this
oracle; the two implementations share nothing but the on-disk PD text format.

Conventions (the same contract the package implements):
  * A crossing line ``X[a,b,c,d]`` lists arc ids counterclockwise starting
    from the incoming under-strand. Slot 0 is the incoming under arc, slot 2
    the outgoing under arc; slots 1 and 3 carry the over-strand.
  * A crossing is positive when the over-strand enters at slot 3, negative
    when it enters at slot 1.
  * The 0-smoothing joins slots (0,1) and (2,3); the 1-smoothing joins
    slots (0,3) and (1,2).
  * i = |v| - n_minus, j = (#1-labels - #X-labels) + |v| + n_plus - 2*n_minus.
  * Edge signs: (-1)**(number of 1s before the flipped coordinate), crossings
    taken in input order.
"""

from __future__ import annotations

import itertools
import re
from collections import defaultdict
from fractions import Fraction

from sympy import Matrix
from sympy.matrices.normalforms import invariant_factors


_X_RE = re.compile(r"X\[\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]")
_O_RE = re.compile(r"O\[\s*(\d+)\s*\]")


def parse(text):
    """Parse PD text into (crossings, circles, orient) without validation
    beyond what the oracle needs.

    crossings: list of 4-tuples of arc ids.
    circles:   list of crossingless circle ids.
    orient:    dict {component index: +1/-1} from the header, may be empty.
    """
    crossings = []
    circles = []
    orient = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("orient:"):
            body = line[len("orient:"):].strip()
            if body:
                for part in body.split(","):
                    comp, _, flag = part.partition(":")
                    orient[int(comp.strip())] = int(flag.strip())
            continue
        m = _X_RE.fullmatch(line)
        if m:
            crossings.append(tuple(int(g) for g in m.groups()))
            continue
        m = _O_RE.fullmatch(line)
        if m:
            circles.append(int(m.group(1)))
            continue
        raise ValueError("oracle cannot parse line: %r" % raw)
    return crossings, circles, orient


def components(crossings):
    """Strand-following components as lists of (arc, enters_at) steps.

    Returns a list of components; each component is a list of arcs in
    traversal order, where the traversal enters crossing ``ci`` at ``slot``
    through the listed arc. Traversal pairs slots 0<->2 and 1<->3.
    """
    occur = defaultdict(list)
    for ci, tup in enumerate(crossings):
        for slot, arc in enumerate(tup):
            occur[arc].append((ci, slot))
    for arc, occ in occur.items():
        if len(occ) != 2:
            raise ValueError("arc %d appears %d times" % (arc, len(occ)))

    seen = set()
    comps = []
    for start_arc in sorted(occur):
        if start_arc in seen:
            continue
        # walk forward: enter the lexicographically smallest occurrence first
        comp = []
        arc = start_arc
        into = min(occur[start_arc])
        while arc not in seen:
            seen.add(arc)
            comp.append((arc, into))
            ci, slot = into
            out_slot = (slot + 2) % 4
            out_arc = crossings[ci][out_slot]
            a, b = occur[out_arc]
            into = b if a == (ci, out_slot) else a
            arc = out_arc
        comps.append(comp)
    return comps


def orientations(crossings, orient_header):
    """Decide, per component, whether the canonical walk direction is the
    actual orientation (+1) or reversed (-1).

    A component that passes under anywhere is forced: the under-strand must
    enter at slot 0. Components that are always over fall back to the header
    (default +1).
    """
    comps = components(crossings)
    flags = []
    for idx, comp in enumerate(comps):
        forced = None
        for arc, (ci, slot) in comp:
            if slot == 0:
                f = +1
            elif slot == 2:
                f = -1
            else:
                continue
            if forced is None:
                forced = f
            elif forced != f:
                raise ValueError("inconsistent orientation on component %d" % idx)
        if forced is None:
            forced = orient_header.get(idx, +1)
        flags.append(forced)
    return comps, flags


def signs(crossings, orient_header):
    """Crossing signs. Positive iff the over-strand enters at slot 3."""
    comps, flags = orientations(crossings, orient_header)
    occ = defaultdict(list)
    for ci, tup in enumerate(crossings):
        for slot, a in enumerate(tup):
            occ[a].append((ci, slot))
    # direction of each arc: which (ci, slot) it flows into
    head = {}
    for comp, flag in zip(comps, flags):
        for arc, into in comp:
            if flag == +1:
                head[arc] = into
            else:
                a, b = occ[arc]
                head[arc] = b if b != into else a
    out = []
    for ci, tup in enumerate(crossings):
        a, b, c, d = tup
        # over-strand enters where arc flows into slot 1 or slot 3
        if head.get(d) == (ci, 3):
            out.append(+1)
        elif head.get(b) == (ci, 1):
            out.append(-1)
        else:
            raise ValueError("cannot orient over-strand at crossing %d" % ci)
    return out


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        if p != x:
            self.parent[x] = p = self.find(p)
        return p

    def union(self, x, y):
        self.parent[self.find(x)] = self.find(y)


def state_circles(crossings, extra_circles, state):
    """Circles of one cube vertex as a sorted tuple of frozensets of arcs."""
    uf = _UnionFind()
    for tup, v in zip(crossings, state):
        a, b, c, d = tup
        if v == 0:
            uf.union(a, b)
            uf.union(c, d)
        else:
            uf.union(a, d)
            uf.union(b, c)
    groups = defaultdict(set)
    for tup in crossings:
        for arc in tup:
            groups[uf.find(arc)].add(arc)
    circles = [frozenset(g) for g in groups.values()]
    circles.extend(frozenset([c]) for c in extra_circles)
    return tuple(sorted(circles, key=min))


def jones(text):
    """Unnormalized Jones polynomial by the Kauffman state sum.

    Returns {q-exponent: coefficient} for
    (-1)^{n-} q^{n+ - 2 n-} sum_v (-q)^{|v|} (q + 1/q)^{c(v)}.
    """
    crossings, extra, orient = parse(text)
    sg = signs(crossings, orient)
    n_plus = sum(1 for s in sg if s > 0)
    n_minus = len(sg) - n_plus
    n = len(crossings)
    poly = defaultdict(int)
    for state in itertools.product((0, 1), repeat=n):
        r = sum(state)
        c = len(state_circles(crossings, extra, state))
        # (-q)^r (q + q^-1)^c  expanded
        base = (-1) ** r
        for k in range(c + 1):
            from math import comb
            poly[r + c - 2 * k] += base * comb(c, k)
    shift = n_plus - 2 * n_minus
    out = {}
    for e, co in poly.items():
        co *= (-1) ** n_minus
        if co:
            out[e + shift] = co
    return out


def cube(text):
    """Full cube of resolutions.

    Returns (generators, diff, n_plus, n_minus) where generators is a list of
    (state, labels, i, j) with labels a tuple over the state's circles
    (1 = label '1', 0 = label 'X'), and diff maps generator index ->
    {generator index: coefficient}.
    """
    crossings, extra, orient = parse(text)
    sg = signs(crossings, orient)
    n_plus = sum(1 for s in sg if s > 0)
    n_minus = len(sg) - n_plus
    n = len(crossings)

    circ = {}
    for state in itertools.product((0, 1), repeat=n):
        circ[state] = state_circles(crossings, extra, state)

    gens = []
    index = {}
    for state in sorted(circ):
        cs = circ[state]
        r = sum(state)
        for labels in itertools.product((0, 1), repeat=len(cs)):
            deg = sum(1 if l else -1 for l in labels)
            i = r - n_minus
            j = deg + r + n_plus - 2 * n_minus
            index[(state, labels)] = len(gens)
            gens.append((state, labels, i, j))

    diff = defaultdict(dict)
    for state in sorted(circ):
        src_circ = circ[state]
        for e in range(n):
            if state[e]:
                continue
            tstate = state[:e] + (1,) + state[e + 1:]
            sign = (-1) ** sum(state[:e])
            tgt_circ = circ[tstate]
            common = set(src_circ) & set(tgt_circ)
            merged = [c for c in src_circ if c not in common]
            split = [c for c in tgt_circ if c not in common]
            spos = {c: k for k, c in enumerate(src_circ)}
            tpos = {c: k for k, c in enumerate(tgt_circ)}
            for labels in itertools.product((0, 1), repeat=len(src_circ)):
                src = index[(state, labels)]
                if len(merged) == 2:
                    # m: 1*1=1, 1*X=X, X*X=0
                    la, lb = labels[spos[merged[0]]], labels[spos[merged[1]]]
                    if la == 0 and lb == 0:
                        continue
                    out_label = 1 if (la and lb) else 0
                    tl = [None] * len(tgt_circ)
                    for c in common:
                        tl[tpos[c]] = labels[spos[c]]
                    tl[tpos[split[0]]] = out_label
                    tgt = index[(tstate, tuple(tl))]
                    diff[src][tgt] = diff[src].get(tgt, 0) + sign
                else:
                    # Delta: 1 -> 1 X + X 1, X -> X X
                    la = labels[spos[merged[0]]]
                    outs = [(1, 0), (0, 1)] if la else [(0, 0)]
                    for o1, o2 in outs:
                        tl = [None] * len(tgt_circ)
                        for c in common:
                            tl[tpos[c]] = labels[spos[c]]
                        tl[tpos[split[0]]] = o1
                        tl[tpos[split[1]]] = o2
                        tgt = index[(tstate, tuple(tl))]
                        diff[src][tgt] = diff[src].get(tgt, 0) + sign
    return gens, diff, n_plus, n_minus


def homology(text, js=None):
    """Bigraded homology over the integers.

    Returns {(i, j): (free_rank, [torsion divisors])} with zero groups
    omitted. If ``js`` is given, only those quantum gradings are computed.
    """
    gens, diff, n_plus, n_minus = cube(text)
    if not gens:
        return {(0, 0): (1, [])}

    by_ij = defaultdict(list)
    for idx, (state, labels, i, j) in enumerate(gens):
        by_ij[(i, j)].append(idx)

    # check d^2 = 0 while we are here
    for src, row in diff.items():
        acc = defaultdict(int)
        for mid, c1 in row.items():
            for tgt, c2 in diff.get(mid, {}).items():
                acc[tgt] += c1 * c2
        assert all(v == 0 for v in acc.values()), "oracle differential fails d^2=0"

    js_all = sorted(set(j for (_, j) in by_ij))
    if js is not None:
        js_all = [j for j in js_all if j in set(js)]

    result = {}
    for j in js_all:
        cols = sorted(set(i for (i, jj) in by_ij if jj == j))
        mats = {}
        for i in cols:
            src_idx = by_ij[(i, j)]
            tgt_idx = by_ij.get((i + 1, j), [])
            pos = {g: k for k, g in enumerate(tgt_idx)}
            rows = len(tgt_idx)
            m = [[0] * len(src_idx) for _ in range(rows)]
            for cidx, g in enumerate(src_idx):
                for tgt, coeff in diff.get(g, {}).items():
                    if tgt in pos:
                        m[pos[tgt]][cidx] = coeff
            mats[i] = Matrix(rows, len(src_idx), [x for r in m for x in r]) \
                if rows and src_idx else Matrix(rows, len(src_idx), [])
        for i in cols:
            dim = len(by_ij[(i, j)])
            d_out = mats[i]
            d_in = mats.get(i - 1)
            rk_out = d_out.rank() if d_out.rows and d_out.cols else 0
            if d_in is not None and d_in.rows and d_in.cols:
                rk_in = d_in.rank()
                invs = [int(x) for x in invariant_factors(d_in) if x != 0]
                tors = [x for x in invs if abs(x) not in (0, 1)]
                tors = [abs(x) for x in tors]
            else:
                rk_in = 0
                tors = []
            free = dim - rk_out - rk_in
            if free or tors:
                result[(i, j)] = (free, sorted(tors))
    return result


def graded_euler(text):
    """Graded Euler characteristic from the homology, as {j: coefficient}."""
    h = homology(text)
    out = defaultdict(int)
    for (i, j), (free, _) in h.items():
        out[j] += (-1) ** i * free
    return {j: c for j, c in out.items() if c}


# Hand-derived PD codes for the basic corpus. Braid closures were worked out
# by hand from the slot conventions at the top of this file.
PRESETS = {
    "unknot": "O[1]\norient: 0:1\n",
    "kink_pos": "X[1,1,2,2]\n",
    "kink_neg": "X[1,2,2,1]\n",
    "hopf_pos": "X[2,3,4,1]\nX[3,2,1,4]\n",
    "hopf_neg": "X[1,2,3,4]\nX[4,3,2,1]\n",
    "trefoil_right": "X[2,3,4,1]\nX[3,5,6,4]\nX[5,2,1,6]\n",
    "trefoil_left": "X[1,2,3,4]\nX[4,3,5,6]\nX[6,5,2,1]\n",
    "fig8": "X[2,4,5,1]\nX[4,3,6,7]\nX[7,8,1,5]\nX[8,6,3,2]\n",
}


def _fmt_poly(p):
    terms = []
    for e in sorted(p):
        c = p[e]
        terms.append("%+d*q^%d" % (c, e))
    return " ".join(terms) if terms else "0"


if __name__ == "__main__":
    import sys

    names = sys.argv[1:] or list(PRESETS)
    for name in names:
        text = PRESETS.get(name)
        if text is None:
            with open(name) as f:
                text = f.read()
        crossings, extra, orient = parse(text)
        sg = signs(crossings, orient) if crossings else []
        np_, nm = sum(1 for s in sg if s > 0), sum(1 for s in sg if s < 0)
        print("==", name, " crossings:", len(crossings), " n+:", np_, " n-:", nm)
        print("   components:", len(components(crossings)) + len(extra))
        h = homology(text)
        for key in sorted(h):
            free, tors = h[key]
            print("   Kh^%s: free %d torsion %s" % (key, free, tors))
        print("   jones:", _fmt_poly(jones(text)))
        ge = graded_euler(text)
        assert ge == {e: c for e, c in jones(text).items()}, "euler != jones"
        print("   euler char matches state sum")
