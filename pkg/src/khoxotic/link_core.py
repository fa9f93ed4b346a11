"""Planar diagram core: parsing, orientation bookkeeping, mirrors, and
generators for the link families the rest of the package consumes.

PD text format
--------------
One crossing per line as ``X[a,b,c,d]``: the four arc ids counterclockwise
around the crossing, starting from the incoming under-strand. Slot 0 is the
incoming under arc and slot 2 the outgoing under arc; slots 1 and 3 carry the
over-strand. A crossing is positive when the over-strand enters at slot 3
(so the tuple reads ``X[under_in, over_out, under_out, over_in]``) and
negative when it enters at slot 1.

Crossingless circles are written ``O[n]`` with a fresh id ``n``. An optional
header line ``orient: 0:1, 1:-1, ...`` records component orientations
(components indexed in traversal order, see below); it is required only for
components that never pass under a crossing, since every under-pass already
forces the direction. ``#`` starts a comment.

Every arc id must occur exactly twice among the crossing tuples (or once as
an ``O`` circle and nowhere else).
"""

from __future__ import annotations

import re
from collections import defaultdict
from math import comb

__all__ = [
    "PDError",
    "PDSyntaxError",
    "PDArcError",
    "PDOrientationError",
    "Diagram",
    "TwistFamilyTemplate",
    "parse_pd",
    "serialize",
    "canonical_form",
    "mirror",
    "reverse_component",
    "disjoint_union",
    "braid_closure",
    "torus_link",
    "pretzel",
    "insert_full_twists",
    "encircle",
    "instantiate",
    "faces",
    "cofacial_pairs",
    "jones_state_sum",
    "linking_number",
    "smoothing_circle_count",
]


class PDError(ValueError):
    """Base class for diagram input errors."""


class PDSyntaxError(PDError):
    """A line of PD text could not be parsed."""


class PDArcError(PDError):
    """An arc id occurs a number of times other than two."""


class PDOrientationError(PDError):
    """Component orientations cannot be assigned consistently."""


_X_RE = re.compile(r"X\[\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]")
_O_RE = re.compile(r"O\[\s*(\d+)\s*\]")


class Diagram:
    """An oriented link diagram.

    Immutable after construction. ``crossings`` is a tuple of 4-tuples of arc
    ids, ``circles`` the crossingless components, ``arc_head`` maps each arc
    to the (crossing index, slot) it flows into, and ``signs`` the derived
    crossing signs.
    """

    __slots__ = (
        "crossings",
        "circles",
        "arc_head",
        "signs",
        "components",
        "component_of",
        "n_plus",
        "n_minus",
        "_occ",
    )

    def __init__(self, crossings, circles, arc_head):
        self.crossings = tuple(tuple(c) for c in crossings)
        self.circles = tuple(circles)
        self.arc_head = dict(arc_head)
        self._occ = _occurrences(self.crossings)

        seen_circ = set()
        for c in self.circles:
            if c in self._occ or c in seen_circ:
                raise PDArcError("circle id %d reused" % c)
            seen_circ.add(c)
        for arc, occ in self._occ.items():
            if len(occ) != 2:
                raise PDArcError("arc %d occurs %d times, expected 2" % (arc, len(occ)))
            if self.arc_head.get(arc) not in occ:
                raise PDOrientationError("arc %d has no valid direction" % arc)

        self.components = _trace_components(self.crossings, self._occ, self.arc_head)
        self.component_of = {}
        for k, comp in enumerate(self.components):
            for arc in comp:
                self.component_of[arc] = k
        nxt = len(self.components)
        for c in self.circles:
            self.component_of[c] = nxt
            nxt += 1

        self.signs = _derive_signs(self.crossings, self.arc_head)
        self.n_plus = sum(1 for s in self.signs if s > 0)
        self.n_minus = len(self.signs) - self.n_plus

    # -- queries ----------------------------------------------------------

    @property
    def n_components(self):
        return len(self.components) + len(self.circles)

    def arcs(self):
        return sorted(self._occ)

    def occurrences(self, arc):
        return self._occ[arc]

    def arc_tail(self, arc):
        a, b = self._occ[arc]
        return b if a == self.arc_head[arc] else a

    def writhe(self):
        return self.n_plus - self.n_minus

    def max_label(self):
        labels = [0]
        labels.extend(self._occ)
        labels.extend(self.circles)
        return max(labels)

    def __eq__(self, other):
        if not isinstance(other, Diagram):
            return NotImplemented
        return (
            self.crossings == other.crossings
            and self.circles == other.circles
            and self.arc_head == other.arc_head
        )

    def __hash__(self):
        return hash((self.crossings, self.circles,
                     tuple(sorted(self.arc_head.items()))))

    def __repr__(self):
        return "Diagram(%d crossings, %d components)" % (
            len(self.crossings), self.n_components)

    def relabeled(self, arc_map, circle_map=None):
        """New diagram with arcs renamed by ``arc_map`` (a dict)."""
        if circle_map is None:
            circle_map = arc_map
        crossings = [tuple(arc_map[a] for a in tup) for tup in self.crossings]
        circles = [circle_map[c] for c in self.circles]
        arc_head = {arc_map[a]: h for a, h in self.arc_head.items()}
        return Diagram(crossings, circles, arc_head)


def _occurrences(crossings):
    occ = defaultdict(list)
    for ci, tup in enumerate(crossings):
        for slot, arc in enumerate(tup):
            occ[arc].append((ci, slot))
    return {a: tuple(v) for a, v in occ.items()}


def _trace_components(crossings, occ, arc_head):
    """Components as tuples of arcs in orientation order, each rotated to
    start at its minimal arc, sorted by that arc."""
    comps = []
    seen = set()
    for start in sorted(occ):
        if start in seen:
            continue
        comp = []
        arc = start
        while arc not in seen:
            seen.add(arc)
            comp.append(arc)
            ci, slot = arc_head[arc]
            arc = crossings[ci][(slot + 2) % 4]
        m = comp.index(min(comp))
        comps.append(tuple(comp[m:] + comp[:m]))
    return tuple(sorted(comps, key=lambda c: c[0]))


def _derive_signs(crossings, arc_head):
    signs = []
    for ci, (a, b, c, d) in enumerate(crossings):
        if arc_head.get(a) != (ci, 0):
            raise PDOrientationError(
                "under-strand does not enter crossing %d at slot 0" % ci)
        if c != a and arc_head.get(c) == (ci, 2):
            raise PDOrientationError(
                "under-strand enters crossing %d at both ends" % ci)
        in3 = arc_head.get(d) == (ci, 3)
        in1 = arc_head.get(b) == (ci, 1)
        if in3 and in1 and b != d:
            raise PDOrientationError(
                "over-strand enters crossing %d at both ends" % ci)
        if in3:
            signs.append(+1)
        elif in1:
            signs.append(-1)
        else:
            raise PDOrientationError(
                "over-strand direction unresolved at crossing %d" % ci)
    return tuple(signs)


def _propagate_directions(crossings, occ, orient_header, n_circles=0):
    """Build arc_head from under-pass forcing plus the orient header."""
    comps = []
    seen = set()
    walk_into = {}
    for start in sorted(occ):
        if start in seen:
            continue
        comp = []
        arc = start
        into = min(occ[start])
        while arc not in seen:
            seen.add(arc)
            comp.append(arc)
            walk_into[arc] = into
            ci, slot = into
            out_slot = (slot + 2) % 4
            nxt = crossings[ci][out_slot]
            x, y = occ[nxt]
            into = y if x == (ci, out_slot) else x
            arc = nxt
        comps.append(comp)
    comps.sort(key=min)

    flags = []
    for idx, comp in enumerate(comps):
        forced = None
        forced_at = None
        for arc in comp:
            ci, slot = walk_into[arc]
            if slot == 0:
                f = +1
            elif slot == 2:
                f = -1
            else:
                continue
            if forced is None:
                forced, forced_at = f, arc
            elif forced != f:
                raise PDOrientationError(
                    "component %d passes under in both directions "
                    "(arcs %d and %d)" % (idx, forced_at, arc))
        header = orient_header.get(idx)
        if forced is None:
            forced = header if header is not None else +1
        elif header is not None and header != forced:
            raise PDOrientationError(
                "orient header contradicts forced direction on component %d" % idx)
        flags.append(forced)

    for k in orient_header:
        if not 0 <= k < len(comps) + n_circles:
            raise PDOrientationError(
                "orient header names component %d but only %d exist"
                % (k, len(comps) + n_circles))

    arc_head = {}
    for comp, flag in zip(comps, flags):
        for arc in comp:
            if flag == +1:
                arc_head[arc] = walk_into[arc]
            else:
                x, y = occ[arc]
                arc_head[arc] = y if y != walk_into[arc] else x
    return arc_head


def _from_unoriented(crossings, circles=(), reverse_comps=()):
    """Build a Diagram from crossing tuples whose under-strand occupies
    slots (0, 2) and over-strand slots (1, 3), with travel directions
    unknown. Each component is oriented along its canonical walk (reversed
    for indices in ``reverse_comps``) and tuples are rotated so slot 0 is
    the incoming under arc.
    """
    crossings = [tuple(c) for c in crossings]
    occ = _occurrences(crossings)
    for arc, o in occ.items():
        if len(o) != 2:
            raise PDArcError("arc %d occurs %d times, expected 2" % (arc, len(o)))
    comps = []
    seen = set()
    walk_into = {}
    for start in sorted(occ):
        if start in seen:
            continue
        comp = []
        arc = start
        into = min(occ[start])
        while arc not in seen:
            seen.add(arc)
            comp.append(arc)
            walk_into[arc] = into
            ci, slot = into
            out_slot = (slot + 2) % 4
            nxt = crossings[ci][out_slot]
            x, y = occ[nxt]
            into = y if x == (ci, out_slot) else x
            arc = nxt
        comps.append(comp)
    comps.sort(key=min)

    arc_head = {}
    for idx, comp in enumerate(comps):
        flip = idx in reverse_comps
        for arc in comp:
            if not flip:
                arc_head[arc] = walk_into[arc]
            else:
                x, y = occ[arc]
                arc_head[arc] = y if y != walk_into[arc] else x

    out = list(crossings)
    for ci, tup in enumerate(crossings):
        if arc_head[tup[0]] == (ci, 0):
            continue
        out[ci] = (tup[2], tup[3], tup[0], tup[1])
        for arc in set(tup):
            for (cj, s) in occ[arc]:
                if cj == ci and arc_head[arc] == (ci, s):
                    arc_head[arc] = (ci, (s + 2) % 4)
                    break
    return Diagram(out, circles, arc_head)


def parse_pd(text):
    """Parse PD text into a Diagram. Raises PDError subclasses on bad input."""
    crossings = []
    circles = []
    header = {}
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("orient:"):
            if saw_header:
                raise PDSyntaxError("line %d: duplicate orient header" % lineno)
            saw_header = True
            body = line[len("orient:"):].strip()
            if not body:
                continue
            for part in body.split(","):
                comp, _, flag = part.partition(":")
                try:
                    header[int(comp.strip())] = {"1": 1, "+1": 1, "-1": -1}[flag.strip()]
                except (ValueError, KeyError):
                    raise PDSyntaxError(
                        "line %d: bad orient entry %r" % (lineno, part.strip())) from None
            continue
        m = _X_RE.fullmatch(line)
        if m:
            crossings.append(tuple(int(g) for g in m.groups()))
            continue
        m = _O_RE.fullmatch(line)
        if m:
            circles.append(int(m.group(1)))
            continue
        raise PDSyntaxError("line %d: cannot parse %r" % (lineno, raw.strip()))

    occ = _occurrences(crossings)
    for arc, o in occ.items():
        if len(o) != 2:
            raise PDArcError("arc %d occurs %d times, expected 2" % (arc, len(o)))
    arc_head = _propagate_directions(crossings, occ, header, len(circles))
    return Diagram(crossings, circles, arc_head)


def serialize(diagram):
    """Render a Diagram back to PD text; parse_pd(serialize(D)) == D."""
    lines = []
    flags = []
    for comp in diagram.components:
        arc = comp[0]
        walk_entry = min(diagram.occurrences(arc))
        flags.append(1 if diagram.arc_head[arc] == walk_entry else -1)
    orient = ", ".join("%d:%d" % (k, f) for k, f in enumerate(flags))
    lines.append(("orient: %s" % orient) if orient else "orient:")
    for tup in diagram.crossings:
        lines.append("X[%d,%d,%d,%d]" % tup)
    for c in diagram.circles:
        lines.append("O[%d]" % c)
    return "\n".join(lines) + "\n"


def canonical_form(diagram):
    """Deterministic relabeling: arcs numbered 1.. in component traversal
    order, circles after, crossings sorted by their relabeled tuples."""
    arc_map = {}
    nxt = 1
    for comp in diagram.components:
        for arc in comp:
            arc_map[arc] = nxt
            nxt += 1
    circle_map = {}
    for c in diagram.circles:
        circle_map[c] = nxt
        nxt += 1
    new_tuples = [tuple(arc_map[a] for a in tup) for tup in diagram.crossings]
    order = sorted(range(len(new_tuples)), key=lambda ci: new_tuples[ci])
    old_to_new = {old: new for new, old in enumerate(order)}
    crossings = [new_tuples[old] for old in order]
    arc_head = {arc_map[a]: (old_to_new[ci], slot)
                for a, (ci, slot) in diagram.arc_head.items()}
    return Diagram(crossings, [circle_map[c] for c in diagram.circles], arc_head)


def mirror(diagram):
    """Swap over- and under-strands everywhere; flips every crossing sign."""
    crossings = []
    shift = []
    for ci, (a, b, c, d) in enumerate(diagram.crossings):
        if diagram.signs[ci] > 0:
            crossings.append((d, a, b, c))
            shift.append(1)
        else:
            crossings.append((b, c, d, a))
            shift.append(-1)
    arc_head = {arc: (ci, (slot + shift[ci]) % 4)
                for arc, (ci, slot) in diagram.arc_head.items()}
    return Diagram(crossings, diagram.circles, arc_head)


def reverse_component(diagram, k):
    """Reverse the orientation of component ``k`` (0-based; components with
    crossings come first, then bare circles)."""
    n_walked = len(diagram.components)
    if k >= n_walked:
        if k - n_walked >= len(diagram.circles):
            raise PDError("no component %d" % k)
        return diagram  # a bare circle's orientation carries no data
    arcs = set(diagram.components[k])
    arc_head = dict(diagram.arc_head)
    for arc in arcs:
        x, y = diagram.occurrences(arc)
        arc_head[arc] = y if arc_head[arc] == x else x
    crossings = list(diagram.crossings)
    for ci, tup in enumerate(diagram.crossings):
        if arc_head[tup[0]] == (ci, 0):
            continue
        # the under-strand was reversed: rotate so slot 0 is incoming again
        crossings[ci] = (tup[2], tup[3], tup[0], tup[1])
        for arc in set(tup):
            for (cj, s) in diagram.occurrences(arc):
                if cj == ci and arc_head[arc] == (ci, s):
                    arc_head[arc] = (ci, (s + 2) % 4)
                    break
    return Diagram(crossings, diagram.circles, arc_head)


def disjoint_union(d1, d2):
    """Split union; arcs of ``d2`` are shifted above those of ``d1``."""
    shift = d1.max_label()
    arc_map = {a: a + shift for a in d2.arcs()}
    circle_map = {c: c + shift for c in d2.circles}
    d2s = d2.relabeled(arc_map, circle_map) if shift else d2
    crossings = list(d1.crossings) + list(d2s.crossings)
    arc_head = dict(d1.arc_head)
    off = len(d1.crossings)
    for arc, (ci, slot) in d2s.arc_head.items():
        arc_head[arc] = (ci + off, slot)
    return Diagram(crossings, list(d1.circles) + list(d2s.circles), arc_head)


# -- constructions -------------------------------------------------------


def braid_closure(word, strands=None):
    """Closure of a braid word (nonzero ints, i for sigma_i and -i for its
    inverse), all strands oriented upward. An empty word on n strands gives
    n crossingless circles.
    """
    if strands is None:
        strands = max((abs(w) for w in word), default=1) + 1
    for w in word:
        if w == 0 or abs(w) >= strands:
            raise PDError("bad braid letter %r for %d strands" % (w, strands))
    nxt = strands + 1
    pos = list(range(1, strands + 1))
    first = list(pos)
    crossings = []
    heads = {}
    for w in word:
        i = abs(w) - 1
        u, v = pos[i], pos[i + 1]
        a, b = nxt, nxt + 1
        nxt += 2
        ci = len(crossings)
        if w > 0:
            # positive: left strand over; the under-strand v enters at slot 0
            crossings.append((v, a, b, u))
            heads[v] = (ci, 0)
            heads[u] = (ci, 3)
        else:
            crossings.append((u, v, a, b))
            heads[u] = (ci, 0)
            heads[v] = (ci, 1)
        pos[i], pos[i + 1] = b, a
    # close up: identify each top arc with the bottom arc at its position
    rename = {}
    circles = []
    for i in range(strands):
        if pos[i] == first[i]:
            circles.append(first[i])
        else:
            rename[pos[i]] = first[i]
    out = [tuple(rename.get(a, a) for a in tup) for tup in crossings]
    arc_head = {rename.get(a, a): h for a, h in heads.items()}
    return Diagram(out, circles, arc_head)


def torus_link(p, q):
    """The positive (n, n) torus link on n = p + q strands, drawn as the
    n-strand parallel cable of a +1-framed unknot, with the last q strand
    orientations reversed. Exactly n*n crossings and n components.
    """
    if p < 0 or q < 0 or p + q < 1:
        raise PDError("torus_link needs p, q >= 0 and p + q >= 1")
    n = p + q
    if n == 1:
        return Diagram([], [1], {})

    def alpha(k, j):
        # strand k after passing under j over-strands; alpha(k, n) doubles
        # as the first over-segment and alpha(k, 0) as the last one
        return k * 2 * n + j + 1

    def beta(k, i):
        if i == 0:
            return alpha(k, n)
        if i == n:
            return alpha(k, 0)
        return k * 2 * n + n + i + 1

    rev = [False] * p + [True] * q
    crossings = []
    heads = {}
    for i in range(n):          # strand i passing under, height row j
        for j in range(n):
            # the loop turn reverses the transverse order of the bundle, so
            # the over-strand in row j is cable strand n - 1 - j
            k = n - 1 - j
            ci = len(crossings)
            if not rev[i]:
                tup = (alpha(i, j), beta(k, i + 1), alpha(i, j + 1), beta(k, i))
                heads[alpha(i, j)] = (ci, 0)
            else:
                tup = (alpha(i, j + 1), beta(k, i), alpha(i, j), beta(k, i + 1))
                heads[alpha(i, j + 1)] = (ci, 0)
            crossings.append(tup)
    for k in range(n):          # over-strand heads
        for i in range(n):
            ci = i * n + (n - 1 - k)
            arc = beta(k, i) if not rev[k] else beta(k, i + 1)
            slot = 3 if rev[i] == rev[k] else 1
            if arc not in heads:
                heads[arc] = (ci, slot)
    return Diagram(crossings, [], heads)


def pretzel(*twists):
    """Pretzel link: vertical 2-strand twist columns joined in series, the
    outer strands closed around the top and bottom. A positive entry gives
    braid-positive half twists read bottom to top.
    """
    if not twists:
        raise PDError("pretzel needs at least one column")
    nxt = 1

    def fresh():
        nonlocal nxt
        v = nxt
        nxt += 1
        return v

    crossings = []
    tops = []
    bottoms = []
    for t in twists:
        bl, br = fresh(), fresh()
        left, right = bl, br
        for _ in range(abs(t)):
            a, b = fresh(), fresh()
            if t > 0:
                crossings.append((right, a, b, left))
            else:
                crossings.append((left, right, a, b))
            left, right = b, a
        tops.append((left, right))
        bottoms.append((bl, br))

    rename = {}

    def res(a):
        while a in rename:
            a = rename[a]
        return a

    def unify(a, b):
        a, b = res(a), res(b)
        if a != b:
            rename[b] = a

    m = len(twists)
    for i in range(m - 1):
        unify(tops[i][1], tops[i + 1][0])
        unify(bottoms[i][1], bottoms[i + 1][0])
    unify(tops[0][0], tops[m - 1][1])
    unify(bottoms[0][0], bottoms[m - 1][1])

    out = [tuple(res(a) for a in tup) for tup in crossings]
    occ = _occurrences(out)
    for arc, o in occ.items():
        if len(o) != 2:
            raise PDError("degenerate pretzel(%s): arc %d occurs %d times"
                          % (",".join(map(str, twists)), arc, len(o)))
    return _from_unoriented(out)


def _replace_at(crossings, position, new_arc):
    ci, slot = position
    tup = list(crossings[ci])
    tup[slot] = new_arc
    crossings[ci] = tuple(tup)


def insert_full_twists(diagram, arc_x, arc_y, k, positive=False):
    """Insert k full twists between two arcs wired antiparallel in the local
    picture. With ``positive=False`` all 2k new crossings are negative,
    otherwise all positive. The marked arcs keep their ids on the tail side;
    planarity of the insertion site is the caller's responsibility.
    """
    if k < 0:
        raise PDError("twist count must be >= 0")
    if k == 0:
        return diagram
    if arc_x == arc_y:
        raise PDError("twist region needs two distinct arcs")
    base = diagram.max_label()
    xs = [arc_x] + [base + i + 1 for i in range(2 * k)]
    ys = [arc_y] + [base + 2 * k + i + 1 for i in range(2 * k)]

    crossings = list(diagram.crossings)
    arc_head = dict(diagram.arc_head)
    # cut each marked arc: the tail side keeps the old id, the head side
    # becomes the last new segment, and the receiving crossing is rewired
    arc_head[xs[-1]] = arc_head.pop(arc_x)
    arc_head[ys[-1]] = arc_head.pop(arc_y)
    _replace_at(crossings, arc_head[xs[-1]], xs[-1])
    _replace_at(crossings, arc_head[ys[-1]], ys[-1])

    for i in range(1, k + 1):
        xa, xm, xb = xs[2 * i - 2], xs[2 * i - 1], xs[2 * i]
        y0, y1, y2 = ys[2 * (k - i)], ys[2 * (k - i) + 1], ys[2 * (k - i) + 2]
        ai = len(crossings)
        bi = ai + 1
        if not positive:
            crossings.append((y1, xa, y2, xm))
            crossings.append((xm, y0, xb, y1))
            arc_head[y1] = (ai, 0)
            arc_head[xa] = (ai, 1)
            arc_head[xm] = (bi, 0)
            arc_head[y0] = (bi, 1)
        else:
            crossings.append((xa, y2, xm, y1))
            crossings.append((y0, xb, y1, xm))
            arc_head[xa] = (ai, 0)
            arc_head[y1] = (ai, 3)
            arc_head[y0] = (bi, 0)
            arc_head[xm] = (bi, 3)
    return Diagram(crossings, diagram.circles, arc_head)


def encircle(diagram, arc_x, arc_y):
    """Add an unknotted circle around two locally parallel arcs, passing
    over both at the top and under both at the bottom. All four new
    crossings are negative when both strands run upward in the local
    picture. Used to mark surgery curves around a twist region.
    """
    if arc_x == arc_y:
        raise PDError("encircle needs two distinct arcs")
    base = diagram.max_label()
    u0, u1, u2, u3 = base + 1, base + 2, base + 3, base + 4
    x0, x1, x2 = arc_x, base + 5, base + 6
    y0, y1, y2 = arc_y, base + 7, base + 8

    crossings = list(diagram.crossings)
    arc_head = dict(diagram.arc_head)
    arc_head[x2] = arc_head.pop(arc_x)
    arc_head[y2] = arc_head.pop(arc_y)
    _replace_at(crossings, arc_head[x2], x2)
    _replace_at(crossings, arc_head[y2], y2)

    off = len(crossings)
    # the circle runs westward over y then x on top (segments u0, u1, u2),
    # then eastward under x then y along the bottom (u2, u3, u0)
    crossings.append((y1, u0, y2, u1))   # top, circle over y
    crossings.append((x1, u1, x2, u2))   # top, circle over x
    crossings.append((u2, x0, u3, x1))   # bottom, circle under x
    crossings.append((u3, y0, u0, y1))   # bottom, circle under y
    arc_head[y1] = (off, 0)
    arc_head[u0] = (off, 1)
    arc_head[x1] = (off + 1, 0)
    arc_head[u1] = (off + 1, 1)
    arc_head[u2] = (off + 2, 0)
    arc_head[x0] = (off + 2, 1)
    arc_head[u3] = (off + 3, 0)
    arc_head[y0] = (off + 3, 1)
    return Diagram(crossings, diagram.circles, arc_head)


class TwistFamilyTemplate:
    """A base diagram with a marked twist region; instantiation at k >= 0
    inserts k full twists between the marked arcs."""

    __slots__ = ("base", "arc_x", "arc_y", "positive")

    def __init__(self, base, arc_x, arc_y, positive=False):
        if arc_x not in base.arc_head or arc_y not in base.arc_head:
            raise PDError("twist template marks arcs missing from the base")
        self.base = base
        self.arc_x = arc_x
        self.arc_y = arc_y
        self.positive = positive

    def to_json(self):
        return {
            "format": "twist-template/1",
            "base": serialize(self.base),
            "arc_x": self.arc_x,
            "arc_y": self.arc_y,
            "positive": self.positive,
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get("format") != "twist-template/1":
            raise PDError("unknown template format %r" % obj.get("format"))
        return cls(parse_pd(obj["base"]), int(obj["arc_x"]), int(obj["arc_y"]),
                   bool(obj.get("positive", False)))


def instantiate(template, k):
    """Instantiate a twist family at k >= 0 full twists."""
    if k < 0:
        raise PDError("twist families are defined for k >= 0")
    return insert_full_twists(template.base, template.arc_x, template.arc_y,
                              k, positive=template.positive)


# -- planar structure ----------------------------------------------------


def faces(diagram):
    """Faces of the underlying 4-valent plane graph, ignoring bare circles.

    Each face is a tuple of darts (crossing index, slot) meaning the arc end
    sitting at that slot; consecutive darts share a face corner. The count
    satisfies V - E + F = 1 + #connected components of the crossing graph.
    """
    other_end = {}
    for occ in diagram._occ.values():
        a, b = occ
        other_end[a] = b
        other_end[b] = a
    out = []
    seen = set()
    for ci in range(len(diagram.crossings)):
        for s in range(4):
            start = (ci, s)
            if start in seen:
                continue
            face = []
            d = start
            while d not in seen:
                seen.add(d)
                face.append(d)
                cj, t = other_end[d]
                d = (cj, (t + 1) % 4)
            out.append(tuple(face))
    return out


def cofacial_pairs(diagram):
    """Triples (face index, arc a, arc b) for distinct arcs sharing a face;
    one triple per unordered pair of dart positions on the face."""
    result = []
    for fi, face in enumerate(faces(diagram)):
        arcs_on_face = [diagram.crossings[ci][s] for ci, s in face]
        m = len(arcs_on_face)
        for i in range(m):
            for j in range(i + 1, m):
                a, b = arcs_on_face[i], arcs_on_face[j]
                if a != b:
                    result.append((fi, a, b))
    return result


# -- diagram-level invariants --------------------------------------------


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self):
        self.parent = {}

    def find(self, x):
        path = []
        p = self.parent.setdefault(x, x)
        while p != x:
            path.append(x)
            x = p
            p = self.parent.setdefault(x, x)
        for y in path:
            self.parent[y] = x
        return x

    def union(self, x, y):
        self.parent[self.find(x)] = self.find(y)


def smoothing_circle_count(diagram, state):
    """Number of circles after resolving; ``state`` is a 0/1 sequence over
    the crossings in input order. 0 joins slots (0,1)(2,3); 1 joins
    (0,3)(1,2)."""
    uf = _UnionFind()
    for (a, b, c, d), v in zip(diagram.crossings, state):
        if v == 0:
            uf.union(a, b)
            uf.union(c, d)
        else:
            uf.union(a, d)
            uf.union(b, c)
    roots = {uf.find(a) for a in diagram._occ}
    return len(roots) + len(diagram.circles)


def jones_state_sum(diagram):
    """Unnormalized Jones polynomial via the Kauffman state sum, as a dict
    mapping q-exponents to integer coefficients. Circles are counted by
    union-find; no chain complex is involved.
    """
    n = len(diagram.crossings)
    poly = defaultdict(int)
    for mask in range(1 << n):
        state = [(mask >> t) & 1 for t in range(n)]
        r = sum(state)
        c = smoothing_circle_count(diagram, state)
        s = (-1) ** r
        for k in range(c + 1):
            poly[r + c - 2 * k] += s * comb(c, k)
    shift = diagram.n_plus - 2 * diagram.n_minus
    sign = (-1) ** diagram.n_minus
    return {e + shift: sign * co for e, co in poly.items() if co}


def linking_number(diagram, comp_a, comp_b):
    """Linking number of two components: half the signed count of the
    crossings they share."""
    if comp_a == comp_b:
        raise PDError("linking number needs two distinct components")
    total = 0
    for ci, (a, b, _, _) in enumerate(diagram.crossings):
        under = diagram.component_of[a]
        over = diagram.component_of[b]
        if {under, over} == {comp_a, comp_b}:
            total += diagram.signs[ci]
    if total % 2:
        raise PDError("odd signed crossing count; diagram is inconsistent")
    return total // 2
