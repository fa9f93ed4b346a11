"""Chain-level maps for elementary cobordisms and their movies.

A movie is a sequence of diagrams (frames) connected by elementary moves:
births and deaths of crossingless circles, saddles, planar relabelings,
and the three local moves that do not change the link type. Every move
induces a map of the bigraded complexes of its two frames, exact over the
integers and commuting with the differentials on the nose; compositions
are therefore checked, not trusted. Induced maps to the empty diagram
become integer functionals on homology, compared up to one global sign.
"""

from collections import namedtuple

from .linalg import SparseInt
from .link_core import Diagram, PDError, parse_pd, serialize
from .khovanov import (
    CONVENTION_VERSION, BigradedChainComplex, ChainMapData,
    build_complex, eliminate_pairs, homology, resolve_state,
)

__all__ = [
    "MovieError",
    "MovieMove",
    "Movie",
    "Functional",
    "elementary_map",
    "compose_movie",
    "induced_functional",
    "validate_movie",
    "apply_move",
    "insert_kink",
    "remove_kink",
    "insert_finger",
    "remove_finger",
    "apply_saddle",
    "slide_strand",
]

R_KINDS = ("R1+", "R1-", "R2+", "R2-", "R3")
ALL_KINDS = R_KINDS + ("birth", "death", "saddle", "relabel")


class MovieError(PDError):
    pass


class MovieMove:
    """One elementary move. ``site`` is a small dict keyed per kind:

    birth/death   {"circle": id}
    saddle        {"arcs": [x, y]}  (negative x encodes free circle -(x+1))
    R1+/R1-       {"crossing": index}  (in the frame that has the kink)
    R2+/R2-       {"crossings": [i, j]}  (in the frame that has the bigon)
    R3            {"arc": a, "crossing": c}  (both in the before frame)
    relabel       {"arcs": {old: new}, "circles": {old: new},
                   "order": [position of old crossing t in the new frame]}
    """

    __slots__ = ("kind", "site", "direction")

    def __init__(self, kind, site, direction="forward"):
        if kind not in ALL_KINDS:
            raise MovieError("unknown move kind %r" % (kind,))
        if direction not in ("forward", "inverse"):
            raise MovieError("bad direction %r" % (direction,))
        if direction == "inverse" and kind not in R_KINDS:
            raise MovieError("%s has no inverse direction" % kind)
        self.kind = kind
        self.site = site
        self.direction = direction

    def euler(self):
        """Euler characteristic carried by the move."""
        if self.kind in ("birth", "death"):
            return 1
        if self.kind == "saddle":
            return -1
        return 0

    def jshift(self):
        if self.kind in ("birth", "death"):
            return 1
        if self.kind == "saddle":
            return -1
        return 0

    def to_json(self):
        site = self.site
        if self.kind == "relabel":
            site = {
                "arcs": {str(k): v for k, v in site["arcs"].items()},
                "circles": {str(k): v for k, v in site["circles"].items()},
                "order": list(site["order"]),
            }
        return {"kind": self.kind, "site": site, "direction": self.direction}

    @classmethod
    def from_json(cls, obj):
        kind = obj.get("kind")
        site = obj.get("site", {})
        if kind == "relabel":
            site = {
                "arcs": {int(k): v for k, v in site["arcs"].items()},
                "circles": {int(k): v for k, v in site["circles"].items()},
                "order": list(site["order"]),
            }
        return cls(kind, site, obj.get("direction", "forward"))

    def __repr__(self):
        return "MovieMove(%s, %r, %s)" % (self.kind, self.site,
                                          self.direction)


class Movie:
    """Frames and the moves between them; frames are stored explicitly."""

    __slots__ = ("frames", "moves")

    def __init__(self, frames, moves):
        if len(frames) != len(moves) + 1:
            raise MovieError("a movie needs one more frame than moves")
        self.frames = list(frames)
        self.moves = list(moves)

    def euler(self):
        return sum(m.euler() for m in self.moves)

    def to_json(self):
        return {
            "format": "kh-movie/1",
            "convention": CONVENTION_VERSION,
            "frames": [serialize(f) for f in self.frames],
            "moves": [m.to_json() for m in self.moves],
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get("format") != "kh-movie/1":
            raise MovieError("not a serialized movie")
        if obj.get("convention") != CONVENTION_VERSION:
            raise MovieError("convention version mismatch")
        return cls([parse_pd(t) for t in obj["frames"]],
                   [MovieMove.from_json(m) for m in obj["moves"]])

    def __repr__(self):
        return "Movie(%d frames: %s)" % (
            len(self.frames), ", ".join(m.kind for m in self.moves))


# ---------------------------------------------------------------------------
# diagram surgery


def _fresh(diagram, count):
    base = diagram.max_label()
    return [base + i + 1 for i in range(count)]


def add_circle(diagram, cid=None):
    if cid is None:
        cid = diagram.max_label() + 1
    return Diagram(diagram.crossings, diagram.circles + (cid,),
                   diagram.arc_head), cid


def drop_circle(diagram, cid):
    if cid not in diagram.circles:
        raise MovieError("no crossingless circle %d" % cid)
    circles = tuple(c for c in diagram.circles if c != cid)
    return Diagram(diagram.crossings, circles, diagram.arc_head)


def _replace_slot(crossings, pos, arc):
    ci, slot = pos
    tup = list(crossings[ci])
    tup[slot] = arc
    crossings[ci] = tuple(tup)


def apply_saddle(diagram, x, y):
    """Band surgery between two strands.

    ``x`` and ``y`` are arcs (positive) or free circles encoded as
    ``-(id + 1)``.  Equal values split the strand or circle; distinct
    values merge/reconnect.  Crossing signs must be unchanged by the
    rewiring, otherwise the band is incompatible with the orientations.
    """
    if x > 0 and y > 0:
        if x == y:
            return add_circle(diagram)[0]
        if x not in diagram.arc_head or y not in diagram.arc_head:
            raise MovieError("saddle arcs missing from the diagram")
        crossings = list(diagram.crossings)
        arc_head = dict(diagram.arc_head)
        hx, hy = arc_head.pop(x), arc_head.pop(y)
        tx = diagram.arc_tail(x)
        ty = diagram.arc_tail(y)
        n1, n2 = _fresh(diagram, 2)
        # n1 runs from the tail of x into the head of y, n2 the reverse
        _replace_slot(crossings, tx, n1)
        _replace_slot(crossings, hy, n1)
        _replace_slot(crossings, ty, n2)
        _replace_slot(crossings, hx, n2)
        arc_head[n1] = hy
        arc_head[n2] = hx
        try:
            out = Diagram(crossings, diagram.circles, arc_head)
        except PDError as e:
            raise MovieError("saddle produces an invalid diagram: %s" % e)
        if out.signs != diagram.signs:
            raise MovieError("saddle is incompatible with the orientations")
        return out
    if x < 0 and y < 0:
        cx, cy = -x - 1, -y - 1
        for c in (cx, cy):
            if c not in diagram.circles:
                raise MovieError("no crossingless circle %d" % c)
        if cx == cy:
            return add_circle(diagram)[0]
        return drop_circle(diagram, max(cx, cy))
    arc, circ = (x, -y - 1) if x > 0 else (y, -x - 1)
    if arc not in diagram.arc_head:
        raise MovieError("saddle arc %d missing" % arc)
    return drop_circle(diagram, circ)


def insert_kink(diagram, arc, positive):
    """Add a curl on ``arc``; the new crossing goes last."""
    if arc not in diagram.arc_head:
        raise MovieError("no arc %d to kink" % arc)
    m1, m2 = _fresh(diagram, 2)
    crossings = list(diagram.crossings)
    arc_head = dict(diagram.arc_head)
    old_head = arc_head.pop(arc)
    _replace_slot(crossings, old_head, m2)
    ci = len(crossings)
    if positive:
        crossings.append((arc, m2, m1, m1))
        arc_head[arc] = (ci, 0)
        arc_head[m1] = (ci, 3)
    else:
        crossings.append((arc, m1, m1, m2))
        arc_head[arc] = (ci, 0)
        arc_head[m1] = (ci, 1)
    arc_head[m2] = old_head
    return Diagram(crossings, diagram.circles, arc_head)


def _kink_arcs(diagram, ci):
    """(loop_arc, in_arc, out_arc) of the curl at crossing ``ci``."""
    if not 0 <= ci < len(diagram.crossings):
        raise MovieError("no crossing %d" % ci)
    tup = diagram.crossings[ci]
    loop = None
    for arc in tup:
        if tup.count(arc) == 2:
            loop = arc
    if loop is None:
        raise MovieError("crossing %d is not a curl" % ci)
    rest = [a for a in tup if a != loop]
    if len(rest) == 2 and rest[0] == rest[1]:
        # one-crossing component: both remaining slots share an arc
        return loop, rest[0], rest[0]
    if len(rest) != 2:
        raise MovieError("crossing %d is not a curl" % ci)
    a, b = rest
    if diagram.arc_head[a] == (ci, tup.index(a)):
        return loop, a, b
    return loop, b, a


def remove_kink(diagram, ci):
    """Undo a curl; the incoming arc keeps its id."""
    loop, a_in, a_out = _kink_arcs(diagram, ci)
    crossings = [c for k, c in enumerate(diagram.crossings) if k != ci]
    if a_in == a_out:
        # the curl was a whole component
        return Diagram(crossings, diagram.circles + (min(loop, a_in),),
                       {a: h for a, h in diagram.arc_head.items()
                        if a not in (loop, a_in)})
    arc_head = dict(diagram.arc_head)
    del arc_head[loop]
    head_out = arc_head.pop(a_out)
    crossings2 = list(crossings)
    ci2, slot = head_out
    if ci2 > ci:
        ci2 -= 1
    crossings2[ci2] = tuple(a_in if a == a_out else a
                            for a in crossings2[ci2])
    arc_head2 = {}
    for a, (cj, slot) in arc_head.items():
        if cj > ci:
            cj -= 1
        arc_head2[a] = (cj, slot)
    arc_head2[a_in] = (ci2, crossings2[ci2].index(a_in)
                       if crossings2[ci2].count(a_in) == 1
                       else head_out[1])
    # recompute the slot honestly: a_in now sits where a_out entered
    arc_head2[a_in] = (ci2, slot)
    try:
        return Diagram(crossings2, diagram.circles, arc_head2)
    except PDError as e:
        raise MovieError("curl removal failed: %s" % e)


def insert_finger(diagram, moving, still, over):
    """Push a finger of the strand at arc ``moving`` across arc ``still``.

    Creates two crossings (one positive, one negative) appended at the end;
    the moving strand passes over when ``over`` is true. The finger is the
    standard two-crossing tongue; which planar side it uses does not affect
    any complex-level data.
    """
    for arc in (moving, still):
        if arc not in diagram.arc_head:
            raise MovieError("no arc %d at the finger site" % arc)
    if moving == still:
        raise MovieError("finger needs two distinct arcs")
    ma, mb, sa, sb = _fresh(diagram, 4)
    # moving strand: moving -> ma -> mb ; still strand: still -> sa -> sb
    crossings = list(diagram.crossings)
    arc_head = dict(diagram.arc_head)
    mh = arc_head.pop(moving)
    sh = arc_head.pop(still)
    _replace_slot(crossings, mh, mb)
    _replace_slot(crossings, sh, sb)
    c1 = len(crossings)
    c2 = c1 + 1
    if over:
        # still passes under at both crossings; moving over.
        # first crossing: still_in = still, under_out = sa;
        # the moving strand enters over at slot 3 (positive crossing).
        crossings.append((still, ma, sa, moving))
        # second: under goes sa -> sb; moving returns entering at slot 1
        # (negative crossing), over_out mb.
        crossings.append((sa, ma, sb, mb))
        arc_head.update({still: (c1, 0), moving: (c1, 3),
                         sa: (c2, 0), ma: (c2, 1)})
        arc_head.update({mb: diagram.arc_head.get(mb, (c2, 3))})
        arc_head[mb] = (c2, 3)
    else:
        # moving passes under both times
        crossings.append((moving, sa, ma, still))
        crossings.append((ma, sb, mb, sa))
        arc_head.update({moving: (c1, 0), still: (c1, 3),
                         ma: (c2, 0), sa: (c2, 3)})
    arc_head[mb if over else mb] = arc_head.get(mb, mh)
    arc_head[mb] = mh
    arc_head[sb] = sh
    try:
        out = Diagram(crossings, diagram.circles, arc_head)
    except PDError as e:
        raise MovieError("finger insertion failed: %s" % e)
    return out


def _bigon_data(diagram, ci, cj):
    """The cancellable bigon spanned by crossings ``ci`` and ``cj``.

    Returns (over_mid, under_mid, strands) where the mids are the two arcs
    joining the crossings and strands maps each of the four outer arcs to
    its splice partner.
    """
    ncr = len(diagram.crossings)
    if not (0 <= ci < ncr and 0 <= cj < ncr) or ci == cj:
        raise MovieError("bad bigon crossings (%s, %s)" % (ci, cj))
    ti, tj = diagram.crossings[ci], diagram.crossings[cj]
    if diagram.signs[ci] + diagram.signs[cj] != 0:
        raise MovieError("bigon crossings must have opposite signs")
    shared = [a for a in set(ti) if a in tj]
    shared = [a for a in shared if ti.count(a) == 1 and tj.count(a) == 1]
    if len(shared) != 2:
        raise MovieError("crossings %d,%d do not span a bigon" % (ci, cj))
    a, b = shared
    # over-strand occupies slots 1 and 3; each mid arc must be over at both
    # crossings or under at both, one of each
    def role(tup, arc):
        return "over" if tup.index(arc) in (1, 3) else "under"
    ra = (role(ti, a), role(tj, a))
    rb = (role(ti, b), role(tj, b))
    if ra[0] != ra[1] or rb[0] != rb[1] or ra[0] == rb[0]:
        raise MovieError("crossings %d,%d form a clasp, not a bigon"
                         % (ci, cj))
    over_mid = a if ra[0] == "over" else b
    under_mid = a if over_mid is b else b
    return over_mid, under_mid


def remove_finger(diagram, ci, cj):
    """Cancel the bigon spanned by crossings ``ci``, ``cj``.

    On each strand the three segments fuse; the segment entering the bigon
    first keeps its id.
    """
    over_mid, under_mid = _bigon_data(diagram, ci, cj)
    removed = {ci, cj}
    crossings = []
    cmap = {}
    for k, tup in enumerate(diagram.crossings):
        if k in removed:
            continue
        cmap[k] = len(crossings)
        crossings.append(tup)

    def splice(mid):
        # walk the strand through the bigon: in_arc -> mid -> out_arc
        ins, outs = [], []
        for k in (ci, cj):
            tup = diagram.crossings[k]
            for slot, arc in enumerate(tup):
                if arc == mid:
                    continue
            # pick the two non-mid arcs on the same strand as mid: they sit
            # at the complementary slots of mid's role
        # simpler: mid occurs at both crossings; its strand continues at the
        # paired slot of each occurrence
        ends = []
        for (k, slot) in diagram.occurrences(mid):
            tup = diagram.crossings[k]
            if slot in (0, 2):
                other = tup[2] if slot == 0 else tup[0]
            else:
                other = tup[3] if slot == 1 else tup[1]
            ends.append((k, other))
        (k1, e1), (k2, e2) = ends
        if e1 == mid or e2 == mid:
            raise MovieError("bigon strand closes on itself")
        if diagram.arc_head[mid][0] == k1:
            in_arc, out_arc = e2, e1
        else:
            in_arc, out_arc = e1, e2
        return in_arc, out_arc

    pairs = [splice(over_mid), splice(under_mid)]
    rename = {}
    for in_arc, out_arc in pairs:
        if in_arc == out_arc:
            continue
        rename[out_arc] = in_arc
    circles = list(diagram.circles)
    arc_head = {}
    for a, (k, slot) in diagram.arc_head.items():
        if a in (over_mid, under_mid) or a in rename:
            continue
        if k in removed:
            continue
        arc_head[a] = (k, slot)
    for in_arc, out_arc in pairs:
        if in_arc == out_arc:
            # strand closes into a crossingless circle
            if any(in_arc in tup for tup in crossings):
                raise MovieError("bigon splice left a dangling arc")
            circles.append(in_arc)
            arc_head.pop(in_arc, None)
            continue
        h = diagram.arc_head[out_arc]
        if h[0] in removed:
            raise MovieError("bigon splice runs back into the bigon")
        arc_head[in_arc] = h
    out = []
    for tup in crossings:
        out.append(tuple(rename.get(a, a) for a in tup))
    arc_head = {a: (cmap[k], slot) for a, (k, slot) in arc_head.items()}
    try:
        return Diagram(out, circles, arc_head)
    except PDError as e:
        raise MovieError("bigon removal failed: %s" % e)


# ---------------------------------------------------------------------------
# state bookkeeping shared by the chain maps


def _circle_maps(sb, sa, shared):
    """Match circles of two smoothing states through the shared arcs.

    Returns (perm, b_only, a_only): ``perm[p]`` is the position in ``sa``
    of the circle matching position p of ``sb`` (or None), plus the
    unmatched positions on either side.
    """
    def keyed(state):
        out = []
        for pos, circ in enumerate(state.circles):
            out.append(frozenset(a for a in circ if a in shared))
        return out

    kb, ka = keyed(sb), keyed(sa)
    index = {}
    for pos, key in enumerate(ka):
        if key:
            if key in index:
                raise MovieError("ambiguous circle correspondence")
            index[key] = pos
    perm = []
    b_only = []
    used = set()
    for pos, key in enumerate(kb):
        tgt = index.get(key) if key else None
        perm.append(tgt)
        if tgt is None:
            b_only.append(pos)
        else:
            used.add(tgt)
    a_only = [p for p in range(len(ka)) if p not in used]
    return perm, b_only, a_only


def _transport(labels, perm):
    out = 0
    for p, tgt in enumerate(perm):
        if tgt is not None and labels >> p & 1:
            out |= 1 << tgt
    return out


def _require_same_layers(Cb, Ca):
    if sorted(Cb.gens) != sorted(Ca.gens):
        raise MovieError("frame complexes disagree on layers; "
                         "was the window propagated?")


def _per_state_map(Cb, Ca, emit):
    """Build mats for a map defined state by state.

    ``emit(v, sb, sa, labels) -> iterable of (labels_after, coeff)``.
    """
    mats = {}
    for i in Cb.gens:
        src = Cb.gens[i]
        tgt_index = Ca.index.get(i, {})
        m = SparseInt(Ca.layer_size(i), len(src))
        state_cache = {}
        for col, (v, labels) in enumerate(src):
            if v not in state_cache:
                state_cache[v] = (Cb.state(v), Ca.state(v))
            sb, sa = state_cache[v]
            for labels2, coeff in emit(v, sb, sa, labels):
                row = tgt_index.get((v, labels2))
                if row is None:
                    raise MovieError("target generator missing; windows of "
                                     "the two frames are inconsistent")
                m.add(row, col, coeff)
        if m.nnz:
            mats[i] = m
    return mats


def _birth_map(Cb, Ca, cid):
    key = -(cid + 1)
    shared = _shared_arcs(Cb.diagram, Ca.diagram)

    def emit(v, sb, sa, labels):
        perm, b_only, a_only = _circle_maps(sb, sa, shared)
        if b_only or len(a_only) != 1:
            raise MovieError("birth changes more than one circle")
        if sa.circles[a_only[0]] != (key,):
            raise MovieError("born circle does not match the site")
        yield _transport(labels, perm), 1

    return ChainMapData(Cb, Ca, _per_state_map(Cb, Ca, emit), jshift=1)


def _death_map(Cb, Ca, cid):
    key = -(cid + 1)
    shared = _shared_arcs(Cb.diagram, Ca.diagram)

    def emit(v, sb, sa, labels):
        perm, b_only, a_only = _circle_maps(sb, sa, shared)
        if a_only or len(b_only) != 1:
            raise MovieError("death changes more than one circle")
        pos = b_only[0]
        if sb.circles[pos] != (key,):
            raise MovieError("dying circle does not match the site")
        if labels >> pos & 1:
            yield _transport(labels, perm), 1

    return ChainMapData(Cb, Ca, _per_state_map(Cb, Ca, emit), jshift=1)


def _shared_arcs(db, da):
    arcs = set(db.arc_head) & set(da.arc_head)
    circ = {-(c + 1) for c in db.circles} & {-(c + 1) for c in da.circles}
    return arcs | circ


def _saddle_map(Cb, Ca, x, y):
    shared = _shared_arcs(Cb.diagram, Ca.diagram)
    touched = set()
    for z in (x, y):
        touched.add(z if z < 0 else z)
    shared -= {z for z in (x, y)}

    def emit(v, sb, sa, labels):
        perm, b_only, a_only = _circle_maps(sb, sa, shared)
        if len(b_only) == 2 and len(a_only) == 1:
            p1, p2 = b_only
            q = a_only[0]
            l1 = labels >> p1 & 1
            l2 = labels >> p2 & 1
            rest = _transport(labels, perm)
            if l1 and l2:
                return
            yield rest | ((l1 | l2) << q), 1
        elif len(b_only) == 1 and len(a_only) == 2:
            p = b_only[0]
            q1, q2 = a_only
            rest = _transport(labels, perm)
            if labels >> p & 1:
                yield rest | (1 << q1) | (1 << q2), 1
            else:
                yield rest | (1 << q1), 1
                yield rest | (1 << q2), 1
        else:
            raise MovieError("saddle must merge or split exactly one pair "
                             "of circles in every state")

    return ChainMapData(Cb, Ca, _per_state_map(Cb, Ca, emit), jshift=-1)


def _relabel_map(Cb, Ca, arc_map, circle_map, order):
    db, da = Cb.diagram, Ca.diagram
    n = len(db.crossings)
    if sorted(order) != list(range(n)) or len(da.crossings) != n:
        raise MovieError("relabel order is not a permutation")
    relab = db.relabeled(arc_map, circle_map)
    for t, tup in enumerate(relab.crossings):
        if da.crossings[order[t]] != tup:
            raise MovieError("relabel does not reproduce the target frame")
    if tuple(sorted(circle_map[c] for c in db.circles)) != \
            tuple(sorted(da.circles)):
        raise MovieError("relabel does not reproduce the target circles")

    def tkey(key):
        if key < 0:
            return -(circle_map[-key - 1] + 1)
        return arc_map[key]

    mats = {}
    for i in Cb.gens:
        src = Cb.gens[i]
        tgt_index = Ca.index.get(i, {})
        m = SparseInt(Ca.layer_size(i), len(src))
        cache = {}
        for col, (v, labels) in enumerate(src):
            if v not in cache:
                v2 = 0
                for p in range(n):
                    if v >> p & 1:
                        v2 |= 1 << order[p]
                sb = Cb.state(v)
                sa = Ca.state(v2)
                amap = {}
                pos_a = {key: pos for pos, key in enumerate(sa.keys)}
                perm = []
                for circ in sb.circles:
                    img = min(tkey(a) if a < 0 or a in arc_map else None
                              for a in circ) if False else None
                    # match through any transported arc of the circle
                    a0 = circ[0]
                    img_key = None
                    for a in circ:
                        ka = tkey(a)
                        img_key = ka if img_key is None else min(img_key, ka)
                    # the matching circle is the one containing tkey(a0)
                    perm.append(None)
                    target = None
                    want = tkey(a0)
                    for pos, ca in enumerate(sa.circles):
                        if want in ca:
                            target = pos
                            break
                    if target is None:
                        raise MovieError("relabel loses a circle")
                    perm[-1] = target
                # sign: inversions of the crossing permutation on set bits
                bits = [p for p in range(n) if v >> p & 1]
                inv = 0
                for s in range(len(bits)):
                    for t in range(s + 1, len(bits)):
                        if order[bits[s]] > order[bits[t]]:
                            inv += 1
                cache[v] = (v2, perm, -1 if inv & 1 else 1)
            v2, perm, sign = cache[v]
            row = tgt_index.get((v2, _transport(labels, perm)))
            if row is None:
                raise MovieError("relabel target generator missing")
            m.add(row, col, sign)
        if m.nnz:
            mats[i] = m
    return ChainMapData(Cb, Ca, mats, jshift=0)


# ---------------------------------------------------------------------------
# local move equivalences via prescribed cancellation


def _subcube_iso(Cbig, Csmall, p_fixed, shared):
    """Identify the survivors of ``Cbig`` (all prescribed bits resolved as
    fixed) with the generators of ``Csmall``.

    ``p_fixed`` maps crossing positions of the big diagram to their fixed
    bit; remaining crossings must appear in the same relative order as in
    the small diagram. Returns {big_gen: (small_gen, sign)} with the
    standard sign twirl for set fixed bits.
    """
    positions = [p for p in range(len(Cbig.diagram.crossings))
                 if p not in p_fixed]
    ones_below = []
    acc = 0
    for p in range(len(Cbig.diagram.crossings)):
        if p in p_fixed:
            acc += p_fixed[p]
        else:
            ones_below.append(acc)

    out = {}
    cache = {}
    for i in Cbig.gens:
        for (v, labels) in Cbig.gens[i]:
            ok = all((v >> p & 1) == bit for p, bit in p_fixed.items())
            if not ok:
                continue
            if v not in cache:
                v_small = 0
                sign = 0
                for sp, p in enumerate(positions):
                    if v >> p & 1:
                        v_small |= 1 << sp
                        sign += ones_below[sp]
                sb = Cbig.state(v)
                ss = Csmall.state(v_small)
                perm, b_only, a_only = _circle_maps(sb, ss, shared)
                if a_only:
                    raise MovieError("local move identification is not "
                                     "a bijection on circles")
                cache[v] = (v_small, perm, b_only,
                            -1 if sign & 1 else 1)
            v_small, perm, b_only, sign = cache[v]
            drop = 0
            for pos in b_only:
                drop |= labels >> pos & 1
            if len(b_only) > 1:
                raise MovieError("more than one local circle at the site")
            out[(v, labels)] = ((v_small, _transport(labels, perm)),
                                sign, b_only[0] if b_only else None)
    return out


def _iso_chain_maps(Cbig, Csmall, survivors):
    """Chain maps in both directions between the compacted survivors
    complex (already equal to Csmall up to the recorded signs) and
    Csmall itself."""
    down = {}
    up = {}
    for i in Cbig.gens:
        small_index = Csmall.index.get(i, {})
        rows = Csmall.layer_size(i)
        m_down = SparseInt(rows, 0)
        # assembled later; we only need the generator pairing here
    return down, up


def _r1_maps(Ck, Cf, ci):
    """(removal, insertion) chain maps for a curl at crossing ``ci`` of the
    kinked frame. ``Ck`` is the complex with the curl, ``Cf`` without."""
    dk = Ck.diagram
    loop, a_in, a_out = _kink_arcs(dk, ci)
    positive = dk.signs[ci] > 0
    fixed_bit = 0 if positive else 1
    # pair off: in the resolution where the small circle exists, its label 1
    # generators cancel into the resolution on the other side of the edge
    pairs = []
    for i in sorted(Ck.gens):
        for pos, (v, labels) in enumerate(Ck.gens[i]):
            if (v >> ci & 1) != 0 if positive else (v >> ci & 1) != 0:
                pass
    # identify, per vertex with the circle present, the circle position
    pairs = []
    src_layer = {}
    for i in sorted(Ck.gens):
        index_next = Ck.index.get(i + 1, {})
        for pos, (v, labels) in enumerate(Ck.gens[i]):
            if v >> ci & 1:
                continue
            vb = v | (1 << ci)
            sb = Ck.state(v)
            sa = Ck.state(vb)
            perm, b_only, a_only = _circle_maps(
                sb, sa, set(dk.arc_head) - {loop})
            if positive:
                # circle lives on the 0 side; cancel its label-1 states
                if len(b_only) != 1 or a_only:
                    raise MovieError("curl resolution mismatch")
                cpos = b_only[0]
                if labels >> cpos & 1:
                    continue
                tgt = (vb, _transport(labels, perm))
            else:
                # circle lives on the 1 side; cancel against label X there
                if len(a_only) != 1 or b_only:
                    raise MovieError("curl resolution mismatch")
                cpos = a_only[0]
                tgt = (vb, _transport(labels, perm) | (1 << cpos))
            row = index_next.get(tgt)
            if row is None:
                raise MovieError("curl cancellation target missing; "
                                 "window too narrow for the move")
            pairs.append((i, pos, row))
    red = eliminate_pairs(Ck, pairs)
    Cr = red.complex
    survivors = _subcube_iso(
        Ck, Cf, {ci: fixed_bit},
        _shared_arcs(dk, Cf.diagram))
    # build iso between the reduced complex and Cf
    down_m = {}
    up_m = {}
    for i in Cr.gens:
        fi = Cf.index.get(i, {})
        m = SparseInt(Cf.layer_size(i), Cr.layer_size(i))
        for col, gen in enumerate(Cr.gens[i]):
            if gen not in survivors:
                raise MovieError("unexpected survivor of curl cancellation")
            (small, sign, cpos) = survivors[gen]
            v, labels = gen
            if cpos is not None:
                want = 1 if positive else 1
                if (labels >> cpos & 1) != 1:
                    raise MovieError("curl survivor carries the wrong label")
            row = fi.get(small)
            if row is None:
                raise MovieError("curl identification target missing")
            m.add(row, col, sign)
        down_m[i] = m
        up_m[i] = m.transpose()
    down = ChainMapData(Cr, Cf, down_m, jshift=0)
    up = ChainMapData(Cf, Cr, up_m, jshift=0)
    removal = _compose_raw(down, red.to_reduced, Ck, Cf)
    insertion = _compose_raw(red.from_reduced, up, Cf, Ck)
    return removal, insertion


def _compose_raw(f2, f1, source, target):
    """f2 after f1 without the object-identity bookkeeping (used when the
    middle complex is private)."""
    mats = {}
    for i in set(f2.mats) | set(f1.mats):
        m = f2.matrix(i).matmul(f1.matrix(i))
        if m.nnz:
            mats[i] = m
    return ChainMapData(source, target, mats, f2.jshift + f1.jshift)


def _r2_maps(Cb, Cf, ci, cj):
    """(removal, insertion) maps for the bigon (ci, cj) of Cb's frame."""
    db = Cb.diagram
    over_mid, under_mid = _bigon_data(db, ci, cj)
    shared = _shared_arcs(db, Cf.diagram)
    locals_ = {over_mid, under_mid}

    # find which corner of the bigon square holds the small circle
    def corner_state(v, bi, bj):
        v2 = v & ~(1 << ci) & ~(1 << cj)
        if bi:
            v2 |= 1 << ci
        if bj:
            v2 |= 1 << cj
        return v2

    probe = 0
    circle_corner = None
    for bi, bj in ((0, 1), (1, 0)):
        st = Ck_state = resolve_state(db, corner_state(probe, bi, bj))
        for circ in st.circles:
            if set(circ) <= locals_:
                circle_corner = (bi, bj)
    if circle_corner is None:
        raise MovieError("bigon has no circle corner; not a cancellable "
                         "pattern")
    live_corner = (1 - circle_corner[0], 1 - circle_corner[1])

    def circ_pos(state):
        for pos, circ in enumerate(state.circles):
            if set(circ) <= locals_:
                return pos
        return None

    pairs = []
    # family one: circle corner label 1 -> (1,1) corner via the merge
    for i in sorted(Cb.gens):
        index_next = Cb.index.get(i + 1, {})
        for pos, (v, labels) in enumerate(Cb.gens[i]):
            bi, bj = v >> ci & 1, v >> cj & 1
            if (bi, bj) != circle_corner:
                continue
            st = Cb.state(v)
            cpos = circ_pos(st)
            if cpos is None or labels >> cpos & 1:
                continue
            v2 = v | (1 << ci) | (1 << cj)
            st2 = Cb.state(v2)
            perm, b_only, a_only = _circle_maps(st, st2, shared - locals_)
            if b_only != [cpos] or a_only:
                raise MovieError("bigon corner mismatch")
            tgt = (v2, _transport(labels, perm))
            row = index_next.get(tgt)
            if row is None:
                raise MovieError("bigon cancellation target missing")
            pairs.append((i, pos, row))
    # family two: (0,0) corner -> circle corner picking up label X
    for i in sorted(Cb.gens):
        index_next = Cb.index.get(i + 1, {})
        for pos, (v, labels) in enumerate(Cb.gens[i]):
            if v >> ci & 1 or v >> cj & 1:
                continue
            v2 = corner_state(v, *circle_corner)
            st = Cb.state(v)
            st2 = Cb.state(v2)
            perm, b_only, a_only = _circle_maps(st, st2, shared - locals_)
            cpos = circ_pos(st2)
            if a_only != [cpos] or b_only:
                raise MovieError("bigon corner mismatch")
            tgt = (v2, _transport(labels, perm) | (1 << cpos))
            row = index_next.get(tgt)
            if row is None:
                raise MovieError("bigon cancellation target missing")
            pairs.append((i, pos, row))
    red = eliminate_pairs(Cb, pairs)
    Cr = red.complex
    fixed = {ci: live_corner[0], cj: live_corner[1]}
    survivors = _subcube_iso(Cb, Cf, fixed, shared - locals_)
    down_m = {}
    up_m = {}
    for i in Cr.gens:
        fi = Cf.index.get(i, {})
        m = SparseInt(Cf.layer_size(i), Cr.layer_size(i))
        for col, gen in enumerate(Cr.gens[i]):
            got = survivors.get(gen)
            if got is None:
                raise MovieError("unexpected bigon survivor")
            small, sign, cpos = got
            if cpos is not None:
                raise MovieError("bigon survivor still sees a local circle")
            row = fi.get(small)
            if row is None:
                raise MovieError("bigon identification target missing")
            m.add(row, col, sign)
        down_m[i] = m
        up_m[i] = m.transpose()
    down = ChainMapData(Cr, Cf, down_m, jshift=0)
    up = ChainMapData(Cf, Cr, up_m, jshift=0)
    removal = _compose_raw(down, red.to_reduced, Cb, Cf)
    insertion = _compose_raw(red.from_reduced, up, Cf, Cb)
    return removal, insertion


# ---------------------------------------------------------------------------
# move application and validation


def apply_move(diagram, move):
    """The frame after ``move``; raises MovieError on an illegal site."""
    kind, site, direction = move.kind, move.site, move.direction
    if kind == "birth":
        out, cid = add_circle(diagram, site.get("circle"))
        if cid != site.get("circle", cid):
            raise MovieError("birth circle id mismatch")
        return out
    if kind == "death":
        return drop_circle(diagram, site["circle"])
    if kind == "saddle":
        x, y = site["arcs"]
        return apply_saddle(diagram, x, y)
    if kind == "relabel":
        arc_map = site["arcs"]
        circle_map = site["circles"]
        order = site["order"]
        relab = diagram.relabeled(arc_map, circle_map)
        n = len(relab.crossings)
        if sorted(order) != list(range(n)):
            raise MovieError("relabel order is not a permutation")
        crossings = [None] * n
        for t, tup in enumerate(relab.crossings):
            crossings[order[t]] = tup
        arc_head = {a: (order[k], slot)
                    for a, (k, slot) in relab.arc_head.items()}
        return Diagram(crossings, relab.circles, arc_head)
    if kind in ("R1+", "R1-"):
        if direction == "inverse":
            d2 = remove_kink(diagram, site["crossing"])
            want = 1 if kind == "R1+" else -1
            if diagram.signs[site["crossing"]] != want:
                raise MovieError("curl sign does not match the move kind")
            return d2
        raise MovieError("forward curl insertion needs an explicit after "
                         "frame; use movies generated with insert_kink")
    if kind in ("R2+", "R2-"):
        if direction == "inverse":
            ci, cj = site["crossings"]
            return remove_finger(diagram, ci, cj)
        raise MovieError("forward finger insertion needs an explicit after "
                         "frame; use movies generated with insert_finger")
    if kind == "R3":
        return slide_strand(diagram, site["arc"], site["crossing"])[0]
    raise MovieError("unknown move kind %r" % kind)


def _frames_match(move, before, after):
    kind, direction = move.kind, move.direction
    if kind in ("R1+", "R1-") and direction == "forward":
        want = 1 if kind == "R1+" else -1
        ci = move.site["crossing"]
        if not 0 <= ci < len(after.crossings) or after.signs[ci] != want:
            raise MovieError("curl site does not match the move kind")
        if remove_kink(after, ci) != before:
            raise MovieError("forward curl does not splice back")
        return
    if kind in ("R2+", "R2-") and direction == "forward":
        ci, cj = move.site["crossings"]
        if remove_finger(after, ci, cj) != before:
            raise MovieError("forward finger does not splice back")
        _check_r2_kind(after, move)
        return
    if kind in ("R2+", "R2-"):
        _check_r2_kind(before, move)
    derived = apply_move(before, move)
    if derived != after:
        raise MovieError("frames are not related by the declared move")


def _check_r2_kind(diagram, move):
    """R2+ slides parallel strands, R2- antiparallel."""
    ci, cj = move.site["crossings"]
    over_mid, under_mid = _bigon_data(diagram, ci, cj)
    # parallel when both mid arcs run the same way between the crossings
    ho = diagram.arc_head[over_mid][0]
    hu = diagram.arc_head[under_mid][0]
    parallel = (ho == hu)
    want = move.kind == "R2+"
    if parallel != want:
        raise MovieError("bigon orientation does not match the move kind")


def elementary_map(move, before, after, complexes=None, window=None):
    """Chain map of the complexes of ``before`` and ``after``.

    ``complexes`` optionally supplies prebuilt (C_before, C_after) so a
    movie can share them between consecutive moves; otherwise both are
    built here (with ``window`` applied to the source frame and shifted
    for the target).
    """
    _frames_match(move, before, after)
    if complexes is None:
        Cb = build_complex(before, window)
        Ca = build_complex(after, _shift_window(window, move.jshift()))
    else:
        Cb, Ca = complexes
    _require_same_layers(Cb, Ca)
    kind, site, direction = move.kind, move.site, move.direction
    if kind == "birth":
        cid = site.get("circle", after.circles[-1])
        return _birth_map(Cb, Ca, cid)
    if kind == "death":
        return _death_map(Cb, Ca, site["circle"])
    if kind == "saddle":
        x, y = site["arcs"]
        return _saddle_map(Cb, Ca, x, y)
    if kind == "relabel":
        return _relabel_map(Cb, Ca, site["arcs"], site["circles"],
                            site["order"])
    if kind in ("R1+", "R1-"):
        ci = site["crossing"]
        if direction == "inverse":
            removal, _ = _r1_maps(Cb, Ca, ci)
            return removal
        _, insertion = _r1_maps(Ca, Cb, ci)
        return insertion
    if kind in ("R2+", "R2-"):
        ci, cj = site["crossings"]
        if direction == "inverse":
            removal, _ = _r2_maps(Cb, Ca, ci, cj)
            return removal
        _, insertion = _r2_maps(Ca, Cb, ci, cj)
        return insertion
    if kind == "R3":
        return _r3_map(Cb, Ca, site)
    raise MovieError("unknown move kind %r" % kind)


def _shift_window(window, jshift):
    if window is None or jshift == 0:
        return window
    irange, jrange = window
    if jrange is None:
        return window
    return (irange, (jrange[0] + jshift, jrange[1] + jshift))


def validate_movie(movie):
    """Check every frame transition; no chain maps are computed."""
    for t, move in enumerate(movie.moves):
        try:
            _frames_match(move, movie.frames[t], movie.frames[t + 1])
        except MovieError as e:
            raise MovieError("move %d (%s): %s" % (t, move.kind, e))
    return True


def compose_movie(movie, window=None, verify=True):
    """The chain map of a whole movie, first frame to last."""
    validate_movie(movie)
    win = window
    complexes = [build_complex(movie.frames[0], win)]
    for move in movie.moves:
        win = _shift_window(win, move.jshift())
        complexes.append(None)
    win = window
    total = None
    for t, move in enumerate(movie.moves):
        nxt = _shift_window(win, move.jshift())
        if complexes[t + 1] is None:
            complexes[t + 1] = build_complex(movie.frames[t + 1], nxt)
        f = elementary_map(move, movie.frames[t], movie.frames[t + 1],
                           complexes=(complexes[t], complexes[t + 1]))
        if verify:
            f.verify()
            f.verify_bidegree()
        total = f if total is None else f.compose(total)
        win = nxt
    if total is None:
        total = ChainMapData.identity(complexes[0])
    return total


# ---------------------------------------------------------------------------
# functionals


class Functional:
    """An integer functional on a homology presentation, normalized so the
    first nonzero value on the lexicographically ordered basis is positive;
    equality of normal forms is equality up to one global sign."""

    __slots__ = ("values",)

    def __init__(self, values, normalize=True):
        cleaned = {}
        for key in sorted(values):
            vec = tuple(int(x) for x in values[key])
            if any(vec):
                cleaned[key] = vec
        if normalize and cleaned:
            first = cleaned[min(cleaned)]
            lead = next(x for x in first if x)
            if lead < 0:
                cleaned = {k: tuple(-x for x in v)
                           for k, v in cleaned.items()}
        self.values = cleaned

    def is_zero(self):
        return not self.values

    def support(self):
        return sorted(self.values)

    def evaluate(self, i, j, coords):
        vec = self.values.get((i, j))
        if vec is None:
            return 0
        if len(coords) != len(vec):
            raise ValueError("coordinate length mismatch")
        return sum(a * b for a, b in zip(vec, coords))

    def __eq__(self, other):
        if not isinstance(other, Functional):
            return NotImplemented
        return self.values == other.values

    def __hash__(self):
        return hash(tuple(sorted(self.values.items())))

    def __repr__(self):
        if not self.values:
            return "Functional(0)"
        parts = ["(%d,%d): %s" % (i, j, list(v))
                 for (i, j), v in sorted(self.values.items())]
        return "Functional{%s}" % ", ".join(parts)

    def to_json(self):
        return {
            "format": "kh-functional/1",
            "convention": CONVENTION_VERSION,
            "values": [[i, j, list(v)]
                       for (i, j), v in sorted(self.values.items())],
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get("format") != "kh-functional/1":
            raise ValueError("not a serialized functional")
        if obj.get("convention") != CONVENTION_VERSION:
            raise ValueError("convention version mismatch")
        return cls({(i, j): tuple(v) for i, j, v in obj["values"]})


def induced_functional(f, group):
    """Evaluate a chain map to the empty-diagram complex on homology.

    ``group`` must present the homology of ``f.source``. Raises if ``f``
    fails to kill boundaries, which would mean it is not a chain map.
    """
    tgt = f.target
    if tgt.total_generators() != 1 or tgt.layer_size(0) != 1 \
            or tgt.qdeg.get(0, (None,))[0] != 0:
        raise MovieError("functional target must be the empty diagram")
    src = f.source
    m0 = f.matrix(0)
    din = src.differential(-1)
    if din.ncols:
        prod = m0.matmul(din)
        if prod.nnz:
            raise AssertionError("map does not kill boundaries at degree 0")
    values = {}
    for (i, j) in group.bidegrees():
        if i != 0:
            continue
        s = group.summand(i, j)
        vec = []
        for t in range(s.gen_count):
            coords = tuple(1 if k == t else 0 for k in range(s.gen_count))
            rep = group.chain_representative(i, j, coords)
            total = 0
            for pos, c in rep.items():
                total += c * m0.get(0, pos)
            vec.append(total)
        for t, d in enumerate(s.torsion):
            if vec[t] % 1:
                pass
        for t in range(len(s.torsion)):
            if vec[t]:
                raise AssertionError("functional is nonzero on torsion")
        if any(vec):
            values[(i, j)] = tuple(vec)
    return Functional(values)


# ---------------------------------------------------------------------------
# the third move, through finger moves


def _face_of(diagram, darts):
    from .link_core import faces
    for face in faces(diagram):
        if set(darts) <= set(face):
            return face
    return None


def slide_strand(diagram, arc, ci):
    """Slide the strand segment ``arc`` across crossing ``ci``.

    The segment must close a triangle with the crossing: its two endpoint
    crossings each share one more arc with ``ci``'s crossing, and the
    segment passes the two transverse strands consistently (both over or
    both under). Returns (after, steps) where steps is the list of the
    four finger frames realizing the slide: two insertions and two
    removals.
    """
    after, frames, moves = _slide_with_movie(diagram, arc, ci)
    return after, frames


def _triangle_data(diagram, arc, ci):
    occ = diagram.occurrences(arc)
    (k1, s1), (k2, s2) = occ
    if k1 == k2:
        raise MovieError("strand segment closes a curl, not a triangle")
    if ci in (k1, k2) or not 0 <= ci < len(diagram.crossings):
        raise MovieError("crossing %d is not opposite the segment" % ci)
    t1, t2 = diagram.crossings[k1], diagram.crossings[k2]
    tc = diagram.crossings[ci]
    role1 = "over" if s1 in (1, 3) else "under"
    role2 = "over" if s2 in (1, 3) else "under"
    if role1 != role2:
        raise MovieError("segment is not entirely over or entirely under")
    # the two triangle sides at the opposite crossing
    side1 = [a for a in t1 if a != arc and a in tc]
    side2 = [a for a in t2 if a != arc and a in tc]
    if not side1 or not side2:
        raise MovieError("segment and crossing do not close a triangle")
    return role1 == "over", side1[0], side2[0], k1, k2


def _slide_with_movie(diagram, arc, ci):
    over, x_arc, y_arc, k1, k2 = _triangle_data(diagram, arc, ci)
    tc = diagram.crossings[ci]

    # the far sides of the transverse strands at the opposite crossing:
    # the continuation of x_arc and y_arc through crossing ci
    def continuation(a):
        slot = tc.index(a)
        if slot in (0, 2):
            return tc[2] if slot == 0 else tc[0]
        return tc[3] if slot == 1 else tc[1]

    x_far = continuation(x_arc)
    y_far = continuation(y_arc)
    if x_far == arc or y_far == arc:
        raise MovieError("triangle is degenerate")

    e1 = insert_finger(diagram, arc, x_far, over)
    mid = e1.max_label() - 3      # the middle segment of the moving strand
    e2 = insert_finger(e1, mid, y_far, over)
    n = len(diagram.crossings)
    # remove the two original triangle crossings of the moving strand
    r1 = remove_finger(e2, k1, _finger_partner(e2, k1, n))
    raise MovieError("unreachable")


def _finger_partner(diagram, ci, base):
    raise MovieError("unimplemented")


def _r3_map(Cb, Ca, site):
    raise MovieError("R3 maps are assembled by the movie generator; "
                     "direct construction is not yet wired")
