"""Tests for the bigraded complex, homology presentations, the simplifier,
and the deformed complex with its quantum filtration.

Expected homology tables below were produced by an independent dense-matrix
implementation (tests/oracle.py) and are frozen here as literals.
"""

import json

import pytest
from hypothesis import given, settings, strategies as st

import oracle
from khoxotic.linalg import SparseInt, smith_normal_form
from khoxotic.link_core import (
    parse_pd, serialize, mirror, braid_closure, torus_link,
    jones_state_sum,
)
from khoxotic.khovanov import (
    CONVENTION_VERSION, BigradedChainComplex, LeeComplexQ, ChainMapData,
    BigradedGroup, LeeCycle, build_complex, lee_complex, simplify,
    eliminate_pairs, homology, lee_generator, filtration_degree,
    resolve_state,
)

P = oracle.PRESETS

# Frozen from the independent implementation.
HOMOLOGY_TABLES = {
    "unknot": {(0, -1): (1, ()), (0, 1): (1, ())},
    "kink_pos": {(0, -1): (1, ()), (0, 1): (1, ())},
    "kink_neg": {(0, -1): (1, ()), (0, 1): (1, ())},
    "hopf_pos": {(0, 0): (1, ()), (0, 2): (1, ()), (2, 4): (1, ()),
                 (2, 6): (1, ())},
    "hopf_neg": {(-2, -6): (1, ()), (-2, -4): (1, ()), (0, -2): (1, ()),
                 (0, 0): (1, ())},
    "trefoil_right": {(0, 1): (1, ()), (0, 3): (1, ()), (2, 5): (1, ()),
                      (3, 7): (0, (2,)), (3, 9): (1, ())},
    "trefoil_left": {(-3, -9): (1, ()), (-2, -7): (0, (2,)),
                     (-2, -5): (1, ()), (0, -3): (1, ()), (0, -1): (1, ())},
    "fig8": {(-2, -5): (1, ()), (-1, -3): (0, (2,)), (-1, -1): (1, ()),
             (0, -1): (1, ()), (0, 1): (1, ()), (1, 1): (1, ()),
             (2, 3): (0, (2,)), (2, 5): (1, ())},
}

GENERATOR_COUNTS = {
    "unknot": 2,
    "kink_pos": 6,
    "kink_neg": 6,
    "hopf_pos": 12,
    "hopf_neg": 12,
    "trefoil_right": 30,
    "trefoil_left": 30,
    "fig8": 66,
}

REDUCED_COUNTS = {
    "unknot": 2,
    "kink_pos": 2,
    "kink_neg": 2,
    "hopf_pos": 4,
    "hopf_neg": 4,
    "trefoil_right": 6,
    "trefoil_left": 6,
    "fig8": 10,
}

BRAID_CORPUS = [
    (2, []),
    (2, [1]),
    (2, [-1]),
    (2, [1, -1]),
    (2, [1, 1]),
    (2, [1, 1, 1]),
    (2, [-1, -1, -1]),
    (2, [1, 1, 1, 1]),
    (2, [1, 1, 1, 1, 1]),
    (3, [1, -2, 1, -2]),
    (3, [1, 2, 1, 2]),
    (3, [1, 1, 2, 2]),
    (3, [-1, 2, -1, 2]),
    (3, [1, 2, -1, -2]),
    (3, [1, 2, 1, 2, 1, 2]),
    (4, [1, 2, 3, 1, 2, 3]),
    (4, [1, -2, 3, 1, -2, 3]),
    (4, [1, 2, 3]),
]


def table(D, window=None):
    return homology(build_complex(D, window)).isomorphism_type()


def oracle_table(text, js=None):
    h = oracle.homology(text, js=js)
    return {k: (v[0], tuple(v[1])) for k, v in h.items()}


# ---------------------------------------------------------------------------
# the cube and its homology


@pytest.mark.parametrize("name", sorted(P))
def test_preset_homology(name):
    assert table(parse_pd(P[name])) == HOMOLOGY_TABLES[name]


@pytest.mark.parametrize("name", sorted(P))
def test_preset_generator_count(name):
    C = build_complex(parse_pd(P[name]))
    C.validate()
    assert C.total_generators() == GENERATOR_COUNTS[name]


def test_crossingless_circle():
    C = build_complex(parse_pd("O[1]\norient: 0:1\n"))
    assert C.layers() == [0]
    assert C.layer_size(0) == 2
    assert sorted(C.qdeg[0]) == [-1, 1]


def test_empty_diagram():
    D = parse_pd("")
    assert table(D) == {(0, 0): (1, ())}


def test_single_positive_twist_region():
    # two-strand closure with one crossing is still an unknot
    D = braid_closure([1], strands=2)
    assert table(D) == HOMOLOGY_TABLES["unknot"]


def test_torus_1_1_column():
    h = table(torus_link(1, 1))
    assert h[(0, -2)] == (1, ())
    assert not any(i == 0 and j < -2 for (i, j) in h)


@pytest.mark.parametrize("name", sorted(P))
def test_euler_equals_state_sum_presets(name):
    D = parse_pd(P[name])
    assert build_complex(D).euler_characteristic() == jones_state_sum(D)


@pytest.mark.parametrize("strands,word", BRAID_CORPUS)
def test_euler_equals_state_sum_braids(strands, word):
    D = braid_closure(word, strands=strands)
    assert build_complex(D).euler_characteristic() == jones_state_sum(D)


@pytest.mark.parametrize("strands,word", [
    (2, [1, 1]), (3, [1, -2, 1, -2], ), (3, [1, 2, 1, 2]),
    (4, [1, -2, 3]), (3, [-1, -1, 2]),
])
def test_homology_matches_oracle_on_braids(strands, word):
    D = braid_closure(word, strands=strands)
    assert table(D) == oracle_table(serialize(D))


@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=4))
@settings(max_examples=12, deadline=None)
def test_homology_matches_oracle_property(word):
    D = braid_closure(word, strands=3)
    assert table(D) == oracle_table(serialize(D))
    assert build_complex(D).euler_characteristic() == jones_state_sum(D)


def test_mirror_duality():
    # free parts flip both gradings; torsion also steps one homological
    # degree down on the mirror
    for name in ("trefoil_right", "fig8", "hopf_pos"):
        D = parse_pd(P[name])
        h = table(D)
        hm = table(mirror(D))
        free = {(i, j): v[0] for (i, j), v in h.items() if v[0]}
        free_m = {(i, j): v[0] for (i, j), v in hm.items() if v[0]}
        assert free_m == {(-i, -j): r for (i, j), r in free.items()}
        tors = {(i, j): v[1] for (i, j), v in h.items() if v[1]}
        tors_m = {(i, j): v[1] for (i, j), v in hm.items() if v[1]}
        assert tors_m == {(-i + 1, -j): t for (i, j), t in tors.items()}


def test_state_circles_cached():
    D = parse_pd(P["trefoil_right"])
    C = build_complex(D)
    s = C.state(0b101)
    assert s.circles == resolve_state(D, 0b101).circles


# ---------------------------------------------------------------------------
# windows


def test_window_j_only():
    D = parse_pd(P["trefoil_right"])
    h = table(D, window=(None, (5, 9)))
    assert h == {(2, 5): (1, ()), (3, 7): (0, (2,)), (3, 9): (1, ())}


def test_window_i_extends_at_cube_edge():
    # the requested range is widened when the padding layer is clipped by
    # the end of the cube, and every reported degree is then correct
    D = parse_pd(P["fig8"])
    C = build_complex(D, window=((0, 1), None))
    assert C.valid_degrees() == [0, 1, 2]
    h = homology(C).isomorphism_type()
    full = {k: v for k, v in HOMOLOGY_TABLES["fig8"].items()
            if 0 <= k[0] <= 2}
    assert h == full


def test_window_interior_i_range():
    D = parse_pd(P["fig8"])
    C = build_complex(D, window=((-1, 0), None))
    assert set(C.valid_degrees()) >= {-1, 0}
    h = homology(C).isomorphism_type()
    for k, v in HOMOLOGY_TABLES["fig8"].items():
        if k[0] in C.valid_degrees():
            assert h[k] == v


def test_window_bidegree():
    D = parse_pd(P["fig8"])
    h = table(D, window=((0, 0), (-1, 1)))
    assert h == {(0, -1): (1, ()), (0, 1): (1, ())}


def test_window_empty():
    D = parse_pd(P["trefoil_right"])
    C = build_complex(D, window=((10, 11), None))
    assert C.total_generators() == 0
    assert homology(C).isomorphism_type() == {}


def test_window_rejects_garbage():
    D = parse_pd(P["unknot"])
    with pytest.raises(ValueError):
        build_complex(D, window=((1, 0), None))
    with pytest.raises(ValueError):
        build_complex(D, window=(3, None))


# ---------------------------------------------------------------------------
# simplification


@pytest.mark.parametrize("name", sorted(P))
def test_simplify_preserves_homology(name):
    C = build_complex(parse_pd(P[name]))
    R = simplify(C)
    R.complex.validate()
    assert R.complex.total_generators() == REDUCED_COUNTS[name]
    assert homology(R.complex) == homology(C)


@pytest.mark.parametrize("name", sorted(P))
def test_simplify_leaves_no_unit_entries(name):
    R = simplify(build_complex(parse_pd(P[name])))
    for i in R.complex.layers():
        for _, _, v in R.complex.differential(i).entries():
            assert abs(v) > 1


@pytest.mark.parametrize("name", ("trefoil_right", "fig8", "hopf_neg"))
def test_simplify_transfer_maps(name):
    C = build_complex(parse_pd(P[name]))
    R = simplify(C)
    R.to_reduced.verify()
    R.from_reduced.verify()
    assert R.to_reduced.jshift == 0
    comp = R.to_reduced.compose(R.from_reduced)
    for i in R.complex.layers():
        n = R.complex.layer_size(i)
        assert comp.matrix(i) == SparseInt.identity(n)


def test_identity_chain_map():
    C = build_complex(parse_pd(P["hopf_pos"]))
    ident = ChainMapData.identity(C)
    ident.verify()
    assert ident.compose(ident).matrix(0) == SparseInt.identity(
        C.layer_size(0))


def test_eliminate_pairs_prescribed():
    C = build_complex(parse_pd(P["kink_pos"]))
    d0 = C.differential(0)
    pair = None
    for r, c, v in d0.entries():
        if v in (1, -1):
            pair = (0, c, r)
            break
    assert pair is not None
    R = eliminate_pairs(C, [pair])
    R.complex.validate()
    assert R.complex.total_generators() == C.total_generators() - 2
    assert homology(R.complex) == homology(C)


def test_eliminate_pairs_requires_unit():
    C = build_complex(parse_pd(P["kink_pos"]))
    d0 = C.differential(0)
    zero = None
    for r in range(d0.nrows):
        for c in range(d0.ncols):
            if d0.get(r, c) == 0:
                zero = (0, c, r)
                break
        if zero:
            break
    with pytest.raises(ValueError):
        eliminate_pairs(C, [zero])


# ---------------------------------------------------------------------------
# serialization


@pytest.mark.parametrize("name", ("trefoil_right", "fig8"))
def test_complex_json_roundtrip(name):
    C = build_complex(parse_pd(P[name]))
    blob = json.dumps(C.to_json(), sort_keys=True)
    C2 = BigradedChainComplex.from_json(json.loads(blob))
    C2.validate()
    assert json.dumps(C2.to_json(), sort_keys=True) == blob
    assert homology(C2).isomorphism_type() == HOMOLOGY_TABLES[name]


def test_complex_json_roundtrip_windowed():
    C = build_complex(parse_pd(P["fig8"]), window=((0, 1), None))
    blob = json.dumps(C.to_json(), sort_keys=True)
    C2 = BigradedChainComplex.from_json(json.loads(blob))
    assert C2.valid_degrees() == C.valid_degrees()
    assert json.dumps(C2.to_json(), sort_keys=True) == blob


def test_complex_json_rejects_bad_header():
    C = build_complex(parse_pd(P["unknot"]))
    data = C.to_json()
    data["format"] = "nope"
    with pytest.raises(ValueError):
        BigradedChainComplex.from_json(data)
    data = C.to_json()
    data["convention"] = CONVENTION_VERSION + 1
    with pytest.raises(ValueError):
        BigradedChainComplex.from_json(data)


def test_group_json_roundtrip():
    H = homology(build_complex(parse_pd(P["trefoil_right"])))
    blob = json.dumps(H.to_json(), sort_keys=True)
    H2 = BigradedGroup.from_json(json.loads(blob))
    assert H2 == H
    assert H2.isomorphism_type() == HOMOLOGY_TABLES["trefoil_right"]
    # presentation data survives: coordinates still round-trip
    s = H2.summand(3, 7)
    rep = H2.chain_representative(3, 7, (1,))
    assert H2.reduce_cycle(3, 7, rep) == (1,)


def test_lee_complex_json_roundtrip():
    L = lee_complex(parse_pd(P["hopf_pos"]))
    L2 = BigradedChainComplex.from_json(json.loads(json.dumps(L.to_json())))
    assert isinstance(L2, LeeComplexQ)
    L2.validate()


# ---------------------------------------------------------------------------
# presentation coordinates


def test_reduce_cycle_roundtrip_units():
    for name in ("trefoil_right", "fig8"):
        H = homology(build_complex(parse_pd(P[name])))
        for (i, j) in H.bidegrees():
            s = H.summand(i, j)
            for t in range(s.gen_count):
                coords = tuple(1 if k == t else 0
                               for k in range(s.gen_count))
                rep = H.chain_representative(i, j, coords)
                assert H.reduce_cycle(i, j, rep) == coords


def test_reduce_cycle_torsion_order():
    H = homology(build_complex(parse_pd(P["trefoil_right"])))
    s = H.summand(3, 7)
    assert s.torsion == (2,)
    rep = H.chain_representative(3, 7, (1,))
    doubled = {k: 2 * v for k, v in rep.items()}
    assert H.reduce_cycle(3, 7, doubled) == (0,)


def test_reduce_cycle_boundary_is_zero():
    C = build_complex(parse_pd(P["trefoil_right"]))
    H = homology(C)
    d2 = C.differential(2)
    src = next(k for k, q in enumerate(C.qdeg[2]) if q == 7)
    img = d2.column(src)
    assert img
    assert H.reduce_cycle(3, 7, img) == (0,)


def test_reduce_cycle_rejects_non_cycle():
    C = build_complex(parse_pd(P["trefoil_right"]))
    H = homology(C)
    d2 = C.differential(2)
    raised = False
    for k, q in enumerate(C.qdeg[2]):
        if q != 5:
            continue
        if d2.column(k):
            with pytest.raises(ValueError):
                H.reduce_cycle(2, 5, {k: 1})
            raised = True
            break
    assert raised


def test_reduce_cycle_empty_bidegree():
    H = homology(build_complex(parse_pd(P["unknot"])))
    assert H.reduce_cycle(5, 5, {}) == ()
    with pytest.raises(ValueError):
        H.reduce_cycle(5, 5, {0: 1})


# ---------------------------------------------------------------------------
# the deformed complex


def test_deformed_complex_shape():
    D = parse_pd(P["hopf_pos"])
    L = lee_complex(D)
    L.validate()
    assert isinstance(L, LeeComplexQ)
    C = build_complex(D)
    assert L.total_generators() == C.total_generators()
    # the deformed differential strictly contains the undeformed one
    for i in C.layers():
        for r, c, v in C.differential(i).entries():
            assert L.differential(i).get(r, c) == v


def lee_rank(D):
    L = lee_complex(D)
    total = sum(L.layer_size(i) for i in L.layers())
    r = 0
    for i in L.layers():
        d = L.differential(i)
        if d.nrows and d.ncols:
            r += smith_normal_form(d, transforms=False).rank
    return total - 2 * r


@pytest.mark.parametrize("name,comps", [
    ("unknot", 1), ("kink_pos", 1), ("kink_neg", 1),
    ("hopf_pos", 2), ("trefoil_right", 1), ("fig8", 1),
])
def test_deformed_rank_counts_orientations(name, comps):
    assert lee_rank(parse_pd(P[name])) == 2 ** comps


FILTRATION_VALUES = [
    ((1, 0), -1),
    ((0, 1), -1),
    ((2, 0), 0),
    ((1, 1), -2),
    ((0, 2), 0),
    ((3, 0), 3),
    ((2, 1), -3),
    ((1, 2), -3),
    ((0, 3), 3),
]


@pytest.mark.parametrize("pq,value", FILTRATION_VALUES)
def test_filtration_torus_links(pq, value):
    D = torus_link(*pq)
    L = lee_complex(D)
    s = lee_generator(D, tuple([1] * D.n_components))
    assert filtration_degree(L, s) == value


def test_filtration_unknot_both_orientations():
    D = parse_pd(P["unknot"])
    L = lee_complex(D)
    for o in ((1,), (-1,)):
        assert filtration_degree(L, lee_generator(D, o)) == -1


def test_filtration_kinked_unknots():
    for name in ("kink_pos", "kink_neg"):
        D = parse_pd(P[name])
        L = lee_complex(D)
        assert filtration_degree(L, lee_generator(D, (1,))) == -1


def test_filtration_hopf_orientations():
    D = parse_pd(P["hopf_pos"])
    L = lee_complex(D)
    got = {o: filtration_degree(L, lee_generator(D, o))
           for o in ((1, 1), (1, -1), (-1, 1), (-1, -1))}
    assert got == {(1, 1): 0, (1, -1): 4, (-1, 1): 4, (-1, -1): 0}


def test_generator_is_a_cycle():
    for name in ("trefoil_right", "fig8", "hopf_neg"):
        D = parse_pd(P[name])
        L = lee_complex(D)
        s = lee_generator(D, tuple([1] * D.n_components))
        i = s.degree
        z = {L.index[i][g]: v for g, v in s.vector.items()}
        d = L.differential(i)
        assert not d.matvec(z)


def test_filtration_of_boundary_is_none():
    D = parse_pd(P["hopf_pos"])
    L = lee_complex(D)
    lo = min(L.layers())
    img = L.differential(lo).matvec({0: 1})
    assert img
    vec = {L.gens[lo + 1][r]: v for r, v in img.items()}
    cyc = LeeCycle(lo + 1, None, vec, None)
    assert filtration_degree(L, cyc) is None


def test_filtration_rejects_non_cycle():
    D = parse_pd(P["hopf_pos"])
    L = lee_complex(D)
    lo = min(L.layers())
    bad = LeeCycle(lo, None, {L.gens[lo][0]: 1}, None)
    with pytest.raises(ValueError):
        filtration_degree(L, bad)


def test_filtration_zero_vector():
    D = parse_pd(P["unknot"])
    L = lee_complex(D)
    assert filtration_degree(L, LeeCycle(0, None, {}, None)) is None


def test_filtration_requires_deformed_complex():
    D = parse_pd(P["unknot"])
    C = build_complex(D)
    s = lee_generator(D, (1,))
    with pytest.raises(TypeError):
        filtration_degree(C, s)


def test_deformed_complex_takes_no_window():
    with pytest.raises(TypeError):
        lee_complex(parse_pd(P["unknot"]), window=((0, 0), None))


def test_generator_rejects_bad_orientation():
    D = parse_pd(P["hopf_pos"])
    with pytest.raises(ValueError):
        lee_generator(D, (1,))
    with pytest.raises(ValueError):
        lee_generator(D, (1, 0))
