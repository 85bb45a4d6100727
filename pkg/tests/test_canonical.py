from app.core.canonical import canonical_form, canonical_key, digest, match
from app.core.gna import SubGna


def _path(ids, states=("a", "b", "c"), seed=None):
    """Directed path over ``ids`` with the given states."""
    u, v, w = ids
    return SubGna(
        states={u: states[0], v: states[1], w: states[2]},
        links={u: [(v, "*")], v: [(w, "*")], w: []},
        seeds=() if seed is None else (seed,),
    )


def test_key_ignores_node_ids():
    assert canonical_key(_path((0, 1, 2))) == canonical_key(_path((12, 7, 30)))


def test_key_sees_states_and_seeds():
    base = canonical_key(_path((0, 1, 2)))
    assert canonical_key(_path((0, 1, 2), states=("a", "b", "b"))) != base
    assert canonical_key(_path((0, 1, 2), seed=1)) != base
    assert canonical_key(_path((0, 1, 2), seed=1)) != canonical_key(_path((0, 1, 2), seed=0))


def test_key_sees_link_direction_and_label():
    a = SubGna(states={0: "x", 1: "x"}, links={0: [(1, "*")], 1: []})
    b = SubGna(states={0: "x", 1: "x"}, links={0: [], 1: [(0, "*")]})
    c = SubGna(states={0: "x", 1: "x"}, links={0: [(1, "p")], 1: []})
    assert canonical_key(a) == canonical_key(b)
    assert canonical_key(a) != canonical_key(c)


def test_exact_orders_align_isomorphic_nodes():
    first = _path((0, 1, 2), states=("a", "a", "a"))
    second = _path((9, 5, 4), states=("a", "a", "a"))
    f1, f2 = canonical_form(first), canonical_form(second)
    assert f1.exact and f2.exact
    # position i in both orders plays the same role on the path
    roles = {0: "head", 1: "middle", 2: "tail"}
    other = {9: "head", 5: "middle", 4: "tail"}
    assert [roles[v] for v in f1.order] == [other[v] for v in f2.order]


def test_symmetric_structure_falls_back_past_the_limit():
    ring = SubGna(
        states={v: "0" for v in range(6)},
        links={v: [((v + 1) % 6, "*"), ((v - 1) % 6, "*")] for v in range(6)},
    )
    form = canonical_form(ring, limit=10)
    assert not form.exact
    assert form.key.startswith("wl:")
    assert canonical_form(ring).exact


def test_empty_sub_has_a_key():
    assert canonical_key(SubGna()).startswith("x:")


def test_match_finds_isomorphism():
    a = _path((0, 1, 2))
    b = _path((7, 8, 9))
    assert match(a, b) == {0: 7, 1: 8, 2: 9}
    assert match(a, _path((7, 8, 9), states=("a", "c", "b"))) is None


def test_digest_is_order_independent():
    assert digest({"b": 1, "a": [1, 2]}) == digest({"a": [1, 2], "b": 1})
    assert digest({"a": 1}) != digest({"a": 2})
    assert len(digest("x")) == 64
