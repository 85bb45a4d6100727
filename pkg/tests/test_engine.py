import pytest

from app.core.errors import (
    DomainError,
    LookupFailure,
    ParameterError,
    ReplacementMissError,
    SchemaError,
    StaleEventError,
)
from app.core.families import FamilyExtraction
from app.core.gna import (
    GnaConfig,
    ReplacementMechanism,
    RewriteEvent,
    SubGna,
    embed,
    extract,
    replace,
    run,
    step,
)
from app.core.rng import make_rng
from app.core.zoo import AttachNewcomer, ba_growth


def _chain():
    """0->1->2->4 with outside nodes 3->0 and 4->1."""
    return GnaConfig(
        states={0: "a", 1: "b", 2: "c", 3: "x", 4: "y"},
        links={0: [(1, "*")], 1: [(2, "*")], 2: [(4, "*")], 3: [(0, "*")], 4: [(1, "*")]},
    )


def test_add_node_assigns_fresh_ids():
    cfg = GnaConfig()
    assert cfg.add_node("0") == 0
    assert cfg.add_node("0") == 1
    assert cfg.next_id == 2


def test_undirected_links_are_symmetric():
    cfg = GnaConfig(states={0: "0", 1: "0"}, directed=False)
    cfg.add_link(0, 1)
    assert cfg.has_link(0, 1) and cfg.has_link(1, 0)
    assert cfg.degree(0) == 1
    assert cfg.link_count() == 2


def test_asymmetric_undirected_config_rejected():
    with pytest.raises(SchemaError):
        GnaConfig(states={0: "0", 1: "0"}, links={0: [(1, "*")]}, directed=False)


def test_link_to_missing_node_rejected():
    with pytest.raises(SchemaError):
        GnaConfig(states={0: "0"}, links={0: [(5, "*")]})
    cfg = GnaConfig(states={0: "0"})
    with pytest.raises(LookupFailure):
        cfg.add_link(0, 9)


def test_in_links_carry_source_and_state():
    cfg = GnaConfig(states={0: "a", 1: "b", 2: "c"}, links={0: [(2, "p")], 1: [(2, "q")]})
    assert cfg.in_links(2) == [(0, "p"), (1, "q")]
    assert cfg.in_neighbors(2) == {0, 1}


def test_embed_drops_bridges_of_uncorresponded_nodes():
    cfg = _chain()
    old = cfg.subgna([0, 1, 2], seeds=(0,))
    assert sorted(old.bridges) == [(2, 4, "*"), (3, 0, "*"), (4, 1, "*")]
    assert old.boundary() == {3, 4}
    new = SubGna(states={0: "a", 1: "b", 5: "d"}, links={0: [(1, "*")], 1: [(5, "*")], 5: []}, next_id=5)
    out = embed(cfg, RewriteEvent(old=old, new=new, correspondence={0: 0, 1: 1}))

    assert sorted(out.states) == [0, 1, 3, 4, 5]
    assert out.canonical()[3] == ((0, 1, "*"), (1, 5, "*"), (3, 0, "*"), (4, 1, "*"))
    assert out.in_neighbors(4) == set()
    assert out.in_neighbors(1) == {0, 4}
    assert out.time == 1
    assert out.next_id == 6
    # the input configuration is untouched
    assert 2 in cfg


def test_embed_reroutes_bridges_through_correspondence():
    cfg = _chain()
    old = cfg.subgna([0])
    new = SubGna(states={7: "a"}, links={7: []}, next_id=cfg.next_id)
    out = embed(cfg, RewriteEvent(old=old, new=new, correspondence={0: 7}))
    assert out.has_link(3, 7)
    assert out.has_link(7, 1)
    assert 0 not in out


def test_embed_rejects_stale_event():
    cfg = _chain()
    old = cfg.subgna([2])
    event = RewriteEvent(old=old, new=SubGna(next_id=cfg.next_id), correspondence={})
    cfg = embed(cfg, event)
    with pytest.raises(StaleEventError):
        embed(cfg, event)


def test_identity_event_only_advances_time():
    cfg = _chain()
    out = embed(cfg, RewriteEvent.identity(cfg.subgna([1, 2], seeds=(1,))))
    assert out.time == cfg.time + 1
    assert out.canonical()[2:] == cfg.canonical()[2:]


def test_correspondence_must_be_injective():
    sub = SubGna(states={0: "a", 1: "a"}, links={0: [], 1: []})
    with pytest.raises(SchemaError):
        RewriteEvent(old=sub, new=SubGna(states={5: "a"}, links={5: []}), correspondence={0: 5, 1: 5})


class _Never(ReplacementMechanism):
    family = "never"

    def rewrite(self, sub, rng):
        return None


def test_replacement_miss_raises_unless_identity_fallback(rng):
    sub = _chain().subgna([0], seeds=(0,))
    with pytest.raises(ReplacementMissError):
        replace(sub, _Never(), rng)
    fallback = _Never()
    fallback.identity_fallback = True
    assert replace(sub, fallback, rng).is_identity


def test_extract_from_empty_config_is_domain_error(rng):
    with pytest.raises(DomainError):
        extract(GnaConfig(), FamilyExtraction("uniform"), rng)


def test_expanding_extraction_adds_in_neighbors(rng):
    cfg = GnaConfig(states={0: "a", 1: "b"}, links={0: [(1, "*")]})
    e = FamilyExtraction("uniform", expand=True)
    for _ in range(50):
        sub = extract(cfg, e, rng)
        if sub.seeds == (1,):
            assert set(sub.states) == {0, 1}
            break
    else:
        pytest.fail("node 1 was never selected")


def test_out_of_bounds_mechanism_parameter():
    with pytest.raises(ParameterError):
        FamilyExtraction("degree", {"alpha": 11.0})


def test_step_reports_quiescence():
    model = ba_growth(n_final=2)
    cfg, event = step(model.initial, model.extraction, model.replacement, make_rng(1))
    assert event is None
    assert cfg is model.initial


def test_ba_growth_run_shape():
    model = ba_growth(n_final=50)
    traj = run(model.initial, model.extraction, model.replacement, 48, make_rng(3))
    final = traj.last()
    assert len(final) == 50
    # undirected links are stored once per direction: a tree on 50 nodes
    assert final.link_count() == 98
    assert not traj.quiescent
    final.validate()


def test_run_stops_when_quiescent():
    model = ba_growth(n_final=20)
    traj = run(model.initial, model.extraction, model.replacement, 100, make_rng(3))
    assert traj.quiescent
    assert len(traj.events) == 18


def test_run_is_deterministic_for_a_seed():
    model = ba_growth(n_final=40)
    a = run(model.initial, model.extraction, model.replacement, 38, make_rng(7)).last()
    b = run(model.initial, model.extraction, model.replacement, 38, make_rng(7)).last()
    assert a == b


def test_negative_steps_rejected():
    model = ba_growth(n_final=10)
    with pytest.raises(ParameterError):
        run(model.initial, model.extraction, model.replacement, -1, make_rng(0))


def test_trajectory_replay_matches_final():
    model = ba_growth(n_final=30)
    traj = run(model.initial, model.extraction, model.replacement, 28, make_rng(5))
    replayed = list(traj.configs())
    assert len(replayed) == 29
    assert replayed[-1] == traj.final
    assert [c.time for c in replayed] == list(range(29))


def test_attach_newcomer_links_every_seed(rng):
    cfg = GnaConfig(states={0: "0", 1: "0", 2: "0"})
    sub = cfg.subgna([0, 2], seeds=(0, 2))
    event = AttachNewcomer().rewrite(sub, rng)
    out = embed(cfg, event)
    assert out.out_neighbors(3) == {0, 2}
    assert len(out) == 4


def test_make_extraction_by_family_name():
    from app.core.errors import ConfigError
    from app.core.gna import make_extraction

    e = make_extraction("degree", params={"alpha": 2.0}, size=2)
    assert isinstance(e, FamilyExtraction)
    with pytest.raises(ConfigError):
        make_extraction("telepathy")
