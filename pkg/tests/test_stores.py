import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import add_scripted_agent, make_app, open_session
from lpar.embed import embed_text
from lpar.model import AgentResponse, Disposition, Rating
from lpar.registry import UnknownAgent
from lpar.runtime import Platform
from lpar.stores import (
    FeedbackRecord,
    InvalidEntry,
    InvalidScore,
    InvalidTransition,
    QueryCacheEntry,
    RatingState,
    SessionNotActive,
    SessionStatus,
    UnknownSession,
    UnsupportedChannel,
    rating_band,
)


def platform_with_agent(classification="internal"):
    platform = Platform()
    make_app(platform, "app", classification=classification)
    add_scripted_agent(platform, "app", "a1")
    return platform


def response(agent_id, disposition=Disposition.IN_SCOPE, confidence=0.9, query_id="q-1", session_id="s-1"):
    return AgentResponse(
        agent_id=agent_id,
        query_id=query_id,
        session_id=session_id,
        disposition=disposition,
        confidence=confidence,
        reply_text="r",
    )


def entry_for(session_id, query_id="q-1", gathered=(), selected=None):
    return QueryCacheEntry(
        query_id=query_id,
        session_id=session_id,
        utterance_stored="hello",
        embedding=embed_text("hello"),
        strategy="broadcast_only",
        gathered=list(gathered),
        selected_agent_id=selected,
        policy_used="highest_confidence",
    )


# -- sessions -----------------------------------------------------------------


def test_open_session_initial_state():
    platform = platform_with_agent()
    session = open_session(platform)
    assert session.status is SessionStatus.ACTIVE
    assert session.serving_agent_id is None
    assert session.consecutive_oos == 0
    assert session.last_sentiment == 0.0
    assert session.context.intents == [] and session.context.entities == {}


def test_open_session_unsupported_channel():
    platform = platform_with_agent()
    with pytest.raises(UnsupportedChannel):
        platform.stores.open_session("app", "u", "voice")


def test_open_sessions_have_distinct_ids():
    platform = platform_with_agent()
    s1 = open_session(platform)
    s2 = open_session(platform)
    assert s1.session_id != s2.session_id


def test_bind_and_read():
    platform = platform_with_agent()
    session = open_session(platform)
    platform.stores.bind_serving_agent(session.session_id, "a1")
    assert platform.stores.session(session.session_id).serving_agent_id == "a1"


def test_bind_on_closed_session():
    platform = platform_with_agent()
    session = open_session(platform)
    platform.stores.close_session(session.session_id)
    with pytest.raises(SessionNotActive):
        platform.stores.bind_serving_agent(session.session_id, "a1")


def test_bind_unknown_agent_and_session():
    platform = platform_with_agent()
    session = open_session(platform)
    with pytest.raises(UnknownAgent):
        platform.stores.bind_serving_agent(session.session_id, "ghost")
    with pytest.raises(UnknownSession):
        platform.stores.bind_serving_agent("s-404", "a1")


def test_status_transitions_enforced():
    platform = platform_with_agent()
    session = open_session(platform)
    platform.stores.set_status(session.session_id, SessionStatus.HANDED_OVER)
    with pytest.raises(InvalidTransition):
        platform.stores.set_status(session.session_id, SessionStatus.ACTIVE)
    platform.stores.set_status(session.session_id, SessionStatus.CLOSED)
    with pytest.raises(InvalidTransition):
        platform.stores.set_status(session.session_id, SessionStatus.HANDED_OVER)


@given(st.lists(st.sampled_from(["handover", "close", "noop"]), max_size=12))
@settings(max_examples=60, deadline=None)
def test_session_state_machine_reachability(ops):
    # Only active->handed_over, active->closed, handed_over->closed exist.
    platform = platform_with_agent()
    session = open_session(platform)
    history = [session.status]
    for op in ops:
        target = {
            "handover": SessionStatus.HANDED_OVER,
            "close": SessionStatus.CLOSED,
            "noop": session.status,
        }[op]
        try:
            platform.stores.set_status(session.session_id, target)
        except InvalidTransition:
            pass
        history.append(platform.stores.session(session.session_id).status)
    for before, after in zip(history, history[1:]):
        assert (before, after) in {
            (SessionStatus.ACTIVE, SessionStatus.ACTIVE),
            (SessionStatus.ACTIVE, SessionStatus.HANDED_OVER),
            (SessionStatus.ACTIVE, SessionStatus.CLOSED),
            (SessionStatus.HANDED_OVER, SessionStatus.HANDED_OVER),
            (SessionStatus.HANDED_OVER, SessionStatus.CLOSED),
            (SessionStatus.CLOSED, SessionStatus.CLOSED),
        }


# -- context ---------------------------------------------------------------


def test_merge_context_basic_and_lww():
    platform = platform_with_agent()
    session = open_session(platform)
    ctx = platform.stores.merge_context(session.session_id, ["pay_bill"], {"amount": "50"})
    assert ctx.intents == ["pay_bill"]
    assert ctx.entities == {"amount": "50"}
    ctx = platform.stores.merge_context(session.session_id, [], {"amount": "70"})
    assert ctx.entities["amount"] == "70"


def test_context_entity_visible_to_later_agent():
    # An entity written during one agent's turn is readable once another
    # agent is bound: context lives on the session, not the agent.
    platform = platform_with_agent()
    add_scripted_agent(platform, "app", "a2")
    session = open_session(platform)
    platform.stores.bind_serving_agent(session.session_id, "a1")
    platform.stores.merge_context(session.session_id, ["check_balance"], {"account_id": "12345678"})
    platform.stores.unbind(session.session_id)
    platform.stores.bind_serving_agent(session.session_id, "a2")
    assert platform.stores.session(session.session_id).context.entities["account_id"] == "12345678"


def test_context_caps_evict_oldest():
    platform = platform_with_agent()
    session = open_session(platform)
    for i in range(60):
        platform.stores.merge_context(session.session_id, [f"i{i}"], {f"e{i}": "v"})
    ctx = platform.stores.session(session.session_id).context
    assert len(ctx.intents) == 50
    assert ctx.intents[0] == "i10" and ctx.intents[-1] == "i59"
    assert len(ctx.entities) == 60  # under the 100-entity cap
    for i in range(60):
        platform.stores.merge_context(session.session_id, [], {f"x{i}": "v"})
    ctx = platform.stores.session(session.session_id).context
    assert len(ctx.entities) == 100
    assert "e0" not in ctx.entities  # oldest evicted
    assert "x59" in ctx.entities


def test_context_rewrite_refreshes_entity_recency():
    platform = platform_with_agent()
    session = open_session(platform)
    platform.stores.merge_context(session.session_id, [], {"keep": "old"})
    for i in range(99):
        platform.stores.merge_context(session.session_id, [], {f"e{i}": "v"})
    # Rewriting moves "keep" to most-recent, so the next eviction takes e0.
    platform.stores.merge_context(session.session_id, [], {"keep": "new"})
    platform.stores.merge_context(session.session_id, [], {"pushes_one_out": "v"})
    ctx = platform.stores.session(session.session_id).context
    assert ctx.entities["keep"] == "new"
    assert "e0" not in ctx.entities


# -- feedback and ratings ------------------------------------------------------


def test_rating_bands_from_examples():
    platform = platform_with_agent()
    session = open_session(platform)
    for _ in range(2):
        rating = platform.stores.record_feedback(FeedbackRecord(session.session_id, "a1", 5))
    assert rating is Rating.BEGINNER  # below the 3-sample floor
    rating = platform.stores.record_feedback(FeedbackRecord(session.session_id, "a1", 5))
    assert rating is Rating.EXPERT
    assert platform.registry.descriptor("a1").rating is Rating.EXPERT


def test_rating_band_thresholds():
    assert rating_band(RatingState("a", score_sum=5, sample_count=3)) is Rating.BEGINNER  # mean 1.67
    assert rating_band(RatingState("a", score_sum=7, sample_count=3)) is Rating.INTERMEDIATE  # 2.33
    assert rating_band(RatingState("a", score_sum=10, sample_count=3)) is Rating.PROFESSIONAL  # 3.33
    assert rating_band(RatingState("a", score_sum=12, sample_count=3)) is Rating.EXPERT  # 4.0


def test_invalid_score_rejected():
    platform = platform_with_agent()
    session = open_session(platform)
    with pytest.raises(InvalidScore):
        platform.stores.record_feedback(FeedbackRecord(session.session_id, "a1", 0))
    with pytest.raises(UnknownAgent):
        platform.stores.record_feedback(FeedbackRecord(session.session_id, "ghost", 4))


_BAND_ORDER = [Rating.BEGINNER, Rating.INTERMEDIATE, Rating.PROFESSIONAL, Rating.EXPERT]


@given(st.lists(st.integers(min_value=1, max_value=5), min_size=3, max_size=20))
@settings(max_examples=60, deadline=None)
def test_rating_monotonicity(scores):
    # Monotone once banding is active (>= 3 samples): crossing the sample
    # floor can jump the band in either direction, so the property starts
    # past it.
    platform = platform_with_agent()
    session = open_session(platform)
    for score in scores:
        platform.stores.record_feedback(FeedbackRecord(session.session_id, "a1", score))
    before = platform.registry.descriptor("a1").rating
    platform.stores.record_feedback(FeedbackRecord(session.session_id, "a1", 5))
    after_five = platform.registry.descriptor("a1").rating
    assert _BAND_ORDER.index(after_five) >= _BAND_ORDER.index(before)
    platform.stores.record_feedback(FeedbackRecord(session.session_id, "a1", 1))
    after_one = platform.registry.descriptor("a1").rating
    assert _BAND_ORDER.index(after_one) <= _BAND_ORDER.index(after_five)


# -- query cache -----------------------------------------------------------------


def test_log_and_get_queries_in_order():
    platform = platform_with_agent()
    session = open_session(platform)
    for n in range(3):
        platform.stores.log_query(entry_for(session.session_id, query_id=f"q-{n}"))
    entries = platform.stores.get_queries(session.session_id)
    assert [e.query_id for e in entries] == ["q-0", "q-1", "q-2"]
    assert entries[0].utterance_stored == "hello"


def test_log_query_unknown_session():
    platform = platform_with_agent()
    with pytest.raises(UnknownSession):
        platform.stores.log_query(entry_for("s-404"))


def test_sensitive_app_stores_redacted_text():
    platform = platform_with_agent(classification="sensitive")
    session = open_session(platform)
    entry = entry_for(session.session_id)
    entry.utterance_stored = "mail me at a@b.com"
    platform.stores.log_query(entry)
    stored = platform.stores.get_queries(session.session_id)[0]
    assert "[REDACTED:email]" in stored.utterance_stored
    assert "a@b.com" not in stored.utterance_stored


def test_selected_agent_must_be_in_scope_in_gathered():
    platform = platform_with_agent()
    session = open_session(platform)
    sid = session.session_id
    bad = entry_for(sid, gathered=[response("a1", Disposition.OUT_OF_SCOPE, session_id=sid)], selected="a1")
    with pytest.raises(InvalidEntry):
        platform.stores.log_query(bad)
    good = entry_for(sid, query_id="q-2", gathered=[response("a1", session_id=sid)], selected="a1")
    platform.stores.log_query(good)


def test_set_selected_exactly_once():
    platform = platform_with_agent()
    session = open_session(platform)
    sid = session.session_id
    platform.stores.log_query(entry_for(sid, gathered=[response("a1", session_id=sid)]))
    platform.stores.set_selected("q-1", "a1")
    with pytest.raises(InvalidEntry):
        platform.stores.set_selected("q-1", "a1")


# -- users and routing ------------------------------------------------------------


def test_resolve_user_idempotent():
    platform = platform_with_agent()
    p1 = platform.stores.resolve_user("web", "alice")
    p2 = platform.stores.resolve_user("web", "alice")
    assert p1.user_id == p2.user_id


def test_cross_channel_identity_shares_profile():
    platform = platform_with_agent()
    profile = platform.stores.resolve_user("web", "alice")
    platform.stores.link_identity(profile.user_id, "cli", "alice-cli")
    assert platform.stores.resolve_user("cli", "alice-cli").user_id == profile.user_id


def test_routing_rule_ignored_when_agent_gone():
    platform = platform_with_agent()
    profile = platform.stores.resolve_user("web", "alice")
    platform.stores.set_routing_rule(profile.user_id, "a1", reason="vip")
    assert platform.stores.routing_rule_for(profile.user_id).preferred_agent_id == "a1"
    platform.registry.deregister_agent("a1")
    assert platform.stores.routing_rule_for(profile.user_id) is None


# -- persistence -------------------------------------------------------------------


def test_persistence_round_trip(tmp_path):
    platform = platform_with_agent(classification="internal")
    session = open_session(platform)
    sid = session.session_id
    platform.stores.bind_serving_agent(sid, "a1")
    platform.stores.merge_context(sid, ["pay_bill"], {"amount": "50"})
    platform.stores.update_sentiment(sid, -0.25)
    platform.stores.log_query(entry_for(sid, gathered=[response("a1", session_id=sid)], selected="a1"))
    for score in (5, 4, 5):
        platform.stores.record_feedback(FeedbackRecord(sid, "a1", score))
    profile = platform.stores.resolve_user("web", "alice")
    platform.stores.set_routing_rule(profile.user_id, "a1", "vip")
    platform.stores.snapshot_all(tmp_path)

    reloaded = platform_with_agent(classification="internal")
    reloaded.stores.load_all(tmp_path)
    restored = reloaded.stores.session(sid)
    assert restored.to_dict() == platform.stores.session(sid).to_dict()
    assert [e.to_dict() for e in reloaded.stores.get_queries(sid)] == [
        e.to_dict() for e in platform.stores.get_queries(sid)
    ]
    assert reloaded.registry.descriptor("a1").rating is Rating.EXPERT
    assert reloaded.stores.rating_state("a1").mean_score == platform.stores.rating_state("a1").mean_score
    assert reloaded.stores.resolve_user("web", "alice").user_id == profile.user_id
    assert reloaded.stores.routing_rule_for(profile.user_id).preferred_agent_id == "a1"
    # Fresh ids never collide with reloaded ones.
    assert reloaded.stores.open_session("app", "u2", "cli").session_id != sid
