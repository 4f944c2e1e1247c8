import pytest

from helpers import add_scripted_agent, make_app, open_session
from lpar.model import Disposition
from lpar.orchestrate import (
    HANDOVER_REASON_EXPLICIT,
    HANDOVER_REASON_OOS,
    HANDOVER_REASON_SENTIMENT,
    AppSettings,
    CustomerServiceAgent,
)
from lpar.runtime import Platform
from lpar.stores import SessionClosed, SessionStatus, UnknownSession


def scripted_platform(with_human=True, **settings_overrides):
    platform = Platform()
    make_app(platform)
    add_scripted_agent(
        platform, "app", "pay", "Payments Agent", confidence=0.9,
        training=("pay my bill", "make a payment"),
        script=lambda text: (
            {"in_scope": True, "confidence": 0.9, "reply": "payment sorted",
             "intent": "pay_bill", "entities": {"last_topic": "payments"}}
            if "pay" in text or "who are you" in text
            else {"in_scope": False, "confidence": 0.0, "reply": ""}
        ),
    )
    add_scripted_agent(
        platform, "app", "atm", "ATM Agent", confidence=0.8,
        training=("where is the nearest atm",),
        script=lambda text: (
            {"in_scope": True, "confidence": 0.8, "reply": "atm at high street", "intent": "find_atm"}
            if "atm" in text
            else {"in_scope": False, "confidence": 0.0, "reply": ""}
        ),
    )
    if with_human:
        from lpar.agents import HumanConnectBot, JsonIntentAdapter
        from lpar.registry import AgentDescriptor

        bot = HumanConnectBot("Connect Agent", platform.stores.session)
        adapter = JsonIntentAdapter("human", bot, platform.bus, platform.registry, platform.clock)
        platform.registry.register_agent(
            "app", AgentDescriptor(agent_id="human", name="Connect Agent"), [], handler=adapter.handle
        )
    settings = AppSettings(app_id="app", human_agent_id="human" if with_human else None,
                           similarity_floor=-1.0, **settings_overrides)
    platform.orchestrator.configure_app(settings)
    return platform


def test_unbound_session_selects_and_binds():
    platform = scripted_platform()
    session = open_session(platform)
    result = platform.turn(session.session_id, "pay my bill please")
    assert result.agent_id == "pay"
    assert result.agent_name == "Payments Agent"
    assert result.reply_text == "payment sorted"
    assert platform.stores.session(session.session_id).serving_agent_id == "pay"


def test_bound_agent_oos_triggers_reselection():
    platform = scripted_platform()
    session = open_session(platform)
    platform.turn(session.session_id, "pay my bill")
    result = platform.turn(session.session_id, "where is the nearest atm")
    assert result.agent_id == "atm"
    assert platform.stores.session(session.session_id).serving_agent_id == "atm"
    # Trace keeps the bowing-out agent's verdict ahead of the new round.
    assert result.trace[0]["agent_id"] == "pay"
    assert result.trace[0]["disposition"] == "out_of_scope"


def test_exactly_one_query_cache_entry_per_turn():
    platform = scripted_platform()
    session = open_session(platform)
    platform.turn(session.session_id, "pay my bill")          # selection
    platform.turn(session.session_id, "pay again")            # direct to bound
    platform.turn(session.session_id, "where is the atm")     # oos + re-selection
    platform.turn(session.session_id, "gibberish zzz")        # oos + failed selection
    entries = platform.stores.get_queries(session.session_id)
    assert len(entries) == 4
    assert entries[0].strategy == "search_and_multicast"
    assert entries[1].strategy == "direct_to_bound"
    assert entries[2].strategy == "search_and_multicast"
    # The bound agent's refusal rides in the same entry as the new round.
    assert entries[2].gathered[0].agent_id == "atm" or entries[2].gathered[0].agent_id == "pay"


def test_oos_resets_on_in_scope_reply():
    platform = scripted_platform()
    session = open_session(platform)
    platform.turn(session.session_id, "gibberish one")
    assert platform.stores.session(session.session_id).consecutive_oos == 1
    platform.turn(session.session_id, "pay my bill")
    assert platform.stores.session(session.session_id).consecutive_oos == 0


def test_fallback_message_when_no_winner():
    platform = scripted_platform()
    session = open_session(platform)
    result = platform.turn(session.session_id, "quantum zebra")
    assert result.agent_id is None
    assert result.reply_text == AppSettings(app_id="app").fallback_message
    assert result.disposition is Disposition.OUT_OF_SCOPE


def test_handover_explicit_phrase():
    platform = scripted_platform()
    session = open_session(platform)
    result = platform.turn(session.session_id, "I want to talk to a human")
    assert result.handover
    assert result.handover_reason == HANDOVER_REASON_EXPLICIT
    assert result.agent_id == "human"
    assert platform.stores.session(session.session_id).status is SessionStatus.HANDED_OVER


def test_handover_sentiment_threshold():
    platform = scripted_platform()
    session = open_session(platform)
    result = platform.turn(session.session_id, "this is terrible and awful")  # sentiment -1.0
    assert result.handover
    assert result.handover_reason == HANDOVER_REASON_SENTIMENT

    platform2 = scripted_platform()
    session2 = open_session(platform2)
    # 2 positive, 3 negative -> -0.2, above the -0.5 trigger.
    result = platform2.turn(session2.session_id, "good great awful broken terrible pay my bill")
    assert not result.handover
    assert platform2.stores.session(session2.session_id).status is SessionStatus.ACTIVE


def test_handover_after_three_oos_turns_not_two():
    platform = scripted_platform()
    session = open_session(platform)
    platform.turn(session.session_id, "zzz one")
    result = platform.turn(session.session_id, "zzz two")
    assert not result.handover
    assert platform.stores.session(session.session_id).status is SessionStatus.ACTIVE
    result = platform.turn(session.session_id, "zzz three")
    assert result.handover
    assert result.handover_reason == HANDOVER_REASON_OOS
    assert platform.stores.session(session.session_id).status is SessionStatus.HANDED_OVER


def test_after_handover_all_turns_go_to_human_without_selection():
    platform = scripted_platform()
    session = open_session(platform)
    platform.turn(session.session_id, "talk to a human")
    before = len(platform.stores.get_queries(session.session_id))
    result = platform.turn(session.session_id, "pay my bill")  # would normally elect pay
    assert result.agent_id == "human"
    entries = platform.stores.get_queries(session.session_id)
    assert len(entries) == before + 1
    assert entries[-1].strategy == "direct_to_bound"


def test_trigger_handover_examples():
    platform = scripted_platform()
    orchestrator: CustomerServiceAgent = platform.orchestrator
    session = open_session(platform)
    assert orchestrator.trigger_handover(session, "I want to talk to a human") == HANDOVER_REASON_EXPLICIT
    session.consecutive_oos = 3
    assert orchestrator.trigger_handover(session, "anything") == HANDOVER_REASON_OOS
    session.consecutive_oos = 0
    session.last_sentiment = -0.2
    assert orchestrator.trigger_handover(session, "anything") is None


def test_routing_rule_binds_unbound_session_only():
    platform = scripted_platform()
    profile = platform.stores.resolve_user("cli", "vip")
    platform.stores.set_routing_rule(profile.user_id, "atm", "prefers atm desk")
    session = platform.stores.open_session("app", profile.user_id, "cli")
    result = platform.turn(session.session_id, "where is the nearest atm")
    assert result.agent_id == "atm"
    # Bound now; the rule must not hijack subsequent turns.
    result = platform.turn(session.session_id, "pay my bill")
    assert result.agent_id == "pay"


def test_closed_session_rejects_turns():
    platform = scripted_platform()
    session = open_session(platform)
    platform.stores.close_session(session.session_id)
    with pytest.raises(SessionClosed):
        platform.turn(session.session_id, "hello")
    with pytest.raises(UnknownSession):
        platform.turn("s-404", "hello")


def test_agents_receive_profanity_filtered_text():
    seen = []
    platform = Platform()
    make_app(platform)
    add_scripted_agent(
        platform, "app", "echo", "Echo", confidence=0.9,
        script=lambda text: (seen.append(text) or {"in_scope": True, "confidence": 0.9, "reply": text}),
    )
    platform.orchestrator.configure_app(AppSettings(app_id="app", similarity_floor=-1.0))
    session = open_session(platform)
    platform.turn(session.session_id, "this damn thing")
    assert seen == ["this **** thing"]


def test_sensitive_app_logs_redacted_utterance():
    platform = Platform()
    make_app(platform, classification="sensitive")
    add_scripted_agent(platform, "app", "a1", confidence=0.9)
    platform.orchestrator.configure_app(AppSettings(app_id="app", similarity_floor=-1.0))
    session = open_session(platform)
    platform.turn(session.session_id, "my card is 4111 1111 1111 1111")
    entry = platform.stores.get_queries(session.session_id)[-1]
    assert "[REDACTED:card]" in entry.utterance_stored
    assert "4111" not in entry.utterance_stored


def test_sentiment_recorded_on_session():
    platform = scripted_platform()
    session = open_session(platform)
    platform.turn(session.session_id, "great help, pay my bill")
    assert platform.stores.session(session.session_id).last_sentiment == 1.0


def test_context_merged_from_winner():
    platform = scripted_platform()
    session = open_session(platform)
    platform.turn(session.session_id, "pay my bill")
    context = platform.stores.session(session.session_id).context
    assert context.intents[-1] == "pay_bill"
    assert context.entities["last_topic"] == "payments"


def test_greeting_uses_persona_hint():
    platform = scripted_platform()
    platform.orchestrator.settings_for("app").greetings = {
        "default": "Hello!",
        "premier": "Welcome back, premier customer.",
    }
    profile = platform.stores.resolve_user("web", "alice")
    profile.persona_hint = "premier"
    _session, greeting = platform.open_conversation("app", profile.user_id, "web")
    assert greeting == "Welcome back, premier customer."
