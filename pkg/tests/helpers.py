"""Shared builders for scripted test fleets."""

from __future__ import annotations

from lpar.agents import JsonIntentAdapter, PodCoordinator, ScriptedResponder
from lpar.model import AgentClass, NodeType, Rating
from lpar.registry import AgentDescriptor, AppDescriptor
from lpar.runtime import Platform


def make_app(platform: Platform, app_id: str = "app", channels: set[str] | None = None,
             classification: str = "internal") -> None:
    platform.registry.register_app(
        AppDescriptor(
            name=app_id,
            app_id=app_id,
            channel_ids=channels or {"cli", "web"},
            data_classification=classification,
        )
    )


def add_scripted_agent(
    platform: Platform,
    app_id: str,
    agent_id: str,
    name: str | None = None,
    *,
    in_scope: bool = True,
    confidence: float = 0.5,
    latency_ms: int = 10,
    reply: str | None = None,
    intent: str | None = None,
    entities: dict[str, str] | None = None,
    rating: Rating | None = None,
    training: tuple[str, ...] = (),
    parent_pod: str | None = None,
    script=None,
) -> JsonIntentAdapter:
    impl = ScriptedResponder(
        name or agent_id,
        in_scope=in_scope,
        confidence=confidence,
        reply=reply or "",
        intent=intent,
        entities=entities,
        processing_ms=latency_ms,
        script=script,
    )
    adapter = JsonIntentAdapter(agent_id, impl, platform.bus, platform.registry, platform.clock)
    descriptor = AgentDescriptor(agent_id=agent_id, name=name or agent_id)
    platform.registry.register_agent(
        app_id, descriptor, list(training), parent_pod=parent_pod, handler=adapter.handle
    )
    if rating is not None:
        platform.registry.update_rating(agent_id, rating)
    platform.adapters[agent_id] = adapter
    return adapter


def add_pod(
    platform: Platform,
    app_id: str,
    pod_id: str,
    name: str | None = None,
    *,
    strategy: str = "broadcast_only",
    k: int = 3,
    similarity_floor: float = -1.0,
    policy: str = "highest_confidence",
    parent_pod: str | None = None,
) -> PodCoordinator:
    coordinator = PodCoordinator(
        pod_id=pod_id,
        name=name or pod_id,
        bus=platform.bus,
        registry=platform.registry,
        selector=platform.selector,
        clock=platform.clock,
        strategy=strategy,
        k=k,
        similarity_floor=similarity_floor,
        policy=policy,
    )
    descriptor = AgentDescriptor(
        agent_id=pod_id, name=name or pod_id, node_type=NodeType.POD, agent_class=AgentClass.NOT_APPLICABLE
    )
    platform.registry.register_agent(app_id, descriptor, [], parent_pod=parent_pod, handler=coordinator.handle)
    platform.adapters[pod_id] = coordinator
    return coordinator


def open_session(platform: Platform, app_id: str = "app", user: str = "u-test", channel: str = "cli"):
    return platform.stores.open_session(app_id, user, channel)
