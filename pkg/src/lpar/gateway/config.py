"""App configuration: JSON schema validation and atomic platform build.

A config file describes one app: its descriptor, selection defaults,
handover thresholds, lexicon paths, the agent fleet (with kind-specific
fixture data) and pod groupings. Validation is all-or-nothing; no
registration happens unless the whole file is sound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..agents import (
    FaqBot,
    FaqPair,
    GoalOrientedBot,
    HumanConnectBot,
    IntentSpec,
    JsonIntentAdapter,
    PodCoordinator,
    ScoredFulfillmentAdapter,
    SearchBot,
    SearchDocument,
    Slot,
)
from ..clock import LogicalClock
from ..filters import load_lexicon, load_phrase_list
from ..model import AgentClass, NodeType
from ..orchestrate import AppSettings
from ..registry import AgentDescriptor, AppDescriptor
from ..runtime import Platform
from ..select import normalize_policy


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, path: str, line: int, message: str) -> None:
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


class ValidationError(ConfigError):
    def __init__(self, field_path: str, message: str) -> None:
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


AGENT_KINDS = ("goal", "faq", "search", "human_connect")

_KIND_DEFAULT_CLASS = {
    "goal": AgentClass.CONVERSATIONAL,
    "faq": AgentClass.FAQ,
    "search": AgentClass.SEMANTIC_SEARCH,
    "human_connect": AgentClass.CONVERSATIONAL,
}


@dataclass
class AgentConfig:
    agent_id: str
    name: str
    kind: str
    version: str = "1.0"
    agent_class: AgentClass = AgentClass.CONVERSATIONAL
    channels_supported: set[str] = field(default_factory=set)
    adapter: str = ""
    latency_ms: int = 20
    training_utterances: list[str] = field(default_factory=list)
    intents: list[dict] = field(default_factory=list)
    pairs: list[dict] = field(default_factory=list)
    corpus: list[dict] = field(default_factory=list)
    threshold: float | None = None


@dataclass
class PodConfig:
    pod_id: str
    name: str
    members: list[str]
    strategy: str | None = None
    policy: str | None = None
    k: int | None = None
    similarity_floor: float | None = None


@dataclass
class AppConfig:
    app: AppDescriptor
    settings: AppSettings
    agents: list[AgentConfig]
    pods: list[PodConfig]
    base_dir: Path


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ValidationError(f"{where}.{key}", "missing required field")
    return obj[key]


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.lineno, exc.msg) from exc
    return _validate(raw, path.parent)


def _validate(raw: dict, base_dir: Path) -> AppConfig:
    app_raw = _require(raw, "app", "config")
    app_id = _require(app_raw, "app_id", "app")
    channel_ids = set(_require(app_raw, "channel_ids", "app"))
    serving_matrix: dict[str, set[AgentClass]] = {}
    for channel, classes in (app_raw.get("serving_matrix") or {}).items():
        if channel not in channel_ids:
            raise ValidationError(f"app.serving_matrix.{channel}", "channel not in channel_ids")
        try:
            serving_matrix[channel] = {AgentClass(c) for c in classes}
        except ValueError as exc:
            raise ValidationError(f"app.serving_matrix.{channel}", str(exc)) from exc
    app = AppDescriptor(
        name=_require(app_raw, "name", "app"),
        app_id=app_id,
        channel_ids=channel_ids,
        serving_matrix=serving_matrix,
        resilience_rating=app_raw.get("resilience_rating", 3),
        data_classification=app_raw.get("data_classification", "internal"),
    )
    if app.data_classification not in ("public", "internal", "sensitive"):
        raise ValidationError("app.data_classification", app.data_classification)
    if not 1 <= app.resilience_rating <= 5:
        raise ValidationError("app.resilience_rating", "must be 1-5")

    agents: list[AgentConfig] = []
    seen_ids: set[str] = set()
    for i, a in enumerate(raw.get("agents") or []):
        where = f"agents[{i}]"
        agent_id = _require(a, "agent_id", where)
        if agent_id in seen_ids:
            raise ValidationError(f"{where}.agent_id", f"duplicate id {agent_id}")
        seen_ids.add(agent_id)
        kind = _require(a, "kind", where)
        if kind not in AGENT_KINDS:
            raise ValidationError(f"{where}.kind", f"unknown kind {kind}")
        try:
            agent_class = AgentClass(a["agent_class"]) if "agent_class" in a else _KIND_DEFAULT_CLASS[kind]
        except ValueError as exc:
            raise ValidationError(f"{where}.agent_class", str(exc)) from exc
        cfg = AgentConfig(
            agent_id=agent_id,
            name=_require(a, "name", where),
            kind=kind,
            version=a.get("version", "1.0"),
            agent_class=agent_class,
            channels_supported=set(a.get("channels_supported") or channel_ids),
            adapter=a.get("adapter", ""),
            latency_ms=a.get("latency_ms", 20),
            training_utterances=list(a.get("training_utterances") or []),
            intents=list(a.get("intents") or []),
            pairs=list(a.get("pairs") or []),
            corpus=list(a.get("corpus") or []),
            threshold=a.get("threshold"),
        )
        if kind == "goal" and not cfg.intents:
            raise ValidationError(f"{where}.intents", "goal agents need at least one intent")
        if kind == "faq" and not cfg.pairs:
            raise ValidationError(f"{where}.pairs", "faq agents need at least one pair")
        if kind == "search" and not cfg.corpus:
            raise ValidationError(f"{where}.corpus", "search agents need a corpus")
        agents.append(cfg)

    pods: list[PodConfig] = []
    membership: dict[str, str] = {}
    for i, p in enumerate(raw.get("pods") or []):
        where = f"pods[{i}]"
        pod_id = _require(p, "pod_id", where)
        if pod_id in seen_ids:
            raise ValidationError(f"{where}.pod_id", f"duplicate id {pod_id}")
        seen_ids.add(pod_id)
        pods.append(
            PodConfig(
                pod_id=pod_id,
                name=_require(p, "name", where),
                members=list(_require(p, "members", where)),
                strategy=p.get("strategy"),
                policy=p.get("policy"),
                k=p.get("k"),
                similarity_floor=p.get("similarity_floor"),
            )
        )
    pod_ids = {p.pod_id for p in pods}
    agent_ids = {a.agent_id for a in agents}
    for i, pod in enumerate(pods):
        for member in pod.members:
            if member not in agent_ids and member not in pod_ids:
                raise ValidationError(f"pods[{i}].members", f"unknown member {member}")
            if member in membership:
                raise ValidationError(f"pods[{i}].members", f"{member} already belongs to {membership[member]}")
            membership[member] = pod.pod_id
    _reject_cycles(pods, membership)

    selection = raw.get("selection") or {}
    handover = raw.get("handover") or {}
    human_ids = [a.agent_id for a in agents if a.kind == "human_connect"]
    settings = AppSettings(
        app_id=app_id,
        strategy=selection.get("strategy", AppSettings(app_id).strategy),
        k=selection.get("k", AppSettings(app_id).k),
        similarity_floor=selection.get("similarity_floor", AppSettings(app_id).similarity_floor),
        policy=normalize_policy(selection.get("policy", AppSettings(app_id).policy)),
        gather_window_ms=selection.get("gather_window_ms", AppSettings(app_id).gather_window_ms),
        sentiment_threshold=handover.get("sentiment_threshold", AppSettings(app_id).sentiment_threshold),
        oos_threshold=handover.get("oos_threshold", AppSettings(app_id).oos_threshold),
        fallback_message=raw.get("fallback_message", AppSettings(app_id).fallback_message),
        human_agent_id=handover.get("human_agent_id") or (human_ids[0] if human_ids else None),
    )
    if raw.get("greetings"):
        settings.greetings = dict(raw["greetings"])
    if handover.get("phrases"):
        settings.handover_phrases = tuple(str(p).lower() for p in handover["phrases"])

    lexicons = raw.get("lexicons") or {}
    for key, attr, loader in (
        ("positive", "positive_lexicon", load_lexicon),
        ("negative", "negative_lexicon", load_lexicon),
        ("profanity", "profanity_lexicon", load_lexicon),
        ("handover_phrases", "handover_phrases", load_phrase_list),
    ):
        if key in lexicons:
            lex_path = base_dir / lexicons[key]
            if not lex_path.exists():
                raise ValidationError(f"lexicons.{key}", f"file not found: {lex_path}")
            setattr(settings, attr, loader(lex_path))

    if settings.strategy not in ("broadcast_only", "search_and_multicast"):
        raise ValidationError("selection.strategy", settings.strategy)

    return AppConfig(app=app, settings=settings, agents=agents, pods=pods, base_dir=base_dir)


def _reject_cycles(pods: list[PodConfig], membership: dict[str, str]) -> None:
    pod_ids = {p.pod_id for p in pods}
    for pod in pods:
        seen = {pod.pod_id}
        current = membership.get(pod.pod_id)
        while current is not None:
            if current in seen:
                raise ValidationError("pods", f"CyclicPod: membership cycle through {current}")
            seen.add(current)
            current = membership.get(current)
    # A pod listing itself is the degenerate cycle.
    for i, pod in enumerate(pods):
        if pod.pod_id in pod.members:
            raise ValidationError(f"pods[{i}].members", f"CyclicPod: {pod.pod_id} contains itself")
    del pod_ids


# ---------------------------------------------------------------------------
# Build
# ---------------------------------------------------------------------------


def build_agent(platform: Platform, app_id: str, cfg: AgentConfig, parent_pod: str | None = None) -> None:
    """Instantiate one kit agent behind its adapter and register it."""
    if cfg.kind == "goal":
        intents = [
            IntentSpec(
                name=spec["name"],
                keywords=[k.lower() for k in spec.get("keywords") or []],
                slots=[
                    Slot(s["name"], s["prompt"], s.get("validator", "any"))
                    for s in spec.get("slots") or []
                ],
                fulfillment=spec.get("fulfillment", "Done."),
            )
            for spec in cfg.intents
        ]
        impl = GoalOrientedBot(cfg.name, intents, processing_ms=cfg.latency_ms)
        adapter_style = cfg.adapter or "json_intent"
    elif cfg.kind == "faq":
        pairs = [FaqPair(p["q"], p["a"]) for p in cfg.pairs]
        impl = FaqBot(cfg.name, pairs, threshold=cfg.threshold or 0.35, processing_ms=cfg.latency_ms)
        adapter_style = cfg.adapter or "scored_fulfillment"
    elif cfg.kind == "search":
        corpus = [SearchDocument(d["title"], d.get("body", "")) for d in cfg.corpus]
        impl = SearchBot(cfg.name, corpus, processing_ms=cfg.latency_ms)
        adapter_style = cfg.adapter or "scored_fulfillment"
    elif cfg.kind == "human_connect":
        impl = HumanConnectBot(cfg.name, platform.stores.session, processing_ms=cfg.latency_ms)
        adapter_style = cfg.adapter or "json_intent"
    else:
        raise ValidationError("agents.kind", cfg.kind)

    if adapter_style == "json_intent":
        adapter = JsonIntentAdapter(cfg.agent_id, impl, platform.bus, platform.registry, platform.clock)
    elif adapter_style == "scored_fulfillment":
        adapter = ScoredFulfillmentAdapter(cfg.agent_id, impl, platform.bus, platform.registry, platform.clock)
    else:
        raise ValidationError("agents.adapter", adapter_style)

    descriptor = AgentDescriptor(
        agent_id=cfg.agent_id,
        name=cfg.name,
        version=cfg.version,
        agent_class=cfg.agent_class,
        channels_supported=set(cfg.channels_supported),
    )
    platform.registry.register_agent(
        app_id, descriptor, cfg.training_utterances, parent_pod=parent_pod, handler=adapter.handle
    )
    platform.adapters[cfg.agent_id] = adapter


def build_pod(platform: Platform, app_id: str, cfg: PodConfig, settings: AppSettings,
              parent_pod: str | None = None) -> None:
    coordinator = PodCoordinator(
        pod_id=cfg.pod_id,
        name=cfg.name,
        bus=platform.bus,
        registry=platform.registry,
        selector=platform.selector,
        clock=platform.clock,
        strategy=cfg.strategy or settings.strategy,
        k=cfg.k or settings.k,
        similarity_floor=cfg.similarity_floor if cfg.similarity_floor is not None else settings.similarity_floor,
        policy=normalize_policy(cfg.policy or settings.policy),
        gather_window_ms=settings.gather_window_ms,
        channel_lookup=lambda sid: platform.stores.session(sid).channel_id,
    )
    descriptor = AgentDescriptor(
        agent_id=cfg.pod_id,
        name=cfg.name,
        node_type=NodeType.POD,
        agent_class=AgentClass.NOT_APPLICABLE,
    )
    platform.registry.register_agent(app_id, descriptor, [], parent_pod=parent_pod, handler=coordinator.handle)
    platform.adapters[cfg.pod_id] = coordinator


def build_app(platform: Platform, config: AppConfig) -> None:
    platform.registry.register_app(config.app)
    platform.orchestrator.configure_app(config.settings)

    parent_of: dict[str, str] = {}
    for pod in config.pods:
        for member in pod.members:
            parent_of[member] = pod.pod_id

    # Parents before children so parent_pod always resolves.
    remaining = {p.pod_id: p for p in config.pods}
    while remaining:
        progressed = False
        for pod_id, pod in list(remaining.items()):
            parent = parent_of.get(pod_id)
            if parent is None or parent not in remaining:
                build_pod(platform, config.app.app_id, pod, config.settings, parent_pod=parent)
                del remaining[pod_id]
                progressed = True
        if not progressed:  # unreachable after _reject_cycles, kept as a guard
            raise ValidationError("pods", "unresolvable pod ordering")

    for agent in config.agents:
        build_agent(platform, config.app.app_id, agent, parent_pod=parent_of.get(agent.agent_id))


def build_platform(config_path: str | Path, data_dir: str | Path | None = None,
                   clock: LogicalClock | None = None) -> Platform:
    config = load_config(config_path)
    platform = Platform(clock)
    build_app(platform, config)
    if data_dir is not None:
        platform.load_data(data_dir)
    return platform
