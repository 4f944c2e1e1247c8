"""App catalog and serving store: apps, agents, pods, centroid ranking.

Registration is dynamic: an agent registered mid-run is reachable by the
very next selection round, and deregistering one detaches its topics,
removes it from pod memberships and unbinds any sessions pointing at it
(via deregistration hooks wired by the runtime).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .bus import Handler, MessageBus, Subscription, TopicId, TopicKind
from .embed import Centroid, Embedding, centroid_of, cosine, embed_text
from .model import AgentClass, AgentScope, AgentStatus, ConnectionProtocol, NodeType, Rating


class RegistryError(Exception):
    pass


class DuplicateApp(RegistryError):
    pass


class UnknownApp(RegistryError):
    pass


class InvalidDescriptor(RegistryError):
    pass


class DuplicateAgent(RegistryError):
    pass


class UnknownAgent(RegistryError):
    pass


class UnknownPod(RegistryError):
    pass


class CyclicPod(RegistryError):
    pass


# Exponential moving average weight for new latency samples.
LATENCY_EWMA_ALPHA = 0.2


@dataclass
class AppDescriptor:
    name: str
    app_id: str
    channel_ids: set[str]
    serving_matrix: dict[str, set[AgentClass]] = field(default_factory=dict)
    resilience_rating: int = 3
    data_classification: str = "internal"  # public | internal | sensitive


@dataclass
class AgentDescriptor:
    agent_id: str
    name: str
    version: str = "1.0"
    node_type: NodeType = NodeType.AGENT
    centroid: Centroid = field(default_factory=Centroid.empty)
    connection_protocol: ConnectionProtocol = ConnectionProtocol.IN_PROCESS
    private_request_topic: str = ""
    private_response_topic: str = ""
    status: AgentStatus = AgentStatus.ONLINE
    scope: AgentScope = AgentScope.INTERNAL
    agent_class: AgentClass = AgentClass.CONVERSATIONAL
    rating: Rating = Rating.BEGINNER
    channels_supported: set[str] = field(default_factory=set)
    avg_response_time_ms: float = 0.0


@dataclass
class PodMembership:
    pod_id: str
    member_ids: list[str] = field(default_factory=list)


@dataclass
class _Node:
    descriptor: AgentDescriptor
    app_id: str
    parent_id: str  # app_id for top level nodes, pod_id otherwise
    utterance_embeddings: list[Embedding]
    subscriptions: list[Subscription] = field(default_factory=list)
    handler: Handler | None = None


@dataclass
class _App:
    descriptor: AppDescriptor
    request_topic: TopicId
    response_topic: TopicId


def scope_topic_names(scope_id: str) -> tuple[str, str]:
    return f"{scope_id}/bcast/req", f"{scope_id}/bcast/resp"


def private_topic_names(agent_id: str) -> tuple[str, str]:
    return f"agent/{agent_id}/req", f"agent/{agent_id}/resp"


class Registry:
    def __init__(self, bus: MessageBus) -> None:
        self._bus = bus
        self._apps: dict[str, _App] = {}
        self._nodes: dict[str, _Node] = {}
        self._members: dict[str, list[str]] = {}
        self._deregistration_hooks: list[Callable[[str], None]] = []

    # -- apps ----------------------------------------------------------------

    def register_app(self, descriptor: AppDescriptor) -> None:
        if descriptor.app_id in self._apps:
            raise DuplicateApp(descriptor.app_id)
        if not set(descriptor.serving_matrix) <= set(descriptor.channel_ids):
            raise InvalidDescriptor("serving_matrix keys must be a subset of channel_ids")
        req_name, resp_name = scope_topic_names(descriptor.app_id)
        req = self._bus.create_topic(TopicKind.BROADCAST_REQUEST, req_name)
        resp = self._bus.create_topic(TopicKind.BROADCAST_RESPONSE, resp_name)
        self._apps[descriptor.app_id] = _App(descriptor, req, resp)

    def route_app(self, app_id: str) -> AppDescriptor:
        try:
            return self._apps[app_id].descriptor
        except KeyError:
            raise UnknownApp(app_id) from None

    def app_ids(self) -> list[str]:
        return list(self._apps)

    # -- agents and pods -------------------------------------------------------

    def register_agent(
        self,
        app_id: str,
        descriptor: AgentDescriptor,
        training_utterances: list[str],
        parent_pod: str | None = None,
        handler: Handler | None = None,
    ) -> None:
        if app_id not in self._apps:
            raise UnknownApp(app_id)
        if descriptor.agent_id in self._nodes:
            raise DuplicateAgent(descriptor.agent_id)
        if parent_pod is not None:
            parent = self._nodes.get(parent_pod)
            if parent is None or parent.descriptor.node_type is not NodeType.POD:
                raise UnknownPod(parent_pod)
        if descriptor.node_type is NodeType.POD and descriptor.agent_class is not AgentClass.NOT_APPLICABLE:
            raise InvalidDescriptor("pods carry agent_class not_applicable")

        embeddings = [embed_text(u) for u in training_utterances]
        descriptor.centroid = centroid_of(embeddings)
        req_name, resp_name = private_topic_names(descriptor.agent_id)
        descriptor.private_request_topic = req_name
        descriptor.private_response_topic = resp_name
        # Private topics are permanent: reuse them when an id re-registers.
        req = self._bus.topic(req_name) if self._bus.has_topic(req_name) else self._bus.create_topic(
            TopicKind.PRIVATE_REQUEST, req_name
        )
        if not self._bus.has_topic(resp_name):
            self._bus.create_topic(TopicKind.PRIVATE_RESPONSE, resp_name)

        node = _Node(
            descriptor=descriptor,
            app_id=app_id,
            parent_id=parent_pod or app_id,
            utterance_embeddings=embeddings,
            handler=handler,
        )
        node.subscriptions.append(self._bus.subscribe(req, descriptor.agent_id, handler))
        scope_req_name, _ = scope_topic_names(node.parent_id)
        node.subscriptions.append(
            self._bus.subscribe(self._bus.topic(scope_req_name), descriptor.agent_id, handler)
        )
        if descriptor.node_type is NodeType.POD:
            pod_req, pod_resp = scope_topic_names(descriptor.agent_id)
            self._bus.create_topic(TopicKind.BROADCAST_REQUEST, pod_req)
            self._bus.create_topic(TopicKind.BROADCAST_RESPONSE, pod_resp)
            self._members[descriptor.agent_id] = []

        self._nodes[descriptor.agent_id] = node
        if parent_pod is not None:
            self._members[parent_pod].append(descriptor.agent_id)
        self._refresh_pod_centroids(node.parent_id)

    def deregister_agent(self, agent_id: str) -> None:
        node = self._nodes.get(agent_id)
        if node is None:
            raise UnknownAgent(agent_id)
        # Pods take their members down with them.
        for member_id in list(self._members.get(agent_id, [])):
            self.deregister_agent(member_id)
        self._members.pop(agent_id, None)
        for sub in node.subscriptions:
            sub.unsubscribe()
        del self._nodes[agent_id]
        if node.parent_id in self._members and agent_id in self._members[node.parent_id]:
            self._members[node.parent_id].remove(agent_id)
        self._refresh_pod_centroids(node.parent_id)
        for hook in self._deregistration_hooks:
            hook(agent_id)

    def add_deregistration_hook(self, hook: Callable[[str], None]) -> None:
        self._deregistration_hooks.append(hook)

    def attach_member(self, pod_id: str, member_id: str) -> None:
        """Re-parent an existing top-level node under a pod."""
        pod = self._nodes.get(pod_id)
        if pod is None or pod.descriptor.node_type is not NodeType.POD:
            raise UnknownPod(pod_id)
        node = self._nodes.get(member_id)
        if node is None:
            raise UnknownAgent(member_id)
        if member_id == pod_id or pod_id in self.transitive_members(member_id):
            raise CyclicPod(f"{member_id} would contain {pod_id}")
        old_parent = node.parent_id
        if old_parent in self._members and member_id in self._members[old_parent]:
            self._members[old_parent].remove(member_id)
        # Move the broadcast-request subscription to the new scope.
        old_req, _ = scope_topic_names(old_parent)
        for sub in list(node.subscriptions):
            if sub.topic.name == old_req:
                sub.unsubscribe()
                node.subscriptions.remove(sub)
        new_req, _ = scope_topic_names(pod_id)
        node.subscriptions.append(
            self._bus.subscribe(self._bus.topic(new_req), member_id, node.handler)
        )
        node.parent_id = pod_id
        self._members[pod_id].append(member_id)
        self._refresh_pod_centroids(old_parent)
        self._refresh_pod_centroids(pod_id)

    # -- lookups ----------------------------------------------------------------

    def descriptor(self, agent_id: str) -> AgentDescriptor:
        try:
            return self._nodes[agent_id].descriptor
        except KeyError:
            raise UnknownAgent(agent_id) from None

    def is_registered(self, agent_id: str) -> bool:
        return agent_id in self._nodes

    def is_pod(self, scope_id: str) -> bool:
        node = self._nodes.get(scope_id)
        return node is not None and node.descriptor.node_type is NodeType.POD

    def app_of(self, agent_id: str) -> str:
        return self._nodes[agent_id].app_id

    def agents_of(self, app_id: str) -> list[AgentDescriptor]:
        if app_id not in self._apps:
            raise UnknownApp(app_id)
        return [n.descriptor for n in self._nodes.values() if n.app_id == app_id]

    def scope_members(self, scope_id: str) -> list[AgentDescriptor]:
        """Direct members of an app (top level) or of a pod."""
        if scope_id in self._apps:
            return [n.descriptor for n in self._nodes.values() if n.parent_id == scope_id]
        if self.is_pod(scope_id):
            return [self._nodes[m].descriptor for m in self._members[scope_id]]
        raise UnknownApp(scope_id)

    def pod_membership(self, pod_id: str) -> PodMembership:
        if not self.is_pod(pod_id):
            raise UnknownPod(pod_id)
        return PodMembership(pod_id, list(self._members[pod_id]))

    def transitive_members(self, scope_id: str) -> list[str]:
        out: list[str] = []
        for member_id in self._members.get(scope_id, []):
            out.append(member_id)
            out.extend(self.transitive_members(member_id))
        return out

    def scope_topics(self, scope_id: str) -> tuple[TopicId, TopicId]:
        if scope_id in self._apps:
            app = self._apps[scope_id]
            return app.request_topic, app.response_topic
        if self.is_pod(scope_id):
            req, resp = scope_topic_names(scope_id)
            return self._bus.topic(req), self._bus.topic(resp)
        raise UnknownApp(scope_id)

    def allowed_classes(self, app_id: str, channel_id: str | None) -> set[AgentClass] | None:
        """None means unrestricted (channel absent from the serving matrix)."""
        app = self.route_app(app_id)
        if channel_id is None:
            return None
        return app.serving_matrix.get(channel_id)

    def _eligible(self, descriptor: AgentDescriptor, allowed: set[AgentClass] | None) -> bool:
        if descriptor.node_type is NodeType.POD:
            return True  # pod members are checked by the pod coordinator
        return allowed is None or descriptor.agent_class in allowed

    def rank_by_centroid(
        self,
        app_id: str,
        query_embedding: Embedding,
        k: int,
        floor: float,
        channel_id: str | None = None,
    ) -> list[tuple[str, float]]:
        return self.rank_members(app_id, query_embedding, k, floor, channel_id)

    def rank_members(
        self,
        scope_id: str,
        query_embedding: Embedding,
        k: int,
        floor: float,
        channel_id: str | None = None,
    ) -> list[tuple[str, float]]:
        """Online scope members with cosine(query, centroid) >= floor,
        best first, ties broken by ascending agent id, at most k."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not -1.0 <= floor <= 1.0:
            raise ValueError("floor must be in [-1, 1]")
        members = self.scope_members(scope_id)
        app_id = scope_id if scope_id in self._apps else self._nodes[scope_id].app_id
        allowed = self.allowed_classes(app_id, channel_id)
        scored = [
            (d.agent_id, cosine(query_embedding, d.centroid.embedding))
            for d in members
            if d.status is AgentStatus.ONLINE and self._eligible(d, allowed)
        ]
        scored = [(a, s) for a, s in scored if s >= floor]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:k]

    # -- mutators -----------------------------------------------------------------

    def update_status(self, agent_id: str, status: AgentStatus) -> None:
        self.descriptor(agent_id).status = status

    def update_rating(self, agent_id: str, rating: Rating) -> None:
        self.descriptor(agent_id).rating = rating

    def record_latency(self, agent_id: str, latency_ms: float) -> None:
        d = self.descriptor(agent_id)
        d.avg_response_time_ms = (
            (1 - LATENCY_EWMA_ALPHA) * d.avg_response_time_ms + LATENCY_EWMA_ALPHA * latency_ms
        )

    def _refresh_pod_centroids(self, scope_id: str) -> None:
        """Recompute centroids up the pod chain after membership changes."""
        node = self._nodes.get(scope_id)
        while node is not None and node.descriptor.node_type is NodeType.POD:
            embeddings: list[Embedding] = []
            for member_id in self.transitive_members(node.descriptor.agent_id):
                embeddings.extend(self._nodes[member_id].utterance_embeddings)
            node.descriptor.centroid = centroid_of(embeddings)
            node = self._nodes.get(node.parent_id)
