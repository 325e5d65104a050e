"""Dependency extraction from the context graph.

Seven dependency kinds are read off fixed graph patterns: functional
(denial) and similarity (matching) constraints between columns, sensor to
device attachment, message-flow ordering between devices, sensor placement
(locality), device monitoring, and sensor capability bounds.  The module
also maintains the extracted set incrementally under change events and
compiles dependencies into column-bound check plans.

All functions are pure over immutable graph snapshots and safe to call
concurrently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import ClassVar, Iterable, Mapping, Union

from .table import ConfigError, DatasetConfig
from .triples import (
    ChangeEvent,
    Iri,
    Literal,
    Term,
    Triple,
    TripleGraph,
    Wildcard,
    match_pattern,
)

logger = logging.getLogger(__name__)

#: Namespace of the fixed context vocabulary.
CTX = "http://example.org/ctx#"

P_DETERMINES = Iri(CTX + "determines")
P_MATCHES_SIMILAR = Iri(CTX + "matchesSimilar")
P_SIMILAR_TO = Iri(CTX + "similarTo")
P_THRESHOLD = Iri(CTX + "threshold")
P_ATTACHED_TO = Iri(CTX + "attachedTo")
P_SENDS_TO = Iri(CTX + "sendsTo")
P_DEPLOYED_AT = Iri(CTX + "deployedAt")
P_AT_LOCATION = Iri(CTX + "atLocation")
P_MONITORED_BY = Iri(CTX + "monitoredBy")
P_HAS_METADATA = Iri(CTX + "hasMetadata")
P_METADATA_TYPE = Iri(CTX + "metadataType")
P_METADATA_VALUE = Iri(CTX + "metadataValue")
P_MAPS_TO_COLUMN = Iri(CTX + "mapsToColumn")
P_TIMESTAMP_COLUMN = Iri(CTX + "timestampColumn")

CAPABILITY_KINDS = ("min", "max", "resolution")


class VocabularyError(Exception):
    """Context triples that use the vocabulary incompletely or inconsistently."""

    def __init__(self, message: str, triples: Iterable[Triple] = ()):
        self.triples = tuple(triples)
        detail = "; ".join(_show_triple(t) for t in self.triples)
        super().__init__(message + (f" [{detail}]" if detail else ""))


def _show_triple(triple: Triple) -> str:
    def show(term: Term) -> str:
        if isinstance(term, Iri):
            return term.value
        if isinstance(term, Literal):
            return repr(term.text)
        return f"_:{term.label}"

    return f"({show(triple.subject)} {show(triple.predicate)} {show(triple.object)})"


def local_name(iri: str) -> str:
    """Trailing fragment or path segment of an IRI; used for display and binding."""
    if "#" in iri:
        return iri.rsplit("#", 1)[1]
    return iri.rstrip("/").rsplit("/", 1)[-1]


# --- dependency kinds --------------------------------------------------------

@dataclass(frozen=True)
class Denial:
    """Equal lhs values must imply equal rhs values across rows."""

    lhs: str
    rhs: str
    kind: ClassVar[str] = "denial"

    @property
    def id(self) -> str:
        return f"denial:{self.lhs}->{self.rhs}"

    def describe(self) -> str:
        return f"{self.lhs} -> {self.rhs}"


@dataclass(frozen=True)
class Matching:
    """Equal lhs values must imply rhs similarity of at least the threshold."""

    lhs: str
    rhs: str
    threshold: float
    kind: ClassVar[str] = "matching"

    @property
    def id(self) -> str:
        return f"matching:{self.lhs}->{self.rhs}"

    def describe(self) -> str:
        return f"{self.lhs} -> {self.rhs} (similarity >= {self.threshold:g})"


@dataclass(frozen=True)
class DeviceLink:
    """The sensor is physically attached to, and read out from, the device."""

    sensor: str
    device: str
    kind: ClassVar[str] = "device_link"

    @property
    def id(self) -> str:
        return f"device_link:{self.sensor}->{self.device}"

    def describe(self) -> str:
        return f"{local_name(self.sensor)} -> {local_name(self.device)}"


@dataclass(frozen=True)
class Temporal:
    """Messages flow predecessor -> successor, so their timestamps must order."""

    predecessor: str
    successor: str
    kind: ClassVar[str] = "temporal"

    @property
    def id(self) -> str:
        return f"temporal:{self.predecessor}->{self.successor}"

    def describe(self) -> str:
        return f"{local_name(self.predecessor)} -> {local_name(self.successor)}"


@dataclass(frozen=True)
class Locality:
    """The sensing device always measures the environment at this location."""

    device: str
    locality: str
    kind: ClassVar[str] = "locality"

    @property
    def id(self) -> str:
        return f"locality:{self.device}->{self.locality}"

    def describe(self) -> str:
        return f"{local_name(self.device)} -> {local_name(self.locality)}"


@dataclass(frozen=True)
class Monitoring:
    device: str
    monitor: str
    kind: ClassVar[str] = "monitoring"

    @property
    def id(self) -> str:
        return f"monitoring:{self.device}->{self.monitor}"

    def describe(self) -> str:
        return f"{local_name(self.device)} -> {local_name(self.monitor)}"


@dataclass(frozen=True)
class Capability:
    """A sensor metadata bound: min / max measurable value or grid resolution."""

    sensor: str
    capability_kind: str  # one of CAPABILITY_KINDS
    value: float
    kind: ClassVar[str] = "capability"

    @property
    def id(self) -> str:
        return f"capability:{self.sensor}:{self.capability_kind}"

    def describe(self) -> str:
        return f"{local_name(self.sensor)} {self.capability_kind} = {self.value:g}"


Dependency = Union[Denial, Matching, DeviceLink, Temporal, Locality, Monitoring, Capability]

KIND_ORDER = ("capability", "denial", "device_link", "locality", "matching", "monitoring", "temporal")

#: Vocabulary predicate IRI -> dependency kind it can affect.
_PREDICATE_KIND = {
    P_DETERMINES.value: "denial",
    P_MATCHES_SIMILAR.value: "matching",
    P_SIMILAR_TO.value: "matching",
    P_THRESHOLD.value: "matching",
    P_ATTACHED_TO.value: "device_link",
    P_SENDS_TO.value: "temporal",
    P_DEPLOYED_AT.value: "locality",
    P_AT_LOCATION.value: "locality",
    P_MONITORED_BY.value: "monitoring",
    P_HAS_METADATA.value: "capability",
    P_METADATA_TYPE.value: "capability",
    P_METADATA_VALUE.value: "capability",
}


@dataclass(frozen=True)
class DependencySet:
    dependencies: tuple[Dependency, ...]
    provenance: Mapping[str, tuple[Triple, ...]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.dependencies)

    def of_kind(self, kind: str) -> list[Dependency]:
        return [dep for dep in self.dependencies if dep.kind == kind]

    def by_id(self, dependency_id: str) -> Dependency:
        for dep in self.dependencies:
            if dep.id == dependency_id:
                return dep
        raise KeyError(dependency_id)


EMPTY_DEPENDENCIES = DependencySet(())


def _require_iri(term: Term, role: str, context: Iterable[Triple]) -> str:
    if not isinstance(term, Iri):
        raise VocabularyError(f"{role} must be an IRI", context)
    return term.value


def _require_literal(term: Term, role: str, context: Iterable[Triple]) -> str:
    if not isinstance(term, Literal):
        raise VocabularyError(f"{role} must be a literal", context)
    return term.text


def _normalize_threshold(text: str, context: Iterable[Triple]) -> float:
    literal = Literal(text)
    value = literal.number
    if value is None:
        raise VocabularyError(f"similarity threshold {text!r} is not numeric", context)
    if value > 1:  # percent notation, e.g. 75 for 75%
        value = value / 100.0
    if not 0 < value <= 1:
        raise VocabularyError(f"similarity threshold {text!r} outside (0, 1]", context)
    return value


def _ground(pattern, binding) -> list[Triple]:
    """Triples matched by a pattern under a binding, for provenance records."""
    slots = []
    for slot in pattern:
        slots.append(binding[slot.name] if isinstance(slot, Wildcard) else slot)
    return [Triple(slots[0], slots[1], slots[2])]


def _extract_kind(graph: TripleGraph, kind: str) -> list[tuple[Dependency, tuple[Triple, ...]]]:
    found: list[tuple[Dependency, tuple[Triple, ...]]] = []
    if kind == "denial":
        pattern = (Wildcard("a"), P_DETERMINES, Wildcard("b"))
        for m in match_pattern(graph, pattern):
            prov = _ground(pattern, m)
            lhs = _require_iri(m["a"], "determining column", prov)
            rhs = _require_iri(m["b"], "determined column", prov)
            if local_name(lhs) == local_name(rhs):
                raise VocabularyError("a column cannot determine itself", prov)
            found.append((Denial(local_name(lhs), local_name(rhs)), tuple(prov)))
    elif kind == "matching":
        head = (Wildcard("a"), P_MATCHES_SIMILAR, Wildcard("m"))
        for m in match_pattern(graph, head):
            prov = _ground(head, m)
            lhs = _require_iri(m["a"], "matching column", prov)
            node = m["m"]
            if not isinstance(node, Iri):
                raise VocabularyError("matching node must be an IRI", prov)
            targets = match_pattern(graph, (node, P_SIMILAR_TO, Wildcard("b")))
            thresholds = match_pattern(graph, (node, P_THRESHOLD, Wildcard("t")))
            if not targets or not thresholds:
                raise VocabularyError(
                    f"matching node {node.value} needs similarTo and threshold", prov
                )
            if len(thresholds) > 1:
                raise VocabularyError(f"matching node {node.value} has multiple thresholds", prov)
            t_prov = _ground((node, P_THRESHOLD, Wildcard("t")), thresholds[0])
            raw = _require_literal(thresholds[0]["t"], "similarity threshold", t_prov)
            threshold = _normalize_threshold(raw, t_prov)
            for target in targets:
                b_prov = _ground((node, P_SIMILAR_TO, Wildcard("b")), target)
                rhs = _require_iri(target["b"], "matched column", b_prov)
                if local_name(lhs) == local_name(rhs):
                    raise VocabularyError("a column cannot match against itself", b_prov)
                found.append(
                    (
                        Matching(local_name(lhs), local_name(rhs), threshold),
                        tuple(prov + b_prov + t_prov),
                    )
                )
    elif kind == "device_link":
        pattern = (Wildcard("s"), P_ATTACHED_TO, Wildcard("d"))
        for m in match_pattern(graph, pattern):
            prov = _ground(pattern, m)
            sensor = _require_iri(m["s"], "sensor", prov)
            device = _require_iri(m["d"], "device", prov)
            found.append((DeviceLink(sensor, device), tuple(prov)))
    elif kind == "temporal":
        pattern = (Wildcard("a"), P_SENDS_TO, Wildcard("b"))
        for m in match_pattern(graph, pattern):
            prov = _ground(pattern, m)
            pred = _require_iri(m["a"], "sending device", prov)
            succ = _require_iri(m["b"], "receiving device", prov)
            found.append((Temporal(pred, succ), tuple(prov)))
    elif kind == "locality":
        deploy = (Wildcard("dev"), P_DEPLOYED_AT, Wildcard("dep"))
        for m in match_pattern(graph, deploy):
            prov = _ground(deploy, m)
            device = _require_iri(m["dev"], "sensing device", prov)
            node = m["dep"]
            if not isinstance(node, Iri):
                raise VocabularyError("deployment node must be an IRI", prov)
            at = (node, P_AT_LOCATION, Wildcard("loc"))
            for place in match_pattern(graph, at):
                loc_prov = _ground(at, place)
                locality = _require_iri(place["loc"], "locality", loc_prov)
                found.append((Locality(device, locality), tuple(prov + loc_prov)))
    elif kind == "monitoring":
        pattern = (Wildcard("a"), P_MONITORED_BY, Wildcard("b"))
        for m in match_pattern(graph, pattern):
            prov = _ground(pattern, m)
            device = _require_iri(m["a"], "monitored device", prov)
            monitor = _require_iri(m["b"], "monitoring component", prov)
            found.append((Monitoring(device, monitor), tuple(prov)))
    elif kind == "capability":
        head = (Wildcard("s"), P_HAS_METADATA, Wildcard("m"))
        for m in match_pattern(graph, head):
            prov = _ground(head, m)
            sensor = _require_iri(m["s"], "sensor", prov)
            node = m["m"]
            if not isinstance(node, Iri):
                raise VocabularyError("metadata node must be an IRI", prov)
            types = match_pattern(graph, (node, P_METADATA_TYPE, Wildcard("t")))
            values = match_pattern(graph, (node, P_METADATA_VALUE, Wildcard("v")))
            if len(types) != 1 or len(values) != 1:
                raise VocabularyError(
                    f"metadata node {node.value} needs exactly one type and one value",
                    prov,
                )
            t_prov = _ground((node, P_METADATA_TYPE, Wildcard("t")), types[0])
            v_prov = _ground((node, P_METADATA_VALUE, Wildcard("v")), values[0])
            cap_kind = _require_literal(types[0]["t"], "metadata type", t_prov)
            if cap_kind not in CAPABILITY_KINDS:
                raise VocabularyError(f"unknown metadata type {cap_kind!r}", t_prov)
            raw = _require_literal(values[0]["v"], "metadata value", v_prov)
            number = Literal(raw).number
            if number is None:
                raise VocabularyError(f"metadata value {raw!r} is not numeric", v_prov)
            if cap_kind == "resolution" and number <= 0:
                raise VocabularyError(f"resolution must be positive, got {raw!r}", v_prov)
            found.append((Capability(sensor, cap_kind, number), tuple(prov + t_prov + v_prov)))
    else:
        raise ValueError(f"unknown dependency kind {kind!r}")
    return found


def _assemble(pairs: Iterable[tuple[Dependency, tuple[Triple, ...]]]) -> DependencySet:
    by_id: dict[str, tuple[Dependency, tuple[Triple, ...]]] = {}
    for dep, prov in pairs:
        if dep.id in by_id:
            existing = by_id[dep.id][0]
            if existing != dep:  # same identity, conflicting payload
                raise VocabularyError(
                    f"conflicting declarations for {dep.id}", by_id[dep.id][1] + prov
                )
            merged = tuple(dict.fromkeys(by_id[dep.id][1] + prov))
            by_id[dep.id] = (dep, merged)
        else:
            by_id[dep.id] = (dep, prov)
    ordered = sorted(by_id.values(), key=lambda item: (KIND_ORDER.index(item[0].kind), item[0].id))
    _check_capability_bounds([dep for dep, _ in ordered])
    return DependencySet(
        tuple(dep for dep, _ in ordered),
        {dep.id: prov for dep, prov in ordered},
    )


def _check_capability_bounds(dependencies: Iterable[Dependency]) -> None:
    bounds: dict[str, dict[str, float]] = {}
    for dep in dependencies:
        if isinstance(dep, Capability) and dep.capability_kind in ("min", "max"):
            bounds.setdefault(dep.sensor, {})[dep.capability_kind] = dep.value
    for sensor, pair in bounds.items():
        if "min" in pair and "max" in pair and pair["min"] > pair["max"]:
            raise VocabularyError(
                f"sensor {sensor} declares min {pair['min']:g} above max {pair['max']:g}"
            )


def extract_all(graph: TripleGraph) -> DependencySet:
    """Extract every dependency the graph declares, deterministically ordered."""
    pairs: list[tuple[Dependency, tuple[Triple, ...]]] = []
    for kind in KIND_ORDER:
        pairs.extend(_extract_kind(graph, kind))
    return _assemble(pairs)


def refresh(
    current: DependencySet, graph_after: TripleGraph, events: list[ChangeEvent]
) -> DependencySet:
    """Update the dependency set after change events.

    Only kinds whose defining predicates appear in the events are re-queried;
    everything else is carried over unchanged, so untouched dependencies keep
    their identities.  The result always equals extract_all(graph_after).
    """
    if not events:
        return current
    touched = {
        _PREDICATE_KIND[event.triple.predicate.value]
        for event in events
        if event.triple.predicate.value in _PREDICATE_KIND
    }
    if not touched:
        return current
    pairs: list[tuple[Dependency, tuple[Triple, ...]]] = []
    for dep in current.dependencies:
        if dep.kind not in touched:
            pairs.append((dep, tuple(current.provenance.get(dep.id, ()))))
    for kind in sorted(touched):
        pairs.extend(_extract_kind(graph_after, kind))
    return _assemble(pairs)


def bindings_from_graph(graph: TripleGraph) -> tuple[dict[str, str], dict[str, str]]:
    """Column and timestamp-column binding hints declared in the graph itself."""
    columns: dict[str, str] = {}
    timestamps: dict[str, str] = {}
    pattern = (Wildcard("s"), P_MAPS_TO_COLUMN, Wildcard("c"))
    for m in match_pattern(graph, pattern):
        prov = _ground(pattern, m)
        subject = _require_iri(m["s"], "bound node", prov)
        columns[subject] = _require_literal(m["c"], "column name", prov)
    pattern = (Wildcard("s"), P_TIMESTAMP_COLUMN, Wildcard("c"))
    for m in match_pattern(graph, pattern):
        prov = _ground(pattern, m)
        subject = _require_iri(m["s"], "bound node", prov)
        timestamps[subject] = _require_literal(m["c"], "timestamp column name", prov)
    return columns, timestamps


# --- check plans -------------------------------------------------------------

@dataclass(frozen=True)
class CheckPlan:
    """A dependency bound to concrete table columns, ready to evaluate."""

    dependency_id: str
    kind: str  # detector kind; localities compile to "colocation"
    columns: tuple[str, ...]
    threshold: float | None = None
    capability_kind: str | None = None
    capability_value: float | None = None
    tolerance: float | None = None
    sensor_name: str | None = None
    device_name: str | None = None
    unhealthy: tuple[tuple[str, str], ...] = ()


def _existing(column: str, schema: Mapping[str, str], owner: str) -> str:
    if column not in schema:
        raise ConfigError(f"{owner} is bound to nonexistent column {column!r}")
    return column


def _numeric(column: str, schema: Mapping[str, str], owner: str) -> str:
    _existing(column, schema, owner)
    if schema[column] != "number":
        raise ConfigError(f"{owner} needs numeric column {column!r}, found {schema[column]}")
    return column


def compile_plans(
    depset: DependencySet, config: DatasetConfig, schema: Mapping[str, str]
) -> list[CheckPlan]:
    """Bind dependencies to the table schema; unbound ones are skipped with a warning.

    schema maps column name to declared type.  Locality dependencies sharing a
    locality pair up into co-location plans over the bound sensor columns.
    """
    plans: list[CheckPlan] = []
    localities: dict[str, list[tuple[str, str]]] = {}
    for dep in depset.dependencies:
        if isinstance(dep, Denial):
            plans.append(
                CheckPlan(
                    dep.id,
                    "denial",
                    (
                        _existing(dep.lhs, schema, dep.id),
                        _existing(dep.rhs, schema, dep.id),
                    ),
                )
            )
        elif isinstance(dep, Matching):
            plans.append(
                CheckPlan(
                    dep.id,
                    "matching",
                    (
                        _existing(dep.lhs, schema, dep.id),
                        _existing(dep.rhs, schema, dep.id),
                    ),
                    threshold=dep.threshold,
                )
            )
        elif isinstance(dep, DeviceLink):
            if config.sensor_id_column is None or config.device_id_column is None:
                logger.warning("skipping %s: no sensor/device id columns configured", dep.id)
                continue
            plans.append(
                CheckPlan(
                    dep.id,
                    "device_link",
                    (
                        _existing(config.sensor_id_column, schema, dep.id),
                        _existing(config.device_id_column, schema, dep.id),
                    ),
                    sensor_name=local_name(dep.sensor),
                    device_name=local_name(dep.device),
                )
            )
        elif isinstance(dep, Temporal):
            pred_col = config.timestamp_bindings.get(dep.predecessor)
            succ_col = config.timestamp_bindings.get(dep.successor)
            if pred_col is None or succ_col is None:
                logger.warning("skipping %s: missing timestamp column binding", dep.id)
                continue
            plans.append(
                CheckPlan(
                    dep.id,
                    "temporal",
                    (
                        _existing(pred_col, schema, dep.id),
                        _existing(succ_col, schema, dep.id),
                    ),
                )
            )
        elif isinstance(dep, Locality):
            column = config.column_bindings.get(dep.device)
            if column is None:
                logger.warning("skipping %s: sensor has no column binding", dep.id)
                continue
            localities.setdefault(dep.locality, []).append(
                (_numeric(column, schema, dep.id), dep.id)
            )
        elif isinstance(dep, Monitoring):
            column = config.column_bindings.get(dep.device)
            ts_column = config.timestamp_bindings.get(dep.device)
            if column is None or ts_column is None:
                logger.warning("skipping %s: missing value/timestamp binding", dep.id)
                continue
            windows = tuple(
                (start, end)
                for device, start, end in config.health_ranges
                if device == dep.device
            )
            plans.append(
                CheckPlan(
                    dep.id,
                    "monitoring",
                    (
                        _existing(column, schema, dep.id),
                        _existing(ts_column, schema, dep.id),
                    ),
                    unhealthy=windows,
                )
            )
        elif isinstance(dep, Capability):
            column = config.column_bindings.get(dep.sensor)
            if column is None:
                logger.warning("skipping %s: sensor has no column binding", dep.id)
                continue
            plans.append(
                CheckPlan(
                    dep.id,
                    "capability",
                    (_numeric(column, schema, dep.id),),
                    capability_kind=dep.capability_kind,
                    capability_value=dep.value,
                )
            )
    for locality, bound in sorted(localities.items()):
        bound = sorted(set(bound))
        for i in range(len(bound)):
            for j in range(i + 1, len(bound)):
                (col_a, _), (col_b, _) = bound[i], bound[j]
                if col_a == col_b:
                    continue
                plans.append(
                    CheckPlan(
                        f"colocation:{local_name(locality)}:{col_a}->{col_b}",
                        "colocation",
                        (col_a, col_b),
                        tolerance=config.colocation_tolerance,
                    )
                )
    plans.sort(key=lambda plan: (plan.kind, plan.dependency_id))
    return plans
