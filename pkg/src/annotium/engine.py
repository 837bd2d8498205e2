"""Pipeline engine: run systems over documents with per-document isolation.

Each document is validated against the system's declared conditions, then
processed component by component. A failing document is rolled back to its
pre-run snapshot and reported FAILED without stopping the rest of the
collection (unless the caller opts out of that).
"""

from __future__ import annotations

import time
import traceback
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence, Union

from annotium.broker import Broker, BrokerError, WrapperError, start_broker, wrap_external_component
from annotium.components import (
    ComponentDescriptor,
    ComponentKind,
    Condition,
    Registry,
    System,
    SystemViolation,
    close_over,
    resolve_parameters,
    validate_system,
)
from annotium.model import Collection, Document
from annotium.storage import (
    ValidationFailedError as StorageValidationError,
    export_document,
    import_interchange,
)


class EngineError(Exception):
    """Base class for pipeline-engine errors."""


class ValidationFailedError(EngineError):
    """One or more documents cannot satisfy the system's preconditions."""

    def __init__(self, violations: list[tuple[str, SystemViolation]]) -> None:
        lines = "; ".join(f"{doc_id}: {v}" for doc_id, v in violations)
        super().__init__(f"system validation failed: {lines}")
        self.violations = violations


class PreconditionUnmetError(EngineError):
    def __init__(self, component: str, condition: Condition) -> None:
        super().__init__(f"{component}: missing {condition}")
        self.component = component
        self.condition = condition


class ComponentError(EngineError):
    """A component failed while processing one document."""

    def __init__(self, component: str, detail: str) -> None:
        super().__init__(f"{component}: {detail}")
        self.component = component
        self.detail = detail


@dataclass
class RunOptions:
    continue_on_error: bool = True
    strict_postconditions: bool = False
    dry_run: bool = False
    wrapper_timeout: float = 60.0


@dataclass
class ComponentTiming:
    name: str
    millis: float


@dataclass
class ComponentRunSummary:
    """What one component execution changed in one document."""

    ids_added: list[int]
    attributes_written: list[tuple[int, str]]
    millis: float


@dataclass
class DocumentReport:
    doc_id: str
    status: str = "OK"  # OK | SKIPPED | FAILED
    components: list[ComponentTiming] = field(default_factory=list)
    annotations_added: dict[str, int] = field(default_factory=dict)
    error: Optional[str] = None
    warnings: list[str] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "id": self.doc_id,
            "status": self.status,
            "components": [{"name": c.name, "millis": round(c.millis, 3)} for c in self.components],
            "annotations_added": dict(sorted(self.annotations_added.items())),
            "error": self.error,
            "warnings": list(self.warnings),
        }


@dataclass
class RunReport:
    components: list[str]
    documents: list[DocumentReport] = field(default_factory=list)
    dry_run: bool = False
    millis: float = 0.0

    def count(self, status: str) -> int:
        return sum(1 for d in self.documents if d.status == status)

    @property
    def annotations_added(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for doc in self.documents:
            for annotation_type, n in doc.annotations_added.items():
                totals[annotation_type] = totals.get(annotation_type, 0) + n
        return dict(sorted(totals.items()))

    @property
    def ok(self) -> bool:
        return all(d.status == "OK" for d in self.documents)

    def to_obj(self) -> dict:
        return {
            "components": list(self.components),
            "dry_run": self.dry_run,
            "documents": [d.to_obj() for d in self.documents],
            "totals": {
                "documents": len(self.documents),
                "ok": self.count("OK"),
                "failed": self.count("FAILED"),
                "skipped": self.count("SKIPPED"),
                "annotations_added": self.annotations_added,
                "millis": round(self.millis, 3),
            },
        }


def derive_initial_conditions(doc: Document) -> set[Condition]:
    """The conditions a document's current annotations satisfy.

    (T, ·) for every annotation type T present, plus (T, a) for every
    attribute name a appearing on at least one annotation of type T.
    """
    conditions: set[Condition] = set()
    for annotation in doc.annotations():
        conditions.add(Condition(annotation.type))
        for attr in annotation.attributes:
            conditions.add(Condition(annotation.type, attr.name))
    return conditions


@dataclass(frozen=True)
class BeforeState:
    """Snapshot of the facts postcondition verification compares against."""

    watermark: int  # ids >= watermark are new
    available: frozenset[Condition]
    attr_values: Mapping[tuple[int, str], object]


def capture_state(doc: Document) -> BeforeState:
    return BeforeState(
        watermark=doc.next_id,
        available=frozenset(close_over(derive_initial_conditions(doc))),
        attr_values={
            (a.id, attr.name): attr.value for a in doc.annotations() for attr in a.attributes
        },
    )


def verify_postconditions(
    before: BeforeState, doc_after: Document, descriptor: ComponentDescriptor
) -> list[Condition]:
    """Postconditions the component did not make good on.

    A promise that already held before the run counts as kept (nothing was
    owed); otherwise (T, ·) needs a new annotation of type T and (T, a)
    needs an annotation of type T whose attribute a is new or changed.
    """
    unfulfilled: list[Condition] = []
    for condition in descriptor.post:
        if condition in before.available:
            continue
        if condition.attribute is None:
            kept = any(
                a.type == condition.annotation_type and a.id >= before.watermark
                for a in doc_after.annotations()
            )
        else:
            kept = False
            for a in doc_after.annotations():
                if a.type != condition.annotation_type:
                    continue
                value = a.get_attribute(condition.attribute)
                if value is None:
                    continue
                key = (a.id, condition.attribute)
                if a.id >= before.watermark or before.attr_values.get(key) != value:
                    kept = True
                    break
        if not kept:
            unfulfilled.append(condition)
    return unfulfilled


def _summarize(before: BeforeState, doc: Document, millis: float) -> ComponentRunSummary:
    ids_added = [a.id for a in doc.annotations() if a.id >= before.watermark]
    written = []
    for a in doc.annotations():
        for attr in a.attributes:
            if a.id >= before.watermark:
                continue  # new annotations list under ids_added, not edits
            if before.attr_values.get((a.id, attr.name)) != attr.value:
                written.append((a.id, attr.name))
    return ComponentRunSummary(ids_added=ids_added, attributes_written=written, millis=millis)


class Engine:
    """Executes components and systems against documents and collections."""

    def __init__(self, registry: Registry, broker: Optional[Broker] = None):
        self.registry = registry
        self._broker = broker

    @property
    def broker(self) -> Broker:
        if self._broker is None:
            self._broker = start_broker()
        return self._broker

    def run_component(
        self,
        name: str,
        doc: Document,
        params: Optional[Mapping[str, Any]] = None,
        *,
        check_preconditions: bool = True,
        wrapper_timeout: float = 60.0,
    ) -> ComponentRunSummary:
        """Run a single component once against one document."""
        descriptor = self.registry.get(name)
        bound = resolve_parameters(descriptor, params or {})
        if check_preconditions:
            available = close_over(derive_initial_conditions(doc))
            for condition in descriptor.pre:
                if condition not in available:
                    raise PreconditionUnmetError(name, condition)
        before = capture_state(doc)
        started = time.perf_counter()
        if descriptor.kind is ComponentKind.NATIVE:
            impl = self.registry.impl(name)
            if impl is None:
                raise ComponentError(name, "no implementation bound for native component")
            try:
                impl(doc, bound)
            except Exception as exc:
                raise ComponentError(name, f"{exc}\n{traceback.format_exc()}") from exc
        else:
            run = wrap_external_component(descriptor, timeout=wrapper_timeout)
            try:
                run(doc, bound, self.broker)
            except BrokerError:
                raise
            except (WrapperError, StorageValidationError) as exc:
                raise ComponentError(name, str(exc)) from exc
        millis = (time.perf_counter() - started) * 1000.0
        return _summarize(before, doc, millis)

    def run_system(
        self,
        system: Union[System, Sequence[str]],
        target: Union[Collection, Document],
        options: Optional[RunOptions] = None,
    ) -> RunReport:
        """Run a system over a collection (or a single document).

        Every document is first checked against the system's declared
        conditions. A document whose run fails part-way is restored from its
        pre-run snapshot; with ``continue_on_error`` the run then moves on,
        otherwise the error propagates after the rollback.
        """
        options = options or RunOptions()
        if not isinstance(system, System):
            system = System("adhoc", list(system))
        for name in system.components:
            # fail fast on unknown names and unbindable parameters
            resolve_parameters(self.registry.get(name), system.params_for(name))
        documents = [target] if isinstance(target, Document) else list(target)
        report = RunReport(components=list(system.components), dry_run=options.dry_run)
        run_started = time.perf_counter()

        if options.dry_run:
            violations: list[tuple[str, SystemViolation]] = []
            for doc in documents:
                for violation in validate_system(
                    self.registry, system, derive_initial_conditions(doc)
                ):
                    violations.append((doc.id, violation))
                report.documents.append(DocumentReport(doc_id=doc.id))
            if violations:
                raise ValidationFailedError(violations)
            report.millis = (time.perf_counter() - run_started) * 1000.0
            return report

        for doc in documents:
            # with continue_on_error off, _run_document raises after rollback
            report.documents.append(self._run_document(system, doc, options))
        report.millis = (time.perf_counter() - run_started) * 1000.0
        return report

    def _run_document(self, system: System, doc: Document, options: RunOptions) -> DocumentReport:
        doc_report = DocumentReport(doc_id=doc.id)
        violations = validate_system(self.registry, system, derive_initial_conditions(doc))
        if violations:
            if not options.continue_on_error:
                raise ValidationFailedError([(doc.id, v) for v in violations])
            doc_report.status = "SKIPPED"
            doc_report.error = "; ".join(str(v) for v in violations)
            return doc_report

        try:
            snapshot = export_document(doc)
        except StorageValidationError as exc:
            doc_report.status = "FAILED"
            doc_report.error = f"document invalid before run: {exc}"
            return doc_report

        for name in system.components:
            before = capture_state(doc)
            try:
                summary = self.run_component(
                    name,
                    doc,
                    system.params_for(name),
                    check_preconditions=False,
                    wrapper_timeout=options.wrapper_timeout,
                )
                if options.strict_postconditions:
                    unfulfilled = verify_postconditions(before, doc, self.registry.get(name))
                    if unfulfilled:
                        missing = ", ".join(str(c) for c in unfulfilled)
                        if doc.text:
                            raise ComponentError(name, f"postconditions unfulfilled: {missing}")
                        doc_report.warnings.append(
                            f"{name}: postconditions vacuously unfulfilled on empty text: {missing}"
                        )
            except (ComponentError, BrokerError, EngineError) as exc:
                doc.assign(import_interchange(snapshot))
                doc_report.status = "FAILED"
                doc_report.error = str(exc)
                if not options.continue_on_error:
                    raise
                return doc_report
            doc_report.components.append(ComponentTiming(name, summary.millis))
            for annotation_id in summary.ids_added:
                annotation_type = doc.get_annotation(annotation_id).type
                doc_report.annotations_added[annotation_type] = (
                    doc_report.annotations_added.get(annotation_type, 0) + 1
                )
        return doc_report


def run_system(
    registry: Registry,
    system: Union[System, Sequence[str]],
    target: Union[Collection, Document],
    options: Optional[RunOptions] = None,
    broker: Optional[Broker] = None,
) -> RunReport:
    """Module-level convenience over :meth:`Engine.run_system`."""
    return Engine(registry, broker).run_system(system, target, options)


def run_component(
    registry: Registry,
    name: str,
    doc: Document,
    params: Optional[Mapping[str, Any]] = None,
    broker: Optional[Broker] = None,
) -> ComponentRunSummary:
    """Module-level convenience over :meth:`Engine.run_component`."""
    return Engine(registry, broker).run_component(name, doc, params)
