"""Processing components: descriptors, conditions, registry, pipeline checks.

Every component declares the annotation information it needs before it can
run (preconditions) and the information it promises to add (postconditions),
as (annotation type, optional attribute) pairs. Those declarations let a
pipeline of components be checked, and a runnable order derived, without
executing anything.
"""

from __future__ import annotations

import json
import os
import stat
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

from annotium.model import Document


class ComponentSystemError(Exception):
    """Base class for component-system errors."""


class InvalidDescriptorError(ComponentSystemError):
    pass


class DuplicateNameError(ComponentSystemError):
    pass


class UnknownComponentError(ComponentSystemError):
    pass


class NoValidOrderError(ComponentSystemError):
    """No execution order can satisfy every precondition.

    ``missing`` maps each unplaceable component to the conditions that were
    still unavailable when ordering got stuck.
    """

    def __init__(self, missing: dict[str, list["Condition"]]) -> None:
        parts = ", ".join(
            f"{name} needs {', '.join(map(str, conds))}" for name, conds in missing.items()
        )
        super().__init__(f"no valid component order: {parts}")
        self.missing = missing


class ParameterError(ComponentSystemError):
    def __init__(self, name: str, message: str) -> None:
        super().__init__(message)
        self.name = name


class MissingRequiredError(ParameterError):
    def __init__(self, name: str) -> None:
        super().__init__(name, f"missing required parameter {name!r}")


class TypeMismatchError(ParameterError):
    def __init__(self, name: str, expected: str, value: Any) -> None:
        super().__init__(name, f"parameter {name!r} expects {expected}, got {value!r}")


class UnknownParameterError(ParameterError):
    def __init__(self, name: str) -> None:
        super().__init__(name, f"unknown parameter {name!r}")


class IoError(ComponentSystemError):
    """Filesystem failure while scaffolding."""


@dataclass(frozen=True, order=True)
class Condition:
    """A piece of annotation information: a type, optionally with an attribute.

    Having (T, a) available implies (T, ·) is available; the reverse never
    holds, and (T, a) is not satisfied by (T, b).
    """

    annotation_type: str
    attribute: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.annotation_type:
            raise InvalidDescriptorError("condition needs a non-empty annotation type")

    def implied(self) -> tuple["Condition", ...]:
        """This condition plus everything its presence implies."""
        if self.attribute is None:
            return (self,)
        return (self, Condition(self.annotation_type))

    def __str__(self) -> str:
        return f"({self.annotation_type},{self.attribute or '·'})"


def close_over(conditions: Iterable[Condition]) -> set[Condition]:
    """The availability closure of a condition set."""
    out: set[Condition] = set()
    for condition in conditions:
        out.update(condition.implied())
    return out


class ParamKind(str, Enum):
    STRING = "STRING"
    PATH = "PATH"
    INTEGER = "INTEGER"
    BOOLEAN = "BOOLEAN"
    ENUM = "ENUM"


_TRUE_WORDS = {"true", "yes", "1", "on"}
_FALSE_WORDS = {"false", "no", "0", "off"}


@dataclass(frozen=True)
class ParameterSpec:
    """One run-time option a component accepts."""

    name: str
    kind: ParamKind
    default: Any = None
    required: bool = False
    choices: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidDescriptorError("parameter name must be non-empty")
        if self.required and self.default is not None:
            raise InvalidDescriptorError(f"required parameter {self.name!r} cannot have a default")
        if self.kind is ParamKind.ENUM:
            if not self.choices:
                raise InvalidDescriptorError(f"ENUM parameter {self.name!r} needs choices")
            if self.default is not None and self.default not in self.choices:
                raise InvalidDescriptorError(
                    f"default {self.default!r} of {self.name!r} not among choices"
                )
        elif self.choices:
            raise InvalidDescriptorError(f"only ENUM parameters take choices ({self.name!r})")

    def coerce(self, value: Any) -> Any:
        """Check/convert a supplied value to this parameter's kind."""
        kind = self.kind
        if kind is ParamKind.STRING:
            if isinstance(value, str):
                return value
        elif kind is ParamKind.PATH:
            if isinstance(value, (str, os.PathLike)):
                return str(value)
        elif kind is ParamKind.INTEGER:
            if isinstance(value, int) and not isinstance(value, bool):
                return value
            if isinstance(value, str):
                try:
                    return int(value, 10)
                except ValueError:
                    pass
        elif kind is ParamKind.BOOLEAN:
            if isinstance(value, bool):
                return value
            if isinstance(value, str):
                word = value.strip().lower()
                if word in _TRUE_WORDS:
                    return True
                if word in _FALSE_WORDS:
                    return False
        elif kind is ParamKind.ENUM:
            if isinstance(value, str) and value in self.choices:
                return value
        raise TypeMismatchError(self.name, kind.value, value)


class ComponentKind(str, Enum):
    NATIVE = "NATIVE"
    WRAPPER = "WRAPPER"


# A native component mutates the document in place given its bound parameters.
NativeImpl = Callable[[Document, Mapping[str, Any]], None]


@dataclass(frozen=True)
class ComponentDescriptor:
    """Declared shape of a component: conditions, parameters, how it runs.

    Condition tuples keep declaration order; reporting uses that order so a
    component's primary requirement is named first.
    """

    name: str
    kind: ComponentKind
    pre: tuple[Condition, ...] = ()
    post: tuple[Condition, ...] = ()
    params: tuple[ParameterSpec, ...] = ()
    command: Optional[str] = None
    viewers: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pre", tuple(self.pre))
        object.__setattr__(self, "post", tuple(self.post))
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "viewers", tuple(self.viewers))
        if not self.name:
            raise InvalidDescriptorError("component name must be non-empty")
        if self.kind is ComponentKind.WRAPPER and not (self.command or "").strip():
            raise InvalidDescriptorError(f"wrapper {self.name!r} needs a non-empty command")
        if self.kind is ComponentKind.NATIVE and self.command is not None:
            raise InvalidDescriptorError(f"native component {self.name!r} cannot take a command")
        both = set(self.pre) & set(self.post)
        if both:
            raise InvalidDescriptorError(
                f"{self.name!r} lists conditions as both pre and post: "
                + ", ".join(map(str, sorted(both)))
            )
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise InvalidDescriptorError(f"{self.name!r} has duplicate parameter names")


def resolve_parameters(descriptor: ComponentDescriptor, supplied: Mapping[str, Any]) -> dict:
    """Bind supplied values against the descriptor's parameter specs.

    Fills defaults, coerces kinds, and rejects unknown or missing names.
    """
    specs = {p.name: p for p in descriptor.params}
    for name in supplied:
        if name not in specs:
            raise UnknownParameterError(name)
    bound: dict[str, Any] = {}
    for name, spec in specs.items():
        if name in supplied:
            bound[name] = spec.coerce(supplied[name])
        elif spec.required:
            raise MissingRequiredError(name)
        elif spec.default is not None:
            bound[name] = spec.default
    return bound


@dataclass
class System:
    """A named, ordered pipeline of components with bound parameter values."""

    name: str
    components: list[str]
    params: dict[str, dict[str, Any]] = field(default_factory=dict)

    def params_for(self, component: str) -> dict[str, Any]:
        return self.params.get(component, {})


@dataclass(frozen=True)
class SystemViolation:
    """A component whose precondition is not available at its position."""

    component: str
    condition: Condition

    def __str__(self) -> str:
        return f"{self.component}: missing {self.condition}"


class Registry:
    """Name-indexed store of component descriptors, native impls and systems.

    Registration takes the internal lock; lookups and pipeline checks are
    pure reads.
    """

    def __init__(self) -> None:
        self._components: dict[str, tuple[ComponentDescriptor, Optional[NativeImpl]]] = {}
        self._systems: dict[str, System] = {}
        self._lock = threading.Lock()

    def register(self, descriptor: ComponentDescriptor, impl: Optional[NativeImpl] = None) -> None:
        if impl is not None and descriptor.kind is not ComponentKind.NATIVE:
            raise InvalidDescriptorError(f"{descriptor.name!r}: only native components bind impls")
        with self._lock:
            if descriptor.name in self._components:
                raise DuplicateNameError(f"component {descriptor.name!r} already registered")
            self._components[descriptor.name] = (descriptor, impl)

    def get(self, name: str) -> ComponentDescriptor:
        try:
            return self._components[name][0]
        except KeyError:
            raise UnknownComponentError(f"unknown component {name!r}") from None

    def impl(self, name: str) -> Optional[NativeImpl]:
        self.get(name)
        return self._components[name][1]

    def __contains__(self, name: str) -> bool:
        return name in self._components

    def names(self) -> list[str]:
        return sorted(self._components)

    def descriptors(self) -> list[ComponentDescriptor]:
        return [self._components[n][0] for n in self.names()]

    def register_system(self, system: System) -> None:
        with self._lock:
            if system.name in self._systems:
                raise DuplicateNameError(f"system {system.name!r} already registered")
            self._systems[system.name] = system

    def get_system(self, name: str) -> System:
        try:
            return self._systems[name]
        except KeyError:
            raise UnknownComponentError(f"unknown system {name!r}") from None

    def systems(self) -> list[System]:
        return [self._systems[n] for n in sorted(self._systems)]


def validate_system(
    registry: Registry,
    system: Union[System, Sequence[str]],
    initial: Iterable[Condition] = (),
) -> list[SystemViolation]:
    """Simulate the pipeline left to right and report unmet preconditions.

    Starting from ``initial``, each component must find its preconditions
    among the conditions accumulated so far; its postconditions are then
    added whether or not it validated, so one broken link does not cascade
    into noise.
    """
    names = system.components if isinstance(system, System) else list(system)
    available = close_over(initial)
    violations: list[SystemViolation] = []
    for name in names:
        descriptor = registry.get(name)
        for condition in descriptor.pre:
            if condition not in available:
                violations.append(SystemViolation(name, condition))
        available.update(close_over(descriptor.post))
    return violations


def order_components(
    registry: Registry,
    names: Iterable[str],
    initial: Iterable[Condition] = (),
) -> list[str]:
    """Find a deterministic execution order satisfying all preconditions.

    Greedy selection: at each step run the lexicographically smallest
    component whose preconditions are available. Because postconditions only
    ever add information, greedy selection succeeds whenever any valid order
    exists.
    """
    remaining = sorted(set(names))
    for name in remaining:
        registry.get(name)
    available = close_over(initial)
    ordered: list[str] = []
    while remaining:
        runnable = next(
            (
                name
                for name in remaining
                if all(c in available for c in registry.get(name).pre)
            ),
            None,
        )
        if runnable is None:
            missing = {
                name: [c for c in registry.get(name).pre if c not in available]
                for name in remaining
            }
            raise NoValidOrderError(missing)
        ordered.append(runnable)
        remaining.remove(runnable)
        available.update(close_over(registry.get(runnable).post))
    return ordered


# ---------------------------------------------------------------------------
# Descriptor files


def _condition_to_obj(condition: Condition) -> dict:
    obj: dict[str, Any] = {"type": condition.annotation_type}
    if condition.attribute is not None:
        obj["attr"] = condition.attribute
    return obj


def descriptor_to_obj(descriptor: ComponentDescriptor) -> dict:
    obj: dict[str, Any] = {
        "name": descriptor.name,
        "kind": descriptor.kind.value,
        "pre": [_condition_to_obj(c) for c in descriptor.pre],
        "post": [_condition_to_obj(c) for c in descriptor.post],
        "params": [],
        "viewers": list(descriptor.viewers),
    }
    if descriptor.command is not None:
        obj["command"] = descriptor.command
    for spec in descriptor.params:
        entry: dict[str, Any] = {
            "name": spec.name,
            "kind": spec.kind.value,
            "required": spec.required,
        }
        if spec.default is not None:
            entry["default"] = spec.default
        if spec.choices:
            entry["choices"] = list(spec.choices)
        obj["params"].append(entry)
    return obj


def _condition_from_obj(obj: Any) -> Condition:
    if not isinstance(obj, dict) or "type" not in obj:
        raise InvalidDescriptorError(f"bad condition entry {obj!r}")
    return Condition(obj["type"], obj.get("attr"))


def descriptor_from_obj(obj: Any) -> ComponentDescriptor:
    if not isinstance(obj, dict):
        raise InvalidDescriptorError("descriptor must be a JSON object")
    try:
        kind = ComponentKind(obj.get("kind", ""))
    except ValueError:
        raise InvalidDescriptorError(f"unknown component kind {obj.get('kind')!r}") from None
    params = []
    for entry in obj.get("params", []):
        try:
            param_kind = ParamKind(entry.get("kind", ""))
        except ValueError:
            raise InvalidDescriptorError(f"unknown parameter kind {entry.get('kind')!r}") from None
        params.append(
            ParameterSpec(
                entry.get("name", ""),
                param_kind,
                default=entry.get("default"),
                required=bool(entry.get("required", False)),
                choices=tuple(entry.get("choices", ())),
            )
        )
    return ComponentDescriptor(
        name=obj.get("name", ""),
        kind=kind,
        pre=tuple(_condition_from_obj(c) for c in obj.get("pre", [])),
        post=tuple(_condition_from_obj(c) for c in obj.get("post", [])),
        params=tuple(params),
        command=obj.get("command"),
        viewers=tuple(obj.get("viewers", ())),
    )


def load_descriptor(path: Union[str, Path]) -> ComponentDescriptor:
    try:
        obj = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read descriptor {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidDescriptorError(f"descriptor {path} is not valid JSON: {exc}") from None
    return descriptor_from_obj(obj)


_WRAPPER_STUB = '''\
#!/usr/bin/env python3
"""{name}: wrapper component stub.

Reads one interchange document from standard input, writes one to standard
output. Replace the passthrough below with real processing.
"""

import json
import sys


def process(doc: dict) -> dict:
    return doc


def main() -> int:
    doc = json.load(sys.stdin)
    json.dump(process(doc), sys.stdout, ensure_ascii=False)
    sys.stdout.write("\\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
'''

_NATIVE_STUB = '''\
"""{name}: native component stub."""


def run(document, params):
    """Process ``document`` in place using bound ``params``."""
    # implement me


'''


def scaffold_component(
    name: str,
    kind: ComponentKind,
    pre: Iterable[Condition] = (),
    post: Iterable[Condition] = (),
    params: Iterable[ParameterSpec] = (),
    out_dir: Union[str, Path] = ".",
) -> list[Path]:
    """Generate a descriptor file plus an implementation stub.

    Wrapper stubs are executable identity filters over the interchange
    format; native stubs are source files following the package convention.
    The emitted descriptor loads and registers cleanly as-is.
    """
    out = Path(out_dir)
    descriptor_path = out / f"{name}.descriptor.json"
    if descriptor_path.exists():
        raise DuplicateNameError(f"{descriptor_path} already exists")
    stub_path = out / (name if kind is ComponentKind.WRAPPER else f"{name}.py")

    command = str(stub_path.resolve()) if kind is ComponentKind.WRAPPER else None
    descriptor = ComponentDescriptor(
        name=name,
        kind=kind,
        pre=tuple(pre),
        post=tuple(post),
        params=tuple(params),
        command=command,
    )

    stub = (_WRAPPER_STUB if kind is ComponentKind.WRAPPER else _NATIVE_STUB).format(name=name)
    try:
        out.mkdir(parents=True, exist_ok=True)
        descriptor_path.write_text(
            json.dumps(descriptor_to_obj(descriptor), indent=2) + "\n", "utf-8"
        )
        stub_path.write_text(stub, "utf-8")
        if kind is ComponentKind.WRAPPER:
            stub_path.chmod(stub_path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    except OSError as exc:
        raise IoError(f"cannot scaffold into {out}: {exc}") from exc
    return [descriptor_path, stub_path]
