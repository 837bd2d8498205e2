"""Operator command line: collections, pipelines, queries, scaffolds, server.

One binary with subcommands. Exit codes follow a fixed contract: 0 success,
1 user error (bad arguments, unknown names, pipeline validation failures),
2 processing failure (a component failed at run time), 3 I/O trouble.
Machine-readable output is available behind ``--json`` where it matters.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click

from annotium import broker as broker_mod
from annotium import components as components_mod
from annotium import engine as engine_mod
from annotium import model, storage
from annotium.builtins import builtin_registry
from annotium.components import (
    ComponentKind,
    Condition,
    ParameterSpec,
    ParamKind,
    Registry,
    System,
    load_descriptor,
    order_components,
    scaffold_component,
)
from annotium.engine import Engine, RunOptions
from annotium.model import AttributeValue, Collection

ROOT_ENV = "ANNOTIUM_ROOT"

EXIT_OK = 0
EXIT_USER = 1
EXIT_PROCESSING = 2
EXIT_IO = 3


class CliError(click.ClickException):
    """A user-facing error with a contract exit code."""

    def __init__(self, message: str, exit_code: int = EXIT_USER) -> None:
        super().__init__(message)
        self.exit_code = exit_code


def _default_root() -> Path:
    return Path(os.environ.get(ROOT_ENV, "."))


def _load_collection(path: Path) -> Collection:
    try:
        return storage.load_collection(path)
    except storage.MissingDocumentError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    except storage.IoError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    except storage.StorageError as exc:
        raise CliError(str(exc), EXIT_USER) from exc


def _save_collection(collection: Collection, path: Path) -> None:
    try:
        storage.save_collection(collection, path)
    except storage.ValidationFailedError as exc:
        raise CliError(f"collection failed validation: {exc}", EXIT_USER) from exc
    except storage.StorageError as exc:
        raise CliError(str(exc), EXIT_IO) from exc


def _registry_with(descriptors: tuple[str, ...]) -> Registry:
    registry = builtin_registry()
    for descriptor_path in descriptors:
        try:
            registry.register(load_descriptor(descriptor_path))
        except components_mod.ComponentSystemError as exc:
            raise CliError(str(exc), EXIT_USER) from exc
    return registry


def _parse_params(pairs: tuple[str, ...]) -> dict[str, dict[str, str]]:
    """--param component.name=value pairs into a nested mapping."""
    out: dict[str, dict[str, str]] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        component, dot, param = key.partition(".")
        if not sep or not dot or not component or not param:
            raise CliError(f"bad --param {pair!r}, expected component.name=value")
        out.setdefault(component, {})[param] = value
    return out


def _parse_condition(text: str) -> Condition:
    annotation_type, sep, attr = text.partition(":")
    if not annotation_type:
        raise CliError(f"bad condition {text!r}, expected type[:attr]")
    return Condition(annotation_type, attr if sep and attr else None)


def _parse_param_spec(text: str) -> ParameterSpec:
    """name:KIND[:default] with a trailing '!' on the name marking required."""
    parts = text.split(":")
    if len(parts) < 2:
        raise CliError(f"bad --param-spec {text!r}, expected name:KIND[:default]")
    name, kind_name = parts[0], parts[1].upper()
    required = name.endswith("!")
    name = name.rstrip("!")
    try:
        kind = ParamKind(kind_name)
    except ValueError:
        raise CliError(f"unknown parameter kind {kind_name!r}") from None
    default = parts[2] if len(parts) > 2 else None
    if kind is ParamKind.INTEGER and default is not None:
        default = int(default)
    try:
        return ParameterSpec(name, kind, default=default, required=required)
    except components_mod.InvalidDescriptorError as exc:
        raise CliError(str(exc)) from exc


@click.group()
@click.version_option(package_name="annotium", prog_name="annotium")
def cli() -> None:
    """Manage annotation collections and run processing pipelines."""


# -- collection ---------------------------------------------------------------


@cli.group()
def collection() -> None:
    """Create and inspect collections."""


@collection.command("create")
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--name", required=True, help="Collection name stored in the manifest.")
def collection_create(path: Path, name: str) -> None:
    """Create an empty collection directory at PATH."""
    if (path / storage.MANIFEST_NAME).exists():
        raise CliError(f"collection already exists at {path}")
    _save_collection(Collection(name), path)
    click.echo(f"created collection {name!r} at {path}")


@collection.command("list")
@click.argument("root", type=click.Path(path_type=Path), required=False)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def collection_list(root: Optional[Path], as_json: bool) -> None:
    """List collections under ROOT (default: $ANNOTIUM_ROOT or cwd)."""
    base = root or _default_root()
    rows = []
    if base.is_dir():
        for entry in sorted(base.iterdir()):
            if (entry / storage.MANIFEST_NAME).is_file():
                loaded = _load_collection(entry)
                rows.append({"path": str(entry), "name": loaded.name, "documents": len(loaded)})
    if as_json:
        click.echo(json.dumps(rows, indent=2))
    else:
        for row in rows:
            click.echo(f"{row['path']}\t{row['name']}\t{row['documents']} document(s)")


# -- doc ----------------------------------------------------------------------


@cli.group()
def doc() -> None:
    """Add, fetch and remove documents."""


@doc.command("add")
@click.argument("path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--encoding", default="UTF-8", show_default=True, help="Input byte encoding.")
@click.option("--id", "doc_id", default=None, help="Document id (default: file stem).")
def doc_add(path: Path, file: Path, encoding: str, doc_id: Optional[str]) -> None:
    """Import FILE into the collection at PATH."""
    collection = _load_collection(path)
    try:
        encoding_id = storage.EncodingId.from_name(encoding)
    except storage.StorageError as exc:
        raise CliError(str(exc)) from exc
    try:
        data = file.read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {file}: {exc}", EXIT_IO) from exc
    try:
        document = storage.import_document(data, encoding_id, doc_id or file.stem)
    except storage.DecodeError as exc:
        raise CliError(str(exc)) from exc
    try:
        collection.add_document(document)
    except model.DuplicateDocumentError as exc:
        raise CliError(str(exc)) from exc
    _save_collection(collection, path)
    click.echo(f"added document {document.id!r} ({len(document.text)} chars)")


@doc.command("get")
@click.argument("path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("doc_id")
@click.option("--json", "as_json", is_flag=True, help="Print interchange JSON, not just text.")
def doc_get(path: Path, doc_id: str, as_json: bool) -> None:
    """Print a document's text (or its full interchange form)."""
    collection = _load_collection(path)
    try:
        document = collection.get_document(doc_id)
    except model.NotFoundError as exc:
        raise CliError(str(exc)) from exc
    if as_json:
        click.echo(storage.export_document(document).decode("utf-8"), nl=False)
    else:
        click.echo(document.text)


@doc.command("rm")
@click.argument("path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("doc_id")
def doc_rm(path: Path, doc_id: str) -> None:
    """Remove a document from the collection at PATH."""
    collection = _load_collection(path)
    try:
        collection.remove_document(doc_id)
    except model.NotFoundError as exc:
        raise CliError(str(exc)) from exc
    _save_collection(collection, path)
    click.echo(f"removed document {doc_id!r}")


# -- run / validate -----------------------------------------------------------


def _run_common(
    path: Path,
    components: str,
    params: tuple[str, ...],
    descriptors: tuple[str, ...],
    doc_id: Optional[str],
    options: RunOptions,
):
    registry = _registry_with(descriptors)
    collection = _load_collection(path)
    if doc_id is not None:
        try:
            target = collection.get_document(doc_id)
        except model.NotFoundError as exc:
            raise CliError(str(exc)) from exc
    else:
        target = collection
    names = [c.strip() for c in components.split(",") if c.strip()]
    if not names:
        raise CliError("--components must name at least one component")
    system = System("cli", names, _parse_params(params))
    engine = Engine(registry)
    try:
        report = engine.run_system(system, target, options)
    except engine_mod.ValidationFailedError as exc:
        raise CliError(str(exc), EXIT_USER) from exc
    except (engine_mod.ComponentError, broker_mod.BrokerError) as exc:
        raise CliError(str(exc), EXIT_PROCESSING) from exc
    except components_mod.ComponentSystemError as exc:
        raise CliError(str(exc), EXIT_USER) from exc
    return collection, report


@cli.command("run")
@click.argument("path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--components", required=True, help="Comma-separated component names, in order.")
@click.option("--param", "params", multiple=True, help="component.name=value (repeatable).")
@click.option("--descriptor", "descriptors", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Extra descriptor JSON to register (repeatable).")
@click.option("--doc", "doc_id", default=None, help="Run on one document only.")
@click.option("--report", "report_path", type=click.Path(path_type=Path), default=None,
              help="Write the run report as JSON.")
@click.option("--strict", is_flag=True, help="Verify postconditions after each component.")
@click.option("--no-continue", is_flag=True, help="Stop at the first failing document.")
@click.option("--json", "as_json", is_flag=True, help="Print the report JSON to stdout.")
def run_cmd(path, components, params, descriptors, doc_id, report_path, strict, no_continue, as_json):
    """Run a component pipeline over a collection (or one document)."""
    options = RunOptions(continue_on_error=not no_continue, strict_postconditions=strict)
    collection, report = _run_common(path, components, params, descriptors, doc_id, options)
    _save_collection(collection, path)
    obj = report.to_obj()
    if report_path is not None:
        try:
            report_path.write_text(json.dumps(obj, indent=2) + "\n", "utf-8")
        except OSError as exc:
            raise CliError(f"cannot write report: {exc}", EXIT_IO) from exc
    if as_json:
        click.echo(json.dumps(obj, indent=2))
    else:
        totals = obj["totals"]
        added = ", ".join(f"{k}={v}" for k, v in totals["annotations_added"].items()) or "nothing"
        click.echo(
            f"{totals['ok']} ok, {totals['failed']} failed, {totals['skipped']} skipped; added {added}"
        )
        for entry in obj["documents"]:
            if entry["status"] != "OK":
                click.echo(f"  {entry['id']}: {entry['status']} ({entry['error']})")
    if report.count("FAILED"):
        sys.exit(EXIT_PROCESSING)
    if report.count("SKIPPED"):
        sys.exit(EXIT_USER)


@cli.command("validate")
@click.argument("path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--components", required=True, help="Comma-separated component names, in order.")
@click.option("--param", "params", multiple=True, help="component.name=value (repeatable).")
@click.option("--descriptor", "descriptors", multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--doc", "doc_id", default=None)
def validate_cmd(path, components, params, descriptors, doc_id):
    """Check a pipeline against a collection without running it."""
    options = RunOptions(dry_run=True)
    _run_common(path, components, params, descriptors, doc_id, options)
    click.echo("pipeline is valid for every document")


@cli.command("order")
@click.option("--components", required=True, help="Comma-separated component names (any order).")
@click.option("--descriptor", "descriptors", multiple=True,
              type=click.Path(exists=True, dir_okay=False))
def order_cmd(components, descriptors):
    """Print a valid execution order for a set of components."""
    registry = _registry_with(descriptors)
    names = [c.strip() for c in components.split(",") if c.strip()]
    try:
        ordered = order_components(registry, names)
    except components_mod.ComponentSystemError as exc:
        raise CliError(str(exc)) from exc
    click.echo(",".join(ordered))


# -- query / export / import --------------------------------------------------


@cli.command("query")
@click.argument("path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("doc_id")
@click.option("--type", "annotation_type", default=None, help="Filter by annotation type.")
@click.option("--attr", default=None, help="Attribute name (with --value).")
@click.option("--value", default=None, help="Attribute string value (with --attr).")
@click.option("--start", type=int, default=None, help="Range start (with --end).")
@click.option("--end", type=int, default=None, help="Range end (with --start).")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def query_cmd(path, doc_id, annotation_type, attr, value, start, end, as_json):
    """Select annotations from a stored document."""
    collection = _load_collection(path)
    try:
        document = collection.get_document(doc_id)
    except model.NotFoundError as exc:
        raise CliError(str(exc)) from exc
    try:
        found = model.filter_annotations(
            document,
            annotation_type=annotation_type,
            attr_name=attr,
            attr_value=AttributeValue.string(value) if value is not None else None,
            start=start,
            end=end,
        )
    except model.InvalidRangeError as exc:
        raise CliError(str(exc)) from exc
    if as_json:
        click.echo(json.dumps([storage.annotation_to_obj(a) for a in found], indent=2))
    else:
        for a in found:
            spans = " ".join(f"[{s.start},{s.end})" for s in a.spans)
            surface = " ".join(document.annotated_text(a.id))
            click.echo(f"{a.id}\t{a.type}\t{spans}\t{surface}")


@cli.command("export")
@click.argument("path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("doc_id")
@click.option("-o", "--out", type=click.Path(path_type=Path), default=None,
              help="Write to a file instead of stdout.")
def export_cmd(path, doc_id, out):
    """Export a document as interchange JSON."""
    collection = _load_collection(path)
    try:
        document = collection.get_document(doc_id)
    except model.NotFoundError as exc:
        raise CliError(str(exc)) from exc
    payload = storage.export_document(document)
    if out is None:
        sys.stdout.buffer.write(payload)
    else:
        try:
            out.write_bytes(payload)
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc
        click.echo(f"exported {doc_id!r} to {out}")


@cli.command("import")
@click.argument("path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--id", "doc_id", default=None, help="Override the document id.")
def import_cmd(path, file, doc_id):
    """Import an interchange JSON document into a collection."""
    collection = _load_collection(path)
    try:
        data = file.read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {file}: {exc}", EXIT_IO) from exc
    try:
        document = storage.import_interchange(data)
    except storage.StorageError as exc:
        raise CliError(str(exc)) from exc
    if doc_id:
        document.id = doc_id
    try:
        collection.add_document(document)
    except model.DuplicateDocumentError as exc:
        raise CliError(str(exc)) from exc
    _save_collection(collection, path)
    click.echo(f"imported document {document.id!r}")


# -- scaffold / serve ----------------------------------------------------------


@cli.command("scaffold")
@click.argument("name")
@click.option("--kind", type=click.Choice(["NATIVE", "WRAPPER"]), default="WRAPPER",
              show_default=True)
@click.option("--pre", "pre_conditions", multiple=True, help="type[:attr] (repeatable).")
@click.option("--post", "post_conditions", multiple=True, help="type[:attr] (repeatable).")
@click.option("--param-spec", "param_specs", multiple=True,
              help="name[!]:KIND[:default]; '!' marks required (repeatable).")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("."),
              show_default=True)
def scaffold_cmd(name, kind, pre_conditions, post_conditions, param_specs, out_dir):
    """Generate a component descriptor and implementation stub."""
    try:
        paths = scaffold_component(
            name,
            ComponentKind(kind),
            pre=[_parse_condition(c) for c in pre_conditions],
            post=[_parse_condition(c) for c in post_conditions],
            params=[_parse_param_spec(s) for s in param_specs],
            out_dir=out_dir,
        )
    except components_mod.IoError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    except components_mod.ComponentSystemError as exc:
        raise CliError(str(exc)) from exc
    for generated in paths:
        click.echo(f"wrote {generated}")


@cli.command("serve")
@click.option("--root", type=click.Path(path_type=Path), default=None,
              help="Collection root (default: $ANNOTIUM_ROOT or cwd).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=7720, show_default=True)
@click.option("--static", "static_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Directory with the browser UI bundle.")
@click.option("--descriptor", "descriptors", multiple=True,
              type=click.Path(exists=True, dir_okay=False))
def serve_cmd(root, host, port, static_dir, descriptors):
    """Start the HTTP processing service."""
    from annotium.service import ServerConfig, serve

    registry = _registry_with(descriptors)
    config = ServerConfig(
        root=root or _default_root(), host=host, port=port, static_dir=static_dir
    )
    serve(config, registry)


def run_cli(argv: Optional[list[str]] = None) -> int:
    """Programmatic entry point honoring the exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except CliError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return exc.exit_code
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return EXIT_USER
    except click.exceptions.Abort:
        return EXIT_USER
    except SystemExit as exc:  # raised by run_cmd for failed/skipped documents
        return int(exc.code or 0)
    except storage.IoError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
