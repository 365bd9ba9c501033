"""JSON tree files and CSV/JSON result files."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, fields
from importlib import resources
from typing import Any, Mapping

import jsonschema

from .core import (InitialStressProfile, InterconnectTree, Junction, MaterialParams, ScalingConstants, Segment,
                   TreeValidationError, validate_tree)


class SchemaError(ValueError):
    """Input document does not match its schema; ``errors`` holds (json pointer, message) pairs."""

    def __init__(self, errors: list[tuple[str, str]], source: str = "input"):
        self.errors = errors
        super().__init__(f"{source}: " + "; ".join(f"{p or '/'}: {m}" for p, m in errors))


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def load_schema(name: str = "tree.schema.json") -> dict:
    return json.loads(resources.files("empost").joinpath("data", name).read_text())


def check_schema(doc: Any, schema: dict, source: str = "input") -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise SchemaError([(_pointer(e.absolute_path), e.message) for e in errors], source)


def tree_from_dict(doc: Mapping, validate: bool = True, source: str = "tree") -> InterconnectTree:
    """Build a tree from its JSON form; schema errors and tree invariants are both checked."""
    check_schema(doc, load_schema(), source)
    mat = MaterialParams(**doc.get("material", {}))
    sc = ScalingConstants(**doc.get("scaling", {}))
    junctions = [Junction(j["id"], j["slots"], j["kind"]) for j in doc["junctions"]]
    segments = []
    for s in doc["segments"]:
        s = dict(s)
        h = s.pop("initial_stress", None)
        profile = InitialStressProfile.from_dict(h) if h is not None else InitialStressProfile.constant(0.0)
        segments.append(Segment(**s, initial_stress=profile))
    tree = InterconnectTree(tuple(junctions), tuple(segments), mat, sc)
    if validate:
        diags = validate_tree(tree)
        if diags:
            raise TreeValidationError(diags)
    return tree


def tree_to_dict(tree: InterconnectTree, name: str | None = None) -> dict:
    doc: dict = {}
    if name:
        doc["name"] = name
    doc["material"] = {f.name: getattr(tree.material, f.name) for f in fields(MaterialParams)}
    if doc["material"]["delta_void"] is None:
        del doc["material"]["delta_void"]
    doc["scaling"] = asdict(tree.scaling)
    doc["junctions"] = [{"id": j.id, "kind": j.kind, "slots": dict(j.slots)} for j in tree.junctions]
    doc["segments"] = [
        {"id": s.id, "node_minus": s.node_minus, "node_plus": s.node_plus, "length": s.length, "width": s.width,
         "current_density": s.current_density, "orientation": s.orientation, "void_end": s.void_end,
         "initial_stress": s.initial_stress.to_dict()}
        for s in tree.segments
    ]
    return doc


def load_tree(path) -> InterconnectTree:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError([("", f"invalid JSON: {exc}")], str(path)) from exc
    return tree_from_dict(doc, source=str(path))


def save_tree(tree: InterconnectTree, path, name: str | None = None) -> None:
    atomic_write_text(path, json.dumps(tree_to_dict(tree, name), indent=2) + "\n")


def fixture_path(name: str) -> str:
    """Path of a bundled fixture file (e.g. ``"ten_segment.json"``)."""
    return str(resources.files("empost").joinpath("data", name))


def atomic_write_text(path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
