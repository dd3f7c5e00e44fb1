"""Versioned JSON documents for trained models"""
from contextlib import contextmanager
from json.scanner import py_make_scanner
from pathlib import Path
from typing import Any, Dict, List, Union
import json
import logging
import os
import sys

from pydantic import ValidationError

from app.exceptions import ModelFormatError, ModelVersionError
from app.models.base import TreeStructure
from app.models.cts_tree import UpliftTree
from app.models.ensemble import Forest
from app.models.sma_baseline import SmaModel
from app.schemas.model import FORMAT_VERSION, ModelDocument

logger = logging.getLogger(__name__)

TrainedModel = Union[Forest, SmaModel]

# node records nest once per tree level; a tree is never deeper than its training rows
DEEP_NESTING_LIMIT = 1_000_000


def to_document(model: TrainedModel) -> ModelDocument:
    names = model.schema.feature_names
    common = dict(
        format_version=FORMAT_VERSION,
        data_schema=model.schema,
        schema_fingerprint=model.schema.fingerprint(),
        n_treatments=model.n_treatments,
        categories=model.categories,
        params=model.params,
    )
    if isinstance(model, Forest):
        return ModelDocument(
            algorithm="cts",
            trees=[tree.structure.to_record(names) for tree in model.trees],
            **common,
        )
    return ModelDocument(
        algorithm="sma-rf",
        forests=[[tree.to_record(names) for tree in forest] for forest in model.forests],
        **common,
    )


def from_document(doc: ModelDocument) -> TrainedModel:
    fingerprint = doc.data_schema.fingerprint()
    if fingerprint != doc.schema_fingerprint:
        raise ModelFormatError("schema fingerprint does not match the stored schema")
    d = len(doc.data_schema.feature_columns)
    width = doc.n_treatments if doc.algorithm == "cts" else 1
    records = doc.trees if doc.algorithm == "cts" else [r for forest in doc.forests for r in forest]
    structures = [TreeStructure.from_record(r) for r in records]
    for s in structures:
        if s.estimates.shape[1] != width:
            raise ModelFormatError(f"node estimates have width {s.estimates.shape[1]}, expected {width}")
        if s.n_nodes > 1 and s.feature[s.kind != 0].max() >= d:
            raise ModelFormatError("split refers to a feature outside the schema")

    if doc.algorithm == "cts":
        trees = [UpliftTree(structure=s, params=doc.params.tree, schema_fingerprint=fingerprint, n_features=d)
                 for s in structures]
        return Forest(trees=trees, params=doc.params, schema=doc.data_schema,
                      n_treatments=doc.n_treatments, categories=doc.categories)
    per = [len(forest) for forest in doc.forests]
    forests, start = [], 0
    for size in per:
        forests.append(structures[start:start + size])
        start += size
    return SmaModel(forests=forests, params=doc.params, schema=doc.data_schema,
                    n_treatments=doc.n_treatments, categories=doc.categories)


def _node_json(record: Dict[str, Any]) -> str:
    """One nested node record as compact JSON, written with an explicit stack."""
    parts: List[str] = []
    stack: List[Any] = [record]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        head = json.dumps({k: item[k] for k in ("estimates", "counts", "split")})
        if item["left"] is None:
            parts.append(head[:-1] + ', "left": null, "right": null}')
            continue
        parts.append(head[:-1] + ', "left": ')
        stack.extend(["}", item["right"], ', "right": ', item["left"]])
    return "".join(parts)


def _document_text(doc: ModelDocument) -> str:
    header = json.dumps(doc.model_dump(mode="json", by_alias=True, exclude={"trees", "forests"}), indent=2)
    if doc.algorithm == "cts":
        key = "trees"
        payload = ",\n".join(f"    {_node_json(r)}" for r in doc.trees)
    else:
        key = "forests"
        payload = ",\n".join(
            "    [\n" + ",\n".join(f"      {_node_json(r)}" for r in forest) + "\n    ]"
            for forest in doc.forests
        )
    # header ends with "\n}"
    return f'{header[:-2]},\n  "{key}": [\n{payload}\n  ]\n}}\n'


@contextmanager
def _recursion_limit(limit: int):
    previous = sys.getrecursionlimit()
    sys.setrecursionlimit(max(previous, limit))
    try:
        yield
    finally:
        sys.setrecursionlimit(previous)


def _parse_document(text: str) -> Any:
    """json.loads for documents whose node records nest as deep as their trees."""
    try:
        return json.loads(text)
    except RecursionError:
        pass
    # deep trees: the pure-Python scanner nests Python frames only, bounded by the raised limit
    decoder = json.JSONDecoder()
    decoder.scan_once = py_make_scanner(decoder)
    with _recursion_limit(DEEP_NESTING_LIMIT):
        return decoder.decode(text)


def save_model(model: TrainedModel, path: Union[str, Path]) -> None:
    """Write the model document; the target only appears once fully written."""
    path = Path(path)
    doc = to_document(model)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(_document_text(doc), encoding="utf-8")
    os.replace(tmp, path)
    logger.info(f"Saved {doc.algorithm} model to {path}")


def load_model(path: Union[str, Path]) -> TrainedModel:
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"missing model document: {path}")
    try:
        raw = _parse_document(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"malformed model document {path}: {e}")
    if not isinstance(raw, dict):
        raise ModelFormatError(f"malformed model document {path}: top level is not an object")
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"unsupported model format version {version!r}; this build reads {FORMAT_VERSION!r}")
    try:
        doc = ModelDocument.model_validate(raw)
    except ValidationError as e:
        raise ModelFormatError(f"malformed model document {path}: {e.error_count()} validation errors")
    model = from_document(doc)
    logger.info(f"Loaded {doc.algorithm} model from {path}")
    return model
