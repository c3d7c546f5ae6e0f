"""JSON model files with bit-exact float round-trip.

Python's ``repr`` of a float is the shortest decimal that parses back to
the same double, which is what ``json`` emits.
"""
import json

import numpy as np

from .boost import Ensemble
from .errors import SchemaError, UnsupportedVersionError
from .loss import LossKind
from .tree import Tree

FORMAT_VERSION = 1


def _node_records(tree: Tree):
    records = []
    for k in range(tree.n_nodes):
        internal = tree.left[k] >= 0
        records.append({
            "node_id": k,
            "kind": "split" if internal else "leaf",
            "feature": int(tree.feature[k]) if internal else None,
            "threshold": float(tree.threshold[k]) if internal else None,
            "weight": float(tree.weight[k]),
            "left_id": int(tree.left[k]) if internal else None,
            "right_id": int(tree.right[k]) if internal else None,
        })
    return records


def ensemble_to_dict(e: Ensemble):
    return {
        "format_version": FORMAT_VERSION,
        "loss": LossKind(e.loss).value,
        "learning_rate": float(e.learning_rate),
        "initial_prediction": float(e.initial_prediction),
        "feature_count": int(e.n_features),
        "feature_names": list(e.feature_names),
        "trees": [_node_records(t) for t in e.trees],
    }


def dumps(e: Ensemble) -> str:
    return json.dumps(ensemble_to_dict(e), indent=1, allow_nan=False, ensure_ascii=False) + "\n"


def save_model(e: Ensemble, path):
    text = dumps(e)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write model file {path}: {exc.strerror}") from exc


def _require(obj, key, kind, where):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaError(f"{where}: field {key!r} has the wrong type")
    return value


def _tree_from_records(records, n_features, t):
    where = f"tree {t}"
    if not isinstance(records, list) or not records:
        raise SchemaError(f"{where}: expected a non-empty list of nodes")
    by_id = {}
    for rec in records:
        if not isinstance(rec, dict):
            raise SchemaError(f"{where}: node record is not an object")
        nid = _require(rec, "node_id", int, where)
        if nid in by_id:
            raise SchemaError(f"{where}: duplicate node {nid}")
        by_id[nid] = rec
    referenced = {}
    for nid, rec in by_id.items():
        kind = rec.get("kind")
        here = f"{where}, node {nid}"
        _require(rec, "weight", float, here)
        if kind == "split":
            feat = _require(rec, "feature", int, here)
            if not 0 <= feat < n_features:
                raise SchemaError(f"{here}: feature {feat} out of range")
            _require(rec, "threshold", float, here)
            for side in ("left_id", "right_id"):
                child = _require(rec, side, int, here)
                if child not in by_id:
                    raise SchemaError(f"{here}: {side} refers to missing node {child}")
                if child in referenced:
                    raise SchemaError(f"{here}: node {child} has more than one parent")
                referenced[child] = nid
        elif kind != "leaf":
            raise SchemaError(f"{here}: unknown kind {kind!r}")
    roots = [nid for nid in by_id if nid not in referenced]
    if len(roots) != 1:
        # a cycle leaves no root; disconnected parts leave several
        raise SchemaError(f"{where}: expected exactly one root, found {sorted(roots)}")
    # preorder walk from the root; detects cycles and orphans
    order, seen, stack = [], set(), [roots[0]]
    while stack:
        nid = stack.pop()
        if nid in seen:
            raise SchemaError(f"{where}, node {nid}: cycle detected")
        seen.add(nid)
        order.append(nid)
        rec = by_id[nid]
        if rec["kind"] == "split":
            stack.append(rec["right_id"])
            stack.append(rec["left_id"])
    orphans = set(by_id) - seen
    if orphans:
        raise SchemaError(f"{where}, node {min(orphans)}: not reachable from the root")
    pos = {nid: k for k, nid in enumerate(order)}
    size = len(order)
    feature = np.full(size, -1, dtype=np.intp)
    threshold = np.full(size, np.nan)
    left = np.full(size, -1, dtype=np.intp)
    right = np.full(size, -1, dtype=np.intp)
    weight = np.zeros(size)
    for nid, k in pos.items():
        rec = by_id[nid]
        weight[k] = float(rec["weight"])
        if rec["kind"] == "split":
            feature[k] = rec["feature"]
            threshold[k] = float(rec["threshold"])
            left[k] = pos[rec["left_id"]]
            right[k] = pos[rec["right_id"]]
    return Tree(feature, threshold, left, right, weight)


def ensemble_from_dict(doc) -> Ensemble:
    if not isinstance(doc, dict):
        raise SchemaError("model file must hold a JSON object")
    version = _require(doc, "format_version", int, "model")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format_version {version}")
    try:
        loss = LossKind(_require(doc, "loss", str, "model"))
    except ValueError:
        raise SchemaError(f"model: unknown loss {doc['loss']!r}") from None
    lr = _require(doc, "learning_rate", float, "model")
    eta = _require(doc, "initial_prediction", float, "model")
    m = _require(doc, "feature_count", int, "model")
    names = tuple(doc.get("feature_names") or (f"x{j}" for j in range(m)))
    trees = _require(doc, "trees", list, "model")
    return Ensemble(loss, lr, eta,
                    trees=[_tree_from_records(rec, m, t) for t, rec in enumerate(trees)],
                    n_features=m, feature_names=names)


def loads(text) -> Ensemble:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}") from None
    return ensemble_from_dict(doc)


def load_model(path) -> Ensemble:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
