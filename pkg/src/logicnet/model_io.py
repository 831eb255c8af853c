"""Versioned model documents: everything needed to reload and run a model.

The format is structured JSON text.  Weights are stored as shortest
round-trip decimal strings of the underlying float64 values, so a load/save
cycle is bit-exact and two runs with the same seed produce byte-identical
files (keys sorted, fixed indentation).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .logic import BlockShape, LogicKind
from .network import Block, Network, Predicate, ThresholdCondition
from .preprocess import BinarizationPlan, MinMaxMap, PredicateSpace

FORMAT_VERSION = 1


class ModelDecodeError(ValueError):
    """A model document failed to parse or validate; the message says where."""


def _f2s(x: float) -> str:
    return repr(float(x))


def _s2f(s, where: str) -> float:
    try:
        return float(s)
    except (TypeError, ValueError) as exc:
        raise ModelDecodeError(f"bad float at {where}: {s!r}") from exc


def _floats_out(arr: np.ndarray) -> list:
    return [_f2s(v) for v in np.asarray(arr, dtype=np.float64).ravel().tolist()]


def _floats_in(values, shape, where: str) -> np.ndarray:
    flat = [_s2f(v, where) for v in values]
    arr = np.array(flat, dtype=np.float64)
    if arr.size != int(np.prod(shape)):
        raise ModelDecodeError(f"wrong element count at {where}: {arr.size} for shape {shape}")
    return arr.reshape(shape)


def _predicate_out(p: Predicate) -> dict:
    d: dict = {"feature_index": p.feature_index, "name": p.name}
    if p.condition is not None:
        d["condition"] = {
            "feature": p.condition.feature,
            "op": p.condition.op,
            "threshold": _f2s(p.condition.threshold),
        }
    if p.lo is not None:
        d["lo"] = _f2s(p.lo)
        d["hi"] = _f2s(p.hi)
    return d


def _predicate_in(d: dict, where: str) -> Predicate:
    cond = None
    if "condition" in d:
        c = d["condition"]
        cond = ThresholdCondition(c["feature"], c["op"], _s2f(c["threshold"], where))
    lo = _s2f(d["lo"], where) if "lo" in d else None
    hi = _s2f(d["hi"], where) if "hi" in d else None
    return Predicate(int(d["feature_index"]), d["name"], condition=cond, lo=lo, hi=hi)


def network_to_doc(net: Network) -> dict:
    return {
        "normal_form": net.normal_form,
        "channels": net.channels,
        "predicates": [_predicate_out(p) for p in net.predicates],
        "blocks": [
            {
                "kind": b.kind.value,
                "shape": [b.shape.channels, b.shape.out_size, b.shape.in_size],
                "connectivity": b.connectivity.tolist(),
                "weights": _floats_out(b.weights),
                "betas": _floats_out(b.betas),
            }
            for b in net.blocks
        ],
    }


def network_from_doc(doc: dict) -> Network:
    try:
        predicates = [
            _predicate_in(p, f"predicates[{i}]") for i, p in enumerate(doc["predicates"])
        ]
        blocks = []
        for i, b in enumerate(doc["blocks"]):
            where = f"blocks[{i}]"
            c, o, isz = (int(v) for v in b["shape"])
            shape = BlockShape(c, o, isz)
            conn = np.array(b["connectivity"], dtype=np.int64)
            if conn.shape != (o, isz):
                raise ModelDecodeError(f"bad connectivity shape at {where}")
            blocks.append(
                Block(
                    LogicKind(b["kind"]),
                    shape,
                    _floats_in(b["weights"], (c, o, isz), where + ".weights"),
                    _floats_in(b["betas"], (c, o), where + ".betas"),
                    conn,
                )
            )
        return Network(predicates, blocks, doc["normal_form"], int(doc["channels"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelDecodeError):
            raise
        raise ModelDecodeError(f"malformed network document: {exc}") from exc


def network_to_bytes(net: Network) -> bytes:
    doc = {"format_version": FORMAT_VERSION, "network": network_to_doc(net)}
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def network_from_bytes(payload: bytes) -> Network:
    doc = _parse_versioned(payload)
    return network_from_doc(doc["network"])


def _parse_versioned(payload: bytes) -> dict:
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelDecodeError(f"corrupt model document: {exc}") from exc
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelDecodeError(
            f"unsupported format_version {version!r}; this build reads version {FORMAT_VERSION}"
        )
    return doc


# ---------------------------------------------------------------------------
# Full trained-model bundle
# ---------------------------------------------------------------------------

@dataclass
class TrainedModel:
    """A predicate space plus network plus training metadata."""

    space: PredicateSpace
    network: Network
    metadata: dict

    @property
    def feature_names(self) -> list[str]:
        return self.space.feature_names

    def predict_raw(self, X_raw: np.ndarray) -> np.ndarray:
        from .network import predict

        return predict(self.network, self.space.transform(X_raw))


def _plan_out(plan: BinarizationPlan) -> dict:
    return {
        "degenerate": plan.degenerate,
        "feature_names": plan.feature_names,
        "thresholds": {str(f): [_f2s(t) for t in ts] for f, ts in plan.thresholds.items()},
        "scalers": [[_f2s(s.lo), _f2s(s.hi)] for s in plan.scalers],
    }


def _plan_in(d: dict) -> BinarizationPlan:
    return BinarizationPlan(
        thresholds={
            int(f): [_s2f(t, "plan.thresholds") for t in ts] for f, ts in d["thresholds"].items()
        },
        scalers=[MinMaxMap(_s2f(lo, "plan.scalers"), _s2f(hi, "plan.scalers")) for lo, hi in d["scalers"]],
        feature_names=list(d["feature_names"]),
        degenerate=bool(d["degenerate"]),
    )


def model_to_bytes(model: TrainedModel) -> bytes:
    doc = {
        "format_version": FORMAT_VERSION,
        "schema": {"feature_names": model.feature_names},
        "binarization": _plan_out(model.space.plan),
        "network": network_to_doc(model.network),
        "metadata": model.metadata,
    }
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def model_from_bytes(payload: bytes) -> TrainedModel:
    doc = _parse_versioned(payload)
    try:
        plan = _plan_in(doc["binarization"])
        space = PredicateSpace(plan, doc["schema"]["feature_names"])
        net = network_from_doc(doc["network"])
        return TrainedModel(space, net, dict(doc.get("metadata", {})))
    except (KeyError, TypeError) as exc:
        raise ModelDecodeError(f"malformed model document: {exc}") from exc


def save_model(model: TrainedModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
