"""Versioned JSON round-trips for every fitted model kind.

Documents carry ``format`` (schema version) and ``kind`` tags; loading
rebuilds the exact in-memory model, so predictions before and after a
save/load cycle are bit-identical.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .boosting import BoostModel, BoostParams
from .ensemble import (
    SALT_AUGMENT,
    SALT_MEMBER,
    AugmentConfig,
    EnsembleModel,
    EnsembleSpec,
    PerturbConfig,
    _Member,
)
from .errors import DataError
from .linear import GreedyLsModel, GreedyLsParams, OlsModel
from .mars import HingeTerm, MarsModel, MarsParams, MarsSnapshot
from .randomization import ResamplePlan, SeedSpec, mix64
from .tree import TreeModel, TreeParams

__all__ = ["FORMAT_VERSION", "model_to_json", "model_from_json", "save_model", "load_model"]

FORMAT_VERSION = 1


def _floats(a: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=np.float64)]


def _tree_doc(model: TreeModel) -> dict[str, Any]:
    nodes = []
    for i in range(model.n_nodes):
        nodes.append(
            {
                "feature": int(model.feature[i]),
                "threshold": float(model.threshold[i]),
                "left": int(model.left[i]),
                "right": int(model.right[i]),
                "value": float(model.value[i]),
                "count": int(model.count[i]),
                "sse": float(model.sse[i]),
                "depth": int(model.depth[i]),
            }
        )
    return {
        "kind": "tree",
        "params": {
            "min_node": model.params.min_node,
            "mtry": model.params.mtry,
            "max_depth": model.params.max_depth,
        },
        "n_features": model.n_features,
        "nodes": nodes,
    }


def _tree_from(doc: dict[str, Any]) -> TreeModel:
    nodes = doc["nodes"]
    params = doc["params"]
    return TreeModel(
        feature=np.array([n["feature"] for n in nodes], dtype=np.int64),
        threshold=np.array([n["threshold"] for n in nodes], dtype=np.float64),
        left=np.array([n["left"] for n in nodes], dtype=np.int64),
        right=np.array([n["right"] for n in nodes], dtype=np.int64),
        value=np.array([n["value"] for n in nodes], dtype=np.float64),
        count=np.array([n["count"] for n in nodes], dtype=np.int64),
        sse=np.array([n["sse"] for n in nodes], dtype=np.float64),
        depth=np.array([n["depth"] for n in nodes], dtype=np.int64),
        params=TreeParams(
            min_node=int(params["min_node"]),
            mtry=float(params["mtry"]),
            max_depth=None if params["max_depth"] is None else int(params["max_depth"]),
        ),
        n_features=int(doc["n_features"]),
    )


def _boost_doc(model: BoostModel) -> dict[str, Any]:
    p = model.params
    return {
        "kind": "boosting",
        "intercept": model.intercept,
        "learning_rate": model.learning_rate,
        "params": {
            "steps": p.steps,
            "learning_rate": p.learning_rate,
            "subsample": p.subsample,
            "interaction_depth": p.interaction_depth,
            "min_node": p.min_node,
            "mtry": p.mtry,
        },
        "n_features": model.n_features,
        "train_mse_path": _floats(model.train_mse_path),
        "stages": [_tree_doc(t) for t in model.stages],
    }


def _boost_from(doc: dict[str, Any]) -> BoostModel:
    p = doc["params"]
    return BoostModel(
        intercept=float(doc["intercept"]),
        learning_rate=float(doc["learning_rate"]),
        stages=[_tree_from(t) for t in doc["stages"]],
        params=BoostParams(
            steps=int(p["steps"]),
            learning_rate=float(p["learning_rate"]),
            subsample=float(p["subsample"]),
            interaction_depth=int(p["interaction_depth"]),
            min_node=int(p["min_node"]),
            mtry=float(p["mtry"]),
        ),
        n_features=int(doc["n_features"]),
        train_mse_path=np.array(doc["train_mse_path"], dtype=np.float64),
    )


def _mars_doc(model: MarsModel) -> dict[str, Any]:
    p = model.params
    return {
        "kind": "mars",
        "intercept": model.intercept,
        "coefs": _floats(model.coefs),
        "terms": [
            [[f, knot, d] for f, knot, d in t.factors] for t in model.terms
        ],
        "params": {
            "max_terms": p.max_terms,
            "max_degree": p.max_degree,
            "mtry": p.mtry,
            "tol": p.tol,
            "restart_floor": p.restart_floor,
        },
        "n_features": model.n_features,
        "snapshots": [
            {"n_terms": s.n_terms, "intercept": s.intercept, "coefs": _floats(s.coefs)}
            for s in model.snapshots
        ],
        "sse0": model.sse0,
        "sse_final": model.sse_final,
    }


def _mars_from(doc: dict[str, Any]) -> MarsModel:
    p = doc["params"]
    return MarsModel(
        intercept=float(doc["intercept"]),
        terms=[
            HingeTerm(tuple((int(f), float(k), int(d)) for f, k, d in t))
            for t in doc["terms"]
        ],
        coefs=np.array(doc["coefs"], dtype=np.float64),
        params=MarsParams(
            max_terms=int(p["max_terms"]),
            max_degree=int(p["max_degree"]),
            mtry=float(p["mtry"]),
            tol=float(p["tol"]),
            restart_floor=None if p["restart_floor"] is None else float(p["restart_floor"]),
        ),
        n_features=int(doc["n_features"]),
        snapshots=[
            MarsSnapshot(
                n_terms=int(s["n_terms"]),
                intercept=float(s["intercept"]),
                coefs=np.array(s["coefs"], dtype=np.float64),
            )
            for s in doc["snapshots"]
        ],
        sse0=float(doc["sse0"]),
        sse_final=float(doc["sse_final"]),
    )


def _greedy_ls_doc(model: GreedyLsModel) -> dict[str, Any]:
    return {
        "kind": "greedy_ls",
        "intercept": model.intercept,
        "coefs": _floats(model.coefs),
        "selections": [[j, inc] for j, inc in model.selections],
        "learning_rate": model.learning_rate,
        "steps": model.steps,
        "n_features": model.n_features,
    }


def _greedy_ls_from(doc: dict[str, Any]) -> GreedyLsModel:
    return GreedyLsModel(
        intercept=float(doc["intercept"]),
        coefs=np.array(doc["coefs"], dtype=np.float64),
        selections=[(int(j), float(inc)) for j, inc in doc["selections"]],
        learning_rate=float(doc["learning_rate"]),
        steps=int(doc["steps"]),
        n_features=int(doc["n_features"]),
    )


def _ols_doc(model: OlsModel) -> dict[str, Any]:
    return {
        "kind": "ols",
        "intercept": model.intercept,
        "coefs": _floats(model.coefs),
        "n_features": model.n_features,
    }


def _ols_from(doc: dict[str, Any]) -> OlsModel:
    return OlsModel(
        intercept=float(doc["intercept"]),
        coefs=np.array(doc["coefs"], dtype=np.float64),
        n_features=int(doc["n_features"]),
    )


def _spec_doc(spec: EnsembleSpec) -> dict[str, Any]:
    if spec.base_params is None:
        params_doc = None
    else:
        params_doc = _PARAM_TO_DOC[type(spec.base_params).__name__](spec.base_params)
    return {
        "base": spec.base,
        "base_params": params_doc,
        "resample": {
            "kind": spec.resample.kind,
            "rate": spec.resample.rate,
            "b_members": spec.resample.b_members,
        },
        "perturb": {
            "mtry": spec.perturb.mtry,
            "feature_drop": spec.perturb.feature_drop,
            "stage_subsample": spec.perturb.stage_subsample,
        },
        "augment": {
            "enabled": spec.augment.enabled,
            "replicas": spec.augment.replicas,
            "noise_sd_fraction": spec.augment.noise_sd_fraction,
            "shuffle_fraction": spec.augment.shuffle_fraction,
        },
        "seed": {"master_seed": spec.seed.master_seed, "stream_id": spec.seed.stream_id},
    }


_PARAM_TO_DOC = {
    "TreeParams": lambda p: {"min_node": p.min_node, "mtry": p.mtry, "max_depth": p.max_depth},
    "BoostParams": lambda p: {
        "steps": p.steps,
        "learning_rate": p.learning_rate,
        "subsample": p.subsample,
        "interaction_depth": p.interaction_depth,
        "min_node": p.min_node,
        "mtry": p.mtry,
    },
    "MarsParams": lambda p: {
        "max_terms": p.max_terms,
        "max_degree": p.max_degree,
        "mtry": p.mtry,
        "tol": p.tol,
        "restart_floor": p.restart_floor,
    },
    "GreedyLsParams": lambda p: {"steps": p.steps, "learning_rate": p.learning_rate},
}

_PARAM_FROM_DOC = {
    "tree": lambda d: TreeParams(
        min_node=int(d["min_node"]),
        mtry=float(d["mtry"]),
        max_depth=None if d["max_depth"] is None else int(d["max_depth"]),
    ),
    "boosting": lambda d: BoostParams(
        steps=int(d["steps"]),
        learning_rate=float(d["learning_rate"]),
        subsample=float(d["subsample"]),
        interaction_depth=int(d["interaction_depth"]),
        min_node=int(d["min_node"]),
        mtry=float(d["mtry"]),
    ),
    "mars": lambda d: MarsParams(
        max_terms=int(d["max_terms"]),
        max_degree=int(d["max_degree"]),
        mtry=float(d["mtry"]),
        tol=float(d["tol"]),
        restart_floor=None if d["restart_floor"] is None else float(d["restart_floor"]),
    ),
    "greedy_ls": lambda d: GreedyLsParams(
        steps=int(d["steps"]), learning_rate=float(d["learning_rate"])
    ),
}


def _spec_from(doc: dict[str, Any]) -> EnsembleSpec:
    base = doc["base"]
    params_doc = doc["base_params"]
    if base == "ols":
        base_params = None
    else:
        base_params = _PARAM_FROM_DOC[base](params_doc)
    r = doc["resample"]
    p = doc["perturb"]
    a = doc["augment"]
    s = doc["seed"]
    return EnsembleSpec(
        base=base,
        base_params=base_params,
        resample=ResamplePlan(
            kind=r["kind"], rate=float(r["rate"]), b_members=int(r["b_members"])
        ),
        perturb=PerturbConfig(
            mtry=float(p["mtry"]),
            feature_drop=float(p["feature_drop"]),
            stage_subsample=None
            if p["stage_subsample"] is None
            else float(p["stage_subsample"]),
        ),
        augment=AugmentConfig(
            enabled=bool(a["enabled"]),
            replicas=int(a["replicas"]),
            noise_sd_fraction=float(a["noise_sd_fraction"]),
            shuffle_fraction=float(a["shuffle_fraction"]),
        ),
        seed=SeedSpec(master_seed=int(s["master_seed"]), stream_id=int(s["stream_id"])),
    )


def _ensemble_doc(model: EnsembleModel) -> dict[str, Any]:
    members = []
    for b, member in enumerate(model.members):
        root = model.spec.seed.key(SALT_MEMBER, b)
        members.append(
            {
                "kept": None if member.kept is None else [int(j) for j in member.kept],
                "augment_key": int(mix64(root, SALT_AUGMENT)),
                "model": _to_doc(member.model),
            }
        )
    return {
        "kind": "ensemble",
        "spec": _spec_doc(model.spec),
        "names": list(model.names),
        "kinds": list(model.kinds),
        "cat_counts": [int(c) for c in model.cat_counts],
        "categories": {str(j): list(v) for j, v in model.categories.items()},
        "train_sds": _floats(model.train_sds),
        "train_fitted": _floats(model.train_fitted),
        "members": members,
    }


def _ensemble_from(doc: dict[str, Any]) -> EnsembleModel:
    return EnsembleModel(
        spec=_spec_from(doc["spec"]),
        names=[str(n) for n in doc["names"]],
        kinds=[str(k) for k in doc["kinds"]],
        cat_counts=[int(c) for c in doc["cat_counts"]],
        categories={int(j): [str(s) for s in v] for j, v in doc["categories"].items()},
        train_sds=np.array(doc["train_sds"], dtype=np.float64),
        members=[
            _Member(
                kept=None
                if m["kept"] is None
                else np.array(m["kept"], dtype=np.int64),
                model=_from_doc(m["model"]),
            )
            for m in doc["members"]
        ],
        train_fitted=np.array(doc["train_fitted"], dtype=np.float64),
    )


def _to_doc(model: object) -> dict[str, Any]:
    if isinstance(model, TreeModel):
        return _tree_doc(model)
    if isinstance(model, BoostModel):
        return _boost_doc(model)
    if isinstance(model, MarsModel):
        return _mars_doc(model)
    if isinstance(model, GreedyLsModel):
        return _greedy_ls_doc(model)
    if isinstance(model, OlsModel):
        return _ols_doc(model)
    if isinstance(model, EnsembleModel):
        return _ensemble_doc(model)
    raise DataError(f"cannot serialize model of type {type(model).__name__}")


_FROM_DOC = {
    "tree": _tree_from,
    "boosting": _boost_from,
    "mars": _mars_from,
    "greedy_ls": _greedy_ls_from,
    "ols": _ols_from,
    "ensemble": _ensemble_from,
}


def _from_doc(doc: dict[str, Any]) -> object:
    kind = doc.get("kind")
    if kind not in _FROM_DOC:
        raise DataError(f"unknown model kind {kind!r} in model document")
    return _FROM_DOC[kind](doc)


def model_to_json(model: object) -> dict[str, Any]:
    """Encode a fitted model as a JSON-ready document with a version tag."""
    doc = _to_doc(model)
    doc["format"] = FORMAT_VERSION
    return doc


def model_from_json(doc: dict[str, Any]) -> object:
    """Rebuild a fitted model from a ``model_to_json`` document."""
    if not isinstance(doc, dict):
        raise DataError("model document must be a JSON object")
    version = doc.get("format")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format {version!r}")
    return _from_doc(doc)


def save_model(path: str, model: object) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, indent=1)
        fh.write("\n")


def load_model(path: str) -> object:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    return model_from_json(doc)
