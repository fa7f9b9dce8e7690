import base64
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from models.features import FittedPipeline
from models.gbdt import GbdtModel, TrainConfig, TreeNode
from models.run import BUNDLE_FORMAT_VERSION, BundleMetadata, ModelBundle
from models.schema import DatasetSchema

logger = logging.getLogger(__name__)

# Flattened tree arrays and their little-endian dtypes
_TREE_ARRAYS = {
    "feature": "<i4",
    "threshold": "<f8",
    "left": "<i4",
    "right": "<i4",
    "value": "<f8",
}


class BundleError(ValueError):
    pass


def save_bundle(bundle: ModelBundle, path: Union[str, Path]) -> Path:
    """Write a checksummed, human-inspectable JSON bundle"""
    payload = _payload(bundle)
    document = {
        "format_version": bundle.format_version,
        "checksum": checksum(payload),
        "payload": payload,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Saved model bundle to {path}")
    return path


def load_bundle(path: Union[str, Path]) -> ModelBundle:
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise BundleError(f"{path}: malformed bundle: {e}") from e
    if not isinstance(document, dict) or "payload" not in document:
        raise BundleError(f"{path}: malformed bundle: no payload")

    version = document.get("format_version")
    if not isinstance(version, int) or version < 1 or version > BUNDLE_FORMAT_VERSION:
        raise BundleError(f"{path}: unsupported version {version!r} (supported: {BUNDLE_FORMAT_VERSION})")

    payload = document["payload"]
    if document.get("checksum") != checksum(payload):
        raise BundleError(f"{path}: checksum mismatch, bundle is corrupted or was edited")

    try:
        model = payload["model"]
        bundle = ModelBundle(
            format_version=version,
            dataset_schema=DatasetSchema.model_validate(payload["dataset_schema"]),
            pipeline=FittedPipeline.model_validate(payload["pipeline"]),
            model=GbdtModel(
                init_score=model["init_score"],
                trees=[decode_tree(t) for t in model["trees"]],
                learning_rate=model["learning_rate"],
                n_features=model["n_features"],
                feature_mask=model["feature_mask"],
                train_deviance=model["train_deviance"],
                config=TrainConfig.model_validate(model["config"]),
            ),
            metadata=BundleMetadata.model_validate(payload["metadata"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise BundleError(f"{path}: malformed bundle: {e}") from e

    logger.info(f"Loaded model bundle from {path} ({len(bundle.model.trees)} trees)")
    return bundle


def checksum(payload: Dict[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def encode_tree(tree: TreeNode) -> Dict[str, str]:
    """Preorder node arrays, base64 of little-endian bytes; leaves have feature -1"""
    columns: Dict[str, List] = {name: [] for name in _TREE_ARRAYS}

    def visit(node: TreeNode) -> int:
        index = len(columns["feature"])
        for name in _TREE_ARRAYS:
            columns[name].append(-1 if _TREE_ARRAYS[name] == "<i4" else 0.0)
        if node.is_leaf:
            columns["value"][index] = node.value
            return index
        columns["feature"][index] = node.feature_index
        columns["threshold"][index] = node.threshold
        columns["left"][index] = visit(node.left)
        columns["right"][index] = visit(node.right)
        return index

    visit(tree)
    return {
        name: base64.b64encode(np.asarray(columns[name], dtype=dtype).tobytes()).decode("ascii")
        for name, dtype in _TREE_ARRAYS.items()
    }


def decode_tree(encoded: Dict[str, str]) -> TreeNode:
    arrays = {
        name: np.frombuffer(base64.b64decode(encoded[name]), dtype=dtype)
        for name, dtype in _TREE_ARRAYS.items()
    }
    n_nodes = len(arrays["feature"])
    if n_nodes == 0 or any(len(a) != n_nodes for a in arrays.values()):
        raise BundleError("tree arrays are empty or differ in length")

    def build(index: int) -> TreeNode:
        if not 0 <= index < n_nodes:
            raise BundleError(f"tree node index {index} out of range")
        feature = int(arrays["feature"][index])
        if feature < 0:
            return TreeNode(value=float(arrays["value"][index]))
        return TreeNode(
            feature_index=feature,
            threshold=float(arrays["threshold"][index]),
            left=build(int(arrays["left"][index])),
            right=build(int(arrays["right"][index])),
        )

    return build(0)


def _payload(bundle: ModelBundle) -> Dict[str, Any]:
    model = bundle.model
    return {
        "dataset_schema": bundle.dataset_schema.model_dump(mode="json"),
        "pipeline": bundle.pipeline.model_dump(mode="json"),
        "model": {
            "init_score": model.init_score,
            "learning_rate": model.learning_rate,
            "n_features": model.n_features,
            "feature_mask": model.feature_mask,
            "train_deviance": model.train_deviance,
            "config": model.config.model_dump(mode="json"),
            "trees": [encode_tree(t) for t in model.trees],
        },
        "metadata": bundle.metadata.model_dump(mode="json"),
    }
