import base64
import json

import numpy as np
import pytest

from models.gbdt import TreeNode
from services.bundle_service import BundleError, checksum, decode_tree, encode_tree, load_bundle, save_bundle
from services.evaluation_service import score_dataset


def _edit(path, change):
    document = json.loads(path.read_text(encoding="utf-8"))
    change(document)
    path.write_text(json.dumps(document), encoding="utf-8")


def test_round_trip_predicts_identically(tmp_path, bundle, holdout):
    path = save_bundle(bundle, tmp_path / "bundle.json")
    loaded = load_bundle(path)
    assert loaded.model_dump() == bundle.model_dump()
    np.testing.assert_array_equal(
        score_dataset(loaded, holdout.test.features),
        score_dataset(bundle, holdout.test.features),
    )


def test_saving_twice_is_byte_identical(tmp_path, bundle):
    first = save_bundle(bundle, tmp_path / "a" / "bundle.json")
    second = save_bundle(bundle, tmp_path / "b" / "bundle.json")
    assert first.read_bytes() == second.read_bytes()


def test_bundle_is_inspectable_json(tmp_path, bundle):
    document = json.loads(save_bundle(bundle, tmp_path / "bundle.json").read_text(encoding="utf-8"))
    assert document["format_version"] == 1
    assert document["checksum"] == checksum(document["payload"])
    assert document["payload"]["metadata"]["excluded_groups"] == ["standardized_tests"]
    assert len(document["payload"]["model"]["trees"]) == 15


def test_tampered_payload_is_rejected(tmp_path, bundle):
    path = save_bundle(bundle, tmp_path / "bundle.json")
    _edit(path, lambda d: d["payload"]["model"].update(init_score=0.0))
    with pytest.raises(BundleError, match="checksum mismatch"):
        load_bundle(path)


def test_future_version_is_rejected(tmp_path, bundle):
    path = save_bundle(bundle, tmp_path / "bundle.json")
    _edit(path, lambda d: d.update(format_version=2))
    with pytest.raises(BundleError, match="unsupported version"):
        load_bundle(path)


def test_malformed_bundles(tmp_path, bundle):
    path = tmp_path / "bundle.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(BundleError, match="malformed"):
        load_bundle(path)

    save_bundle(bundle, path)

    def drop_metadata(document):
        del document["payload"]["metadata"]
        document["checksum"] = checksum(document["payload"])

    _edit(path, drop_metadata)
    with pytest.raises(BundleError, match="malformed"):
        load_bundle(path)


def test_missing_bundle_is_an_io_error(tmp_path):
    with pytest.raises(OSError):
        load_bundle(tmp_path / "absent.json")


def test_bundle_error_is_a_validation_error():
    assert issubclass(BundleError, ValueError)


def test_checksum_ignores_key_order():
    assert checksum({"a": 1, "b": [1.5, "x"]}) == checksum({"b": [1.5, "x"], "a": 1})
    assert checksum({"a": 1}) != checksum({"a": 2})


def test_tree_encoding_is_preorder():
    tree = TreeNode(
        feature_index=3,
        threshold=0.25,
        left=TreeNode(value=-1.5),
        right=TreeNode(feature_index=0, threshold=-2.0, left=TreeNode(value=0.1), right=TreeNode(value=2.0)),
    )
    encoded = encode_tree(tree)
    assert decode_tree(encoded) == tree

    features = np.frombuffer(base64.b64decode(encoded["feature"]), dtype="<i4")
    assert features.tolist() == [3, -1, 0, -1, -1]


def test_decode_rejects_mismatched_arrays():
    encoded = encode_tree(TreeNode(feature_index=0, threshold=1.0, left=TreeNode(value=1.0), right=TreeNode(value=2.0)))
    encoded["value"] = base64.b64encode(np.zeros(1, dtype="<f8").tobytes()).decode("ascii")
    with pytest.raises(BundleError):
        decode_tree(encoded)
