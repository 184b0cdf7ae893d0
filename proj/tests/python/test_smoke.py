# Copyright 2026 The weldad Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import numpy as np
import pytest

import weldad

TINY = {
    "n_train": 16, "n_val": 8, "n_test": 24, "steps": 32, "angles": 3,
    "n_video": 4, "n_audio": 4, "n_image": 4, "width": 16, "dip_min": 4,
    "dip_max": 8, "text_dim": 8, "epochs": 2, "batch": 4, "lr": 1e-3,
    "d_model": 8, "d_state": 4, "heads": 2, "latent": 32, "mlp_hidden": 16,
    "topk": 8, "heatmap_res": 16, "heatmap_sigma": 1.0,
}


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    data, ckpt = root / "data", root / "ckpt"
    manifests = weldad.generate_dataset(data, TINY)
    history = weldad.train(data, ckpt, TINY)
    return data, ckpt, manifests, history


def test_metrics_match_hand_examples():
    assert weldad.auroc([0.8, 0.3, 0.2, 0.4], [1, 1, 0, 0]) == pytest.approx(0.75)
    assert weldad.average_precision([0.9, 0.5, 0.1], [1, 0, 1]) == pytest.approx(5 / 6)
    assert weldad.f1_max([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    with pytest.raises(weldad.WeldadError):
        weldad.auroc([0.1, 0.2], [1, 1])


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_tensor_file_round_trip(tmp_path, dtype):
    a = np.random.default_rng(0).normal(size=(3, 4, 5)).astype(dtype)
    weldad.write_tensor(tmp_path / "a.phmt", a)
    b = weldad.read_tensor(tmp_path / "a.phmt")
    assert b.dtype == dtype and b.shape == a.shape
    assert np.array_equal(a, b)


def test_generated_splits(trained):
    _, _, manifests, _ = trained
    assert [m.name for m in manifests] == ["train.manifest", "val.manifest", "test.manifest"]
    train = weldad.load_split(manifests[0])
    assert len(train) == 16
    assert all(s["label"] == "normal" for s in train)
    assert train[0]["image"].shape == (3, 4, 16)
    assert train[0]["sensor"].shape == (32, 6)


def test_train_and_evaluate(trained):
    data, ckpt, _, history = trained
    assert len(history["train_loss"]) == 2
    report = weldad.evaluate(ckpt, data)
    assert 0.0 <= report["auroc"] <= 1.0
    assert len(report["scores"]) == 24
    assert set(report["kind_auroc"]) == {"surface", "process_hidden", "both"}
    assert report == weldad.evaluate(ckpt, data)


def test_robustness_and_heatmap(trained):
    data, ckpt, manifests, _ = trained
    rows = weldad.robustness(ckpt, data, [0.0, 0.2])
    assert [r["sigma"] for r in rows] == [0.0, 0.2]
    sample = weldad.load_split(manifests[2])[0]["id"]
    maps = weldad.heatmap(ckpt, data, sample)
    assert maps.shape == (3, 16, 16)
    assert maps.min() >= 0.0 and maps.max() <= 1.0


def test_gradcheck_module():
    entries = weldad.gradcheck("phm_modulation", 2)
    assert entries and all(e["max_rel_error"] < 1e-4 for e in entries)
    with pytest.raises(weldad.WeldadError):
        weldad.gradcheck("nonexistent", 1)


def test_missing_checkpoint_raises(tmp_path):
    with pytest.raises(RuntimeError):
        weldad.evaluate(tmp_path / "nope", tmp_path)
