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

"""Multimodal weld anomaly detection from process/result consistency."""

from ._core import (
    WeldadError,
    auroc,
    average_precision,
    evaluate,
    f1_max,
    generate_dataset,
    gradcheck,
    heatmap,
    load_split,
    read_tensor,
    robustness,
    train,
    write_tensor,
)

__all__ = [
    "WeldadError",
    "auroc",
    "average_precision",
    "evaluate",
    "f1_max",
    "generate_dataset",
    "gradcheck",
    "heatmap",
    "load_split",
    "read_tensor",
    "robustness",
    "train",
    "write_tensor",
]
