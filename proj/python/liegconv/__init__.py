# Copyright 2026 The LieGConv Authors. All Rights Reserved.
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
# ==============================================================================
"""Separable group convolutions on affine Lie groups."""

from liegconv._core import (
    ConfigError,
    GroupElement,
    Model,
    SubgroupGrid,
    evaluate,
    flop_estimate,
    layerwise_equivariance,
    load_checkpoint,
    load_mnist,
    oriented_bars,
    pca_redundancy,
    random_perturb,
    rotate_image,
    selftest,
    set_num_threads,
    train,
    uniform_grid,
)

__all__ = [
    "ConfigError",
    "GroupElement",
    "Model",
    "SubgroupGrid",
    "evaluate",
    "flop_estimate",
    "layerwise_equivariance",
    "load_checkpoint",
    "load_mnist",
    "oriented_bars",
    "pca_redundancy",
    "random_perturb",
    "rotate_image",
    "selftest",
    "set_num_threads",
    "train",
    "uniform_grid",
]
