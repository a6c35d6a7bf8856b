# Copyright 2026 The MARINE Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the tiny ONNX graph used by the backend tests.

Graph: global average pool over H and W, flatten, multiply by a fixed 3x4
matrix. Output shape [1, 4].
"""

import json
import sys
from pathlib import Path

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper

WEIGHTS = np.array(
    [[1.0, 0.0, 0.5, -1.0],
     [0.0, 2.0, 0.5, 0.0],
     [0.0, 0.0, 0.5, 3.0]], dtype=np.float32)


def main(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    x = helper.make_tensor_value_info("pixels", TensorProto.FLOAT, [1, 3, "h", "w"])
    y = helper.make_tensor_value_info("cls", TensorProto.FLOAT, [1, 4])
    w = numpy_helper.from_array(WEIGHTS, name="w")
    nodes = [
        helper.make_node("GlobalAveragePool", ["pixels"], ["pooled"]),
        helper.make_node("Flatten", ["pooled"], ["flat"], axis=1),
        helper.make_node("MatMul", ["flat", "w"], ["cls"]),
    ]
    graph = helper.make_graph(nodes, "tiny_pool", [x], [y], initializer=[w])
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 11)])
    model.ir_version = 6
    onnx.checker.check_model(model)
    onnx.save(model, out_dir / "tiny_pool.onnx")
    meta = {"identity": "tiny-pool", "dim": 4, "mean": [0.5, 0.5, 0.5],
            "std": [0.25, 0.5, 1.0], "short_side": 28, "patch_size": 14,
            "output": "cls"}
    (out_dir / "tiny_pool.json").write_text(json.dumps(meta, indent=2) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "data")
