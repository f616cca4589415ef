"""Copyright 2026 The polyattack Authors.

All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.

Binary PGM (P5) dumps for visual inspection of image shaped data.
"""

import json

from polyattack import base
import numpy as np


def to_bytes(pixels):
  """Round [0,1] pixels to 0-255 bytes."""
  scaled = np.rint(np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
                   * 255.0)
  return scaled.astype(np.uint8)


def write_pgm(path, pixels, shape):
  """Write [0,1] scaled pixels as a P5 PGM file with maxval 255."""
  height, width = shape
  data = to_bytes(pixels).reshape(-1)
  if data.size != height * width:
    raise base.DimensionMismatch(
        "{} pixels do not fill a {}x{} image".format(data.size, height, width))
  with open(path, "wb") as f:
    f.write("P5\n{} {}\n255\n".format(width, height).encode("ascii"))
    f.write(data.tobytes())


def rescale(values):
  """Affine map of values onto [0,1].

  Returns:
    The rescaled values and the {"offset", "scale"} parameters, such that
    rescaled = (values - offset) * scale. Constant inputs map to 0.5.
  """
  values = np.asarray(values, dtype=np.float64)
  low, high = float(values.min()), float(values.max())
  if high == low:
    return np.full(values.shape, 0.5), {"offset": low - 0.5, "scale": 1.0,
                                        "min": low, "max": high}
  scale = 1.0 / (high - low)
  return (values - low) * scale, {"offset": low, "scale": scale,
                                  "min": low, "max": high}


def write_rescaled_pgm(path, values, shape):
  """Rescale arbitrary values to [0,255], write the PGM and a JSON sidecar."""
  scaled, params = rescale(values)
  write_pgm(path, scaled, shape)
  params = dict(params, maxval=255)
  with open(path + ".json", "w") as f:
    json.dump(params, f, sort_keys=True, indent=2)
  return params
