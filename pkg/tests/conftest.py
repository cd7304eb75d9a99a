import numpy as np

from saliq import CalibrationBatch, WeightMatrix


def wm(arr, name="layer") -> WeightMatrix:
    return WeightMatrix(name=name, values=np.asarray(arr, dtype=np.float32))


def cb(arr, layer="layer") -> CalibrationBatch:
    return CalibrationBatch(layer=layer, values=np.asarray(arr, dtype=np.float32))
