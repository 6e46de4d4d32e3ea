"""Classification accuracy."""

import numpy as np

from src.data.dataset import Dataset, DatasetError
from src.nn.layers import NetworkSpec
from src.nn.network import NetworkState, forward
from src.tensor.tensor import Tensor, no_grad


def predict(
    state: NetworkState,
    spec: NetworkSpec,
    images: np.ndarray,
    batch_size: int = 256,
) -> np.ndarray:
    """Predicted class per image; argmax ties go to the lowest class index."""
    if images.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    precision = next(iter(state.parameters.values())).precision
    predictions = []
    with no_grad():
        for start in range(0, images.shape[0], batch_size):
            chunk = Tensor(images[start : start + batch_size], dtype=precision)
            logits = forward(state, spec, chunk)
            predictions.append(np.argmax(logits.data, axis=1))
    return np.concatenate(predictions)


def evaluate(
    state: NetworkState,
    spec: NetworkSpec,
    dataset: Dataset,
    batch_size: int = 256,
) -> float:
    """Fraction of samples whose predicted class equals the label.

    Raises:
        DatasetError: If the split is empty.
    """
    if len(dataset) == 0:
        raise DatasetError(f"Cannot evaluate on an empty {dataset.split} split")
    predictions = predict(state, spec, dataset.images, batch_size)
    return float(np.count_nonzero(predictions == dataset.labels)) / len(dataset)
