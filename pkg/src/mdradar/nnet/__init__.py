"""From-scratch three-branch convolutional classifier with Adam training."""

from .model import (
    CnnModel,
    LabeledExample,
    TrainConfig,
    example_batch,
    forward,
    loss_and_grad,
)
from .training import (
    AdamState,
    adam_step,
    evaluate,
    init_adam,
    predict,
    split_by_class,
    train,
)

__all__ = [
    "AdamState",
    "CnnModel",
    "LabeledExample",
    "TrainConfig",
    "adam_step",
    "evaluate",
    "example_batch",
    "forward",
    "init_adam",
    "loss_and_grad",
    "predict",
    "split_by_class",
    "train",
]
