"""Three-branch convolutional classifier over look-angle image triples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers


@dataclass
class LabeledExample:
    """One event: image triple (broadside, +30, -30) and a one-hot label."""

    images: tuple[np.ndarray, ...]
    label: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        self.label = np.asarray(self.label, dtype=np.float64)
        if len(self.images) != 3:
            raise ValueError("expected three look-angle images")
        if not np.all((self.label == 0.0) | (self.label == 1.0)) or self.label.sum() != 1.0:
            raise ValueError("label must be one-hot")

    @property
    def class_index(self) -> int:
        return int(np.argmax(self.label))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 25
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    split_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


class CnnModel:
    """Three identical convolutional branches feeding a shared dense head.

    Each branch runs ``num_conv`` rounds of 3x3 convolution (+ReLU) and 2x2
    max pooling on its own look-angle image; the flattened branch outputs
    are concatenated into one hidden ReLU layer and a softmax output.
    """

    NUM_BRANCHES = 3

    def __init__(
        self,
        input_hw: int = 128,
        in_channels: int = 3,
        num_filters: int = 16,
        num_conv: int = 3,
        hidden_units: int = 64,
        num_classes: int = 9,
        dtype: np.dtype = np.float32,
        params: dict[str, np.ndarray] | None = None,
        seed: int = 0,
    ) -> None:
        if input_hw % (2**num_conv) != 0:
            raise ValueError(
                f"input size {input_hw} not divisible by 2^{num_conv} pooling"
            )
        self.input_hw = input_hw
        self.in_channels = in_channels
        self.num_filters = num_filters
        self.num_conv = num_conv
        self.hidden_units = hidden_units
        self.num_classes = num_classes
        self.dtype = np.dtype(dtype)
        self.params = params if params is not None else self._init_params(seed)

    @property
    def branch_features(self) -> int:
        side = self.input_hw // (2**self.num_conv)
        return side * side * self.num_filters

    def _init_params(self, seed: int) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        params: dict[str, np.ndarray] = {}

        def he_uniform(shape: tuple, fan_in: int) -> np.ndarray:
            limit = np.sqrt(6.0 / fan_in)
            return rng.uniform(-limit, limit, size=shape).astype(self.dtype)

        for br in range(self.NUM_BRANCHES):
            c_in = self.in_channels
            for li in range(1, self.num_conv + 1):
                key = f"branch{br}_conv{li}"
                params[key + "_w"] = he_uniform(
                    (3, 3, c_in, self.num_filters), 9 * c_in
                )
                params[key + "_b"] = np.zeros(self.num_filters, dtype=self.dtype)
                c_in = self.num_filters
        concat = self.NUM_BRANCHES * self.branch_features
        params["hidden_w"] = he_uniform((concat, self.hidden_units), concat)
        params["hidden_b"] = np.zeros(self.hidden_units, dtype=self.dtype)
        params["output_w"] = he_uniform(
            (self.hidden_units, self.num_classes), self.hidden_units
        )
        params["output_b"] = np.zeros(self.num_classes, dtype=self.dtype)
        return params

    def astype(self, dtype: np.dtype) -> "CnnModel":
        """Copy of the model with parameters cast to another precision."""
        return CnnModel(
            input_hw=self.input_hw,
            in_channels=self.in_channels,
            num_filters=self.num_filters,
            num_conv=self.num_conv,
            hidden_units=self.hidden_units,
            num_classes=self.num_classes,
            dtype=dtype,
            params={k: v.astype(dtype) for k, v in self.params.items()},
        )

    def _check_input(self, x: np.ndarray) -> None:
        expect = (self.NUM_BRANCHES, self.input_hw, self.input_hw, self.in_channels)
        if x.shape[1:] != expect:
            raise ValueError(f"input shape {x.shape[1:]} != expected {expect}")

    def forward_batch(
        self, x: np.ndarray, want_cache: bool = False
    ) -> tuple[np.ndarray, list | None]:
        """Class probabilities for a batch shaped (B, 3, H, W, C)."""
        x = np.asarray(x, dtype=self.dtype)
        self._check_input(x)
        feats = []
        caches: list = []
        for br in range(self.NUM_BRANCHES):
            h = x[:, br]
            branch_cache = []
            for li in range(1, self.num_conv + 1):
                key = f"branch{br}_conv{li}"
                h, ccache = layers.conv2d_forward(
                    h, self.params[key + "_w"], self.params[key + "_b"]
                )
                h, rmask = layers.relu_forward(h)
                h, pcache = layers.maxpool_forward(h)
                branch_cache.append((ccache, rmask, pcache))
            feats.append(h.reshape(h.shape[0], -1))
            caches.append(branch_cache)
        concat = np.concatenate(feats, axis=1)
        hid_pre, hcache = layers.dense_forward(
            concat, self.params["hidden_w"], self.params["hidden_b"]
        )
        hid, hmask = layers.relu_forward(hid_pre)
        logits, ocache = layers.dense_forward(
            hid, self.params["output_w"], self.params["output_b"]
        )
        probs = layers.softmax(logits)
        if not want_cache:
            return probs, None
        return probs, [caches, hcache, hmask, ocache, logits]


def example_batch(batch: list[LabeledExample], dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
    """Stack examples into (B, 3, H, W, C) inputs and (B, K) one-hot labels."""
    x = np.stack([np.stack(ex.images) for ex in batch]).astype(dtype)
    y = np.stack([ex.label for ex in batch]).astype(np.float64)
    return x, y


def forward(model: CnnModel, example: LabeledExample) -> np.ndarray:
    """Probability vector for a single example."""
    x, _ = example_batch([example], dtype=model.dtype)
    probs, _ = model.forward_batch(x)
    return probs[0]


def loss_and_grad(
    model: CnnModel, batch: list[LabeledExample]
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and gradients for every parameter."""
    if not batch:
        raise ValueError("batch must be nonempty")
    x, y = example_batch(batch, dtype=model.dtype)
    return _loss_and_grad_arrays(model, x, y)


def _loss_and_grad_arrays(
    model: CnnModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    probs, cache = model.forward_batch(x, want_cache=True)
    caches, hcache, hmask, ocache, logits = cache
    loss, _, dlogits = layers.softmax_cross_entropy(logits, y)

    grads: dict[str, np.ndarray] = {}
    dhid, grads["output_w"], grads["output_b"] = layers.dense_backward(
        dlogits, ocache
    )
    dhid_pre = layers.relu_backward(dhid, hmask)
    dconcat, grads["hidden_w"], grads["hidden_b"] = layers.dense_backward(
        dhid_pre, hcache
    )
    f = model.branch_features
    b = x.shape[0]
    side = model.input_hw // (2**model.num_conv)
    for br in range(model.NUM_BRANCHES):
        dh = dconcat[:, br * f : (br + 1) * f].reshape(
            b, side, side, model.num_filters
        )
        for li in range(model.num_conv, 0, -1):
            ccache, rmask, pcache = caches[br][li - 1]
            dh = layers.maxpool_backward(dh, pcache)
            dh = layers.relu_backward(dh, rmask)
            key = f"branch{br}_conv{li}"
            dh, grads[key + "_w"], grads[key + "_b"] = layers.conv2d_backward(
                dh, ccache
            )
    return loss, grads
