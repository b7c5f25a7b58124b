"""Adam optimization, per-class splitting, and the training/eval loops."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import CnnModel, LabeledExample, TrainConfig, example_batch, loss_and_grad


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the parameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def init_adam(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        t=0,
    )


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    cfg: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; parameters are updated in place."""
    state.t += 1
    b1t = 1.0 - cfg.beta1**state.t
    b2t = 1.0 - cfg.beta2**state.t
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {key}")
        m = state.m[key]
        v = state.v[key]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * np.square(g)
        p -= cfg.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + cfg.eps)
    return params, state


def split_by_class(
    class_indices: np.ndarray,
    fraction: float,
    seed: int,
    class_names: list[str] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic per-class train/holdout split.

    Every class present must have at least two examples so both sides of
    the split are populated.
    """
    labels = np.asarray(class_indices)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    train: list[int] = []
    test: list[int] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            name = (
                class_names[int(cls)]
                if class_names is not None and int(cls) < len(class_names)
                else f"class {int(cls)}"
            )
            raise ValueError(
                f"{name} has {idx.size} example(s); at least 2 required"
            )
        perm = rng.permutation(idx.size)
        n_train = int(round(fraction * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1)
        train.extend(idx[perm[:n_train]])
        test.extend(idx[perm[n_train:]])
    return np.sort(np.array(train)), np.sort(np.array(test))


def _class_names(dataset: list[LabeledExample]) -> list[str] | None:
    names = {}
    for ex in dataset:
        if ex.name:
            names[ex.class_index] = ex.name
    if not names:
        return None
    k = dataset[0].label.size
    return [names.get(i, f"class {i}") for i in range(k)]


def train(
    dataset: list[LabeledExample],
    cfg: TrainConfig,
) -> tuple[CnnModel, list[float]]:
    """Train a fresh model on the per-class training split of the dataset.

    Runs ``cfg.epochs`` epochs of shuffled mini-batches with Adam and
    returns the model plus the mean training loss per epoch. All random
    choices (split, initialization, shuffling) derive from ``cfg.seed``.
    """
    if not dataset:
        raise ValueError("dataset must be nonempty")
    labels = np.array([ex.class_index for ex in dataset])
    train_idx, _ = split_by_class(
        labels, cfg.split_fraction, cfg.seed, _class_names(dataset)
    )
    hw = dataset[0].images[0].shape[0]
    model = CnnModel(
        input_hw=hw,
        in_channels=dataset[0].images[0].shape[2],
        num_classes=dataset[0].label.size,
        seed=int(np.random.SeedSequence([cfg.seed, 0x1217]).generate_state(1)[0]),
    )
    state = init_adam(model.params)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xB457]))

    losses: list[float] = []
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(train_idx)
        total = 0.0
        for lo in range(0, order.size, cfg.batch_size):
            batch = [dataset[i] for i in order[lo : lo + cfg.batch_size]]
            loss, grads = loss_and_grad(model, batch)
            adam_step(state, model.params, grads, cfg)
            total += loss * len(batch)
        losses.append(total / order.size)
    return model, losses


def predict(model: CnnModel, dataset: list[LabeledExample], batch_size: int = 32) -> np.ndarray:
    """Predicted class index per example."""
    preds = np.empty(len(dataset), dtype=np.int64)
    for lo in range(0, len(dataset), batch_size):
        chunk = dataset[lo : lo + batch_size]
        x, _ = example_batch(chunk, dtype=model.dtype)
        probs, _ = model.forward_batch(x)
        preds[lo : lo + len(chunk)] = probs.argmax(axis=1)
    return preds


def evaluate(
    model: CnnModel, dataset: list[LabeledExample]
) -> tuple[float, np.ndarray]:
    """Accuracy and the row-normalized percentage confusion matrix.

    ``confusion[i, j]`` is the percentage of true-class-i examples
    predicted as class j; rows with examples sum to 100.
    """
    if not dataset:
        raise ValueError("dataset must be nonempty")
    k = model.num_classes
    counts = np.zeros((k, k), dtype=np.int64)
    preds = predict(model, dataset)
    for ex, pred in zip(dataset, preds):
        counts[ex.class_index, pred] += 1
    accuracy = float(np.trace(counts) / len(dataset))
    row_sums = counts.sum(axis=1, keepdims=True)
    confusion = np.divide(
        100.0 * counts,
        row_sums,
        out=np.zeros((k, k), dtype=np.float64),
        where=row_sums > 0,
    )
    return accuracy, confusion
