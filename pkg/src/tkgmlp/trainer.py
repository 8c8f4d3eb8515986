"""Adam training loop with stepped LR decay, KS early stopping, grid search.

Protocol: minibatches of 4096, Adam at lr0 = 1e-3 multiplied by 0.9 every
20 epochs, early stopping on validation KS with patience 20, best-KS
snapshot restored at the end.
"""

from __future__ import annotations

import hashlib
import itertools
import time
from dataclasses import dataclass, replace

import numpy as np

from . import metrics, nn_core
from .model import ModelConfig, TkgmlpModel, build_model


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4096
    lr0: float = 1e-3
    lr_decay_factor: float = 0.9
    lr_decay_every: int = 20
    max_epochs: int = 100
    patience: int = 20
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch-norm needs 2 rows)")


class AdamState:
    """First/second moment buffers aligned with a fixed parameter list."""

    def __init__(self, params):
        self.m = [np.zeros_like(p) for p, _ in params]
        self.v = [np.zeros_like(p) for p, _ in params]
        self.t = 0


def adam_step(params, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """p -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for (param, grad), m, v in zip(params, state.m, state.v):
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite gradient for parameter of shape {param.shape}")
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        param -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """lr0 * decay^(epoch // every); non-increasing in epoch."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return cfg.lr0 * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)


def early_stop_check(history, patience: int) -> tuple[bool, int]:
    """Stop once `patience` epochs passed since the best entry (ties: earliest)."""
    history = np.asarray(history, dtype=np.float64)
    if history.size == 0:
        raise ValueError("history must be non-empty")
    best_epoch = int(np.argmax(history))
    return (history.size - 1 - best_epoch) >= patience, best_epoch


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    valid_ks: float
    valid_auc: float
    elapsed_s: float

    def log_line(self, with_elapsed: bool = True) -> str:
        cols = [
            str(self.epoch),
            f"{self.lr:.12g}",
            f"{self.train_loss:.17g}",
            metrics.format_percent(self.valid_ks),
            metrics.format_percent(self.valid_auc),
        ]
        if with_elapsed:
            cols.append(f"{self.elapsed_s:.3f}")
        return "\t".join(cols)


@dataclass
class TrainResult:
    history: list[EpochStats]
    best_epoch: int
    best_ks: float
    best_auc: float
    stopped_early: bool
    diverged: bool = False


def _minibatch_slices(n: int, batch_size: int):
    """Contiguous slice bounds; a trailing 1-row remainder merges backwards."""
    bounds = list(range(0, n, batch_size)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < 2:
        del bounds[-2]
    return list(zip(bounds[:-1], bounds[1:]))


def train(
    model: TkgmlpModel,
    train_data: tuple[np.ndarray, np.ndarray],
    valid_data: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    on_epoch=None,
) -> TrainResult:
    """Run the epoch loop; leave the model restored to its best-KS snapshot.

    ``on_epoch`` receives each EpochStats as it is produced (for logging);
    returning a truthy value halts training after that epoch (external
    control, e.g. a time or target budget), with the best snapshot restored.
    """
    x_train, y_train = train_data
    x_valid, y_valid = valid_data
    x_train = nn_core.as_batch(x_train, "train features")
    x_valid = nn_core.as_batch(x_valid, "valid features")
    y_train = np.asarray(y_train, dtype=np.float64).ravel()
    y_valid = np.asarray(y_valid, dtype=np.float64).ravel()
    if x_train.shape[0] == 0 or x_valid.shape[0] == 0:
        raise ValueError("train/valid splits must be non-empty")
    if len({0.0, 1.0} & set(np.unique(y_valid))) < 2:
        raise metrics.UndefinedMetricError("validation split needs both classes")

    rng = np.random.default_rng(cfg.seed)
    params = model.trainable_parameters()
    adam = AdamState(params)
    history: list[EpochStats] = []
    best_snapshot = model.snapshot()
    best_epoch, best_ks, best_auc = -1, -np.inf, -np.inf
    start = time.perf_counter()

    for epoch in range(cfg.max_epochs):
        lr = lr_schedule(epoch, cfg)
        perm = rng.permutation(x_train.shape[0])
        loss_sum = 0.0
        diverged = False
        for lo, hi in _minibatch_slices(perm.size, cfg.batch_size):
            idx = perm[lo:hi]
            xb, yb = x_train[idx], y_train[idx]
            model.zero_grads()
            scores, cache = model.forward(xb, train=True, rng=rng)
            loss, dscores = nn_core.bce_loss(scores, yb)
            if not np.isfinite(loss):
                diverged = True
                break
            model.backward(dscores, cache)
            adam_step(params, adam, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
            loss_sum += loss * idx.size
        if diverged:
            model.restore(best_snapshot)
            return TrainResult(history, max(best_epoch, 0), best_ks, best_auc,
                               stopped_early=False, diverged=True)

        valid_scores, _ = model.forward(x_valid, train=False)
        valid_ks = metrics.ks(valid_scores, y_valid)
        valid_auc = metrics.auc(valid_scores, y_valid)
        stats = EpochStats(
            epoch=epoch,
            lr=lr,
            train_loss=loss_sum / perm.size,
            valid_ks=valid_ks,
            valid_auc=valid_auc,
            elapsed_s=time.perf_counter() - start,
        )
        history.append(stats)
        halt_requested = on_epoch is not None and bool(on_epoch(stats))
        if valid_ks > best_ks:
            best_epoch, best_ks, best_auc = epoch, valid_ks, valid_auc
            best_snapshot = model.snapshot()
        if halt_requested:
            break
        stop, _ = early_stop_check([h.valid_ks for h in history], cfg.patience)
        if stop:
            model.restore(best_snapshot)
            return TrainResult(history, best_epoch, best_ks, best_auc, stopped_early=True)

    model.restore(best_snapshot)
    return TrainResult(history, best_epoch, best_ks, best_auc, stopped_early=False)


def derive_seed(base_seed: int, label: str) -> int:
    """Stable cross-platform sub-seed from (base seed, label)."""
    digest = hashlib.blake2b(f"{base_seed}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class GridSpace:
    """Candidate lists; the defaults enumerate the full 96-point search space."""

    gmlp_layers: tuple[int, ...] = (1, 2)
    kan_layers: tuple[int, ...] = (1, 2)
    grid_size: tuple[int, ...] = (5, 10)
    hidden_dim: tuple[int, ...] = (512, 1024, 2048)
    dropout: tuple[float, ...] = (0.0, 0.3, 0.5, 0.7)

    def configurations(self) -> list[dict]:
        """Cartesian product in deterministic field order."""
        combos = itertools.product(self.gmlp_layers, self.kan_layers, self.grid_size,
                                   self.hidden_dim, self.dropout)
        return [
            {"gmlp_layers": g, "kan_layers": k, "grid_size": gs, "hidden_dim": h, "dropout": d}
            for g, k, gs, h, d in combos
        ]

    @property
    def size(self) -> int:
        return (len(self.gmlp_layers) * len(self.kan_layers) * len(self.grid_size)
                * len(self.hidden_dim) * len(self.dropout))


@dataclass
class GridResult:
    index: int
    overrides: dict
    seed: int
    best_ks: float = -np.inf
    best_auc: float = -np.inf
    best_epoch: int = -1
    epochs_run: int = 0
    error: str | None = None


def grid_search(
    space: GridSpace,
    base_cfg: ModelConfig,
    train_data,
    valid_data,
    train_cfg: TrainConfig,
    on_result=None,
) -> list[GridResult]:
    """Train one model per configuration; rank by KS, then AUC, then index.

    Per-configuration failures are recorded in the result, not raised.
    """
    results = []
    for index, overrides in enumerate(space.configurations()):
        seed = derive_seed(train_cfg.seed, f"grid:{index}")
        result = GridResult(index=index, overrides=overrides, seed=seed)
        try:
            cfg = replace(base_cfg, **overrides)
            mdl = build_model(cfg, seed=derive_seed(seed, "model"))
            outcome = train(mdl, train_data, valid_data, replace(train_cfg, seed=seed))
            result.best_ks = outcome.best_ks
            result.best_auc = outcome.best_auc
            result.best_epoch = outcome.best_epoch
            result.epochs_run = len(outcome.history)
            if outcome.diverged:
                result.error = "diverged"
        except Exception as exc:  # keep the sweep alive
            result.error = f"{type(exc).__name__}: {exc}"
        results.append(result)
        if on_result is not None:
            on_result(result)
    return rank_results(results)


def rank_results(results: list[GridResult]) -> list[GridResult]:
    return sorted(results, key=lambda r: (-r.best_ks, -r.best_auc, r.index))
