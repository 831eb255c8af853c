"""Training: gradient descent on block weights interleaved with bandit-driven
prune-and-regrow cycles over the layer-0 predicate bindings.

Epoch loop: mini-batch Adam steps under a cosine-annealing-with-warm-restarts
schedule; on epoch-loss improvement a reward is computed and pushed into the
bandit policy; after ``kappa`` plateau epochs the weakest layer-0 slots are
pruned and rebound to features sampled from the policy.  Validation AUC is
tracked every epoch and the best weights are retained.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bandit import BanditPolicy
from .config import TrainConfig
from .logic import LogicKind, block_backward
from .metrics import roc_auc
from .network import Network, forward_trace

EPS = 1e-7
REWARD_ROW_CAP = 10_000


def bce_loss(yhat: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross entropy; predictions clipped to [1e-7, 1 - 1e-7]."""
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ValueError(f"length mismatch: {yhat.shape} vs {y.shape}")
    p = np.clip(yhat, EPS, 1.0 - EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_grad(yhat: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d(mean BCE)/d yhat, zero where the clip saturates."""
    p = np.clip(yhat, EPS, 1.0 - EPS)
    g = (p - y) / (p * (1.0 - p) * yhat.size)
    return np.where((yhat >= EPS) & (yhat <= 1.0 - EPS), g, 0.0)


class Adam:
    """Adam over a list of weight arrays, with optional decoupled weight decay."""

    def __init__(self, shapes: list[tuple], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float, weight_decay: float = 0.0) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if weight_decay:
                update = update + weight_decay * p
            p -= lr * update

    def reset_block_slots(self, block_idx: int, mask: np.ndarray) -> None:
        # Freshly re-initialized weights should not inherit stale moments.
        self.m[block_idx][0][mask] = 0.0
        self.v[block_idx][0][mask] = 0.0


def cosine_restart_lr(base_lr: float, epoch: int, t_0: int, t_mult: int) -> float:
    """Learning rate at a given epoch under warm cosine restarts."""
    t_i, e = t_0, epoch
    while e >= t_i:
        e -= t_i
        t_i *= t_mult
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * e / t_i))


def network_gradients(net: Network, rows: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Loss and d(loss)/d(weights) per block, chained through all layers."""
    trace = forward_trace(net, rows)
    yhat = trace[-1][:, 0, 0]
    loss = bce_loss(yhat, y)
    grad = bce_grad(yhat, y)[:, None, None]  # (B, C, O=1)
    grads: list[np.ndarray] = [None] * len(net.blocks)  # type: ignore[list-item]
    batch = rows.shape[0]
    for idx in range(len(net.blocks) - 1, -1, -1):
        blk = net.blocks[idx]
        below = trace[idx]
        gathered = below[:, :, blk.connectivity]
        grad_w, grad_in = block_backward(blk.kind, blk.weights, blk.betas, gathered, grad)
        grads[idx] = grad_w
        if idx > 0:
            grad_prev = np.zeros_like(below)
            np.add.at(
                grad_prev,
                (
                    np.arange(batch)[:, None, None, None],
                    np.arange(net.channels)[None, :, None, None],
                    blk.connectivity[None, None, :, :],
                ),
                grad_in,
            )
            grad = grad_prev
    return loss, grads


def gradient_step(
    net: Network,
    rows: np.ndarray,
    y: np.ndarray,
    opt: Adam,
    lr: float,
    cfg: TrainConfig,
) -> float:
    """One Adam update on a mini-batch; returns the pre-update batch loss."""
    if rows.shape[0] == 0:
        raise ValueError("empty batch")
    loss, grads = network_gradients(net, rows, y)
    if not math.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss {loss}")
    if cfg.use_l1 and cfg.l1_lambda:
        for blk, g in zip(net.blocks, grads):
            g += cfg.l1_lambda * np.sign(blk.weights)
    wd = cfg.weight_decay_alpha if cfg.use_weight_decay else 0.0
    opt.step([b.weights for b in net.blocks], grads, lr, weight_decay=wd)
    return loss


# ---------------------------------------------------------------------------
# Reward strategies
# ---------------------------------------------------------------------------

def _strictly_above_percentile(values: np.ndarray, rho: float) -> np.ndarray:
    return values > np.quantile(values, rho)


def layer0_slot_features(net: Network) -> np.ndarray:
    """Raw feature index behind every layer-0 (node, input) slot; shape (O, I)."""
    feat = np.array([p.feature_index for p in net.predicates], dtype=np.int64)
    return feat[net.blocks[0].connectivity]


def reward_class(net: Network, rho: float) -> np.ndarray:
    """Reward each feature by the |weight| of its strong layer-0 slots."""
    aw = np.abs(net.blocks[0].weights[0]).ravel()
    keep = _strictly_above_percentile(aw, rho)
    feats = layer0_slot_features(net).ravel()
    r = np.zeros(net.n_features)
    np.add.at(r, feats[keep], aw[keep])
    return r


def reward_logic(net: Network, rho: float, rows: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Reward features feeding layer-0 nodes that rank the labels well.

    Each layer-0 node's output is scored with ROC AUC against the labels;
    nodes strictly above the rho-percentile add their AUC to every feature
    they read.
    """
    if np.unique(np.asarray(y)).size < 2:
        raise ValueError("logic reward needs both classes present")
    rows = rows[:REWARD_ROW_CAP]
    y = y[:REWARD_ROW_CAP]
    blk = net.blocks[0]
    gathered = np.asarray(rows, dtype=np.float64)[:, None, :][:, :, blk.connectivity]
    from .logic import block_forward

    outputs = block_forward(blk.kind, blk.weights, blk.betas, gathered)[:, 0, :]
    aucs = np.array([roc_auc(outputs[:, k], y) for k in range(outputs.shape[1])])
    keep = _strictly_above_percentile(aucs, rho)
    slot_feats = layer0_slot_features(net)
    r = np.zeros(net.n_features)
    for k in np.flatnonzero(keep):
        np.add.at(r, slot_feats[k], aucs[k])
    return r


def reward_logic_class(net: Network, rho: float) -> np.ndarray:
    """Reward features of layer-0 nodes whose outgoing layer-1 weight is strong."""
    if len(net.blocks) < 2:
        raise ValueError("logic_class reward needs at least two layers")
    w1 = np.abs(net.blocks[1].weights[0])
    keep = _strictly_above_percentile(w1.ravel(), rho).reshape(w1.shape)
    conn1 = net.blocks[1].connectivity
    slot_feats = layer0_slot_features(net)
    r = np.zeros(net.n_features)
    for o, j in zip(*np.nonzero(keep)):
        np.add.at(r, slot_feats[conn1[o, j]], w1[o, j])
    return r


def compute_reward(net: Network, cfg: TrainConfig, rows: np.ndarray, y: np.ndarray) -> np.ndarray:
    if cfg.prune_strategy == "class":
        return reward_class(net, cfg.prune_quantile)
    if cfg.prune_strategy == "logic":
        return reward_logic(net, cfg.prune_quantile, rows, y)
    return reward_logic_class(net, cfg.prune_quantile)


# ---------------------------------------------------------------------------
# Structure search
# ---------------------------------------------------------------------------

def _predicates_by_feature(net: Network) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for idx, p in enumerate(net.predicates):
        groups.setdefault(p.feature_index, []).append(idx)
    return groups


def prune_and_sample(
    net: Network,
    policy: BanditPolicy,
    rho: float,
    delta: float,
    bounds: tuple[float, float],
    rng: np.random.Generator,
) -> np.ndarray:
    """Prune weak layer-0 slots and rebind them to bandit-sampled features.

    Slots whose |weight| is strictly above the rho-percentile are kept; kept
    features have their sampling score divided by ``delta``.  Every pruned
    slot is rebound to a predicate of a freshly sampled feature and its
    weight re-initialized from Uniform(a, b): with a sign opposite to the
    kept weights' sum when the feature survived the prune, with a random
    sign otherwise.  Only layer-0 bindings and weights change.

    Returns the boolean (O, I) mask of re-initialized slots.
    """
    if policy.n_arms == 0:
        raise ValueError("empty bandit policy")
    a, b = bounds
    blk = net.blocks[0]
    w = blk.weights[0]
    conn = blk.connectivity
    aw = np.abs(w)
    keep = _strictly_above_percentile(aw.ravel(), rho).reshape(aw.shape)
    slot_feats = layer0_slot_features(net)
    kept_features = set(np.unique(slot_feats[keep]).tolist())

    kept_sum_by_feature = {
        f: float(w[keep & (slot_feats == f)].sum()) for f in kept_features
    }
    scores = policy.scores().astype(np.float64).copy()
    for f in kept_features:
        scores[f] /= delta
    total = scores.sum()
    probs = scores / total if total > 0 else np.full(scores.shape, 1.0 / scores.size)
    by_feature = _predicates_by_feature(net)

    changed = np.zeros_like(keep)
    for o in range(conn.shape[0]):
        for j in range(conn.shape[1]):
            if keep[o, j]:
                continue
            new_pred = -1
            feature = -1
            for _ in range(16):
                feature = int(rng.choice(policy.n_arms, p=probs))
                used = set(conn[o].tolist()) - {int(conn[o, j])}
                candidates = [p for p in by_feature.get(feature, []) if p not in used]
                if candidates:
                    new_pred = int(candidates[int(rng.integers(len(candidates)))])
                    break
            if new_pred < 0:
                continue  # no free predicate found; leave the slot untouched
            conn[o, j] = new_pred
            u = rng.uniform(a, b)
            if feature in kept_features:
                sign = -math.copysign(1.0, kept_sum_by_feature[feature])
            else:
                sign = 1.0 if rng.random() < 0.5 else -1.0
            w[o, j] = sign * u
            changed[o, j] = True
    return changed


@dataclass
class PlateauState:
    """The plateau-driven reward/prune state machine.

    ``observe`` consumes one epoch loss and reports the action the training
    loop must take: reward the bandit on improvement, prune after more than
    ``kappa`` plateau epochs, otherwise wait (growing ``kappa`` by ``iota``
    once the plateau exceeds ``tau``).
    """

    kappa: float
    tau: float
    iota: float
    l_min: float = math.inf
    pc: int = 0

    def observe(self, loss: float) -> str:
        if loss < self.l_min:
            self.l_min = loss
            self.pc = 0
            return "reward"
        self.pc += 1
        if self.pc > self.kappa:
            self.pc = 0
            return "prune"
        if self.pc > self.tau:
            self.kappa += self.iota
        return "wait"


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_auc: float | None
    pc: int
    kappa: float
    prune_fired: bool
    lr: float


@dataclass
class TrainResult:
    network: Network
    history: list[EpochRecord]
    best_epoch: int
    best_val_auc: float | None


def train(
    net: Network,
    policy: BanditPolicy,
    rows_train: np.ndarray,
    y_train: np.ndarray,
    rows_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
) -> TrainResult:
    """Run the full training loop; returns the best-validation network.

    Deterministic given ``cfg.seed``: batching and structure sampling draw
    from independent seeded streams, so enabling or disabling the structure
    search does not perturb the gradient path.
    """
    if np.unique(y_train).size < 2:
        raise ValueError("training labels must contain both classes")
    rng_batch = np.random.default_rng([cfg.seed, 1])
    rng_struct = np.random.default_rng([cfg.seed, 2])
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)

    opt = Adam([b.weights.shape for b in net.blocks])
    state = PlateauState(kappa=cfg.kappa, tau=cfg.tau, iota=cfg.iota)
    history: list[EpochRecord] = []
    n = rows_train.shape[0]
    batch = max(1, min(cfg.batch_size, n))

    has_val = rows_val.shape[0] > 0 and np.unique(y_val).size == 2
    best_val = -math.inf
    best_net = net.copy()
    best_epoch = 0
    stale_epochs = 0

    for epoch in range(cfg.epochs):
        lr = cosine_restart_lr(cfg.learning_rate, epoch, cfg.t_0, cfg.t_mult)
        order = rng_batch.permutation(n)
        losses = []
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            losses.append(gradient_step(net, rows_train[idx], y_train[idx], opt, lr, cfg))
        epoch_loss = float(np.mean(losses))

        action = state.observe(epoch_loss)
        prune_fired = False
        if action == "reward":
            policy.update(compute_reward(net, cfg, rows_train, y_train))
        elif action == "prune":
            changed = prune_and_sample(
                net,
                policy,
                cfg.prune_quantile,
                cfg.delta,
                (cfg.reinit_low, cfg.reinit_high),
                rng_struct,
            )
            opt.reset_block_slots(0, changed)
            prune_fired = True

        val_auc = None
        if has_val:
            from .network import predict

            val_auc = roc_auc(predict(net, rows_val), y_val)
            if val_auc > best_val:
                best_val = val_auc
                best_net = net.copy()
                best_epoch = epoch
                stale_epochs = 0
            else:
                stale_epochs += 1
        history.append(
            EpochRecord(epoch, epoch_loss, val_auc, state.pc, state.kappa, prune_fired, lr)
        )
        if has_val and stale_epochs >= cfg.early_stopping_plateau_count:
            break

    if not has_val:
        best_net = net.copy()
        best_epoch = len(history) - 1
    return TrainResult(best_net, history, best_epoch, best_val if has_val else None)
