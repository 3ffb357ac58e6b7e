"""Desk-scale semi-supervised training harness.

A synthetic fine-grained dataset (tight sub-class clusters inside
well-separated super-classes), a linear softmax model trained with
SGD+momentum, feature-space weak/strong perturbations, and the full
selected-soft-label training loop plus its ablation/baseline arms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import labels as lb
from .clustering import kmedoids, pick_candidates
from .errors import ConfigError, DivergedAtIteration
from .kselect import KPolicy, select_k
from .losses import log_softmax, one_hot, softmax, total_loss, LossReport
from .transitions import PredictionBank, TransitionLedger


# ---------------------------------------------------------------------------
# dataset


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    n_super: int = 8
    fine_per_super: int = 4
    dim: int = 16
    intra_spread: float = 1.2
    inter_spread: float = 3.0
    labels_per_class: int = 10
    unlabeled_per_class: int = 200
    test_per_class: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_super * self.fine_per_super < 4:
            raise ValueError("need at least 4 fine classes")
        if not self.intra_spread < self.inter_spread:
            raise ValueError("intra_spread must be < inter_spread")

    @property
    def n_classes(self) -> int:
        return self.n_super * self.fine_per_super


@dataclass
class Dataset:
    x_labeled: np.ndarray
    y_labeled: np.ndarray
    x_unlabeled: np.ndarray
    y_unlabeled: np.ndarray  # hidden ground truth, metrics only
    x_test: np.ndarray
    y_test: np.ndarray
    n_classes: int
    spec: SyntheticDatasetSpec

    def super_of(self, fine: np.ndarray) -> np.ndarray:
        return np.asarray(fine) // self.spec.fine_per_super


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    v = rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def generate_dataset(spec: SyntheticDatasetSpec) -> Dataset:
    """Sample a hierarchical Gaussian dataset, deterministically in seed."""
    rng = np.random.default_rng(spec.seed)
    K = spec.n_classes
    super_centers = _unit_rows(rng, spec.n_super, spec.dim) * spec.inter_spread
    offsets = _unit_rows(rng, K, spec.dim) * spec.intra_spread
    centers = np.repeat(super_centers, spec.fine_per_super, axis=0) + offsets

    def draw(per_class: int):
        y = np.repeat(np.arange(K), per_class)
        x = centers[y] + rng.normal(size=(y.size, spec.dim))
        return x, y

    x_lab, y_lab = draw(spec.labels_per_class)
    x_ulb, y_ulb = draw(spec.unlabeled_per_class)
    x_test, y_test = draw(spec.test_per_class)
    return Dataset(x_lab, y_lab, x_ulb, y_ulb, x_test, y_test, K, spec)


def augment(
    x: np.ndarray,
    strength: str,
    rng: np.random.Generator,
    sigma_weak: float = 0.3,
    sigma_strong: float = 1.0,
    drop_frac: float = 0.25,
) -> np.ndarray:
    """Feature-space perturbation: additive noise, plus coordinate dropout
    for the strong variant."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if strength == "weak":
        return x + sigma_weak * rng.normal(size=x.shape)
    if strength == "strong":
        out = x + sigma_strong * rng.normal(size=x.shape)
        keep = rng.random(size=x.shape) >= drop_frac
        return out * keep
    raise ValueError(f"unknown augmentation strength {strength!r}")


# ---------------------------------------------------------------------------
# config and state


BASELINES = ("soc", "fixmatch", "soft")


@dataclass(frozen=True)
class SimConfig:
    k_policy: KPolicy
    batch_size: int = 32  # B
    mu: int = 5  # unlabeled batch = mu * B
    window: int = 512  # transition window N_b
    lambda_cos: float = 1.0
    iters: int = 5000
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    warmup_epochs: int = 1
    seed: int = 0
    baseline: str = "soc"
    tau: float = 0.95  # fixmatch baseline threshold
    eval_every: int = 100
    eval_subset: int = 512
    sigma_weak: float = 0.3
    sigma_strong: float = 1.0
    drop_frac: float = 0.25
    cluster_max_iter: int = 100

    def __post_init__(self):
        if self.baseline not in BASELINES:
            raise ConfigError(f"baseline must be one of {BASELINES}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must be in [0, 1]")
        if self.batch_size < 1 or self.mu < 1 or self.iters < 1:
            raise ConfigError("batch_size, mu and iters must be positive")


@dataclass
class LinearModel:
    weights: np.ndarray  # (K, dim)
    bias: np.ndarray  # (K,)

    @classmethod
    def zeros(cls, n_classes: int, dim: int) -> "LinearModel":
        return cls(np.zeros((n_classes, dim)), np.zeros(n_classes))

    def logits(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ self.weights.T + self.bias


@dataclass
class MetricsRow:
    iter: int
    test_top1: float
    pl_acc: float
    mean_entropy_sel: float
    mean_entropy_raw: float
    mean_zobj1: float
    mean_zobj2: float
    k_mean: float

    CSV_HEADER = "iter,test_top1,pl_acc,mean_entropy_sel,mean_entropy_raw,mean_zobj1,mean_zobj2,k_mean"

    def csv_row(self) -> str:
        return (
            f"{self.iter},{self.test_top1},{self.pl_acc},{self.mean_entropy_sel},"
            f"{self.mean_entropy_raw},{self.mean_zobj1},{self.mean_zobj2},{self.k_mean}"
        )


@dataclass
class SimState:
    model: LinearModel
    ledger: TransitionLedger
    bank: PredictionBank
    vel_w: np.ndarray
    vel_b: np.ndarray
    rng_data: np.random.Generator
    rng_aug: np.random.Generator
    iteration: int = 0
    history: list = field(default_factory=list)


def init_state(config: SimConfig, dataset: Dataset) -> SimState:
    model = LinearModel.zeros(dataset.n_classes, dataset.spec.dim)
    return SimState(
        model=model,
        ledger=TransitionLedger(dataset.n_classes, config.window),
        bank=PredictionBank(),
        vel_w=np.zeros_like(model.weights),
        vel_b=np.zeros_like(model.bias),
        rng_data=np.random.default_rng([config.seed, 0]),
        rng_aug=np.random.default_rng([config.seed, 1]),
    )


def warmup_iters(config: SimConfig, dataset: Dataset) -> int:
    per_epoch = math.ceil(dataset.x_labeled.shape[0] / config.batch_size)
    return config.warmup_epochs * per_epoch


# ---------------------------------------------------------------------------
# target construction (shared by the training step and the eval metrics)


def build_targets(
    probs: np.ndarray,
    config: SimConfig,
    ledger: TransitionLedger,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample consistency targets and chosen k values for one batch.

    soc:      cluster-restricted renormalized soft labels
    soft:     the raw soft labels (all-ones indicator)
    fixmatch: one-hot argmax (threshold masking is applied by the caller)
    """
    n, K = probs.shape
    if config.baseline == "soft":
        return probs.copy(), np.full(n, K)
    if config.baseline == "fixmatch":
        return one_hot(probs.argmax(axis=1), K), np.full(n, K)

    sim = ledger.similarity_matrix()
    pnorm = probs / probs.sum(axis=1, keepdims=True)
    p_hat = pnorm.argmax(axis=1)
    ks = np.array(
        [select_k(config.k_policy, float(c)) for c in pnorm.max(axis=1)], dtype=int
    )

    # One clustering per distinct k; class_to_cluster[k][c] is the cluster
    # index of class c, so the candidate mask of a sample is "same cluster
    # as its argmax".
    class_to_cluster: dict = {}
    for k in np.unique(ks):
        cs = kmedoids(
            sim.values,
            int(k),
            seed=config.seed + sim.ledger_version,
            max_iter=config.cluster_max_iter,
            ledger_version=sim.ledger_version,
        )
        labels_of = np.empty(K, dtype=int)
        for j, members in enumerate(cs.clusters):
            labels_of[list(members)] = j
        class_to_cluster[int(k)] = labels_of

    assignment = np.stack([class_to_cluster[int(k)] for k in ks])
    mask = assignment == assignment[np.arange(n), p_hat][:, None]
    masked = np.where(mask, pnorm, 0.0)
    targets = masked / masked.sum(axis=1, keepdims=True)
    return targets, ks


# ---------------------------------------------------------------------------
# training step and loop


def soc_step(
    state: SimState,
    labeled: tuple[np.ndarray, np.ndarray],
    unlabeled: tuple[np.ndarray, np.ndarray],
    config: SimConfig,
    in_warmup: bool = False,
    lr: float | None = None,
) -> LossReport:
    """One training iteration: weak/strong forward passes, transition
    tracking, target selection, losses and an SGD-momentum update."""
    x_lab, y_lab = labeled
    ulb_ids, x_ulb = unlabeled
    B = x_lab.shape[0]
    muB = x_ulb.shape[0]
    model = state.model

    aug = lambda x, s: augment(
        x, s, state.rng_aug, config.sigma_weak, config.sigma_strong, config.drop_frac
    )

    xw_lab = aug(x_lab, "weak")
    logits_lab = model.logits(xw_lab)
    target_lab = one_hot(y_lab, model.bias.size)
    sup = float(-np.sum(target_lab * log_softmax(logits_lab), axis=1).mean())
    grad_lab = (softmax(logits_lab) - target_lab) / B

    # Weak/strong branches run (and consume augmentation randomness) in
    # every arm so trajectories stay comparable across baselines.
    xw_ulb = aug(x_ulb, "weak")
    probs_weak = softmax(model.logits(xw_ulb))
    p_hat = probs_weak.argmax(axis=1)
    state.ledger.observe_batch(state.bank, list(zip(ulb_ids.tolist(), p_hat.tolist())))
    xs_ulb = aug(x_ulb, "strong")
    strong_logits = model.logits(xs_ulb)

    consistency_active = not in_warmup and config.lambda_cos != 0.0
    if consistency_active:
        targets, _ = build_targets(probs_weak, config, state.ledger)
        weights = np.ones(muB)
        if config.baseline == "fixmatch":
            weights = (probs_weak.max(axis=1) >= config.tau).astype(float)
        per_sample = -np.sum(targets * log_softmax(strong_logits), axis=1) * weights
        cos = float(per_sample.mean())
        grad_strong = (
            (softmax(strong_logits) - targets)
            * weights[:, None]
            * (config.lambda_cos / muB)
        )
    else:
        per_sample = np.zeros(muB)
        cos = 0.0
        grad_strong = None

    total = total_loss(sup, cos, config.lambda_cos)
    if not np.isfinite(total):
        raise DivergedAtIteration(state.iteration)

    grad_w = grad_lab.T @ xw_lab
    grad_b = grad_lab.sum(axis=0)
    if grad_strong is not None:
        grad_w += grad_strong.T @ xs_ulb
        grad_b += grad_strong.sum(axis=0)
    grad_w += config.weight_decay * model.weights

    step_lr = config.lr if lr is None else lr
    state.vel_w = config.momentum * state.vel_w + grad_w
    state.vel_b = config.momentum * state.vel_b + grad_b
    model.weights -= step_lr * state.vel_w
    model.bias -= step_lr * state.vel_b
    state.iteration += 1

    return LossReport(sup, cos, total, config.lambda_cos, tuple(per_sample))


def evaluate(state: SimState, config: SimConfig, dataset: Dataset) -> MetricsRow:
    model = state.model
    test_top1 = float(
        (model.logits(dataset.x_test).argmax(axis=1) == dataset.y_test).mean()
    )
    probs_all = softmax(model.logits(dataset.x_unlabeled))
    pl_acc = float((probs_all.argmax(axis=1) == dataset.y_unlabeled).mean())

    n_eval = min(config.eval_subset, dataset.x_unlabeled.shape[0])
    probs = probs_all[:n_eval]
    y_true = dataset.y_unlabeled[:n_eval]
    targets, ks = build_targets(probs, config, state.ledger)
    ent_sel = np.array([lb.entropy(t) for t in targets])
    ent_raw = np.array([lb.entropy(p) for p in probs])
    support = targets > 0
    zobj2 = support.sum(axis=1)
    in_support = support[np.arange(n_eval), y_true]
    zobj1 = probs[np.arange(n_eval), y_true] * in_support

    return MetricsRow(
        iter=state.iteration,
        test_top1=test_top1,
        pl_acc=pl_acc,
        mean_entropy_sel=float(ent_sel.mean()),
        mean_entropy_raw=float(ent_raw.mean()),
        mean_zobj1=float(zobj1.mean()),
        mean_zobj2=float(zobj2.mean()),
        k_mean=float(ks.mean()),
    )


def cosine_lr(config: SimConfig, t: int) -> float:
    return config.lr * 0.5 * (1.0 + math.cos(math.pi * t / config.iters))


def run(config: SimConfig, dataset: Dataset, state: SimState | None = None) -> SimState:
    """Full training run with periodic evaluation; returns the final state
    with its metrics history."""
    if state is None:
        state = init_state(config, dataset)
    n_lab = dataset.x_labeled.shape[0]
    n_ulb = dataset.x_unlabeled.shape[0]
    warmup = warmup_iters(config, dataset)

    for t in range(config.iters):
        lab_idx = state.rng_data.choice(n_lab, size=config.batch_size, replace=False)
        ulb_idx = state.rng_data.choice(
            n_ulb, size=config.mu * config.batch_size, replace=False
        )
        soc_step(
            state,
            (dataset.x_labeled[lab_idx], dataset.y_labeled[lab_idx]),
            (ulb_idx, dataset.x_unlabeled[ulb_idx]),
            config,
            in_warmup=t < warmup,
            lr=cosine_lr(config, t),
        )
        if (t + 1) % config.eval_every == 0 or t + 1 == config.iters:
            state.history.append(evaluate(state, config, dataset))
    return state


def final_score(history: list) -> float:
    """Mean test top-1 of the last 3 evaluations."""
    tail = history[-3:]
    return float(np.mean([row.test_top1 for row in tail]))


def write_metrics_csv(history: list, path) -> None:
    with open(path, "w") as fh:
        fh.write(MetricsRow.CSV_HEADER + "\n")
        for row in history:
            fh.write(row.csv_row() + "\n")


def entropy_vs_k(
    model: LinearModel,
    dataset: Dataset,
    ledger: TransitionLedger,
    ks,
    seed: int = 0,
    max_iter: int = 100,
    subset: int | None = None,
) -> list[float]:
    """Mean selected-label entropy over the unlabeled set for each fixed k,
    against one frozen ledger."""
    x = dataset.x_unlabeled if subset is None else dataset.x_unlabeled[:subset]
    probs = softmax(model.logits(x))
    sim = ledger.similarity_matrix()
    means = []
    for k in ks:
        clusters = kmedoids(sim.values, k, seed=seed, max_iter=max_iter,
                            ledger_version=sim.ledger_version)
        ents = []
        for row in probs:
            p = lb.ProbVector(row / row.sum())
            g = lb.build_indicator(pick_candidates(clusters, p.argmax()), p.n_classes)
            ents.append(lb.entropy(lb.select_label(p, g).probs))
        means.append(float(np.mean(ents)))
    return means


# ---------------------------------------------------------------------------
# config file parsing (CLI)


def config_from_dict(raw: dict) -> tuple[SimConfig, SyntheticDatasetSpec]:
    """Build (SimConfig, SyntheticDatasetSpec) from a parsed JSON config.

    Raises ConfigError naming the offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    try:
        ds_raw = dict(raw.get("dataset", {}))
        spec = SyntheticDatasetSpec(**ds_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"dataset: {exc}") from exc
    sim_raw = dict(raw.get("sim", {}))
    policy_raw = sim_raw.pop("k_policy", {"policy": "linear", "alpha": 5.0})
    try:
        policy = KPolicy.from_config(policy_raw, spec.n_classes)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"sim.k_policy: {exc}") from exc
    try:
        config = SimConfig(k_policy=policy, **sim_raw)
    except TypeError as exc:
        raise ConfigError(f"sim: {exc}") from exc
    return config, spec
