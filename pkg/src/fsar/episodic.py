"""Episode sampling, the training loop, and evaluation reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import cross_attention, effective_tau, video_text_loss
from .autodiff import val
from .errors import (
    CapacityError,
    ConfigurationError,
    DivergenceError,
    InconsistencyError,
)
from .matching import (
    bimhm_distance_batch,
    build_prototypes,
    episode_probs,
    frame_cost,
    otam_distance_batch,
    total_loss,
)
from .model import ModelSpec
from .refiner import stpr_forward
from .synthetic import Dataset


@dataclass
class Episode:
    way: int
    shot: int
    support: list   # (video_id, F x D features, local class index)
    queries: list   # same triples
    class_ids: list  # local -> global class id
    class_embs: np.ndarray  # N x D descriptor embeddings (episode order)
    descriptor_texts: list

    def __post_init__(self):
        s_ids = {v for v, _, _ in self.support}
        q_ids = {v for v, _, _ in self.queries}
        if s_ids & q_ids:
            raise InconsistencyError(f"support/query overlap: {s_ids & q_ids}")


def sample_episode(dataset: Dataset, way: int, shot: int, queries: int,
                   rng: np.random.Generator, bank=None) -> Episode:
    """Uniform N-way K-shot episode with disjoint support and query videos."""
    if bank is None:
        bank = dataset.informative_bank
    if way > len(dataset.class_ids):
        raise CapacityError(f"dataset has only {len(dataset.class_ids)} classes")
    q_per_class = [queries // way + (1 if i < queries % way else 0)
                   for i in range(way)]
    chosen = rng.choice(dataset.class_ids, size=way, replace=False)

    support, query_list = [], []
    for local, c in enumerate(chosen):
        vids = dataset.by_class[c]
        need = shot + q_per_class[local]
        if len(vids) < need:
            raise CapacityError(
                f"class {c} has {len(vids)} videos, episode needs {need}")
        picked = rng.choice(len(vids), size=need, replace=False)
        for j in picked[:shot]:
            support.append((vids[j].video_id, vids[j].features, local))
        for j in picked[shot:]:
            query_list.append((vids[j].video_id, vids[j].features, local))

    embs = np.stack([bank.embedding_for(c) for c in chosen])
    texts = [next(e.text for e in bank.entries if e.class_id == c)
             for c in chosen]
    return Episode(way, shot, support, query_list, list(chosen), embs, texts)


@dataclass
class EpisodeResult:
    loss: object        # scalar (Node in train mode)
    vt_loss: object
    predictions: list
    labels: list

    @property
    def correct(self) -> int:
        return sum(int(p == l) for p, l in zip(self.predictions, self.labels))


def run_episode(params, episode: Episode, spec: ModelSpec,
                mode: str = "eval") -> EpisodeResult:
    """Full pipeline on one episode.

    ``params`` may hold Nodes (training tape) or plain arrays (no-grad).
    Evaluation uses the hard (lambda = 0) alignment.
    """
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    F, D = episode.support[0][1].shape
    if D != spec.dim:
        raise ConfigurationError(
            f"episode dim {D} does not match model dim {spec.dim}")

    ones, zeros = np.ones(D), np.zeros(D)
    t_norm = ad.layer_norm(episode.class_embs, ones, zeros)

    s_frames = [feats for _, feats, _ in episode.support]
    q_frames = [feats for _, feats, _ in episode.queries]
    if spec.toggles.stpr:
        s_embs = [val(t_norm)[c] for _, _, c in episode.support]
        refined_s, refined_q = stpr_forward(
            s_frames, s_embs, q_frames, spec.stpr_config(),
            spec.ssm_config, params["stpr"])
    else:
        refined_s, refined_q = s_frames, q_frames

    protos = build_prototypes(
        [(c, feat) for (_, _, c), feat in zip(episode.support, refined_s)])
    labels = [c for _, _, c in episode.queries]

    costs = ad.stack([frame_cost(qf, p.feature)
                      for qf in refined_q for p in protos])
    lam = spec.otam_lambda if mode == "train" else 0.0
    if spec.metric == "otam":
        flat = otam_distance_batch(costs, lam)
    else:
        flat = bimhm_distance_batch(costs)
    dist = ad.reshape(flat, (len(refined_q), episode.way))
    probs = episode_probs(dist)
    preds = [int(i) for i in val(dist).argmin(axis=1)]

    if spec.toggles.tsa:
        by_class: dict = {}
        for (_, _, c), feat in zip(episode.support, refined_s):
            by_class.setdefault(c, []).append(feat)
        rows = []
        for c in range(episode.way):
            summaries = [ad.take(cross_attention(t_norm, feat, params["tsa"],
                                                 spec.attention_config), c)
                         for feat in by_class[c]]
            acc = summaries[0]
            for s in summaries[1:]:
                acc = ad.add(acc, s)
            rows.append(ad.mul(acc, 1.0 / len(summaries)))
        v_enh = ad.stack(rows)
        tau = effective_tau(params["tsa"]["log_tau"])
        vt = video_text_loss(v_enh, episode.class_embs, tau)
    else:
        vt = np.zeros(())

    loss = total_loss(probs, labels, vt, spec.alpha)
    return EpisodeResult(loss, vt, preds, labels)


class Adam:
    """Adam over a flat name -> array parameter dict; updates in place."""

    def __init__(self, flat_params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = dict(flat_params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.params.items()}

    def step(self, grads: dict):
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


@dataclass
class TrainConfig:
    episodes: int = 2000
    lr: float = 1e-4
    way: int = 5
    shot: int = 1
    queries: int = 5
    seed: int = 0
    milestones: tuple = (0.6, 0.8)  # fractions of the run; lr x0.1 at each
    decay: float = 0.1


def train(params: dict, dataset: Dataset, cfg: TrainConfig,
          spec: ModelSpec) -> list:
    """Adam episodic training; mutates ``params`` in place.

    Returns the per-episode loss curve.  Fully deterministic for a given
    (cfg.seed, spec, dataset).
    """
    flat = dict(ad.tree_flatten(params))
    opt = Adam(flat, lr=cfg.lr)
    milestones = {int(m * cfg.episodes) for m in cfg.milestones}
    rng = np.random.default_rng(cfg.seed)
    bank = dataset.informative_bank if spec.toggles.tcr else dataset.generic_bank

    curve = []
    for step in range(cfg.episodes):
        if step in milestones:
            opt.lr *= cfg.decay
        episode = sample_episode(dataset, cfg.way, cfg.shot, cfg.queries,
                                 rng, bank)
        wrapped, leaves = ad.tree_wrap(params)
        result = run_episode(wrapped, episode, spec, mode="train")
        loss = float(val(result.loss))
        if not math.isfinite(loss):
            raise DivergenceError(f"loss became {loss} at episode {step}")
        ad.backward(result.loss)
        grads = {name: node.grad for name, node in leaves.items()
                 if node.grad is not None}
        opt.step(grads)
        curve.append(loss)
    return curve


@dataclass
class EvalReport:
    tasks: int
    way: int
    shot: int
    mean_accuracy: float
    ci95_half_width: float | None  # None when tasks == 1
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tasks": self.tasks,
            "way": self.way,
            "shot": self.shot,
            "mean_accuracy": self.mean_accuracy,
            "ci95_half_width": self.ci95_half_width,
            "metadata": self.metadata,
        }


def evaluate(params, dataset: Dataset, way: int, shot: int, queries: int,
             num_tasks: int, seed: int, spec: ModelSpec) -> EvalReport:
    """Mean accuracy over independently sampled tasks with a 95% CI."""
    bank = dataset.informative_bank if spec.toggles.tcr else dataset.generic_bank
    streams = np.random.SeedSequence(seed).spawn(num_tasks)
    accs = np.empty(num_tasks)
    for i, ss in enumerate(streams):
        episode = sample_episode(dataset, way, shot, queries,
                                 np.random.default_rng(ss), bank)
        result = run_episode(params, episode, spec, mode="eval")
        accs[i] = result.correct / len(result.labels)
    mean = float(accs.mean())
    half = None
    if num_tasks > 1:
        half = float(1.96 * accs.std(ddof=1) / math.sqrt(num_tasks))
    meta = {
        "metric": spec.metric,
        "strides": list(spec.strides),
        "toggles": vars(spec.toggles).copy(),
        "seed": seed,
    }
    return EvalReport(num_tasks, way, shot, mean, half, meta)
