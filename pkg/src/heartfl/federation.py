"""Cross-silo federated simulation over the four hospital clients.

Server rules: FedAvg (size-weighted parameter average), FedAdam and FedYogi
(adaptive server steps on the averaged client delta), and SCAFFOLD (control
variate corrected local steps).

Sign convention: a client's :class:`RoundDelta` is ``theta_after -
theta_before``, i.e. it points in the direction the client moved. The
adaptive server rules use its negation as the pseudo-gradient, so the moment
updates below read exactly as Adam/Yogi on a gradient ``g = -mean(delta)``.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (CENTERS, Center, TabularDataset, partition_by_center,
                      split_train_test, standardize)
from .errors import ConfigError, ContractError, UnsupportedFamilyError
from .models import (DIFFERENTIABLE, Family, Hyperparams, evaluate, from_params,
                     gradient, holdout_accuracy, init_params)
from .models.sgd import minibatches


class Strategy(str, enum.Enum):
    FEDAVG = "fedavg"
    FEDADAM = "fedadam"
    FEDYOGI = "fedyogi"
    SCAFFOLD = "scaffold"

    @classmethod
    def parse(cls, text: "str | Strategy") -> "Strategy":
        if isinstance(text, Strategy):
            return text
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown strategy {text!r}") from None

    @property
    def label(self) -> str:
        return {"fedavg": "FedAvg", "fedadam": "FedAdam",
                "fedyogi": "FedYogi", "scaffold": "SCAFFOLD"}[self.value]


ALL_STRATEGIES = tuple(Strategy)


@dataclass
class ClientState:
    center: Center
    train: TabularDataset
    test: TabularDataset
    local_lr: float
    control: np.ndarray | None = None

    @property
    def n_k(self) -> int:
        return len(self.train)


@dataclass(frozen=True)
class RoundDelta:
    delta: np.ndarray
    n_k: int


@dataclass(frozen=True)
class ServerOptState:
    x: np.ndarray
    m: np.ndarray
    v: np.ndarray
    c: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.99
    lr: float = 0.01
    tau: float = 1e-3
    n_clients: int = 4
    round: int = 0

    @classmethod
    def initial(cls, x: np.ndarray, **kw) -> "ServerOptState":
        x = np.array(x, dtype=float)
        z = np.zeros_like(x)
        return cls(x=x, m=z, v=z.copy(), c=z.copy(), **kw)

    def replace(self, **kw) -> "ServerOptState":
        return dataclasses.replace(self, **kw)


def _check_family(family):
    family = Family.parse(family)
    if family not in DIFFERENTIABLE:
        raise UnsupportedFamilyError(
            f"{family.value} cannot be federated; use one of LR, NN1, SVM")
    return family


def client_rng(seed: int, round_index: int, client_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(round_index), int(client_index)])


def local_steps(cs: ClientState, x: np.ndarray, s: int, hp: Hyperparams,
                correction: np.ndarray | None = None,
                seed: "int | np.random.Generator" = 0) -> RoundDelta:
    """Run ``s`` mini-batch (sub)gradient steps on ``cs`` starting from ``x``.

    With ``correction`` (SCAFFOLD's ``c - c_i``) every step descends along
    ``g(y) + correction``.
    """
    family = _check_family(hp.family)
    if s < 0:
        raise ContractError("step count must be >= 0")
    if cs.n_k == 0:
        raise ContractError(f"client {cs.center.value} has no training rows")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X, yl = cs.train.X, cs.train.y
    y = np.array(x, dtype=float)
    batches = minibatches(cs.n_k, hp.batch_size, rng)
    for _ in range(s):
        idx = next(batches)
        g = gradient(family, y, X[idx], yl[idx], C=hp.C, n_total=cs.n_k)
        if correction is not None:
            g = g + correction
        y -= cs.local_lr * g
    return RoundDelta(y - x, cs.n_k)


def aggregate_fedavg(items: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Average of parameter vectors weighted by ``n_k / sum(n_k)``."""
    if not items:
        raise ContractError("nothing to aggregate")
    params = np.array([np.asarray(p, dtype=float) for p, _ in items])
    n = np.array([float(k) for _, k in items])
    if n.sum() <= 0:
        raise ContractError("total client size is zero")
    return (n[:, None] * params).sum(axis=0) / n.sum()


def _mean_delta(st, deltas):
    if not deltas:
        raise ContractError("at least one client delta is required")
    d = np.array([np.asarray(r.delta, dtype=float) for r in deltas])
    if d.shape[1:] != st.x.shape:
        raise ContractError(f"delta shape {d.shape[1:]} does not match {st.x.shape}")
    return d.mean(axis=0)


def _adaptive_step(st, g, v):
    m = st.beta1 * st.m + (1 - st.beta1) * g
    x = st.x - st.lr * m / (np.sqrt(v) + st.tau)
    return st.replace(x=x, m=m, v=v, round=st.round + 1)


def server_adam_step(st: ServerOptState, deltas: Sequence[RoundDelta]) -> ServerOptState:
    g = -_mean_delta(st, deltas)
    v = st.beta2 * st.v + (1 - st.beta2) * g ** 2
    return _adaptive_step(st, g, v)


def server_yogi_step(st: ServerOptState, deltas: Sequence[RoundDelta]) -> ServerOptState:
    g = -_mean_delta(st, deltas)
    g2 = g ** 2
    v = st.v - (1 - st.beta2) * g2 * np.sign(st.v - g2)
    return _adaptive_step(st, g, v)


def full_gradient(cs: ClientState, x: np.ndarray, hp: Hyperparams) -> np.ndarray:
    return gradient(_check_family(hp.family), x, cs.train.X, cs.train.y,
                    C=hp.C, n_total=cs.n_k)


def scaffold_round(clients: Sequence[ClientState], st: ServerOptState, option: str,
                   K: int, seed: int, hp: Hyperparams):
    """One SCAFFOLD round with every client participating.

    ``option`` picks the control-variate refresh: ``"i"`` takes the client's
    full-data gradient at the server point, ``"ii"`` reuses the local
    trajectory, ``c_i - c + (x - y_i) / (K * local_lr)``.

    Returns the updated clients (new control variates) and server state.
    """
    option = str(option).lower()
    if option not in ("i", "ii"):
        raise ConfigError(f"SCAFFOLD option must be 'i' or 'ii', got {option!r}")
    if option == "ii" and K == 0:
        raise ContractError("option (ii) divides by K * local_lr; K must be positive")
    x, c = st.x, st.c
    new_clients, ys, dc = [], [], []
    for i, cs in enumerate(clients):
        ci = cs.control if cs.control is not None else np.zeros_like(x)
        rd = local_steps(cs, x, K, hp, correction=c - ci, seed=client_rng(seed, st.round, i))
        y = x + rd.delta
        if option == "i":
            ci_new = full_gradient(cs, x, hp)
        else:
            ci_new = ci - c + (x - y) / (K * cs.local_lr)
        ys.append(y)
        dc.append(ci_new - ci)
        new_clients.append(dataclasses.replace(cs, control=ci_new))
    S = len(clients)
    x_new = x + (st.lr / S) * np.sum([y - x for y in ys], axis=0)
    c_new = c + np.sum(dc, axis=0) / st.n_clients
    return new_clients, st.replace(x=x_new, c=c_new, round=st.round + 1)


@dataclass(frozen=True)
class FedConfig:
    family: Family
    hp: Hyperparams
    strategy: Strategy = Strategy.FEDAVG
    rounds: int = 30
    local_steps: int = 50
    seeds: tuple[int, ...] = tuple(range(10))
    train_frac: float = 0.66
    server_lr: float | None = None
    beta1: float = 0.9
    beta2: float = 0.99
    tau: float = 1e-3
    scaffold_option: str = "ii"

    def __post_init__(self):
        object.__setattr__(self, "family", _check_family(self.family))
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.hp.family is not self.family:
            object.__setattr__(self, "hp", self.hp.replace(family=self.family))
        if self.rounds < 0 or self.local_steps < 0:
            raise ConfigError("rounds and local_steps must be >= 0")
        if not self.seeds:
            raise ConfigError("seed list is empty")

    @property
    def effective_server_lr(self) -> float:
        # SCAFFOLD's global step defaults to 1 (plain averaging of client moves).
        if self.server_lr is not None:
            return self.server_lr
        return 1.0 if self.strategy is Strategy.SCAFFOLD else 0.01


@dataclass
class FedRunResult:
    seed: int
    accuracies: dict[Center, float]
    sizes: dict[Center, int]
    acc_avg: float
    trace: list[dict] = field(default_factory=list)
    params: np.ndarray | None = None


@dataclass
class FedSummary:
    config: FedConfig
    runs: list[FedRunResult]

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.acc_avg for r in self.runs])

    @property
    def mean(self) -> float:
        return float(self.scores.mean())

    @property
    def std(self) -> float:
        return float(self.scores.std())


def make_clients(ds: TabularDataset, seed: int, hp: Hyperparams, train_frac: float = 0.66,
                 centers: Sequence[Center] = CENTERS) -> list[ClientState]:
    """Per-center split and standardization with each client's own training statistics."""
    parts = partition_by_center(ds)
    clients = []
    for c in centers:
        train, test = split_train_test(parts[c], seed, train_frac)
        train, test, _ = standardize(train, test)
        clients.append(ClientState(c, train, test, hp.learning_rate))
    return clients


def weighted_accuracy(accs: Sequence[float], sizes: Sequence[int]) -> float:
    w = np.asarray(sizes, dtype=float)
    return float(np.dot(w / w.sum(), np.asarray(accs, dtype=float)))


def params_checksum(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype="<f8").tobytes()).hexdigest()[:16]


def _client_accuracies(family, x, clients, hp):
    model = from_params(family, x, clients[0].train.n_features, hp)
    return [evaluate(model, cs.test) for cs in clients]


def simulate(cfg: FedConfig, ds: TabularDataset, seed: int,
             centers: Sequence[Center] = CENTERS) -> FedRunResult:
    """One seeded federated run.

    Every round each client starts from the broadcast global parameters and
    takes ``cfg.local_steps`` mini-batch steps; the server then applies
    ``cfg.strategy``. The final global model is scored on each client's own
    test split, and the client accuracies are averaged with weights
    ``n_k / n`` (training-set sizes).
    """
    hp = cfg.hp
    clients = make_clients(ds, seed, hp, cfg.train_frac, centers)
    p = clients[0].train.n_features
    x0 = init_params(cfg.family, p, hp, np.random.default_rng([int(seed), 0xF0]))
    st = ServerOptState.initial(x0, beta1=cfg.beta1, beta2=cfg.beta2,
                                lr=cfg.effective_server_lr, tau=cfg.tau,
                                n_clients=len(clients))
    trace = []
    for r in range(cfg.rounds):
        if cfg.strategy is Strategy.SCAFFOLD:
            clients, st = scaffold_round(clients, st, cfg.scaffold_option,
                                         cfg.local_steps, seed, hp)
        else:
            deltas = [local_steps(cs, st.x, cfg.local_steps, hp,
                                  seed=client_rng(seed, r, i))
                      for i, cs in enumerate(clients)]
            if cfg.strategy is Strategy.FEDAVG:
                st = st.replace(x=aggregate_fedavg([(st.x + d.delta, d.n_k) for d in deltas]),
                                round=st.round + 1)
            elif cfg.strategy is Strategy.FEDADAM:
                st = server_adam_step(st, deltas)
            else:
                st = server_yogi_step(st, deltas)
        if not np.all(np.isfinite(st.x)):
            raise FloatingPointError(
                f"{cfg.strategy.label}: global parameters diverged in round {r}")
        accs = _client_accuracies(cfg.family, st.x, clients, hp)
        trace.append({
            "round": r,
            "strategy": cfg.strategy.value,
            "checksum": params_checksum(st.x),
            "accuracy": {cs.center.value: a for cs, a in zip(clients, accs)},
        })
    accs = _client_accuracies(cfg.family, st.x, clients, hp)
    sizes = [cs.n_k for cs in clients]
    return FedRunResult(
        seed=seed,
        accuracies={cs.center: a for cs, a in zip(clients, accs)},
        sizes={cs.center: n for cs, n in zip(clients, sizes)},
        acc_avg=weighted_accuracy(accs, sizes),
        trace=trace,
        params=st.x,
    )


def run_federated(cfg: FedConfig, ds: TabularDataset,
                  centers: Sequence[Center] = CENTERS) -> FedSummary:
    return FedSummary(cfg, [simulate(cfg, ds, s, centers) for s in cfg.seeds])


def write_trace(result: FedRunResult, path: str | Path) -> None:
    """Append one JSON line per round to ``path``."""
    with open(path, "a", encoding="utf-8") as fh:
        for rec in result.trace:
            fh.write(json.dumps({"seed": result.seed, **rec}, sort_keys=True) + "\n")


def run_local_baseline(center: Center, ds: TabularDataset, hp: Hyperparams,
                       seeds: Sequence[int], train_frac: float = 0.66) -> tuple[float, float]:
    """Seed-averaged accuracy of a model trained and tested on one center alone.

    Returns ``(mean, std)``.
    """
    part = partition_by_center(ds)[Center.parse(center) if isinstance(center, str) else center]
    accs = np.array([holdout_accuracy(hp, part, s, train_frac) for s in seeds])
    return float(accs.mean()), float(accs.std())
