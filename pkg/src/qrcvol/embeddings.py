"""Window embeddings: quantum reservoir, classical echo-state, raw.

All three backends map a WindowedDataset to fixed-length real feature
rows without touching labels, row order or the split index.

* quantum: each window is encoded independently from |0...0> (stateless
  across windows) and measured into n + n(n-1)/2 Z/ZZ expectations.
* classical_esn: windows are run in chronological order through one
  stateful leaky-tanh reservoir; the feature row is the reservoir state
  after the window's last element.
* raw: the window itself.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import quantum
from .errors import ConfigError, IngestionError
from .pipeline import WindowedDataset

KINDS = ("quantum", "classical_esn", "raw")


@dataclass(frozen=True)
class QuantumParams:
    a_x: float = 1.0
    a_z: float = 1.0
    a_zz: float = 0.5
    t: float = 1.0


@dataclass(frozen=True)
class EsnParams:
    reservoir_size: int = 50
    spectral_radius: float = 0.9
    leak_rate: float = 0.3
    input_scaling: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class EmbeddingConfig:
    kind: str
    quantum: QuantumParams = None
    esn: EsnParams = None

    def validate(self, w: int = None) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown embedding kind {self.kind!r}")
        active = [p is not None for p in (self.quantum, self.esn)]
        if self.kind == "quantum":
            if self.quantum is None or self.esn is not None:
                raise ConfigError("quantum embedding needs exactly quantum params")
            for name, val in asdict(self.quantum).items():
                if not math.isfinite(val):
                    raise ConfigError(f"quantum param {name} is not finite")
        elif self.kind == "classical_esn":
            if self.esn is None or self.quantum is not None:
                raise ConfigError("classical_esn embedding needs exactly esn params")
            e = self.esn
            if e.reservoir_size < 1:
                raise ConfigError("reservoir_size must be positive")
            if w is not None and e.reservoir_size < w:
                raise ConfigError(
                    f"reservoir_size {e.reservoir_size} < window size {w}"
                )
            if not 0 < e.spectral_radius < 1.5:
                raise ConfigError("spectral_radius must be in (0, 1.5)")
            if not 0 < e.leak_rate <= 1:
                raise ConfigError("leak_rate must be in (0, 1]")
        else:  # raw
            if any(active):
                raise ConfigError("raw embedding takes no backend params")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.quantum is not None:
            d["quantum"] = asdict(self.quantum)
        if self.esn is not None:
            d["esn"] = asdict(self.esn)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingConfig":
        q = QuantumParams(**d["quantum"]) if "quantum" in d else None
        e = EsnParams(**d["esn"]) if "esn" in d else None
        cfg = cls(kind=d.get("kind", "?"), quantum=q, esn=e)
        cfg.validate()
        return cfg

    def cfg_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def make(cls, kind: str, **kwargs) -> "EmbeddingConfig":
        if kind == "quantum":
            cfg = cls(kind, quantum=QuantumParams(**kwargs))
        elif kind == "classical_esn":
            cfg = cls(kind, esn=EsnParams(**kwargs))
        else:
            cfg = cls(kind)
        cfg.validate()
        return cfg


@dataclass
class EmbeddedDataset:
    ticker: str
    features: np.ndarray  # (m, d)
    labels: np.ndarray  # (m,)
    split_index: int
    config: EmbeddingConfig

    def train_rows(self):
        return self.features[: self.split_index], self.labels[: self.split_index]

    def test_rows(self):
        return self.features[self.split_index :], self.labels[self.split_index :]


class EchoStateReservoir:
    """Dense leaky-tanh reservoir with seeded random weights.

    W entries uniform in [-0.5, 0.5], rescaled so the spectral radius
    matches the configured value; W_in uniform in [-0.5, 0.5].
    """

    def __init__(self, params: EsnParams):
        self.params = params
        rng = np.random.default_rng(params.seed)
        size = params.reservoir_size
        w = rng.uniform(-0.5, 0.5, (size, size))
        radius = float(np.max(np.abs(np.linalg.eigvals(w))))
        if radius < 1e-12:
            raise ConfigError("reservoir matrix has zero spectral radius")
        self.w = w * (params.spectral_radius / radius)
        self.w_in = rng.uniform(-0.5, 0.5, size)

    def step(self, state: np.ndarray, value: float) -> np.ndarray:
        return esn_step(state, value, self.w, self.w_in, self.params)

    def initial_state(self) -> np.ndarray:
        return np.zeros(self.params.reservoir_size)


def esn_step(state, value, w, w_in, params: EsnParams) -> np.ndarray:
    """Leaky echo-state update:
    state' = (1 - leak) * state + leak * tanh(W state + W_in * u * scaling).
    """
    leak = params.leak_rate
    pre = w @ state + w_in * (value * params.input_scaling)
    return (1.0 - leak) * state + leak * np.tanh(pre)


def embed_dataset(ds: WindowedDataset, cfg: EmbeddingConfig) -> EmbeddedDataset:
    """Map every window of a dataset to its feature row."""
    cfg.validate(w=ds.w)
    if len(ds.labels) == 0:
        raise ConfigError("cannot embed an empty dataset")
    if cfg.kind == "raw":
        feats = ds.windows.copy()
    elif cfg.kind == "quantum":
        q = cfg.quantum
        feats = np.stack(
            [
                quantum.quantum_embed(win, q.a_x, q.a_z, q.a_zz, q.t).values
                for win in ds.windows
            ]
        )
    else:
        reservoir = EchoStateReservoir(cfg.esn)
        state = reservoir.initial_state()
        rows = []
        for win in ds.windows:
            for value in win:
                state = reservoir.step(state, value)
            rows.append(state)
        feats = np.stack(rows)
    return EmbeddedDataset(
        ticker=ds.ticker,
        features=feats,
        labels=ds.labels.copy(),
        split_index=ds.split_index,
        config=cfg,
    )


# --- embedding cache: columnar text keyed by (ticker, cfg hash) ---------

def cache_filename(ticker: str, cfg: EmbeddingConfig) -> str:
    return f"{ticker}__{cfg.cfg_hash()}.emb.csv"


def write_embedded(emb: EmbeddedDataset, directory) -> str:
    import os

    path = os.path.join(str(directory), cache_filename(emb.ticker, emb.config))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# ticker={emb.ticker} cfg={emb.config.cfg_hash()}\n")
        fh.write(f"# config={json.dumps(emb.config.to_dict(), sort_keys=True)}\n")
        fh.write(f"# split_index={emb.split_index}\n")
        d = emb.features.shape[1]
        fh.write(",".join([f"f{k}" for k in range(d)] + ["label"]) + "\n")
        for row, label in zip(emb.features, emb.labels):
            fh.write(",".join(f"{x:.17g}" for x in row) + f",{int(label)}\n")
    return path


def read_embedded(ticker: str, cfg: EmbeddingConfig, directory) -> EmbeddedDataset:
    import os

    path = os.path.join(str(directory), cache_filename(ticker, cfg))
    if not os.path.exists(path):
        return None
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for part in line[1:].split(maxsplit=1):
                    if "=" in part:
                        k, _, val = part.partition("=")
                        meta[k] = val
                continue
            if line.startswith("f0,"):
                continue
            rows.append(line.split(","))
    if "split_index" not in meta:
        raise IngestionError(f"{path}: not an embedding cache file")
    feats = np.array([[float(x) for x in r[:-1]] for r in rows])
    labels = np.array([int(r[-1]) for r in rows])
    return EmbeddedDataset(
        ticker=ticker,
        features=feats,
        labels=labels,
        split_index=int(meta["split_index"]),
        config=cfg,
    )
