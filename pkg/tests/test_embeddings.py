import numpy as np
import pytest

from qrcvol.embeddings import (
    EchoStateReservoir,
    EmbeddingConfig,
    EsnParams,
    QuantumParams,
    embed_dataset,
    esn_step,
    read_embedded,
    write_embedded,
)
from qrcvol.errors import ConfigError
from qrcvol.pipeline import WindowedDataset


def make_dataset(n_rows=12, w=9, seed=1):
    rng = np.random.default_rng(seed)
    windows = rng.normal(0, 0.02, size=(n_rows, w))
    labels = (rng.uniform(size=n_rows) > 0.7).astype(int)
    return WindowedDataset(
        ticker="T",
        windows=windows,
        labels=labels,
        t_index=np.arange(w - 1, w - 1 + n_rows),
        split_index=int(0.8 * n_rows),
        threshold=1.0,
        lam=1.0,
    )


class TestConfig:
    def test_exactly_one_backend(self):
        with pytest.raises(ConfigError):
            EmbeddingConfig("quantum").validate()
        with pytest.raises(ConfigError):
            EmbeddingConfig("raw", quantum=QuantumParams()).validate()
        with pytest.raises(ConfigError):
            EmbeddingConfig(
                "quantum", quantum=QuantumParams(), esn=EsnParams()
            ).validate()

    def test_esn_domains(self):
        with pytest.raises(ConfigError):
            EmbeddingConfig.make("classical_esn", spectral_radius=1.6)
        with pytest.raises(ConfigError):
            EmbeddingConfig.make("classical_esn", leak_rate=0.0)
        with pytest.raises(ConfigError):
            EmbeddingConfig.make("classical_esn", reservoir_size=5).validate(w=9)

    def test_hash_depends_on_params(self):
        a = EmbeddingConfig.make("quantum", t=1.0)
        b = EmbeddingConfig.make("quantum", t=2.0)
        assert a.cfg_hash() != b.cfg_hash()
        assert a.cfg_hash() == EmbeddingConfig.make("quantum", t=1.0).cfg_hash()

    def test_roundtrip_dict(self):
        cfg = EmbeddingConfig.make("classical_esn", seed=5, leak_rate=0.4)
        assert EmbeddingConfig.from_dict(cfg.to_dict()) == cfg


class TestEmbedDataset:
    def test_raw_passthrough(self):
        ds = make_dataset()
        emb = embed_dataset(ds, EmbeddingConfig.make("raw"))
        assert emb.features.shape == (12, 9)
        assert np.array_equal(emb.features, ds.windows)

    def test_quantum_dimension(self):
        ds = make_dataset(n_rows=3)
        emb = embed_dataset(ds, EmbeddingConfig.make("quantum"))
        assert emb.features.shape == (3, 45)
        assert np.all(np.abs(emb.features) <= 1.0 + 1e-12)

    def test_esn_dimension(self):
        ds = make_dataset()
        emb = embed_dataset(ds, EmbeddingConfig.make("classical_esn", reservoir_size=50))
        assert emb.features.shape == (12, 50)

    def test_labels_and_order_preserved(self):
        ds = make_dataset()
        for kind in ("raw", "classical_esn"):
            emb = embed_dataset(ds, EmbeddingConfig.make(kind))
            assert np.array_equal(emb.labels, ds.labels)
            assert emb.split_index == ds.split_index

    def test_quantum_window_reversal_changes_embedding(self):
        ds = make_dataset(n_rows=1, seed=3)
        rev = make_dataset(n_rows=1, seed=3)
        rev.windows = rev.windows[:, ::-1].copy()
        cfg = EmbeddingConfig.make("quantum")
        a = embed_dataset(ds, cfg).features[0]
        b = embed_dataset(rev, cfg).features[0]
        assert not np.allclose(a, b)

    def test_quantum_stateless_across_windows(self):
        ds = make_dataset(n_rows=4)
        cfg = EmbeddingConfig.make("quantum")
        full = embed_dataset(ds, cfg).features
        single = make_dataset(n_rows=4)
        single.windows = ds.windows[2:3]
        single.labels = ds.labels[2:3]
        single.t_index = ds.t_index[2:3]
        single.split_index = 1
        alone = embed_dataset(single, cfg).features[0]
        assert np.array_equal(full[2], alone)

    def test_esn_same_seed_identical(self):
        ds = make_dataset()
        cfg = EmbeddingConfig.make("classical_esn", seed=42)
        a = embed_dataset(ds, cfg).features
        b = embed_dataset(ds, cfg).features
        assert np.array_equal(a, b)
        other = embed_dataset(ds, EmbeddingConfig.make("classical_esn", seed=43)).features
        assert not np.array_equal(a, other)

    def test_empty_dataset_rejected(self):
        ds = make_dataset(n_rows=1)
        ds.windows = ds.windows[:0]
        ds.labels = ds.labels[:0]
        with pytest.raises(ConfigError):
            embed_dataset(ds, EmbeddingConfig.make("raw"))


class TestEsnStep:
    def params(self, **kw):
        return EsnParams(**kw)

    def test_zero_fixed_point(self):
        p = self.params()
        res = EchoStateReservoir(p)
        state = np.zeros(p.reservoir_size)
        out = esn_step(state, 0.0, res.w, res.w_in, p)
        assert np.array_equal(out, state)

    def test_leak_one_is_pure_tanh(self):
        p = self.params(leak_rate=1.0, seed=2)
        res = EchoStateReservoir(p)
        state = np.random.default_rng(0).normal(size=p.reservoir_size)
        out = esn_step(state, 0.5, res.w, res.w_in, p)
        expected = np.tanh(res.w @ state + res.w_in * 0.5)
        assert np.array_equal(out, expected)

    def test_update_interval_bounds(self):
        rng = np.random.default_rng(4)
        p = self.params(leak_rate=0.3, seed=6)
        res = EchoStateReservoir(p)
        for _ in range(50):
            state = rng.normal(size=p.reservoir_size)
            out = esn_step(state, float(rng.normal()), res.w, res.w_in, p)
            lo = (1 - p.leak_rate) * state - p.leak_rate
            hi = (1 - p.leak_rate) * state + p.leak_rate
            assert np.all(out > lo - 1e-12) and np.all(out < hi + 1e-12)

    def test_spectral_radius_rescaled(self):
        p = self.params(spectral_radius=0.7, seed=8)
        res = EchoStateReservoir(p)
        radius = np.max(np.abs(np.linalg.eigvals(res.w)))
        assert abs(radius - 0.7) < 1e-10

    def test_echo_state_convergence(self):
        # two different initial states forget their past under the same input
        rng = np.random.default_rng(10)
        p = self.params(spectral_radius=0.95, leak_rate=0.5, seed=12)
        res = EchoStateReservoir(p)
        s1 = rng.normal(size=p.reservoir_size)
        s2 = rng.normal(size=p.reservoir_size)
        d0 = np.linalg.norm(s1 - s2)
        for _ in range(200):
            u = float(rng.normal())
            s1 = res.step(s1, u)
            s2 = res.step(s2, u)
        assert np.linalg.norm(s1 - s2) < d0 / 10.0


class TestCache:
    def test_roundtrip(self, tmp_path):
        ds = make_dataset()
        cfg = EmbeddingConfig.make("classical_esn", seed=1)
        emb = embed_dataset(ds, cfg)
        write_embedded(emb, tmp_path)
        back = read_embedded("T", cfg, tmp_path)
        assert back is not None
        assert np.array_equal(back.features, emb.features)
        assert np.array_equal(back.labels, emb.labels)
        assert back.split_index == emb.split_index

    def test_miss_returns_none(self, tmp_path):
        assert read_embedded("T", EmbeddingConfig.make("raw"), tmp_path) is None
