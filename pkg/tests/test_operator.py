import numpy as np
import pytest

from wavex.errors import FrozenModel, NotFrozen
from wavex import metrics
from wavex import operator as op
from wavex import simplewave as sw
from wavex.dataio import make_split


def tiny_dataset(grid=16, n_per_freq=6, freqs=(1.0, 2.0)):
    cfg = sw.SimpleWaveConfig(grid=grid)
    return sw.generate_dataset(cfg, seed=3, freqs=freqs, n_per_freq=n_per_freq)


def tiny_config(**kw):
    base = dict(layers=2, modes=4, width=8, lift_width=8, epochs=3, lr=3e-3,
                batch=4, seed=0)
    base.update(kw)
    return op.OperatorConfig(**base)


@pytest.fixture(scope="module")
def trained():
    ds = tiny_dataset()
    cfg = tiny_config()
    model = op.build_operator(2, cfg)
    trace = op.train_lf(model, ds, cfg)
    return ds, model, trace


class TestForward:
    def test_output_shape_and_unit_circle(self, trained):
        ds, model, _ = trained
        pred = op.predict_channels(model, ds.inputs[0])
        assert pred.shape == (3, 16, 16)
        fld = op.channels_to_field(pred, nu=1.0)
        assert fld.shape == (16, 16)
        # reconstructed phase factors live exactly on the unit circle
        amp = np.hypot(fld.re, fld.im)
        nonzero = amp > 0
        phase_norm = (fld.re**2 + fld.im**2)[nonzero] / amp[nonzero] ** 2
        assert np.allclose(phase_norm, 1.0, atol=1e-6)

    def test_finite_on_random_inputs(self, trained):
        _, model, _ = trained
        rng = np.random.default_rng(0)
        channels = rng.uniform(0.5, 4.0, size=(2, 16, 16)).astype(np.float32)
        fld = op.forward(model, channels, nu=2.0)
        assert np.all(np.isfinite(fld.re)) and np.all(np.isfinite(fld.im))

    def test_magnitude_nonnegative(self, trained):
        ds, model, _ = trained
        fld = op.forward(model, ds.inputs[1])
        assert np.all(np.hypot(fld.re, fld.im) >= 0.0)


class TestTraining:
    def test_loss_decreases(self, trained):
        _, _, trace = trained
        assert trace[-1] < trace[0]

    def test_identical_seeds_identical_traces(self):
        ds = tiny_dataset()
        cfg = tiny_config()
        t1 = op.train_lf(op.build_operator(2, cfg), ds, cfg)
        t2 = op.train_lf(op.build_operator(2, cfg), ds, cfg)
        assert t1 == t2

    def test_frozen_after_train_lf(self, trained):
        ds, model, _ = trained
        assert model.frozen
        with pytest.raises(FrozenModel):
            op.train_operator(model, ds, epochs=1, lr=1e-3, batch=4, seed=0)

    def test_clone_unfrozen_fine_tunes(self, trained):
        ds, model, _ = trained
        tuned = op.clone_unfrozen(model)
        assert not tuned.frozen
        for (_, a), (_, b) in zip(model.named_parameters(), tuned.named_parameters()):
            assert np.array_equal(a.data, b.data)
        trace = op.train_operator(tuned, ds, epochs=1, lr=1e-3, batch=4, seed=9)
        assert len(trace) == 1
        # the original stays untouched
        assert model.frozen

    def test_normalization_round_trip(self):
        ds = tiny_dataset()
        stats = op.compute_norm_stats(ds)
        targets = op.encode_targets(ds).astype(np.float64)
        normalized = (targets - stats.target_mean[None, :, None, None]) \
            / stats.target_std[None, :, None, None]
        back = normalized * stats.target_std[None, :, None, None] \
            + stats.target_mean[None, :, None, None]
        assert np.max(np.abs(back - targets)) <= 1e-6


class TestExtrapolation:
    def test_requires_frozen(self):
        model = op.build_operator(2, tiny_config())
        model.norm = op.compute_norm_stats(tiny_dataset())
        with pytest.raises(NotFrozen):
            op.extrapolate(model, np.ones((2, 16, 16), dtype=np.float32), 3.0)

    def test_matches_forward_at_same_frequency(self, trained):
        ds, model, _ = trained
        i = 0
        nu = float(ds.nus[i])
        a = op.extrapolate(model, ds.inputs[i], nu)
        b = op.forward(model, ds.inputs[i], nu=nu)
        assert np.array_equal(a.re, b.re) and np.array_equal(a.im, b.im)

    def test_tagged_as_coarse(self, trained):
        ds, model, _ = trained
        fld = op.extrapolate(model, ds.inputs[0], 4.0)
        assert fld.env.get("prediction") == "coarse"

    def test_deterministic(self, trained):
        ds, model, _ = trained
        a = op.extrapolate(model, ds.inputs[0], 3.5)
        b = op.extrapolate(model, ds.inputs[0], 3.5)
        assert np.array_equal(a.re, b.re)


class TestCoarseAnchor:
    def test_matches_log_magnitude_of_extrapolation(self, trained):
        ds, model, _ = trained
        nu = 3.0
        anchor = op.coarse_anchor(model, ds.inputs[0], nu)
        u = op.extrapolate(model, ds.inputs[0], nu)
        assert np.allclose(anchor, np.log(np.hypot(u.re, u.im) + 1e-6), atol=1e-12)

    def test_finite_everywhere(self, trained):
        ds, model, _ = trained
        anchor = op.coarse_anchor(model, ds.inputs[0], 8.0)
        assert np.all(np.isfinite(anchor))

    def test_monotone_in_magnitude(self):
        # log(x + eps) ordering transfers to the anchor by construction
        lo, hi = np.log(0.1 + 1e-6), np.log(0.2 + 1e-6)
        assert lo < hi

    def test_eps_guard(self, trained):
        ds, model, _ = trained
        with pytest.raises(ValueError):
            op.coarse_anchor(model, ds.inputs[0], 3.0, eps=0.0)


class TestAsymmetryDirection:
    def test_amplitude_similarity_exceeds_phase_on_hf(self):
        # desk-scale reproduction of the extrapolation asymmetry direction
        cfg = sw.SimpleWaveConfig()
        ds = sw.generate_dataset(cfg, seed=0, n_per_freq=8)
        split = make_split(ds, sw.LF_FREQS, sw.HF_FREQS, seed=1)
        ocfg = tiny_config(modes=8, width=12, lift_width=16, epochs=6, batch=8)
        model = op.build_operator(2, ocfg)
        op.train_lf(model, ds.subset(split.lf_train), ocfg)
        hf = ds.subset(split.hf_test)
        for f in sw.HF_FREQS:
            idx = np.flatnonzero(hf.nus == f)
            sa = np.mean([metrics.amp_similarity(
                op.extrapolate(model, hf.inputs[i], f), hf.field(i)) for i in idx])
            sp = np.mean([metrics.phase_similarity(
                op.extrapolate(model, hf.inputs[i], f), hf.field(i)) for i in idx])
            assert sa > sp
