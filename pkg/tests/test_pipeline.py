import dataclasses

import numpy as np
import pytest

from wavex import enhancer as enh
from wavex import operator as op
from wavex import pipeline as pl
from wavex import simplewave as sw
from wavex.errors import InsufficientFrequencies


def tiny_config(method="fno-lf", **kw):
    base = dict(
        benchmark="simplewave", method=method, n_per_freq=6, grid=16,
        gen_seed=0, split_seed=1, eval_seed=0, sample_steps=2,
        operator=op.OperatorConfig(layers=2, modes=4, width=8, lift_width=8,
                                   epochs=2, lr=3e-3, batch=4, seed=0),
        enhancer=enh.EnhancerConfig(base_width=8, heads=4, time_dim=8,
                                    zf_dim=16, epochs=2, lr=2e-3, batch=4,
                                    seed=0),
    )
    base.update(kw)
    return pl.ExperimentConfig(**base)


@pytest.fixture(scope="module")
def tiny_dataset():
    return pl.generate_benchmark_dataset(tiny_config())


class TestConfig:
    def test_hash_deterministic_and_sensitive(self):
        a = tiny_config()
        b = tiny_config()
        c = tiny_config(gen_seed=5)
        assert a.hash() == b.hash()
        assert a.hash() != c.hash()

    def test_canonical_is_parseable(self):
        kv = pl.parse_kv(tiny_config().canonical())
        assert kv["benchmark"] == "simplewave"
        assert kv["operator.modes"] == "4"

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            tiny_config(method="magic")

    def test_parse_kv_comments(self):
        kv = pl.parse_kv("a = 1\n# note\nb = two # trailing\n\n")
        assert kv == {"a": "1", "b": "two"}


class TestRunExperiment:
    def test_fno_lf_report_structure(self, tiny_dataset, tmp_path):
        cfg = tiny_config()
        rep = pl.run_experiment(cfg, tmp_path, dataset=tiny_dataset,
                                write_artifacts=False)
        assert set(rep.groups) == {"HF20", "HF50", "HF100", "Overall"}
        hf_test_count = sum(rep.groups[g].n for g in pl.HF_GROUPS)
        assert rep.groups["Overall"].n == hf_test_count
        for g in rep.groups.values():
            assert g.h1_ci.lo <= g.h1_mean <= g.h1_ci.hi
            assert 0.0 <= g.awpc_mean <= 1.0

    def test_overall_is_pooled_not_group_mean(self, tiny_dataset, tmp_path):
        # pooled mean equals the group-size-weighted recombination
        rep = pl.run_experiment(tiny_config(), tmp_path, dataset=tiny_dataset,
                                write_artifacts=False)
        weighted = sum(rep.groups[g].h1_mean * rep.groups[g].n
                       for g in pl.HF_GROUPS)
        weighted /= sum(rep.groups[g].n for g in pl.HF_GROUPS)
        assert rep.groups["Overall"].h1_mean == pytest.approx(weighted, rel=1e-12)

    def test_reports_are_reproducible(self, tiny_dataset, tmp_path):
        cfg = tiny_config()
        r1 = pl.run_experiment(cfg, tmp_path, dataset=tiny_dataset,
                               write_artifacts=False)
        r2 = pl.run_experiment(cfg, tmp_path, dataset=tiny_dataset,
                               write_artifacts=False)
        assert pl.report_kv(r1) == pl.report_kv(r2)

    def test_artifacts_written_and_cached_dataset_reused(self, tmp_path):
        cfg = tiny_config()
        rep = pl.run_experiment(cfg, tmp_path)
        run_dir = tmp_path / "runs" / cfg.hash()
        assert (run_dir / "report.txt").exists()
        assert (run_dir / "report.kv").exists()
        assert (run_dir / "config.kv").exists()
        assert (run_dir / "operator.wxck").exists()
        cache = list((tmp_path / "datasets").glob("*.wfd"))
        assert len(cache) == 1
        # rerun reuses the cache and reproduces the same report bytes
        before = (run_dir / "report.kv").read_text()
        rep2 = pl.run_experiment(cfg, tmp_path)
        assert (run_dir / "report.kv").read_text() == before
        assert len(list((tmp_path / "datasets").glob("*.wfd"))) == 1
        assert pl.report_kv(rep) == pl.report_kv(rep2)

    def test_apex_family_and_ablation_channels(self, tiny_dataset, tmp_path):
        cfg = tiny_config(method="apex-no-prior")
        split = pl.split_for(cfg, tiny_dataset)
        spec = pl.BENCHMARKS["simplewave"]
        model = op.build_operator(2, cfg.operator)
        op.train_lf(model, tiny_dataset.subset(split.lf_train), cfg.operator)
        cond = pl.apex_conditioning(spec, tiny_dataset, int(split.hf_train[0]),
                                    model, cfg.enhancer.zf_dim,
                                    use_prior=False)
        assert np.all(cond.spatial[1:3] == 0.0)
        assert not np.all(cond.spatial[0] == 0.0)
        cond2 = pl.apex_conditioning(spec, tiny_dataset, int(split.hf_train[0]),
                                     model, cfg.enhancer.zf_dim,
                                     use_anchor=False)
        assert np.all(cond2.spatial[0] == 0.0)

    def test_predictions_align_with_hf_test(self, tiny_dataset):
        cfg = tiny_config()
        split = pl.split_for(cfg, tiny_dataset)
        preds, _ = pl.run_method(cfg, tiny_dataset, split)
        assert len(preds) == len(split.hf_test)
        for p, i in zip(preds, split.hf_test):
            assert p.nu == float(tiny_dataset.nus[i])


class TestSplitProtocol:
    def test_lf_fixed_and_hf_nested_across_ratios(self, tiny_dataset):
        splits = {r: pl.split_for(tiny_config(hf_train_fraction=r), tiny_dataset)
                  for r in (0.1, 0.2, 0.3, 0.4)}
        lf_ref = splits[0.1].lf_train
        for r, s in splits.items():
            assert np.array_equal(np.sort(s.lf_train), np.sort(lf_ref))
        for small, large in [(0.1, 0.2), (0.2, 0.3), (0.3, 0.4)]:
            assert set(splits[small].hf_train) <= set(splits[large].hf_train)


class TestRatioSweep:
    def test_eight_reports_with_fixed_lf_split(self, tmp_path):
        # n_per_freq 10 keeps at least one HF training sample at ratio 0.1
        cfg = tiny_config(method="apex", n_per_freq=10)
        ds = pl.generate_benchmark_dataset(cfg)
        reports = pl.ratio_sweep(cfg, tmp_path, dataset=ds)
        assert len(reports) == 8
        assert {m for m, _ in reports} == {"apex", "cfm-joint"}
        assert {r for _, r in reports} == {0.1, 0.2, 0.3, 0.4}
        hashes = {pl.split_for(dataclasses.replace(cfg, hf_train_fraction=r),
                               ds).lf_train.tobytes() for r in (0.1, 0.2, 0.3, 0.4)}
        assert len(hashes) == 1
        for rep in reports.values():
            assert rep.groups["Overall"].n == sum(rep.groups[g].n
                                                  for g in pl.HF_GROUPS)


class TestOperatorPersistence:
    def test_save_load_round_trip(self, tiny_dataset, tmp_path):
        cfg = tiny_config()
        split = pl.split_for(cfg, tiny_dataset)
        model = op.build_operator(2, cfg.operator)
        op.train_lf(model, tiny_dataset.subset(split.lf_train), cfg.operator)
        pl.save_operator(tmp_path, model)
        back = pl.load_operator(tmp_path)
        assert back.frozen
        i = int(split.hf_test[0])
        a = op.extrapolate(model, tiny_dataset.inputs[i], 6.0)
        b = op.extrapolate(back, tiny_dataset.inputs[i], 6.0)
        assert np.array_equal(a.re, b.re) and np.array_equal(a.im, b.im)

    def test_checkpoint_stable_across_stages(self, tiny_dataset, tmp_path):
        from wavex.optim import checkpoint_bytes

        cfg = tiny_config()
        split = pl.split_for(cfg, tiny_dataset)
        model = op.build_operator(2, cfg.operator)
        op.train_lf(model, tiny_dataset.subset(split.lf_train), cfg.operator)
        before = checkpoint_bytes(model.named_parameters())
        # downstream stages (anchors, priors) must not mutate the weights
        spec = pl.BENCHMARKS["simplewave"]
        for i in split.hf_train[:3]:
            pl.apex_conditioning(spec, tiny_dataset, int(i), model,
                                 cfg.enhancer.zf_dim)
        assert checkpoint_bytes(model.named_parameters()) == before


class TestSimilarity:
    def test_matrix_properties(self, tiny_dataset):
        m = pl.similarity_matrices(tiny_dataset, max_envs=4)
        nf = len(m.freqs)
        assert np.allclose(np.diag(m.s_amp), 1.0, atol=1e-12)
        assert np.allclose(np.diag(m.s_phase), 1.0, atol=1e-12)
        assert np.allclose(m.s_amp, m.s_amp.T) and np.allclose(m.s_phase, m.s_phase.T)
        assert m.s_amp.shape == (nf, nf)

    def test_ground_truth_asymmetry_direction(self):
        cfg = sw.SimpleWaveConfig()
        ds = sw.generate_dataset(cfg, seed=2, n_per_freq=8)
        m = pl.similarity_matrices(ds, max_envs=8)
        off = ~np.eye(len(m.freqs), dtype=bool)
        assert np.all(m.s_amp[off] > m.s_phase[off])

    def test_insufficient_frequencies(self):
        cfg = sw.SimpleWaveConfig(grid=8)
        ds = sw.generate_dataset(cfg, seed=0, freqs=(1.0,), n_per_freq=3)
        with pytest.raises(InsufficientFrequencies):
            pl.similarity_matrices(ds)

    def test_export_artifacts(self, tiny_dataset, tmp_path):
        m = pl.similarity_matrices(tiny_dataset, max_envs=2)
        paths = pl.export_similarity(m, tmp_path / "sim")
        for p in paths:
            assert (tmp_path / p.split("/")[-1]).exists()

    def test_model_relative_curve(self, tiny_dataset):
        cfg = tiny_config()
        split = pl.split_for(cfg, tiny_dataset)
        model = op.build_operator(2, cfg.operator)
        op.train_lf(model, tiny_dataset.subset(split.lf_train), cfg.operator)
        curve = pl.model_relative_curve(model, tiny_dataset, split,
                                        pl.BENCHMARKS["simplewave"])
        assert curve.freqs == (4.8, 6.0, 8.0)
        assert curve.ref_freq == 4.0


class TestReportSerialization:
    def test_table_and_kv_contain_all_groups(self, tiny_dataset, tmp_path):
        rep = pl.run_experiment(tiny_config(), tmp_path, dataset=tiny_dataset,
                                write_artifacts=False)
        table = pl.report_table(rep)
        kv = pl.report_kv(rep)
        for name in ("HF20", "HF50", "HF100", "Overall"):
            assert name in table
            assert f"{name.lower()}.h1_mean" in kv
        parsed = pl.parse_kv(kv)
        assert float(parsed["overall.h1_mean"]) == rep.overall().h1_mean
