"""Experiment orchestration: dataset caching, method runners, reports with
bootstrap intervals, the supervision-ratio sweep, and the similarity
diagnostics.

Every experiment is keyed by a content hash of its canonicalized
configuration; rerunning a config reuses the cached dataset and reproduces
the same report bytes.  Wall-clock runtime is recorded in a side file so
the report artifacts themselves stay deterministic.
"""
from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import enhancer as enh
from . import helmholtz, images, metrics, operator, prior, simplewave
from ._threads import thread_map
from .dataio import Dataset, Split, make_split, read_dataset, write_dataset
from .errors import InsufficientFrequencies
from .field import ComplexField, Domain
from .metrics import BootstrapCI

METHODS = ("fno-lf", "fno-ft", "cfm-joint", "apex", "apex-no-prior",
           "apex-no-anchor")
HF_GROUPS = ("HF20", "HF50", "HF100")
SAMPLE_CHUNK = 24  # memory ceiling for batched ODE sampling


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    domain: Domain
    lf_freqs: tuple[float, ...]
    hf_freqs: tuple[float, ...]
    env_planes: tuple[int, ...]  # input channels that describe the environment

    @property
    def nu_min(self) -> float:
        return min(self.lf_freqs)

    @property
    def nu_max(self) -> float:
        return max(self.hf_freqs)

    @property
    def ref_freq(self) -> float:
        return max(self.lf_freqs)


BENCHMARKS = {
    "simplewave": BenchmarkSpec("simplewave", Domain.SIMPLEWAVE,
                                simplewave.LF_FREQS, simplewave.HF_FREQS, (0,)),
    "helmholtz": BenchmarkSpec("helmholtz", Domain.HELMHOLTZ,
                               helmholtz.LF_WAVENUMBERS, helmholtz.HF_WAVENUMBERS,
                               (0,)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark: str = "simplewave"
    method: str = "apex"
    n_per_freq: int = 40
    grid: int = 64
    gen_seed: int = 0
    split_seed: int = 1
    eval_seed: int = 0
    hf_train_fraction: float = 0.2   # the 2/8 protocol ratio
    lf_train_fraction: float = 0.8
    sample_steps: int = 50
    operator: operator.OperatorConfig = field(default_factory=operator.OperatorConfig)
    enhancer: enh.EnhancerConfig = field(default_factory=enh.EnhancerConfig)

    def __post_init__(self):
        if self.benchmark not in BENCHMARKS:
            raise ValueError(f"unknown benchmark {self.benchmark!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; one of {METHODS}")

    def kv_items(self) -> list[tuple[str, str]]:
        items: list[tuple[str, str]] = []
        for f_ in dataclasses.fields(self):
            value = getattr(self, f_.name)
            if dataclasses.is_dataclass(value):
                for sub in dataclasses.fields(value):
                    items.append((f"{f_.name}.{sub.name}",
                                  _fmt(getattr(value, sub.name))))
            else:
                items.append((f_.name, _fmt(value)))
        return sorted(items)

    def canonical(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.kv_items()) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


# ---------------------------------------------------------------------------
# dataset cache

def dataset_cache_key(cfg: ExperimentConfig) -> str:
    spec = BENCHMARKS[cfg.benchmark]
    text = (f"benchmark={cfg.benchmark} grid={cfg.grid} n={cfg.n_per_freq} "
            f"seed={cfg.gen_seed} freqs={spec.lf_freqs + spec.hf_freqs}")
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def generate_benchmark_dataset(cfg: ExperimentConfig) -> Dataset:
    spec = BENCHMARKS[cfg.benchmark]
    freqs = spec.lf_freqs + spec.hf_freqs
    if cfg.benchmark == "simplewave":
        sw_cfg = simplewave.SimpleWaveConfig(grid=cfg.grid)
        return simplewave.generate_dataset(sw_cfg, seed=cfg.gen_seed, freqs=freqs,
                                           n_per_freq=cfg.n_per_freq)
    return helmholtz.generate_dataset(seed=cfg.gen_seed, ks=freqs,
                                      n_per_k=cfg.n_per_freq, grid=cfg.grid)


def load_or_generate_dataset(cfg: ExperimentConfig, out_dir) -> Dataset:
    cache = Path(out_dir) / "datasets"
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"{cfg.benchmark}-{dataset_cache_key(cfg)}.wfd"
    if path.exists():
        return read_dataset(path)
    ds = generate_benchmark_dataset(cfg)
    write_dataset(path, ds)
    return ds


def split_for(cfg: ExperimentConfig, dataset: Dataset) -> Split:
    spec = BENCHMARKS[cfg.benchmark]
    return make_split(dataset, spec.lf_freqs, spec.hf_freqs, seed=cfg.split_seed,
                      lf_train_fraction=cfg.lf_train_fraction,
                      hf_train_fraction=cfg.hf_train_fraction)


# ---------------------------------------------------------------------------
# conditioning assembly

def _env_channels(spec: BenchmarkSpec, dataset: Dataset, i: int) -> np.ndarray:
    return dataset.inputs[i][list(spec.env_planes)]


def apex_conditioning(spec: BenchmarkSpec, dataset: Dataset, i: int,
                      model: operator.OperatorModel, zf_dim: int,
                      use_anchor: bool = True,
                      use_prior: bool = True) -> enh.Conditioning:
    """Anchor + phase prior + environment conditioning for one sample."""
    nu = float(dataset.nus[i])
    env = dataset.env_dict(i)
    anchor = (operator.coarse_anchor(model, dataset.inputs[i], nu)
              if use_anchor else None)
    if use_prior:
        feats = prior.conditioning_features(spec.domain, env, nu,
                                            grid=dataset.grid_shape[0])
        p_sin, p_cos = feats.sin_map, feats.cos_map
    else:
        p_sin = p_cos = None
    return enh.build_conditioning(anchor, p_sin, p_cos,
                                  _env_channels(spec, dataset, i),
                                  nu, spec.nu_min, spec.nu_max, zf_dim=zf_dim,
                                  env=env, domain=spec.domain,
                                  use_anchor=use_anchor, use_prior=use_prior)


def joint_conditioning(spec: BenchmarkSpec, dataset: Dataset, i: int,
                       zf_dim: int) -> enh.Conditioning:
    """CFM-Joint conditions on the raw dataset input channels plus z_f."""
    nu = float(dataset.nus[i])
    zf = enh.fourier_features(nu, spec.nu_min, spec.nu_max, dim=zf_dim)
    return enh.Conditioning(spatial=dataset.inputs[i].astype(np.float32),
                            z_f=zf.astype(np.float32), nu=nu,
                            env=dataset.env_dict(i), domain=spec.domain)


# ---------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class GroupReport:
    n: int
    h1_mean: float
    awpc_mean: float
    h1_ci: BootstrapCI
    awpc_ci: BootstrapCI


@dataclass
class Report:
    benchmark: str
    method: str
    config_hash: str
    groups: dict[str, GroupReport]
    runtime_seconds: float = 0.0

    def overall(self) -> GroupReport:
        return self.groups["Overall"]


def _group_report(h1s, awpcs, seed: int) -> GroupReport:
    return GroupReport(n=len(h1s),
                       h1_mean=float(np.mean(h1s)),
                       awpc_mean=float(np.mean(awpcs)),
                       h1_ci=metrics.bootstrap_ci(h1s, seed=seed),
                       awpc_ci=metrics.bootstrap_ci(awpcs, seed=seed + 1))


def build_report(cfg: ExperimentConfig, dataset: Dataset, split: Split,
                 preds: list[ComplexField]) -> Report:
    """Per-HF-group and pooled-overall metric aggregates with CIs."""
    spec = BENCHMARKS[cfg.benchmark]
    hf_test = split.hf_test
    truths = [dataset.field(i) for i in hf_test]
    pairs = list(zip(preds, truths))
    h1s = np.array(thread_map(lambda pt: metrics.h1_error(pt[0], pt[1]), pairs))
    awpcs = np.array(thread_map(lambda pt: metrics.awpc(pt[0], pt[1]), pairs))

    nus = dataset.nus[hf_test]
    groups: dict[str, GroupReport] = {}
    seed = cfg.eval_seed * 1000
    for name, f in zip(HF_GROUPS, sorted(spec.hf_freqs)):
        mask = nus == f
        groups[name] = _group_report(h1s[mask], awpcs[mask], seed)
        seed += 2
    groups["Overall"] = _group_report(h1s, awpcs, seed)
    return Report(benchmark=cfg.benchmark, method=cfg.method,
                  config_hash=cfg.hash(), groups=groups)


def report_table(report: Report) -> str:
    lines = [f"benchmark: {report.benchmark}",
             f"method:    {report.method}",
             f"config:    {report.config_hash}",
             "",
             f"{'group':<8} {'n':>4} {'H1':>8} {'H1 95% CI':>20} "
             f"{'AWPC':>8} {'AWPC 95% CI':>20}"]
    for name in (*HF_GROUPS, "Overall"):
        g = report.groups[name]
        lines.append(f"{name:<8} {g.n:>4} {g.h1_mean:>8.4f} "
                     f"[{g.h1_ci.lo:>8.4f},{g.h1_ci.hi:>8.4f}] "
                     f"{g.awpc_mean:>8.4f} [{g.awpc_ci.lo:>8.4f},{g.awpc_ci.hi:>8.4f}]")
    return "\n".join(lines) + "\n"


def report_kv(report: Report) -> str:
    lines = [f"benchmark = {report.benchmark}",
             f"method = {report.method}",
             f"config_hash = {report.config_hash}",
             "ci_method = percentile-bootstrap",
             "overall_aggregation = pooled-sample-mean"]
    for name in (*HF_GROUPS, "Overall"):
        g = report.groups[name]
        key = name.lower()
        lines += [f"{key}.n = {g.n}",
                  f"{key}.h1_mean = {g.h1_mean!r}",
                  f"{key}.h1_ci_lo = {g.h1_ci.lo!r}",
                  f"{key}.h1_ci_hi = {g.h1_ci.hi!r}",
                  f"{key}.awpc_mean = {g.awpc_mean!r}",
                  f"{key}.awpc_ci_lo = {g.awpc_ci.lo!r}",
                  f"{key}.awpc_ci_hi = {g.awpc_ci.hi!r}"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# method runners

def _train_lf_operator(cfg: ExperimentConfig, dataset: Dataset,
                       split: Split) -> operator.OperatorModel:
    model = operator.build_operator(dataset.inputs.shape[1], cfg.operator)
    operator.train_lf(model, dataset.subset(split.lf_train), cfg.operator)
    return model


def _sample_all(net: enh.VelocityNet, conds: list[enh.Conditioning],
                steps: int, eval_seed: int) -> list[ComplexField]:
    out: list[ComplexField] = []
    for start in range(0, len(conds), SAMPLE_CHUNK):
        chunk = conds[start:start + SAMPLE_CHUNK]
        seeds = [eval_seed * 100003 + start + j for j in range(len(chunk))]
        out.extend(enh.sample_batch(net, chunk, steps=steps, seeds=seeds))
    return out


def run_method(cfg: ExperimentConfig, dataset: Dataset,
               split: Split) -> tuple[list[ComplexField], dict]:
    """Execute one method end to end; returns HF-test predictions plus
    artifacts (models, traces) for persistence."""
    spec = BENCHMARKS[cfg.benchmark]
    arts: dict = {}

    if cfg.method == "fno-lf":
        model = _train_lf_operator(cfg, dataset, split)
        arts["operator"] = model
        preds = [operator.extrapolate(model, dataset.inputs[i],
                                      float(dataset.nus[i]), env=dataset.env_dict(i),
                                      domain=spec.domain)
                 for i in split.hf_test]
        return preds, arts

    if cfg.method == "fno-ft":
        model = _train_lf_operator(cfg, dataset, split)
        tuned = operator.clone_unfrozen(model)
        oc = cfg.operator
        arts["ft_trace"] = operator.train_operator(
            tuned, dataset.subset(split.hf_train), epochs=oc.epochs, lr=oc.lr,
            batch=oc.batch, seed=oc.seed + 1)
        arts["operator"] = tuned
        preds = [operator.forward(tuned, dataset.inputs[i],
                                  nu=float(dataset.nus[i]), env=dataset.env_dict(i),
                                  domain=spec.domain)
                 for i in split.hf_test]
        return preds, arts

    ec = cfg.enhancer
    if cfg.method == "cfm-joint":
        train_idx = np.concatenate([split.lf_train, split.hf_train])
        conds = [joint_conditioning(spec, dataset, i, ec.zf_dim) for i in train_idx]
        targets = np.stack([enh.encode_target(dataset.field(i)) for i in train_idx])
        net = enh.VelocityNet(dataclasses.replace(ec, cond_channels=dataset.inputs.shape[1]))
        arts["trace"] = enh.train_enhancer(net, targets, conds, epochs=ec.epochs,
                                           lr=ec.lr, batch=ec.batch, seed=ec.seed)
        arts["enhancer"] = net
        test_conds = [joint_conditioning(spec, dataset, i, ec.zf_dim)
                      for i in split.hf_test]
        return _sample_all(net, test_conds, cfg.sample_steps, cfg.eval_seed), arts

    # apex family
    use_prior = cfg.method != "apex-no-prior"
    use_anchor = cfg.method != "apex-no-anchor"
    model = _train_lf_operator(cfg, dataset, split)
    arts["operator"] = model

    def cond_for(i):
        return apex_conditioning(spec, dataset, i, model, ec.zf_dim,
                                 use_anchor=use_anchor, use_prior=use_prior)

    conds = [cond_for(i) for i in split.hf_train]
    targets = np.stack([enh.encode_target(dataset.field(i)) for i in split.hf_train])
    n_env = len(spec.env_planes)
    net = enh.VelocityNet(dataclasses.replace(ec, cond_channels=3 + n_env))
    arts["trace"] = enh.train_enhancer(net, targets, conds, epochs=ec.epochs,
                                       lr=ec.lr, batch=ec.batch, seed=ec.seed)
    arts["enhancer"] = net
    test_conds = [cond_for(i) for i in split.hf_test]
    return _sample_all(net, test_conds, cfg.sample_steps, cfg.eval_seed), arts


def run_experiment(cfg: ExperimentConfig, out_dir, dataset: Dataset | None = None,
                   write_artifacts: bool = True) -> Report:
    """Full pipeline for one config: data, split, method, metrics, report.

    Artifacts land under ``out_dir/runs/<config hash>/``; the per-run
    directory caches nothing across configs except the shared dataset
    store.
    """
    from .optim import save_checkpoint

    t0 = time.time()
    out_dir = Path(out_dir)
    if dataset is None:
        dataset = load_or_generate_dataset(cfg, out_dir)
    split = split_for(cfg, dataset)
    preds, arts = run_method(cfg, dataset, split)
    report = build_report(cfg, dataset, split, preds)
    report.runtime_seconds = time.time() - t0

    if write_artifacts:
        run_dir = out_dir / "runs" / cfg.hash()
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.kv").write_text(cfg.canonical())
        (run_dir / "report.txt").write_text(report_table(report))
        (run_dir / "report.kv").write_text(report_kv(report))
        (run_dir / "run_meta.txt").write_text(
            f"runtime_seconds = {report.runtime_seconds:.3f}\n")
        if "operator" in arts:
            save_checkpoint(run_dir / "operator.wxck",
                            arts["operator"].named_parameters())
        if "enhancer" in arts:
            save_checkpoint(run_dir / "enhancer.wxck",
                            arts["enhancer"].named_parameters())
    return report


RATIO_LABELS = {0.1: "1/9", 0.2: "2/8", 0.3: "3/7", 0.4: "4/6"}


def ratio_sweep(cfg: ExperimentConfig, out_dir,
                ratios=(0.1, 0.2, 0.3, 0.4),
                methods=("cfm-joint", "apex"),
                dataset: Dataset | None = None) -> dict[tuple[str, float], Report]:
    """One report per (method, HF supervision ratio).

    The LF split is pinned by the shared split seed; HF train subsets are
    nested because every ratio cuts the same per-frequency permutation.
    """
    out: dict[tuple[str, float], Report] = {}
    if dataset is None:
        dataset = load_or_generate_dataset(cfg, Path(out_dir))
    for ratio in ratios:
        for method in methods:
            sub = dataclasses.replace(cfg, method=method, hf_train_fraction=ratio)
            out[(method, ratio)] = run_experiment(sub, out_dir, dataset=dataset)
    return out


# ---------------------------------------------------------------------------
# model persistence (checkpoint plus the sidecar state a checkpoint omits)

def save_operator(run_dir, model: operator.OperatorModel) -> None:
    from .optim import save_checkpoint

    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(run_dir / "operator.wxck", model.named_parameters())
    lines = [f"in_channels = {model.in_channels}",
             f"frozen = {int(model.frozen)}"]
    for f_ in dataclasses.fields(model.config):
        lines.append(f"config.{f_.name} = {_fmt(getattr(model.config, f_.name))}")
    if model.norm is not None:
        for name in ("input_mean", "input_std", "target_mean", "target_std"):
            vals = getattr(model.norm, name)
            lines.append(f"norm.{name} = {','.join(repr(float(v)) for v in vals)}")
    (run_dir / "operator.kv").write_text("\n".join(lines) + "\n")


def load_operator(run_dir) -> operator.OperatorModel:
    from .optim import load_checkpoint, restore_parameters

    run_dir = Path(run_dir)
    kv = parse_kv((run_dir / "operator.kv").read_text())
    ocfg = operator.OperatorConfig(
        layers=int(kv["config.layers"]), modes=int(kv["config.modes"]),
        width=int(kv["config.width"]), lift_width=int(kv["config.lift_width"]),
        epochs=int(kv["config.epochs"]), lr=float(kv["config.lr"]),
        batch=int(kv["config.batch"]), seed=int(kv["config.seed"]))
    model = operator.build_operator(int(kv["in_channels"]), ocfg)
    restore_parameters(model.named_parameters(),
                       load_checkpoint(run_dir / "operator.wxck"))
    if "norm.input_mean" in kv:
        def arr(key):
            return np.array([float(v) for v in kv[key].split(",")])

        model.norm = operator.NormStats(arr("norm.input_mean"), arr("norm.input_std"),
                                        arr("norm.target_mean"), arr("norm.target_std"))
    model.frozen = bool(int(kv["frozen"]))
    return model


def parse_kv(text: str) -> dict[str, str]:
    """Parse the `key = value` config/report format ('#' starts a comment)."""
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# similarity diagnostics

@dataclass(frozen=True)
class SimilarityMatrices:
    freqs: tuple[float, ...]
    s_amp: np.ndarray
    s_phase: np.ndarray
    n_envs: int


def similarity_matrices(dataset: Dataset, max_envs: int = 32) -> SimilarityMatrices:
    """Ground-truth S_A / S_P over all frequency pairs, averaged over
    environments shared across frequencies (cross-product datasets).

    Raises
    ------
    InsufficientFrequencies
        If the dataset holds fewer than two distinct frequencies.
    """
    freqs = [float(f) for f in dataset.frequencies()]
    if len(freqs) < 2:
        raise InsufficientFrequencies("need fields at two or more frequencies")
    by_freq = {f: np.flatnonzero(dataset.nus == f) for f in freqs}
    n_env = min(min(len(v) for v in by_freq.values()), max_envs)
    fields = {f: [dataset.field(i).values for i in by_freq[f][:n_env]]
              for f in freqs}

    nf = len(freqs)
    s_amp = np.zeros((nf, nf))
    s_phase = np.zeros((nf, nf))
    for a in range(nf):
        for b_ in range(a, nf):
            sa = np.mean([metrics.amp_similarity(fields[freqs[a]][e], fields[freqs[b_]][e])
                          for e in range(n_env)])
            sp = np.mean([metrics.phase_similarity(fields[freqs[a]][e], fields[freqs[b_]][e])
                          for e in range(n_env)])
            s_amp[a, b_] = s_amp[b_, a] = sa
            s_phase[a, b_] = s_phase[b_, a] = sp
    return SimilarityMatrices(freqs=tuple(freqs), s_amp=s_amp, s_phase=s_phase,
                              n_envs=n_env)


def similarity_table(m: SimilarityMatrices) -> str:
    def block(name, mat):
        head = " ".join(f"{f:>7.3g}" for f in m.freqs)
        rows = [f"{name} (over {m.n_envs} environments)",
                f"{'':>7} {head}"]
        for i, f in enumerate(m.freqs):
            rows.append(f"{f:>7.3g} " + " ".join(f"{v:7.4f}" for v in mat[i]))
        return "\n".join(rows)

    return block("S_A", m.s_amp) + "\n\n" + block("S_P", m.s_phase) + "\n"


def export_similarity(m: SimilarityMatrices, path_prefix) -> list[str]:
    """Numeric table plus absolute-scale heatmaps of both matrices."""
    table_path = f"{path_prefix}_similarity.txt"
    Path(table_path).write_text(similarity_table(m))
    paths = [table_path]
    for name, mat in (("samp", m.s_amp), ("sphase", m.s_phase)):
        p = f"{path_prefix}_{name}.pgm"
        images.write_pgm(p, np.rint(255.0 * np.clip(mat, 0.0, 1.0)).astype(np.uint8))
        paths.append(p)
    return paths


def model_relative_curve(model: operator.OperatorModel, dataset: Dataset,
                         split: Split, spec: BenchmarkSpec):
    """Relative S_A / S_P of frozen-operator extrapolations at the HF
    frequencies, normalized at the highest LF frequency."""
    ref = spec.ref_freq
    preds_by_freq: dict[float, list] = {}
    truths_by_freq: dict[float, list] = {}
    ref_idx = [i for i in split.lf_test if dataset.nus[i] == ref]
    for f, indices in [(ref, ref_idx)] + [
            (f, [i for i in split.hf_test if dataset.nus[i] == f])
            for f in spec.hf_freqs]:
        preds_by_freq[f] = [operator.extrapolate(model, dataset.inputs[i], float(f))
                            for i in indices]
        truths_by_freq[f] = [dataset.field(i) for i in indices]
    return metrics.relative_similarity_curve(preds_by_freq, truths_by_freq,
                                             ref_freq=ref)
