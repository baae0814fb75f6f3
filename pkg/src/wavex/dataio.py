"""Dataset container, the WFD1 binary file format, and the LF/HF split protocol.

WFD1 layout (all little-endian):

    magic   4 bytes  b"WFD1"
    u32     version (currently 1)
    u16     domain wire code (0 simplewave, 1 helmholtz, 2 maxwell)
    u32     sample count
    u32     H
    u32     W
    u32     input channel count
    u32     env scalar count
    then per sample:
        f64             nu
        f64 * n_env     environment scalars
        f32 * C*H*W     input channel planes, row-major
        f32 * H*W       real plane
        f32 * H*W       imaginary plane

Round trips are bitwise exact because every array is stored at its native
width (f32 planes, f64 scalars).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagic, TruncatedFile, UnknownFrequency, VersionMismatch
from .field import ComplexField, Domain

MAGIC = b"WFD1"
VERSION = 1

# env scalar naming convention per domain; index-aligned with Dataset.env columns
ENV_NAMES = {
    Domain.SIMPLEWAVE: ("v",),
    Domain.HELMHOLTZ: ("n_mean",),
    Domain.MAXWELL: ("eps_mean", "slice_x"),
}


@dataclass
class Dataset:
    """An ordered collection of complex-field samples with input channels.

    Arrays are index-aligned: sample ``i`` is described by ``nus[i]``,
    ``env[i]``, ``inputs[i]`` and the complex plane ``re[i] + 1j*im[i]``.
    """

    domain: Domain
    nus: np.ndarray      # (n,) float64
    env: np.ndarray      # (n, n_env) float64
    inputs: np.ndarray   # (n, C, H, W) float32
    re: np.ndarray       # (n, H, W) float32
    im: np.ndarray       # (n, H, W) float32

    def __post_init__(self):
        self.nus = np.asarray(self.nus, dtype=np.float64)
        n = len(self.nus)
        self.env = np.asarray(self.env, dtype=np.float64).reshape(n, -1)
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float32)
        self.re = np.ascontiguousarray(self.re, dtype=np.float32)
        self.im = np.ascontiguousarray(self.im, dtype=np.float32)
        if self.inputs.shape[0] != n or self.re.shape[0] != n or self.im.shape[0] != n:
            raise ValueError("sample count mismatch across dataset arrays")
        if self.re.shape != self.im.shape or self.inputs.shape[2:] != self.re.shape[1:]:
            raise ValueError("grid shape mismatch across dataset arrays")

    def __len__(self) -> int:
        return len(self.nus)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.re.shape[1:]

    def env_dict(self, i: int) -> dict[str, float]:
        names = ENV_NAMES.get(self.domain, ())
        return {name: float(self.env[i, j]) for j, name in enumerate(names)}

    def field(self, i: int) -> ComplexField:
        return ComplexField(re=self.re[i].astype(np.float64),
                            im=self.im[i].astype(np.float64),
                            nu=float(self.nus[i]), env=self.env_dict(i),
                            domain=self.domain)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(domain=self.domain, nus=self.nus[idx], env=self.env[idx],
                       inputs=self.inputs[idx], re=self.re[idx], im=self.im[idx])

    def frequencies(self) -> np.ndarray:
        """Distinct spectral values in ascending order."""
        return np.unique(self.nus)


def write_dataset(path, dataset: Dataset) -> None:
    """Serialize a dataset to the WFD1 format."""
    n, (h, w) = len(dataset), dataset.grid_shape
    c = dataset.inputs.shape[1]
    n_env = dataset.env.shape[1]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IHIIIII", VERSION, dataset.domain.wire_code,
                            n, h, w, c, n_env))
        for i in range(n):
            f.write(struct.pack("<d", float(dataset.nus[i])))
            f.write(dataset.env[i].astype("<f8").tobytes())
            f.write(dataset.inputs[i].astype("<f4").tobytes())
            f.write(dataset.re[i].astype("<f4").tobytes())
            f.write(dataset.im[i].astype("<f4").tobytes())


def read_dataset(path) -> Dataset:
    """Read a WFD1 file back into a Dataset.

    Raises
    ------
    BadMagic, VersionMismatch, TruncatedFile
        On malformed files.
    """
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise BadMagic(f"expected {MAGIC!r}, found {magic!r}")
        header = f.read(struct.calcsize("<IHIIIII"))
        if len(header) < struct.calcsize("<IHIIIII"):
            raise TruncatedFile("header cut short")
        version, dom_code, n, h, w, c, n_env = struct.unpack("<IHIIIII", header)
        if version != VERSION:
            raise VersionMismatch(f"unsupported WFD1 version {version}")
        domain = Domain.from_wire_code(dom_code)

        record = 8 + 8 * n_env + 4 * (c + 2) * h * w
        payload = f.read(record * n)
        if len(payload) < record * n:
            raise TruncatedFile(
                f"expected {record * n} payload bytes, found {len(payload)}")

    nus = np.empty(n, dtype=np.float64)
    env = np.empty((n, n_env), dtype=np.float64)
    inputs = np.empty((n, c, h, w), dtype=np.float32)
    re = np.empty((n, h, w), dtype=np.float32)
    im = np.empty((n, h, w), dtype=np.float32)
    off = 0
    for i in range(n):
        nus[i] = struct.unpack_from("<d", payload, off)[0]
        off += 8
        env[i] = np.frombuffer(payload, dtype="<f8", count=n_env, offset=off)
        off += 8 * n_env
        inputs[i] = np.frombuffer(payload, dtype="<f4", count=c * h * w,
                                  offset=off).reshape(c, h, w)
        off += 4 * c * h * w
        re[i] = np.frombuffer(payload, dtype="<f4", count=h * w, offset=off).reshape(h, w)
        off += 4 * h * w
        im[i] = np.frombuffer(payload, dtype="<f4", count=h * w, offset=off).reshape(h, w)
        off += 4 * h * w
    return Dataset(domain=domain, nus=nus, env=env, inputs=inputs, re=re, im=im)


@dataclass(frozen=True)
class Split:
    """Index partition of a dataset into LF/HF train and test sets."""

    lf_train: np.ndarray
    lf_test: np.ndarray
    hf_train: np.ndarray
    hf_test: np.ndarray
    lf_freqs: tuple[float, ...]
    hf_freqs: tuple[float, ...]
    seed: int
    ratios: tuple[float, float] = (0.8, 0.2)  # (LF train fraction, HF train fraction)

    def describe(self) -> str:
        return (f"LF {len(self.lf_train)}/{len(self.lf_test)}  "
                f"HF {len(self.hf_train)}/{len(self.hf_test)}")


def make_split(dataset: Dataset, lf_freqs, hf_freqs, seed: int,
               lf_train_fraction: float = 0.8,
               hf_train_fraction: float = 0.2) -> Split:
    """Per-frequency stratified shuffle into LF/HF train/test index lists.

    Within each frequency the train size is rounded down; the remainder goes
    to test.  Every sample frequency must belong to exactly one of the two
    configured sets.

    Raises
    ------
    UnknownFrequency
        If the dataset contains a frequency outside ``lf_freqs | hf_freqs``.
    """
    lf_set = {float(f) for f in lf_freqs}
    hf_set = {float(f) for f in hf_freqs}
    for f in dataset.frequencies():
        if float(f) not in lf_set and float(f) not in hf_set:
            raise UnknownFrequency(f"frequency {f} not in configured LF/HF sets")

    rng = np.random.default_rng(seed)
    buckets: dict[str, list[np.ndarray]] = {k: [] for k in
                                            ("lf_train", "lf_test", "hf_train", "hf_test")}
    # iterate ascending so the assignment is independent of sample order quirks
    for f in sorted(lf_set | hf_set):
        idx = np.flatnonzero(dataset.nus == f)
        if len(idx) == 0:
            continue
        perm = rng.permutation(len(idx))
        frac = lf_train_fraction if f in lf_set else hf_train_fraction
        n_train = int(len(idx) * frac)
        key = "lf" if f in lf_set else "hf"
        buckets[f"{key}_train"].append(idx[perm[:n_train]])
        buckets[f"{key}_test"].append(idx[perm[n_train:]])

    def cat(parts):
        return (np.concatenate(parts) if parts else np.empty(0, dtype=np.int64))

    return Split(lf_train=cat(buckets["lf_train"]), lf_test=cat(buckets["lf_test"]),
                 hf_train=cat(buckets["hf_train"]), hf_test=cat(buckets["hf_test"]),
                 lf_freqs=tuple(sorted(lf_set)), hf_freqs=tuple(sorted(hf_set)),
                 seed=seed, ratios=(lf_train_fraction, hf_train_fraction))
