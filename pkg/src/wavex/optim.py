"""Adam optimizer and the WXCK parameter checkpoint format.

WXCK layout (little-endian):

    magic   4 bytes  b"WXCK"
    u32     version (currently 1)
    u32     tensor count
    then per tensor:
        u16          name length
        bytes        name (utf-8)
        u8           rank
        u32 * rank   dims
        f32 * prod   payload

Complex parameters are stored as float32 with a trailing dimension of two
(real, imag); the loader restores them from the target parameter's dtype.
"""
from __future__ import annotations

import struct

import numpy as np

from .autodiff import SpectralWeights, Tensor
from .errors import BadMagic, ShapeMismatch, TruncatedFile, VersionMismatch

CKPT_MAGIC = b"WXCK"
CKPT_VERSION = 1


def _real_view(a: np.ndarray) -> np.ndarray:
    """View a complex array as interleaved floats; identity for real."""
    if np.iscomplexobj(a):
        return a.view(a.real.dtype)
    return a


class Adam:
    """Bias-corrected Adam over a fixed parameter list.

    Complex parameters are updated through their real/imaginary components
    independently, matching the gradient convention of the autodiff core.
    """

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(_real_view(p.data)) for p in self.params]
        self.v = [np.zeros_like(_real_view(p.data)) for p in self.params]

    def step(self):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = _real_view(np.ascontiguousarray(p.grad))
            if g.shape != m.shape:
                raise ShapeMismatch(f"gradient shape {g.shape} vs moment {m.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            _real_view(p.data)[...] -= update

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def _write_stream(f, items) -> None:
    f.write(CKPT_MAGIC)
    f.write(struct.pack("<II", CKPT_VERSION, len(items)))
    for name, p in items:
        arr = _real_view(np.ascontiguousarray(p.data))
        if np.iscomplexobj(p.data):
            arr = arr.reshape(p.data.shape + (2,))
        arr = arr.astype("<f4")
        encoded = name.encode("utf-8")
        f.write(struct.pack("<H", len(encoded)))
        f.write(encoded)
        f.write(struct.pack("<B", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.tobytes())


def save_checkpoint(path, named_params) -> None:
    """Write named parameters to a WXCK file."""
    with open(path, "wb") as f:
        _write_stream(f, list(named_params))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a WXCK file into a name -> float32 array mapping.

    Raises
    ------
    BadMagic, VersionMismatch, TruncatedFile
        On malformed files.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != CKPT_MAGIC:
        raise BadMagic(f"expected {CKPT_MAGIC!r}, found {blob[:4]!r}")
    if len(blob) < 12:
        raise TruncatedFile("header cut short")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != CKPT_VERSION:
        raise VersionMismatch(f"unsupported WXCK version {version}")
    out: dict[str, np.ndarray] = {}
    off = 12
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<B", blob, off)
            off += 1
            dims = struct.unpack_from(f"<{rank}I", blob, off)
            off += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(blob, dtype="<f4", count=size, offset=off)
            if arr.size < size:
                raise TruncatedFile(f"payload for {name!r} cut short")
            off += 4 * size
            out[name] = arr.reshape(dims).copy()
    except struct.error as exc:
        raise TruncatedFile(str(exc)) from exc
    return out


def restore_parameters(named_params, stored: dict[str, np.ndarray]) -> None:
    """Copy stored arrays into matching parameters in place."""
    for name, p in named_params:
        if name not in stored:
            raise KeyError(f"checkpoint missing parameter {name!r}")
        arr = stored[name]
        if isinstance(p, SpectralWeights) or np.iscomplexobj(p.data):
            if arr.shape != p.data.shape + (2,):
                raise ShapeMismatch(f"{name}: stored {arr.shape} vs complex "
                                    f"{p.data.shape}")
            p.data = (arr[..., 0] + 1j * arr[..., 1]).astype(p.data.dtype)
        else:
            if arr.shape != p.data.shape:
                raise ShapeMismatch(f"{name}: stored {arr.shape} vs {p.data.shape}")
            p.data = arr.astype(p.data.dtype)


def checkpoint_bytes(named_params) -> bytes:
    """Serialized WXCK image in memory (for hashing / stability checks)."""
    import io
    buf = io.BytesIO()
    _write_stream(buf, list(named_params))
    return buf.getvalue()
