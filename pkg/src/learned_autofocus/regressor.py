"""
Coefficient regressor h: a four-layer strided CNN, global average pooling and a
small MLP mapping a (DRC, phase) image pair to phase-polynomial coefficients.

Parameters live in :class:`RegressorParams`, an ordered name -> float64 tensor
mapping that also knows how to read and write DAF1 checkpoints.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from src.learned_autofocus import layers
from src.errors import CheckpointFormatError, NonFiniteError, ShapeMismatchError
from src.slc import NUM_COEFFS, PhasePolynomial

CONV_CHANNELS = (2, 8, 16, 32, 64)
DENSE_UNITS = (CONV_CHANNELS[-1], 32, NUM_COEFFS)
MIN_INPUT_SIZE = 16

CHECKPOINT_MAGIC = b"DAF1"
CHECKPOINT_VERSION = 1

PathLike = Union[str, Path]


def parameter_shapes() -> dict[str, tuple[int, ...]]:
    """Names and shapes of every learnable tensor, in forward order."""
    shapes: dict[str, tuple[int, ...]] = {}
    for i, (c_in, c_out) in enumerate(zip(CONV_CHANNELS[:-1], CONV_CHANNELS[1:])):
        shapes[f"conv{i}.weight"] = (c_out, c_in, layers.KERNEL, layers.KERNEL)
        shapes[f"conv{i}.bias"] = (c_out,)
    for i, (n_in, n_out) in enumerate(zip(DENSE_UNITS[:-1], DENSE_UNITS[1:])):
        shapes[f"dense{i}.weight"] = (n_out, n_in)
        shapes[f"dense{i}.bias"] = (n_out,)
    return shapes


N_CONV = len(CONV_CHANNELS) - 1
N_DENSE = len(DENSE_UNITS) - 1


@dataclass(eq=False)
class RegressorParams:
    """All learnable tensors of the regressor, keyed by layer-qualified name."""

    tensors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        expected = parameter_shapes()
        if list(self.tensors) != list(expected):
            raise ShapeMismatchError(f"Expected tensors {list(expected)}, got {list(self.tensors)}")
        for name, shape in expected.items():
            tensor = np.asarray(self.tensors[name], dtype=np.float64)
            if tensor.shape != shape:
                raise ShapeMismatchError(f"{name}: expected shape {shape}, got {tensor.shape}")
            if not np.all(np.isfinite(tensor)):
                raise NonFiniteError(f"{name} contains non-finite values")
            self.tensors[name] = tensor

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    @classmethod
    def zeros(cls) -> "RegressorParams":
        return cls({name: np.zeros(shape) for name, shape in parameter_shapes().items()})

    @classmethod
    def glorot(cls, seed: int) -> "RegressorParams":
        """Uniform fan-in/fan-out scaled weights, zero biases."""
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xDAF1])))
        tensors: dict[str, np.ndarray] = {}
        for name, shape in parameter_shapes().items():
            if name.endswith(".bias"):
                tensors[name] = np.zeros(shape)
                continue
            receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
            fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-limit, limit, shape)
        return cls(tensors)

    def copy(self) -> "RegressorParams":
        return RegressorParams({name: tensor.copy() for name, tensor in self.tensors.items()})

    def step(self, grads: dict[str, np.ndarray], learning_rate: float) -> "RegressorParams":
        """Plain SGD update, returned as a new parameter set."""
        return RegressorParams({name: tensor - learning_rate * grads[name] for name, tensor in self.tensors.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([tensor.ravel() for tensor in self.tensors.values()])

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for name, tensor in self.tensors.items():
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
        return digest.hexdigest()

    # -- DAF1 checkpoints ------------------------------------------------------

    def save(self, path: PathLike) -> Path:
        """Write magic, u32 version, then per tensor: name, rank, dims, float64 payload."""
        out_path = Path(path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with out_path.open("wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", CHECKPOINT_VERSION))
            for name, tensor in self.tensors.items():
                encoded = name.encode("utf-8")
                fh.write(struct.pack("<I", len(encoded)))
                fh.write(encoded)
                fh.write(struct.pack("<I", tensor.ndim))
                fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
                fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
        return out_path

    @classmethod
    def load(cls, path: PathLike) -> "RegressorParams":
        in_path = Path(path)
        if not in_path.exists():
            raise FileNotFoundError(f"Checkpoint not found: {in_path}")
        raw = in_path.read_bytes()
        if raw[:4] != CHECKPOINT_MAGIC:
            raise CheckpointFormatError(f"{in_path}: bad magic {raw[:4]!r}")
        offset = 4

        def take(n_bytes: int) -> bytes:
            nonlocal offset
            if offset + n_bytes > len(raw):
                raise CheckpointFormatError(f"{in_path}: truncated at byte {offset}")
            chunk = raw[offset : offset + n_bytes]
            offset += n_bytes
            return chunk

        (version,) = struct.unpack("<I", take(4))
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"{in_path}: unsupported version {version}")

        tensors: dict[str, np.ndarray] = {}
        while offset < len(raw):
            (name_len,) = struct.unpack("<I", take(4))
            name = take(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", take(4))
            dims = struct.unpack(f"<{rank}I", take(4 * rank))
            count = int(np.prod(dims)) if rank else 1
            tensors[name] = np.frombuffer(take(8 * count), dtype="<f8").reshape(dims).astype(np.float64)
        try:
            return cls(tensors)
        except ShapeMismatchError as exc:
            raise CheckpointFormatError(f"{in_path}: {exc}") from exc


# -- Forward / backward ----------------------------------------------------------


@dataclass
class ForwardCache:
    """Intermediate activations kept for the backward pass."""

    conv_inputs: list[np.ndarray]
    conv_preacts: list[np.ndarray]
    pooled: np.ndarray
    dense_inputs: list[np.ndarray]
    dense_preacts: list[np.ndarray]


def stack_inputs(drc_image: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """Stack (drc, phase) into the 2-channel network input."""
    drc_image = np.asarray(drc_image, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    if drc_image.shape != phase.shape:
        raise ShapeMismatchError(f"DRC shape {drc_image.shape} does not match phase shape {phase.shape}")
    if drc_image.ndim != 2 or min(drc_image.shape) < MIN_INPUT_SIZE:
        raise ShapeMismatchError(f"Regressor input must be 2-D and at least {MIN_INPUT_SIZE} px, got {drc_image.shape}")
    return np.stack([drc_image, phase])


def forward(x: np.ndarray, params: RegressorParams) -> tuple[np.ndarray, ForwardCache]:
    """Run h on a stacked (2, M, M) input; return the 9 coefficients and the cache."""
    cache = ForwardCache(conv_inputs=[], conv_preacts=[], pooled=np.empty(0), dense_inputs=[], dense_preacts=[])
    h = x
    for i in range(N_CONV):
        cache.conv_inputs.append(h)
        pre = layers.conv_forward(h, params[f"conv{i}.weight"], params[f"conv{i}.bias"])
        cache.conv_preacts.append(pre)
        h = layers.leaky_relu_forward(pre)

    cache.pooled = layers.gap_forward(h)
    v = cache.pooled
    for i in range(N_DENSE):
        cache.dense_inputs.append(v)
        pre = layers.dense_forward(v, params[f"dense{i}.weight"], params[f"dense{i}.bias"])
        cache.dense_preacts.append(pre)
        v = layers.leaky_relu_forward(pre) if i < N_DENSE - 1 else pre

    if not np.all(np.isfinite(v)):
        raise NonFiniteError("Regressor produced non-finite activations")
    return v, cache


def backward(d_coeffs: np.ndarray, params: RegressorParams, cache: ForwardCache) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of a scalar loss for every parameter, given dL/dcoeffs."""
    grads: dict[str, np.ndarray] = {}
    d_v = np.asarray(d_coeffs, dtype=np.float64)
    for i in reversed(range(N_DENSE)):
        if i < N_DENSE - 1:
            d_v = layers.leaky_relu_backward(cache.dense_preacts[i], d_v)
        d_v, grads[f"dense{i}.weight"], grads[f"dense{i}.bias"] = layers.dense_backward(
            cache.dense_inputs[i], params[f"dense{i}.weight"], d_v
        )

    last_activation = layers.leaky_relu_forward(cache.conv_preacts[-1])
    d_h = layers.gap_backward(last_activation, d_v)
    for i in reversed(range(N_CONV)):
        d_pre = layers.leaky_relu_backward(cache.conv_preacts[i], d_h)
        d_h, grads[f"conv{i}.weight"], grads[f"conv{i}.bias"] = layers.conv_backward(
            cache.conv_inputs[i], params[f"conv{i}.weight"], d_pre
        )
    return {name: grads[name] for name in params}


def regressor_forward(drc_image: np.ndarray, phase: np.ndarray, params: RegressorParams) -> PhasePolynomial:
    """Coefficients c_2..c_10 predicted from a DRC image and a phase map."""
    coeffs, _ = forward(stack_inputs(drc_image, phase), params)
    return PhasePolynomial(coeffs)


def pooled_features(drc_image: np.ndarray, phase: np.ndarray, params: RegressorParams) -> np.ndarray:
    """The 64-vector after global average pooling."""
    _, cache = forward(stack_inputs(drc_image, phase), params)
    return cache.pooled
