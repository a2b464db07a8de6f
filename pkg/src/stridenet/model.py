"""The stride autoencoder and its multi-task head.

Encoder: three levels of double 3x3 convolution + ReLU, each followed by a
1x4 max pool along time only, channel plan (16, 32, 64). Input segments of
width 600 are zero padded to 640 internally so three 1x4 poolings divide
evenly (640 -> 160 -> 40 -> 10). Decoder mirrors the encoder's widths with
1x4 nearest-neighbor upsampling and skip concatenation at half the channel
count (the decoder exists only for the reconstruction pretext), ending in
a linear 1x1 convolution back to one channel, cropped to width 600.

The downstream head consumes the flattened bottleneck (64*6*10 = 3840):
one hidden dense layer of 128 with ReLU, then a 2-way classification head
and a single linear regression output in normalized length units
(centimeters / 300, i.e. meters / 3).

Checkpoint file layout (all integers little endian):
    bytes 0..8    magic b"STRIDNT1"
    bytes 8..12   uint32 length L of the manifest
    bytes 12..12+L  UTF-8 JSON manifest: format version, creation time,
                    model config, training provenance (seed, epoch,
                    val_loss, init_mode, metrics), and the ordered list of
                    parameter names and shapes
    remainder     raw float32 little-endian blocks, one per parameter,
                  in manifest order
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .data import SEGMENT_LEN
from .engine import (
    ParamStore,
    ShapeError,
    Tensor,
    concat_channels,
    conv2d_same,
    crop_time,
    dense,
    flatten_features,
    maxpool_time,
    pad_time,
    upsample_time,
)

CHECKPOINT_MAGIC = b"STRIDNT1"
REG_SCALE_CM = 300.0   # regression target = length_cm / 300, so targets sit in (0, 1]


class CheckpointError(RuntimeError):
    """Corrupt checkpoint file or config mismatch on load."""


@dataclass(frozen=True)
class ModelConfig:
    levels: int = 3
    channels: tuple = (16, 32, 64)
    kernel: int = 3
    pool: int = 4
    in_width: int = SEGMENT_LEN
    padded_width: int = 640
    sensor_rows: int = 6
    head_hidden: int = 128
    classes: int = 2

    def __post_init__(self):
        if len(self.channels) != self.levels:
            raise ValueError("channel plan must list one width per level")
        if self.padded_width % (self.pool**self.levels) != 0:
            raise ValueError(
                f"padded width {self.padded_width} not divisible by {self.pool}^{self.levels}"
            )
        if self.padded_width < self.in_width:
            raise ValueError("padded width must cover the input width")

    @property
    def decoder_channels(self) -> tuple:
        # The decoder only serves the reconstruction pretext and is dropped
        # after pretraining, so it runs at half the encoder's widths.
        return tuple(max(c // 2, 4) for c in self.channels)

    @property
    def bottleneck_width(self) -> int:
        return self.padded_width // (self.pool**self.levels)

    @property
    def bottleneck_features(self) -> int:
        return self.channels[-1] * self.sensor_rows * self.bottleneck_width

    @property
    def encoder_widths(self) -> tuple:
        w = self.padded_width
        out = [w]
        for _ in range(self.levels):
            w //= self.pool
            out.append(w)
        return tuple(out)


PATH_GROUPS = ("encoder", "decoder", "recon_head", "fc", "cls_head", "reg_head")


class ModelParams:
    """All trainable tensors, grouped by path prefix in one ParamStore."""

    def __init__(self, config: ModelConfig, store: ParamStore):
        self.config = config
        self.store = store

    @classmethod
    def init(cls, config: ModelConfig = ModelConfig(), seed: int = 0) -> "ModelParams":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x9E37])))
        store = ParamStore()

        def conv_pair(name, c_out, c_in, k):
            std = np.sqrt(2.0 / (c_in * k * k))
            store.add(f"{name}/w", rng.normal(0.0, std, size=(c_out, c_in, k, k)))
            store.add(f"{name}/b", np.zeros(c_out))

        k = config.kernel
        prev = 1
        for i, ch in enumerate(config.channels, start=1):
            conv_pair(f"encoder/l{i}a", ch, prev, k)
            conv_pair(f"encoder/l{i}b", ch, ch, k)
            prev = ch

        above = config.channels[-1]
        for i in range(config.levels, 0, -1):
            skip = config.channels[i - 1]
            out_ch = config.decoder_channels[i - 1]
            conv_pair(f"decoder/l{i}a", out_ch, above + skip, k)
            conv_pair(f"decoder/l{i}b", out_ch, out_ch, k)
            above = out_ch

        conv_pair("recon_head", 1, config.decoder_channels[0], 1)

        def dense_pair(name, d_in, d_out, std):
            store.add(f"{name}/w", rng.normal(0.0, std, size=(d_in, d_out)))
            store.add(f"{name}/b", np.zeros(d_out))

        dense_pair("fc", config.bottleneck_features, config.head_hidden,
                   np.sqrt(2.0 / config.bottleneck_features))
        dense_pair("cls_head", config.head_hidden, config.classes,
                   np.sqrt(1.0 / config.head_hidden))
        dense_pair("reg_head", config.head_hidden, 1, np.sqrt(1.0 / config.head_hidden))
        return cls(config, store)

    def __getitem__(self, name: str) -> Tensor:
        return self.store[name]

    def group_names(self, prefix: str) -> list[str]:
        return [n for n in self.store.names() if n.startswith(prefix + "/") or n == prefix]

    def group_checksum(self, prefix: str) -> str:
        """SHA-1 over the group's raw bytes; equal checksums mean bit-equal weights."""
        digest = hashlib.sha1()
        for name in sorted(self.group_names(prefix)):
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(self.store[name].data).tobytes())
        return digest.hexdigest()

    def copy_group_from(self, other: "ModelParams", prefix: str) -> None:
        for name in self.group_names(prefix):
            self.store[name].data = other.store[name].data.copy()

    def copy(self) -> "ModelParams":
        fresh = ModelParams.init(self.config, seed=0)
        fresh.store.load_state_arrays(self.store.state_arrays())
        return fresh


def _check_input(config: ModelConfig, x: Tensor) -> None:
    shape = x.data.shape
    expected = (1, config.sensor_rows, config.in_width)
    if shape[-3:] != expected or x.data.ndim not in (3, 4):
        raise ShapeError(f"model input must be (N,)+{expected}, got {shape}")


def encode(params: ModelParams, x: Tensor):
    """Run the encoding path; returns (bottleneck, per-level skip tensors)."""
    cfg = params.config
    _check_input(cfg, x)
    h = pad_time(x, cfg.padded_width)
    skips = []
    for i in range(1, cfg.levels + 1):
        h = conv2d_same(h, params[f"encoder/l{i}a/w"], params[f"encoder/l{i}a/b"]).relu()
        h = conv2d_same(h, params[f"encoder/l{i}b/w"], params[f"encoder/l{i}b/b"]).relu()
        skips.append(h)
        h = maxpool_time(h, cfg.pool)
    return h, skips


def decode_reconstruct(params: ModelParams, bottleneck: Tensor, skips) -> Tensor:
    """Mirror the encoder back to a 1-channel segment of the input width."""
    cfg = params.config
    h = bottleneck
    for i in range(cfg.levels, 0, -1):
        h = upsample_time(h, cfg.pool)
        h = concat_channels([h, skips[i - 1]])
        h = conv2d_same(h, params[f"decoder/l{i}a/w"], params[f"decoder/l{i}a/b"]).relu()
        h = conv2d_same(h, params[f"decoder/l{i}b/w"], params[f"decoder/l{i}b/b"]).relu()
    h = conv2d_same(h, params["recon_head/w"], params["recon_head/b"])  # linear output
    return crop_time(h, cfg.in_width)


def forward_autoencoder(params: ModelParams, x: Tensor) -> Tensor:
    bottleneck, skips = encode(params, x)
    return decode_reconstruct(params, bottleneck, skips)


def forward_downstream(params: ModelParams, x: Tensor):
    """Encoder + shared hidden layer + (class logits, normalized length)."""
    bottleneck, _ = encode(params, x)
    features = flatten_features(bottleneck)
    hidden = dense(features, params["fc/w"], params["fc/b"]).relu()
    logits = dense(hidden, params["cls_head/w"], params["cls_head/b"])
    reg = dense(hidden, params["reg_head/w"], params["reg_head/b"])
    if reg.data.ndim == 2:
        length = reg.reshape(reg.data.shape[0])
    else:
        length = reg.reshape(())
    return logits, length


def save_checkpoint(
    params: ModelParams,
    path,
    seed: int = 0,
    epoch: int = 0,
    val_loss: float | None = None,
    init_mode: str = "fresh",
    metrics: dict | None = None,
) -> None:
    """Write parameters plus a plain-text manifest; round-trips bit-exactly."""
    names = params.store.names()
    manifest = {
        "format": 1,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": asdict(params.config),
        "seed": int(seed),
        "epoch": int(epoch),
        "val_loss": None if val_loss is None else float(val_loss),
        "init_mode": init_mode,
        "metrics": metrics or {},
        "params": [{"name": n, "shape": list(params.store[n].data.shape)} for n in names],
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(params.store[name].data, dtype="<f4").tobytes())


def load_checkpoint(path, expect_config: ModelConfig | None = None):
    """Read a checkpoint; returns (ModelParams, manifest dict)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path.name}: not a checkpoint file")
    (blob_len,) = struct.unpack("<I", raw[8:12])
    try:
        manifest = json.loads(raw[12 : 12 + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path.name}: corrupt manifest: {exc}") from None

    cfg_dict = dict(manifest["config"])
    cfg_dict["channels"] = tuple(cfg_dict["channels"])
    config = ModelConfig(**cfg_dict)
    if expect_config is not None and config != expect_config:
        raise CheckpointError(
            f"{path.name}: config mismatch: checkpoint has {config}, expected {expect_config}"
        )

    params = ModelParams.init(config, seed=0)
    offset = 12 + blob_len
    for entry in manifest["params"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in params.store:
            raise CheckpointError(f"{path.name}: unknown parameter {name!r}")
        expected_shape = params.store[name].data.shape
        if shape != expected_shape:
            raise CheckpointError(
                f"{path.name}: parameter {name!r} has shape {shape}, expected {expected_shape}"
            )
        count = int(np.prod(shape))
        block = raw[offset : offset + 4 * count]
        if len(block) != 4 * count:
            raise CheckpointError(f"{path.name}: truncated block for {name!r}")
        params.store[name].data = np.frombuffer(block, dtype="<f4").reshape(shape).copy()
        offset += 4 * count
    if offset != len(raw):
        raise CheckpointError(f"{path.name}: {len(raw) - offset} trailing bytes")
    return params, manifest
