"""Model configuration, parameter tensors, and the binary parameter file."""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import CorruptFile, IoFailure, VersionMismatch

MAGIC = b"SGTM"
FORMAT_VERSION = 1

TENSOR_NAMES = (
    "token_embeddings",
    "position_embeddings",
    "mixer_w",
    "mixer_b",
    "head_sgt_w",
    "head_sgt_b",
    "head_gd_w",
    "head_gd_b",
    "head_ged_w",
    "head_ged_b",
)


@dataclass(frozen=True)
class EncoderConfig:
    embedding_dim: int = 64
    context_window: int = 5
    hidden_dim: int = 128
    buckets: int = 2 ** 16
    max_positions: int = 512

    def __post_init__(self):
        if self.context_window < 1 or self.context_window % 2 == 0:
            raise ValueError("context_window must be a positive odd integer")
        for name in ("embedding_dim", "hidden_dim", "buckets", "max_positions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def bucket_id(text: str, buckets: int) -> int:
    # crc32 rather than hash(): str hashing is salted per process
    return zlib.crc32(text.encode("utf-8")) % buckets


@dataclass
class TaggerParams:
    config: EncoderConfig
    n_classes: int
    speaker_width: int
    tensors: Dict[str, np.ndarray]
    connection_words: Tuple[str, ...] = field(default=())

    def __getattr__(self, name):
        tensors = self.__dict__.get("tensors")
        if tensors is not None and name in tensors:
            return tensors[name]
        raise AttributeError(name)

    @staticmethod
    def shapes(config: EncoderConfig, n_classes: int, speaker_width: int) -> Dict[str, Tuple[int, ...]]:
        d, h, s = config.embedding_dim, config.hidden_dim, speaker_width
        return {
            "token_embeddings": (config.buckets, d),
            "position_embeddings": (config.max_positions, d),
            "mixer_w": (config.context_window * d, h),
            "mixer_b": (h,),
            "head_sgt_w": (h + s, n_classes),
            "head_sgt_b": (n_classes,),
            "head_gd_w": (h + s, 2),
            "head_gd_b": (2,),
            "head_ged_w": (h + s, 2),
            "head_ged_b": (2,),
        }

    @classmethod
    def zeros(cls, config: EncoderConfig, n_classes: int = 11, speaker_width: int = 1,
              connection_words: Sequence[str] = ()) -> "TaggerParams":
        shapes = cls.shapes(config, n_classes, speaker_width)
        return cls(config, n_classes, speaker_width,
                   {k: np.zeros(shapes[k]) for k in TENSOR_NAMES}, tuple(connection_words))

    @classmethod
    def init(cls, config: EncoderConfig, n_classes: int = 11, speaker_width: int = 1,
             seed: int = 13, connection_words: Sequence[str] = ()) -> "TaggerParams":
        rng = np.random.default_rng([seed, 0])
        p = cls.zeros(config, n_classes, speaker_width, connection_words)
        t = p.tensors
        t["token_embeddings"][:] = rng.normal(0.0, 0.1, t["token_embeddings"].shape)
        t["position_embeddings"][:] = rng.normal(0.0, 0.1, t["position_embeddings"].shape)
        fan_in = config.context_window * config.embedding_dim
        t["mixer_w"][:] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), t["mixer_w"].shape)
        head_scale = 1.0 / np.sqrt(config.hidden_dim + speaker_width)
        for name in ("head_sgt_w", "head_gd_w", "head_ged_w"):
            t[name][:] = rng.normal(0.0, head_scale, t[name].shape)
        return p

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in TENSOR_NAMES:
            yield name, self.tensors[name]

    def copy(self) -> "TaggerParams":
        return TaggerParams(self.config, self.n_classes, self.speaker_width,
                            {k: v.copy() for k, v in self.tensors.items()}, self.connection_words)

    def zeros_like(self) -> "TaggerParams":
        return TaggerParams(self.config, self.n_classes, self.speaker_width,
                            {k: np.zeros_like(v) for k, v in self.tensors.items()}, self.connection_words)

    def header(self) -> dict:
        return {
            "encoder": asdict(self.config),
            "n_classes": self.n_classes,
            "speaker_width": self.speaker_width,
            "connection_words": list(self.connection_words),
            "tensors": [[name, list(arr.shape)] for name, arr in self.items()],
        }

    def equals(self, other: "TaggerParams") -> bool:
        """Bitwise equality of all tensors and metadata."""
        if self.header() != other.header():
            return False
        return all(a.tobytes() == other.tensors[k].tobytes() for k, a in self.items())


def save_params(params: TaggerParams, path) -> None:
    """Layout: magic, version (u32), header length (u32), JSON header,
    sha256 of header+payload, payload of little-endian float64 tensors in
    TENSOR_NAMES order."""
    header = json.dumps(params.header(), sort_keys=True, ensure_ascii=False).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in params.items())
    digest = hashlib.sha256(header + payload).digest()
    blob = MAGIC + struct.pack("<II", FORMAT_VERSION, len(header)) + header + digest + payload
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_params(path, expected_n_classes: Optional[int] = None) -> TaggerParams:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CorruptFile(f"{path}: not a parameter file")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    body = blob[12:]
    if len(body) < header_len + 32:
        raise CorruptFile(f"{path}: truncated header")
    header_bytes = body[:header_len]
    digest = body[header_len:header_len + 32]
    payload = body[header_len + 32:]
    try:
        header = json.loads(header_bytes.decode("utf-8"))
        config = EncoderConfig(**header["encoder"])
        n_classes = int(header["n_classes"])
        speaker_width = int(header["speaker_width"])
        layout: List = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptFile(f"{path}: unreadable header") from exc
    if hashlib.sha256(header_bytes + payload).digest() != digest:
        raise CorruptFile(f"{path}: checksum mismatch")
    if expected_n_classes is not None and n_classes != expected_n_classes:
        raise VersionMismatch(f"{path}: model has {n_classes} tag classes, expected {expected_n_classes}")

    expected = TaggerParams.shapes(config, n_classes, speaker_width)
    if [name for name, _ in layout] != list(TENSOR_NAMES):
        raise VersionMismatch(f"{path}: unexpected tensor layout")
    tensors = {}
    offset = 0
    for name, shape in layout:
        shape = tuple(shape)
        if shape != expected[name]:
            raise CorruptFile(f"{path}: tensor {name} has shape {shape}, expected {expected[name]}")
        count = int(np.prod(shape))
        nbytes = count * 8
        if offset + nbytes > len(payload):
            raise CorruptFile(f"{path}: truncated payload")
        tensors[name] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(payload):
        raise CorruptFile(f"{path}: trailing bytes")
    return TaggerParams(config, n_classes, speaker_width, tensors,
                        tuple(header.get("connection_words", ())))
