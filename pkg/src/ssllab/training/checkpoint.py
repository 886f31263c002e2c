"""Bit-exact checkpoint files.

Layout::

    b"SSLCKPT1"                 8 bytes magic
    header length               uint64, little-endian
    header                      utf-8 JSON: kind, backbone config, normalization,
                                meta and the manifest of tensors
    payload                     raw little-endian scalars of every tensor, in
                                manifest order

Each manifest entry holds the tensor name, dtype ('<f4' or '<f8'), shape, byte
offset into the payload and byte count. The entries are contiguous and together
cover the payload exactly.
"""
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..backbones.build import BackboneModel, build_backbone
from ..backbones.config import BackboneConfig
from ..data.source import Normalization
from ..exceptions import (
    CheckpointFormatError,
    CorruptCheckpointError,
    IncompatibleCheckpointError,
)
from ..helpers import atomic_write_bytes, file_sha256
from ..nn.module import Module
from ..simsiam.siamese import build_siamese
from .classifier import Classifier


MAGIC = b"SSLCKPT1"
FORMAT_VERSION = 1
KINDS = ("siamese", "classifier", "backbone")
DTYPES = ("<f4", "<f8")
_LENGTH = struct.Struct("<Q")


@dataclass
class Checkpoint:
    """The decoded contents of a checkpoint file."""

    kind: str
    backbone_config: BackboneConfig
    tensors: dict[str, np.ndarray]
    normalization: Normalization | None = None
    meta: dict = field(default_factory=dict)
    path: Path | None = None
    sha256: str | None = None

    def backbone_state(self) -> dict[str, np.ndarray]:
        """Tensors of the backbone, with the 'backbone.' prefix removed."""
        if self.kind == "backbone":
            return dict(self.tensors)
        prefix = "backbone."
        return {
            name[len(prefix) :]: value
            for name, value in self.tensors.items()
            if name.startswith(prefix)
        }


def _kind_of(model: Module) -> str:
    kind = getattr(model, "checkpoint_kind", None)
    if kind is None and hasattr(model, "config") and hasattr(model, "output_dim"):
        kind = "backbone"
    if kind not in KINDS:
        raise TypeError(f"Cannot checkpoint a {type(model).__name__}")
    return kind


def encode_checkpoint(
    model: Module,
    normalization: Normalization | None = None,
    meta: dict | None = None,
) -> bytes:
    kind = _kind_of(model)
    config = model.config if kind == "backbone" else model.backbone_config
    meta = dict(meta or {})
    if kind != "backbone":
        meta.update(model.checkpoint_meta())

    manifest = []
    chunks = []
    offset = 0
    for name, value in model.state_dict().items():
        array = np.ascontiguousarray(value, dtype=value.dtype.newbyteorder("<"))
        data = array.tobytes()
        manifest.append(
            {
                "name": name,
                "dtype": array.dtype.str,
                "shape": list(array.shape),
                "offset": offset,
                "nbytes": len(data),
            }
        )
        chunks.append(data)
        offset += len(data)

    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "backbone": config.to_dict(),
        "normalization": normalization.to_dict() if normalization else None,
        "meta": meta,
        "payload_bytes": offset,
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + _LENGTH.pack(len(header_bytes)) + header_bytes + b"".join(chunks)


def save_checkpoint(
    model: Module,
    path: str | Path,
    normalization: Normalization | None = None,
    meta: dict | None = None,
) -> str:
    """Write 'model' atomically to 'path'.

    Args:
        model: A SiameseModel, Classifier or bare backbone.
        path: Output file.
        normalization: The data normalization, so evaluation can match training.
        meta: Extra JSON-serializable fields for the header, e.g. epoch and metric.

    Returns:
        The sha256 hex digest of the written file.
    """
    data = encode_checkpoint(model, normalization, meta)
    atomic_write_bytes(path, data)
    return file_sha256(path)


def _validate_manifest(manifest: list[dict], payload_bytes: int) -> None:
    expected_offset = 0
    for entry in manifest:
        if entry["dtype"] not in DTYPES:
            raise CheckpointFormatError(
                f"Unsupported dtype {entry['dtype']} of {entry['name']}. Must be one of {DTYPES}"
            )
        dtype = np.dtype(entry["dtype"])
        n_values = int(np.prod(entry["shape"], dtype=np.int64))
        if entry["nbytes"] != n_values * dtype.itemsize:
            raise CorruptCheckpointError(
                f"{entry['name']}: {entry['nbytes']} bytes for shape {entry['shape']}"
            )
        if entry["offset"] != expected_offset:
            raise CorruptCheckpointError(
                f"{entry['name']}: offset {entry['offset']}, expected {expected_offset}"
            )
        expected_offset += entry["nbytes"]
    if expected_offset != payload_bytes:
        raise CorruptCheckpointError(
            f"The manifest covers {expected_offset} of {payload_bytes} payload bytes"
        )


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Parse and validate checkpoint bytes.

    Raises:
        CheckpointFormatError: If the magic is wrong or the header is unreadable.
        CorruptCheckpointError: If the payload is truncated or the manifest does
            not cover it exactly.
    """
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError("Not a checkpoint file (bad magic bytes).")
    start = len(MAGIC) + _LENGTH.size
    if len(data) < start:
        raise CorruptCheckpointError("Truncated checkpoint header.")
    (header_length,) = _LENGTH.unpack(data[len(MAGIC) : start])
    if len(data) < start + header_length:
        raise CorruptCheckpointError("Truncated checkpoint header.")
    try:
        header = json.loads(data[start : start + header_length].decode("utf-8"))
        kind = header["kind"]
        manifest = header["tensors"]
        payload_bytes = int(header["payload_bytes"])
        config = BackboneConfig.from_dict(header["backbone"])
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as e:
        raise CheckpointFormatError(f"Unreadable checkpoint header: {e}") from e
    if kind not in KINDS:
        raise CheckpointFormatError(f"Unknown checkpoint kind {kind!r}")

    payload = data[start + header_length :]
    if len(payload) < payload_bytes:
        raise CorruptCheckpointError(
            f"Truncated payload: {len(payload)} of {payload_bytes} bytes"
        )
    if len(payload) > payload_bytes:
        raise CorruptCheckpointError(
            f"{len(payload) - payload_bytes} trailing bytes after the payload"
        )
    _validate_manifest(manifest, payload_bytes)

    tensors = {}
    for entry in manifest:
        dtype = np.dtype(entry["dtype"])
        array = np.frombuffer(
            payload, dtype=dtype, count=entry["nbytes"] // dtype.itemsize, offset=entry["offset"]
        )
        tensors[entry["name"]] = array.reshape(entry["shape"]).astype(dtype.newbyteorder("="))

    normalization = header.get("normalization")
    return Checkpoint(
        kind=kind,
        backbone_config=config,
        tensors=tensors,
        normalization=Normalization.from_dict(normalization) if normalization else None,
        meta=header.get("meta", {}),
    )


def read_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    checkpoint = decode_checkpoint(path.read_bytes())
    checkpoint.path = path
    checkpoint.sha256 = file_sha256(path)
    return checkpoint


def check_compatible(checkpoint: Checkpoint, config: BackboneConfig | None) -> None:
    """Raise IncompatibleCheckpointError if 'config' differs from the stored one."""
    if config is None or config == checkpoint.backbone_config:
        return
    stored = checkpoint.backbone_config.to_dict()
    differing = [
        f"{key}: checkpoint {stored[key]!r}, requested {value!r}"
        for key, value in config.to_dict().items()
        if stored[key] != value
    ]
    raise IncompatibleCheckpointError(
        "Checkpoint does not match the backbone config. " + "; ".join(differing)
    )


def build_from_checkpoint(checkpoint: Checkpoint) -> Module:
    """Rebuild the model stored in 'checkpoint' and load its tensors."""
    config = checkpoint.backbone_config
    meta = checkpoint.meta
    if checkpoint.kind == "siamese":
        model = build_siamese(
            config,
            projection_dim=meta["projection_dim"],
            stop_gradient=meta.get("stop_gradient", True),
            projection_output_bn=meta.get("projection_output_bn", False),
        )
    elif checkpoint.kind == "classifier":
        model = Classifier(
            build_backbone(config),
            meta["num_classes"],
            frozen_backbone=meta.get("frozen_backbone", False),
            task=meta.get("task", "single"),
        )
    else:
        model = build_backbone(config)
    if any(value.dtype == np.float64 for value in checkpoint.tensors.values()):
        model.astype(np.float64)
    _check_covered(model, checkpoint)
    return model.load_state_dict(checkpoint.tensors)


def _check_covered(model: Module, checkpoint: Checkpoint) -> None:
    unexpected = sorted(set(checkpoint.tensors) - set(model.state_dict()))
    if unexpected:
        raise IncompatibleCheckpointError(
            f"Unexpected tensor(s) in checkpoint: {', '.join(unexpected[:5])}"
        )


def load_checkpoint(path: str | Path, config: BackboneConfig | None = None) -> Module:
    """Load the model stored at 'path'.

    Args:
        path: Checkpoint file.
        config: The backbone config the caller expects. None accepts the stored one.

    Raises:
        CheckpointFormatError: Bad magic or header.
        CorruptCheckpointError: Truncated payload or inconsistent manifest.
        IncompatibleCheckpointError: The stored config or tensor shapes do not
            match 'config'.
    """
    checkpoint = read_checkpoint(path)
    check_compatible(checkpoint, config)
    return build_from_checkpoint(checkpoint)


def load_backbone_weights(backbone: BackboneModel, checkpoint: Checkpoint) -> BackboneModel:
    """Copy the backbone tensors of any checkpoint kind into 'backbone'."""
    check_compatible(checkpoint, backbone.config)
    state = checkpoint.backbone_state()
    unexpected = sorted(set(state) - set(backbone.state_dict()))
    if unexpected:
        raise IncompatibleCheckpointError(
            f"Unexpected backbone tensor(s): {', '.join(unexpected[:5])}"
        )
    return backbone.load_state_dict(state)
