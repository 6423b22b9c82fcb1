"""Define the versioned binary checkpoint format.

Layout (little-endian): ``b"CGRL"``, ``uint32`` version, ``uint32`` header length, a
JSON header (config echo, model, task, seed, step, episode), ``uint32`` record count,
then per record a ``uint16`` name length, the UTF-8 name, a ``uint8`` rank, one
``uint32`` per dimension and the row-major ``<f8`` values.
"""
from dataclasses import dataclass
import json
import logging
from pathlib import Path
import struct
from typing import Any, BinaryIO, Dict, Union

import numpy as np
import voluptuous as vol

from cgrlpy.errors import CheckpointFormatError
from cgrlpy.numeric.tensor import ParameterSet

_LOGGER: logging.Logger = logging.getLogger(__name__)

MAGIC: bytes = b"CGRL"
VERSION: int = 1

HEADER_SCHEMA = vol.Schema(
    {
        vol.Required("model"): str,
        vol.Required("task"): str,
        vol.Required("seed"): vol.All(int, vol.Range(min=0)),
        vol.Required("step"): vol.All(int, vol.Range(min=0)),
        vol.Required("episode"): vol.All(int, vol.Range(min=0)),
        vol.Required("config"): dict,
    }
)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Checkpoint:
    """Define the contents of a checkpoint file."""

    header: Dict[str, Any]
    params: ParameterSet

    @property
    def model(self) -> str:
        """Return the model id."""
        return self.header["model"]

    @property
    def config(self) -> Dict[str, Any]:
        """Return the configuration echo."""
        return self.header["config"]


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise CheckpointFormatError(f"Truncated checkpoint while reading {what}")
    return data


def _unpack(stream: BinaryIO, fmt: str, what: str) -> tuple:
    return struct.unpack(fmt, _read_exact(stream, struct.calcsize(fmt), what))


def validate_header(header: Dict[str, Any]) -> Dict[str, Any]:
    """Return a validated header, raising :class:`CheckpointFormatError` otherwise."""
    try:
        return HEADER_SCHEMA(header)
    except vol.Invalid as err:
        raise CheckpointFormatError(f"Invalid checkpoint header: {err}") from err


def encode_checkpoint(header: Dict[str, Any], params: ParameterSet) -> bytes:
    """Return the serialized bytes of a checkpoint.

    The JSON header is written with sorted keys so equal inputs give equal bytes.

    :param header: Model, task, seed, step, episode and config echo
    :type header: ``Dict[str, Any]``
    :param params: Named tensors (online network first, then any other groups)
    :type params: :meth:`cgrlpy.numeric.tensor.ParameterSet`
    :rtype: ``bytes``
    """
    header_bytes = json.dumps(
        validate_header(header), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    chunks = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<I", len(header_bytes)),
        header_bytes,
        struct.pack("<I", len(params)),
    ]
    for name, tensor in params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", len(tensor.shape)))
        chunks.extend(struct.pack("<I", dim) for dim in tensor.shape)
        chunks.append(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_checkpoint(
    path: PathLike, header: Dict[str, Any], params: ParameterSet
) -> None:
    """Write a checkpoint file."""
    Path(path).write_bytes(encode_checkpoint(header, params))
    _LOGGER.debug("Wrote checkpoint %s (%s tensors)", path, len(params))


def read_checkpoint(stream: BinaryIO) -> Checkpoint:
    """Parse a checkpoint from a binary stream."""
    if _read_exact(stream, len(MAGIC), "magic") != MAGIC:
        raise CheckpointFormatError("Not a checkpoint file (bad magic)")
    (version,) = _unpack(stream, "<I", "version")
    if version != VERSION:
        raise CheckpointFormatError(
            f"Unsupported checkpoint version {version} (expected {VERSION})"
        )
    (header_length,) = _unpack(stream, "<I", "header length")
    try:
        header = json.loads(_read_exact(stream, header_length, "header"))
    except ValueError as err:
        raise CheckpointFormatError(f"Unreadable checkpoint header: {err}") from err
    header = validate_header(header)

    (count,) = _unpack(stream, "<I", "record count")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_length,) = _unpack(stream, "<H", "record name length")
        try:
            name = _read_exact(stream, name_length, "record name").decode("utf-8")
        except UnicodeDecodeError as err:
            raise CheckpointFormatError("Record name is not UTF-8") from err
        (rank,) = _unpack(stream, "<B", "record rank")
        shape = _unpack(stream, f"<{rank}I", f"shape of {name}") if rank else ()
        size = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(_read_exact(stream, 8 * size, f"data of {name}"), "<f8")
        if name in tensors:
            raise CheckpointFormatError(f"Duplicate record {name}")
        tensors[name] = data.astype(np.float64).reshape(shape)
    if stream.read(1):
        raise CheckpointFormatError("Trailing bytes after the last record")
    return Checkpoint(header=header, params=ParameterSet(tensors))


def load_checkpoint(path: PathLike) -> Checkpoint:
    """Read a checkpoint file.

    :param path: The file to read
    :type path: ``Union[str, pathlib.Path]``
    :rtype: :meth:`cgrlpy.checkpoint.Checkpoint`
    """
    try:
        with open(path, "rb") as stream:
            return read_checkpoint(stream)
    except OSError as err:
        raise CheckpointFormatError(f"Cannot read checkpoint {path}: {err}") from err


def check_shapes(params: ParameterSet, expected: Dict[str, tuple]) -> None:
    """Raise :class:`CheckpointFormatError` unless names and shapes match exactly."""
    if list(params) != list(expected):
        raise CheckpointFormatError(
            f"Checkpoint tensors {list(params)} do not match {list(expected)}"
        )
    for name, shape in expected.items():
        if params[name].shape != tuple(shape):
            raise CheckpointFormatError(
                f"Tensor {name} has shape {params[name].shape}, expected {shape}"
            )
