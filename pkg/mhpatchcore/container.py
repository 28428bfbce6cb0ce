# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Detector state container.

Layout:

  magic "MHPCSTAT" | u32 header length | header (UTF-8 JSON, sorted keys) |
  segments (raw little-endian float64, row-major, in header order) |
  sha256 of everything before it (32 bytes)

The header records the format version, free-form metadata, and for each
segment its name, shape and sha256.
"""

from typing import Dict, List, Tuple, Any, cast

import hashlib
import json
import struct

import numpy as np
import numpy.typing as npt

from .internal_types import JsonableDict, Matrix
from .constants import STATE_MAGIC, STATE_FORMAT_VERSION
from .exceptions import ChecksumError, TruncatedFileError, VersionMismatchError

_LENGTH = struct.Struct('<I')
_DIGEST_SIZE = 32

def encode_container(
      metadata: JsonableDict,
      segments: List[Tuple[str, npt.NDArray[np.float64]]],
      format_version: int=STATE_FORMAT_VERSION,
    ) -> bytes:
  payloads: List[bytes] = []
  descriptors: List[JsonableDict] = []
  for name, array in segments:
    a = np.ascontiguousarray(array, dtype=np.float64)
    payload = a.astype('<f8').tobytes(order='C')
    payloads.append(payload)
    descriptors.append(dict(
        name=name,
        shape=list(a.shape),
        nbytes=len(payload),
        sha256=hashlib.sha256(payload).hexdigest(),
      ))
  header: JsonableDict = dict(format_version=format_version, metadata=metadata, segments=descriptors)
  header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
  body = STATE_MAGIC + _LENGTH.pack(len(header_bytes)) + header_bytes + b''.join(payloads)
  return body + hashlib.sha256(body).digest()

def write_container(
      pathname: str,
      metadata: JsonableDict,
      segments: List[Tuple[str, npt.NDArray[np.float64]]],
      format_version: int=STATE_FORMAT_VERSION,
    ) -> None:
  data = encode_container(metadata, segments, format_version=format_version)
  with open(pathname, 'wb') as f:
    f.write(data)

def _parse_header(raw: bytes, prefix: int, header_len: int) -> Tuple[Dict[str, Any], int]:
  """(header, total file length it declares); ValueError/KeyError/TypeError when unreadable"""
  if prefix + header_len > len(raw):
    raise ValueError("header runs past the end of the file")
  header = cast(Dict[str, Any], json.loads(raw[prefix:prefix + header_len].decode('utf-8')))
  descriptors = cast(List[Dict[str, Any]], header['segments'])
  declared = prefix + header_len + sum(int(d['nbytes']) for d in descriptors) + _DIGEST_SIZE
  return header, declared

def _damage_error(raw: bytes, prefix: int, header_len: int) -> Exception:
  # A readable header that declares more bytes than are present means the file was cut short
  try:
    _, declared = _parse_header(raw, prefix, header_len)
  except (ValueError, KeyError, TypeError):
    return ChecksumError("State file checksum mismatch")
  if declared > len(raw):
    return TruncatedFileError(f"State file is truncated: {len(raw)} bytes, expected {declared}")
  return ChecksumError("State file checksum mismatch")

def decode_container(raw: bytes) -> Tuple[JsonableDict, Dict[str, Matrix]]:
  """Verify and split a container into (metadata, segments by name).

  The whole-file checksum is verified before anything else is read.
  """
  prefix = len(STATE_MAGIC) + _LENGTH.size
  if len(raw) < prefix + _DIGEST_SIZE:
    raise TruncatedFileError(f"State file is truncated ({len(raw)} bytes)")
  if raw[:len(STATE_MAGIC)] != STATE_MAGIC:
    raise ChecksumError("Not a detector state file (bad magic)")
  header_len = _LENGTH.unpack_from(raw, len(STATE_MAGIC))[0]
  if hashlib.sha256(raw[:-_DIGEST_SIZE]).digest() != raw[-_DIGEST_SIZE:]:
    raise _damage_error(raw, prefix, header_len)
  try:
    header, declared = _parse_header(raw, prefix, header_len)
  except (ValueError, KeyError, TypeError) as ex:
    raise ChecksumError(f"State file header is corrupt: {ex}") from ex
  if declared != len(raw):
    raise ChecksumError(f"State file is {len(raw)} bytes but its header declares {declared}")
  version = header.get('format_version')
  if version != STATE_FORMAT_VERSION:
    raise VersionMismatchError(f"State file format version {version} is not supported (expected {STATE_FORMAT_VERSION})")
  segments: Dict[str, Matrix] = {}
  offset = prefix + header_len
  for d in cast(List[Dict[str, Any]], header['segments']):
    nbytes = int(d['nbytes'])
    payload = raw[offset:offset + nbytes]
    offset += nbytes
    if hashlib.sha256(payload).hexdigest() != d['sha256']:
      raise ChecksumError(f"Segment '{d['name']}' checksum mismatch")
    shape = tuple(int(x) for x in d['shape'])
    array = np.frombuffer(payload, dtype='<f8').reshape(shape).astype(np.float64)
    segments[str(d['name'])] = array
  return cast(JsonableDict, header['metadata']), segments

def read_container(pathname: str) -> Tuple[JsonableDict, Dict[str, Matrix]]:
  with open(pathname, 'rb') as f:
    raw = f.read()
  return decode_container(raw)
