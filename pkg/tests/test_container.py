#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

import numpy as np
import pytest

from mhpatchcore.container import encode_container, decode_container
from mhpatchcore.exceptions import ChecksumError, TruncatedFileError

def sample() -> bytes:
  return encode_container(dict(note='x'), [ ('a', np.arange(6.0).reshape(2, 3)), ('b', np.array([0.5])) ])

def test_segments_and_metadata_survive():
  metadata, segments = decode_container(sample())
  assert metadata == dict(note='x')
  assert np.array_equal(segments['a'], np.arange(6.0).reshape(2, 3))
  assert segments['b'].tolist() == [0.5]
  assert sample() == sample()

def test_damage_is_detected():
  raw = sample()
  with pytest.raises(TruncatedFileError):
    decode_container(raw[:10])
  with pytest.raises(TruncatedFileError):
    decode_container(raw[:-5])
  with pytest.raises(ChecksumError):
    decode_container(raw + b'\0')
  with pytest.raises(ChecksumError):
    decode_container(b'NOTSTATE' + raw[8:])
  flipped = bytearray(raw)
  flipped[-33] ^= 0x01
  with pytest.raises(ChecksumError):
    decode_container(bytes(flipped))

@pytest.mark.parametrize('position', [ 8, 9, 10, 11 ])
def test_corrupt_header_length_is_a_checksum_error(position):
  flipped = bytearray(sample())
  flipped[position] ^= 0x01
  with pytest.raises(ChecksumError):
    decode_container(bytes(flipped))

def test_corrupt_header_text_is_a_checksum_error():
  raw = sample()
  flipped = bytearray(raw)
  flipped[12] ^= 0x20
  with pytest.raises(ChecksumError):
    decode_container(bytes(flipped))

def test_cut_segments_are_reported_as_truncation():
  raw = sample()
  with pytest.raises(TruncatedFileError):
    decode_container(raw[:-40])
