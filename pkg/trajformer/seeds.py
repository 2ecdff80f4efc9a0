#
# trajformer - uncertainty aware trajectory prediction for Python
#
# Copyright (C) 2019  SILVAIR sp. z o.o.
#
#
# This program is free software; you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation; either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin St, Fifth Floor, Boston, MA  02110-1301  USA
#
#
from cryptography.hazmat.backends import default_backend
from cryptography.hazmat.primitives import hashes

import bitstring


def sha256(*chunks):
    h = hashes.Hash(hashes.SHA256(), backend=default_backend())
    for chunk in chunks:
        h.update(chunk)
    return h.finalize()


def derive_seed(seed, purpose):
    """
    Stable 64-bit sub-seed for a named purpose, e.g. derive_seed(7, 'train').
    """
    digest = sha256(b'trajformer', bitstring.pack('uintle:64', seed).bytes,
                    purpose.encode('utf-8'))

    value, = bitstring.Bits(digest[:8]).unpack('uintle:64')
    return value


def file_digest(path, block_size=1 << 16):
    h = hashes.Hash(hashes.SHA256(), backend=default_backend())

    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(block_size), b''):
            h.update(block)

    return h.finalize().hex()
