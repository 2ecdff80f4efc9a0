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


class TrajformerError(Exception):
    exit_code = 1
    kind = 'error'


class MissingFileError(TrajformerError):
    exit_code = 2
    kind = 'missing-file'


class ConfigError(TrajformerError):
    exit_code = 3
    kind = 'config'


class EmptyDatasetError(ConfigError):
    kind = 'empty-dataset'


class ShapeError(TrajformerError, ValueError):
    exit_code = 4
    kind = 'shape'

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = [tuple(i) for i in shapes]
        super().__init__('%s: incompatible shapes %s' % (
            op, ' and '.join(str(i) for i in self.shapes)))


class NonFiniteError(TrajformerError, FloatingPointError):
    kind = 'non-finite'


class TrainingDivergedError(NonFiniteError):
    kind = 'diverged'


class NondeterministicError(TrajformerError):
    kind = 'nondeterministic'
