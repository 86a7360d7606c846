"""
Plot-ready outputs: CSV for grids and curves, JSON for scalars and
manifests. An ``OutputWriter`` stages a run beside its target directory so
the target only ever holds a complete run with its manifest.
"""
import csv
import hashlib
import logging
import shutil
import tempfile
from pathlib import Path

import numpy as np
from rest_framework.renderers import JSONRenderer

from .constants import to_cyclic
from .exceptions import InvalidParameterError, OutputError
from .scattering import ComplexSpectrum

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


def sha256sum(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def _cell(value):
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return str(int(value))
    return str(value)


def render_json(data):
    return JSONRenderer().render(data, renderer_context={'indent': 2})


class OutputWriter:
    """
    Writes a run into a staging directory beside ``directory`` and moves it
    into place on ``commit``. A directory left by an earlier run (it holds a
    ``manifest.json``) is replaced whole; any other non-empty directory is
    refused.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.files = []
        if self.directory.exists():
            if not self.directory.is_dir():
                raise OutputError(f'Output path {self.directory} is not a directory')
            if any(self.directory.iterdir()) and not (self.directory / MANIFEST_NAME).is_file():
                raise OutputError(f'Output directory {self.directory} holds files from outside a run')
        try:
            self.directory.parent.mkdir(parents=True, exist_ok=True)
            self.staging = Path(tempfile.mkdtemp(prefix=f'.{self.directory.name}.', suffix='.partial',
                                                 dir=self.directory.parent))
            self.staging.chmod(0o755)
        except OSError as exc:
            raise OutputError(f'Cannot create output directory {self.directory}: {exc}') from exc

    def _path(self, name):
        path = self.staging / name
        if path.parent != self.staging:
            raise InvalidParameterError(f'Output name must be a plain file name, got {name!r}')
        return path

    def _written(self, path):
        self.files.append(path)
        logger.debug('Wrote %s', path.name)
        return path

    def write_csv(self, name, header, rows):
        path = self._path(name)
        try:
            with open(path, 'w', newline='', encoding='utf-8') as handle:
                writer = csv.writer(handle, lineterminator='\n')
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_cell(value) for value in row])
        except OSError as exc:
            raise OutputError(f'Cannot write {path}: {exc}') from exc
        return self._written(path)

    def write_columns(self, name, columns):
        """CSV from an ordered mapping of equal-length columns."""
        header = list(columns)
        arrays = [np.asarray(values) for values in columns.values()]
        if len({len(values) for values in arrays}) > 1:
            raise InvalidParameterError(f'Columns of {name} differ in length')
        return self.write_csv(name, header, zip(*arrays))

    def write_matrix(self, name, row_label, row_values, column_values, matrix):
        """2-D map as CSV: first column the row grid, header the column grid."""
        header = [row_label] + [_cell(value) for value in column_values]
        rows = ([row_value, *values] for row_value, values in zip(row_values, matrix))
        return self.write_csv(name, header, rows)

    def write_json(self, name, data):
        path = self._path(name)
        try:
            path.write_bytes(render_json(data) + b'\n')
        except (OSError, ValueError) as exc:
            raise OutputError(f'Cannot write {path}: {exc}') from exc
        return self._written(path)

    def checksums(self):
        return [
            {'name': path.name, 'sha256': sha256sum(path), 'size': path.stat().st_size}
            for path in self.files
        ]

    def commit(self):
        """Move the staged run into place, replacing an earlier run."""
        try:
            if self.directory.exists():
                shutil.rmtree(self.directory)
            self.staging.rename(self.directory)
        except OSError as exc:
            self.discard()
            raise OutputError(f'Cannot move outputs into {self.directory}: {exc}') from exc
        self.files = [self.directory / path.name for path in self.files]
        return self.directory

    def discard(self):
        """Remove the staged files; an earlier run in ``directory`` is left as it was."""
        shutil.rmtree(self.staging, ignore_errors=True)
        self.files = []
        logger.info('Removed partial outputs for %s', self.directory)


def spectrum_columns(spectrum: ComplexSpectrum, frequency_offset=0.0, angular=True):
    frequencies = spectrum.frequencies + frequency_offset
    if angular:
        frequencies = to_cyclic(frequencies)
    return {
        'frequency_hz': frequencies,
        'r_re': spectrum.values.real,
        'r_im': spectrum.values.imag,
        'r_abs': np.abs(spectrum.values),
    }


def read_spectra_csv(path):
    """
    Measured spectra from CSV columns amplitude, frequency_hz, re, im.
    Returns [(frequencies_hz, values, amplitude), ...] grouped by amplitude.
    """
    groups = {}
    try:
        with open(path, newline='', encoding='utf-8') as handle:
            for row in csv.DictReader(handle):
                amplitude = float(row['amplitude'])
                groups.setdefault(amplitude, []).append(
                    (float(row['frequency_hz']), complex(float(row['re']), float(row['im']))))
    except OSError as exc:
        raise OutputError(f'Cannot read {path}: {exc}') from exc
    except (KeyError, ValueError) as exc:
        raise InvalidParameterError(f'{path}: malformed spectrum row ({exc})') from exc
    spectra = []
    for amplitude, points in groups.items():
        points.sort(key=lambda point: point[0])
        frequencies = np.array([f for f, _ in points])
        values = np.array([v for _, v in points])
        spectra.append((frequencies, values, amplitude))
    return spectra
