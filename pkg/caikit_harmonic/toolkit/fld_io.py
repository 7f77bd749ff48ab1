# Copyright The Caikit Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Field snapshot files (.fld)

Layout: one line of JSON header (sorted keys) terminated by a newline, followed
by the raw samples as little-endian complex128 (interleaved re, im float64),
row-major over (grid axis 0, grid axis 1[, row, column]).
"""
# Standard
from typing import Any, Dict, Optional
import json
import os

# Third Party
import numpy as np

# First Party
from caikit.core.exceptions import error_handler
import alog

# Local
from .domain import GridField, SurfaceDomain, SurfaceKind

log = alog.use_channel("FLDIO")
error = error_handler.get(log)

FLD_FORMAT = "caikit-harmonic/fld"
FLD_VERSION = 1
FLD_EXTENSION = ".fld"
_DTYPE = np.dtype("<c16")


def field_header(field: GridField) -> Dict[str, Any]:
    domain = field.domain
    header = {
        "format": FLD_FORMAT,
        "version": FLD_VERSION,
        "kind": domain.kind.value,
        "N": domain.N,
        "value_kind": "matrix" if field.is_matrix else "scalar",
        "dim": field.dim,
    }
    if domain.is_torus:
        header["tau"] = [domain.tau.real, domain.tau.imag]
    else:
        header["L"] = domain.L
    return header


def domain_from_header(header: Dict[str, Any]) -> SurfaceDomain:
    error.value_check(
        "<HRM31872201E>",
        header.get("format") == FLD_FORMAT and header.get("version") == FLD_VERSION,
        f"Unsupported field header format {header.get('format')} "
        f"version {header.get('version')}",
    )
    kind = header.get("kind")
    if kind == SurfaceKind.TORUS.value:
        tau = header.get("tau")
        error.value_check(
            "<HRM31872202E>",
            isinstance(tau, list) and len(tau) == 2,
            f"Torus header needs tau as [re, im], got {tau}",
        )
        return SurfaceDomain.torus(int(header.get("N")), complex(tau[0], tau[1]))
    error.value_check(
        "<HRM31872203E>", kind == SurfaceKind.PATCH.value, f"Unknown domain kind '{kind}'"
    )
    return SurfaceDomain.patch(int(header.get("N")), float(header.get("L")))


def expected_shape(header: Dict[str, Any], domain: SurfaceDomain) -> tuple:
    value_kind = header.get("value_kind")
    error.value_check(
        "<HRM31872204E>",
        value_kind in ("scalar", "matrix"),
        f"Unknown value kind '{value_kind}'",
    )
    if value_kind == "scalar":
        return domain.shape
    dim = int(header.get("dim", 0))
    error.value_check("<HRM31872205E>", dim >= 1, f"Matrix dimension must be positive, got {dim}")
    return domain.shape + (dim, dim)


def write_field(path: str, field: GridField):
    """Write a GridField snapshot to path"""
    header = json.dumps(field_header(field), sort_keys=True)
    payload = np.ascontiguousarray(field.values, dtype=_DTYPE)
    with open(path, "wb") as handle:
        handle.write(header.encode("utf-8"))
        handle.write(b"\n")
        handle.write(payload.tobytes(order="C"))
    log.debug(f"Wrote field snapshot {path} with shape {payload.shape}")


def read_header(path: str) -> Dict[str, Any]:
    error.file_check("<HRM31872206E>", path)
    with open(path, "rb") as handle:
        line = handle.readline()
    return _parse_header(path, line)


def read_field(path: str, expected_domain: Optional[SurfaceDomain] = None) -> GridField:
    """Read a .fld snapshot.

    Args:
        path: str
            Snapshot file.
        expected_domain: Optional[SurfaceDomain]
            If given, the header domain must describe the same grid.
    Returns:
        GridField
    """
    error.file_check("<HRM31872207E>", path)
    with open(path, "rb") as handle:
        raw = handle.read()
    newline = raw.find(b"\n")
    error.value_check(
        "<HRM31872208E>", newline >= 0, f"Field file {path} has no header line"
    )
    header = _parse_header(path, raw[:newline])
    domain = domain_from_header(header)
    shape = expected_shape(header, domain)
    if expected_domain is not None:
        error.value_check(
            "<HRM31872209E>",
            expected_domain == domain,
            f"Field file {path} has grid shape {domain.shape} ({domain.kind.value}) but "
            f"shape {expected_domain.shape} ({expected_domain.kind.value}) was expected",
        )

    payload = raw[newline + 1 :]
    expected_bytes = int(np.prod(shape)) * _DTYPE.itemsize
    error.value_check(
        "<HRM31872210E>",
        len(payload) >= expected_bytes,
        f"Field file {path} is truncated: missing {expected_bytes - len(payload)} bytes "
        f"of {expected_bytes}",
    )
    error.value_check(
        "<HRM31872211E>",
        len(payload) == expected_bytes,
        f"Field file {path} has {len(payload) - expected_bytes} trailing bytes",
    )
    values = np.frombuffer(payload, dtype=_DTYPE).reshape(shape).astype(complex)
    return GridField(domain, values)


def write_fields(directory: str, fields: Dict[str, GridField]):
    """Write several named fields as <name>.fld under directory"""
    os.makedirs(directory, exist_ok=True)
    for name in sorted(fields):
        write_field(os.path.join(directory, name + FLD_EXTENSION), fields[name])


def _parse_header(path: str, line: bytes) -> Dict[str, Any]:
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        error("<HRM31872212E>", ValueError(f"Field file {path} has a malformed header: {err}"))
    error.type_check("<HRM31872213E>", dict, header=header)
    return header
