"""Versioned structured-text (JSON) and tabular file formats."""

import json
import os
import tempfile

import numpy as np

from ._validation import SchemaError, check_square

SCHEMA_VERSION = 1


def tag(kind):
    return f"lpu.{kind}/{SCHEMA_VERSION}"


def check_schema(data, kind):
    """Raise SchemaError unless ``data`` carries a compatible ``schema`` tag."""
    found = data.get("schema") if isinstance(data, dict) else None
    if not isinstance(found, str) or "/" not in found:
        raise SchemaError(f"missing schema tag, expected {tag(kind)!r}")
    name, _, version = found.partition("/")
    if name != f"lpu.{kind}":
        raise SchemaError(f"expected a {kind!r} file, found schema {found!r}")
    if version != str(SCHEMA_VERSION):
        raise SchemaError(
            f"schema {found!r} is incompatible with this reader (version {SCHEMA_VERSION})"
        )
    return data


def dumps(data):
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, data):
    atomic_write_text(path, dumps(data))


def read_json(path, kind=None):
    with open(path) as fh:
        data = json.load(fh)
    if kind is not None:
        check_schema(data, kind)
    return data


def matrix_to_dict(U):
    U = check_square(np.asarray(U, dtype=complex))
    return {
        "schema": tag("matrix"),
        "dim": int(U.shape[0]),
        "entries": [[float(z.real), float(z.imag)] for z in U.ravel()],
    }


def matrix_from_dict(data):
    check_schema(data, "matrix")
    dim = int(data["dim"])
    entries = np.asarray(data["entries"], dtype=float)
    if entries.shape != (dim * dim, 2):
        raise SchemaError(f"matrix entries must be {dim * dim} [re, im] pairs")
    return (entries[:, 0] + 1j * entries[:, 1]).reshape(dim, dim)


def write_matrix(path, U):
    write_json(path, matrix_to_dict(U))


def read_matrix(path):
    return matrix_from_dict(read_json(path))
