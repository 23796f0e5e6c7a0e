"""Binary policy files.

Layout::

    PTFPOL 1 <action-tag> <layer dims>\n
    <float64 little-endian weights>
    <8-byte checksum>

The action tag is ``discrete:<n>`` or ``continuous:<d>``; layer dims are
comma separated (``10,64,64,4``).  Weights follow layer order, each layer's
weight matrix row-major (input index major) then its bias; a continuous
policy appends its ``d`` log-std values.  The checksum is an 8-byte BLAKE2b
digest of everything before it.
"""
from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..agents.policy import Policy
from ..errors import PolicyFileError
from ..nncore import MlpSpec
from ..nncore.params import ParameterStore

MAGIC = "PTFPOL"
VERSION = 1
CHECKSUM_BYTES = 8


@dataclass
class PolicyFile:
    version: int
    action_space: tuple
    dims: tuple
    weights: np.ndarray

    def to_policy(self):
        kind, dim = self.action_space
        act = "softmax" if kind == "discrete" else "tanh"
        spec = MlpSpec(self.dims[0], tuple(self.dims[1:-1]), ((self.dims[-1], act),))
        shapes = spec.param_shapes()
        if kind == "continuous":
            shapes = dict(shapes, log_std=(dim,))
        params = ParameterStore(shapes)
        if params.size != len(self.weights):
            raise PolicyFileError(
                f"payload holds {len(self.weights)} weights, network needs {params.size}")
        params.load_flat(self.weights)
        return Policy(spec, params, self.action_space)


def _checksum(data):
    return hashlib.blake2b(data, digest_size=CHECKSUM_BYTES).digest()


def encode_policy(policy):
    kind, dim = policy.action_space
    dims = [int(d) for d in policy.spec.dims]
    header = f"{MAGIC} {VERSION} {kind}:{dim} {','.join(map(str, dims))}\n".encode("ascii")
    body = header + policy.params.flat.astype("<f8").tobytes()
    return body + _checksum(body)


def decode_policy(data):
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(MAGIC.encode()):
        raise PolicyFileError("not a policy file (missing PTFPOL header)")
    try:
        fields = data[:nl].decode("ascii").split()
    except UnicodeDecodeError:
        raise PolicyFileError("header is not ASCII") from None
    if len(fields) != 4:
        raise PolicyFileError(f"header needs 4 fields, found {len(fields)}")
    try:
        version = int(fields[1])
    except ValueError:
        raise PolicyFileError(f"bad version field {fields[1]!r}") from None
    if version != VERSION:
        raise PolicyFileError(f"unsupported policy file version {version} (expected {VERSION})")
    kind, _, dim = fields[2].partition(":")
    if kind not in ("discrete", "continuous") or not dim.isdigit() or int(dim) < 1:
        raise PolicyFileError(f"bad action tag {fields[2]!r}")
    try:
        dims = tuple(int(d) for d in fields[3].split(","))
    except ValueError:
        raise PolicyFileError(f"bad layer dims {fields[3]!r}") from None
    if len(dims) < 2 or min(dims) < 1 or dims[-1] != int(dim):
        raise PolicyFileError(f"layer dims {fields[3]!r} do not fit action tag {fields[2]!r}")
    payload = data[nl + 1:]
    n_weights = sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))
    if kind == "continuous":
        n_weights += int(dim)
    expected = 8 * n_weights + CHECKSUM_BYTES
    if len(payload) < expected:
        raise PolicyFileError(f"truncated file: {len(payload)} payload bytes, expected {expected}")
    if len(payload) > expected:
        raise PolicyFileError(f"trailing data: {len(payload)} payload bytes, expected {expected}")
    body = data[:nl + 1 + 8 * n_weights]
    if _checksum(body) != payload[-CHECKSUM_BYTES:]:
        raise PolicyFileError("checksum mismatch")
    weights = np.frombuffer(payload[:-CHECKSUM_BYTES], dtype="<f8").astype(np.float64)
    return PolicyFile(version, (kind, int(dim)), dims, weights)


def atomic_write(path, data):
    """Write bytes or text to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_policy(path, policy):
    atomic_write(path, encode_policy(policy))


def load_policy_file(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise PolicyFileError(f"cannot read {path}: {exc.strerror}") from None
    return decode_policy(data)


def load_policy(path):
    return load_policy_file(path).to_policy()


def load_manifest(path):
    """Policy paths listed one per line (``#`` comments); relative to the manifest."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise PolicyFileError(f"cannot read manifest {path}: {exc.strerror}") from None
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            p = Path(line)
            out.append(p if p.is_absolute() else path.parent / p)
    if not out:
        raise PolicyFileError(f"manifest {path} lists no policies")
    return out
