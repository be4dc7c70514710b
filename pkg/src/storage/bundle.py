"""
Result bundle: one directory per run with manifest.json, series/*.csv and maps/*.bin.
"""

import csv
import hashlib
import json
import logging
import struct
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..models.superoperator import Superoperator, SuperoperatorKind
from ..utils.errors import BundleError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TOOL = "choimap"

CSV_SCHEMAS = {
    "chain": 1,
    "map_spectrum": 1,
    "generator_spectrum": 1,
    "fixed_points": 1,
    "cptp": 1,
    "trajectory": 1,
    "lb": 1,
    "reconstruction": 1,
}

MAP_MAGIC = b"CHOIMAP\0"
MAP_VERSION = 1
# magic, version, d, tau, kind, reserved
MAP_HEADER = struct.Struct("<8sIIdII")
KIND_CODES = {SuperoperatorKind.MAP: 0, SuperoperatorKind.GENERATOR: 1}


def compute_file_sha256(path: Path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _format(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def encode_map(S: Superoperator) -> bytes:
    header = MAP_HEADER.pack(MAP_MAGIC, MAP_VERSION, S.d, float(S.tau), KIND_CODES[S.kind], 0)
    data = np.ascontiguousarray(S.matrix, dtype="<c16")
    return header + data.tobytes(order="C")


def decode_map(payload: bytes, source: str = "<bytes>") -> Superoperator:
    if len(payload) < MAP_HEADER.size:
        raise BundleError(f"{source}: truncated map header")
    magic, version, d, tau, kind, _ = MAP_HEADER.unpack_from(payload)
    if magic != MAP_MAGIC:
        raise BundleError(f"{source}: not a map file")
    if version != MAP_VERSION:
        raise BundleError(f"{source}: map format version {version}, expected {MAP_VERSION}")
    n = d * d
    expected = MAP_HEADER.size + 16 * n * n
    if len(payload) != expected:
        raise BundleError(f"{source}: {len(payload)} bytes, expected {expected} for d={d}")
    matrix = np.frombuffer(payload, dtype="<c16", offset=MAP_HEADER.size).reshape(n, n).copy()
    kinds = {code: k for k, code in KIND_CODES.items()}
    if kind not in kinds:
        raise BundleError(f"{source}: unknown superoperator kind {kind}")
    return Superoperator(matrix, tau=tau, kind=kinds[kind])


class ResultBundle:
    """Writer for a run directory.

    Files are registered as they are written; finalize() hashes them into the manifest.
    """

    def __init__(self, root, command: str, resolved_config: Dict[str, Any]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest: Dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "tool": TOOL,
            "command": command,
            "created_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "config": resolved_config,
        }
        self._files: List[str] = []

    def write_csv(self, name: str, rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str],
                  schema: Optional[str] = None, subdir: str = "series") -> str:
        """Write a versioned CSV; returns its path relative to the bundle root"""
        schema = schema or name
        if schema not in CSV_SCHEMAS:
            raise BundleError(f"Unknown CSV schema '{schema}'")
        rel = f"{subdir}/{name}.csv"
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(f"# schema={schema} version={CSV_SCHEMAS[schema]}\n")
            writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _format(row.get(k)) for k in fieldnames})
        self._register(rel)
        return rel

    def write_map(self, S: Superoperator, k: int) -> str:
        prefix = "lambda" if S.kind is SuperoperatorKind.MAP else "generator"
        rel = f"maps/{prefix}_{k}.bin"
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_map(S))
        self._register(rel)
        return rel

    def _register(self, rel: str):
        if rel not in self._files:
            self._files.append(rel)

    def set(self, key: str, value: Any):
        self.manifest[key] = value

    def finalize(self) -> Path:
        self.manifest["files"] = {rel: compute_file_sha256(self.root / rel) for rel in sorted(self._files)}
        path = self.root / "manifest.json"
        path.write_text(json.dumps(self.manifest, indent=2, default=_json_default) + "\n")
        logger.info(f"Bundle written: {self.root} ({len(self._files)} files)")
        return path

    @staticmethod
    def load(root) -> "LoadedBundle":
        return LoadedBundle(root)


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class LoadedBundle:
    """Read side of a bundle; every file's schema version is checked on load"""

    def __init__(self, root):
        self.root = Path(root)
        path = self.root / "manifest.json"
        try:
            self.manifest = json.loads(path.read_text())
        except FileNotFoundError:
            raise BundleError(f"No manifest.json in {self.root}") from None
        except json.JSONDecodeError as e:
            raise BundleError(f"Unreadable manifest {path}: {e}") from None
        version = self.manifest.get("schema_version")
        if version != SCHEMA_VERSION:
            raise BundleError(f"Manifest schema version {version}, expected {SCHEMA_VERSION}")
        for rel in self.manifest.get("files", {}):
            if rel.endswith(".csv"):
                self._check_csv_header(rel)
            elif rel.endswith(".bin"):
                self._check_map_header(rel)

    @property
    def config(self) -> Dict[str, Any]:
        return self.manifest["config"]

    @property
    def taus(self) -> List[float]:
        return self.manifest.get("grid", {}).get("tau", [])

    def _check_csv_header(self, rel: str):
        with open(self.root / rel, "r") as f:
            first = f.readline().strip()
        try:
            fields = dict(part.split("=", 1) for part in first.lstrip("# ").split())
            schema, version = fields["schema"], int(fields["version"])
        except (ValueError, KeyError):
            raise BundleError(f"{rel}: missing schema line") from None
        if CSV_SCHEMAS.get(schema) != version:
            raise BundleError(f"{rel}: schema '{schema}' version {version} is not supported")

    def _check_map_header(self, rel: str):
        with open(self.root / rel, "rb") as f:
            head = f.read(MAP_HEADER.size)
        if len(head) < MAP_HEADER.size:
            raise BundleError(f"{rel}: truncated map header")
        magic, version = MAP_HEADER.unpack(head)[:2]
        if magic != MAP_MAGIC or version != MAP_VERSION:
            raise BundleError(f"{rel}: unsupported map file (version {version})")

    def verify(self) -> List[str]:
        """Relative paths whose sha256 no longer matches the manifest"""
        return [rel for rel, digest in self.manifest.get("files", {}).items()
                if compute_file_sha256(self.root / rel) != digest]

    def read_csv(self, rel: str) -> List[Dict[str, str]]:
        self._check_csv_header(rel)
        with open(self.root / rel, "r", newline="") as f:
            f.readline()
            return list(csv.DictReader(f))

    def read_map(self, rel: str) -> Superoperator:
        return decode_map((self.root / rel).read_bytes(), rel)

    def maps(self, kind: SuperoperatorKind = SuperoperatorKind.MAP) -> Dict[int, Superoperator]:
        """Grid index -> superoperator for every stored map (or generator)"""
        prefix = "maps/lambda_" if SuperoperatorKind(kind) is SuperoperatorKind.MAP else "maps/generator_"
        out = {}
        for rel in self.manifest.get("files", {}):
            if rel.startswith(prefix) and rel.endswith(".bin"):
                k = int(rel[len(prefix):-len(".bin")])
                out[k] = self.read_map(rel)
        return dict(sorted(out.items()))
