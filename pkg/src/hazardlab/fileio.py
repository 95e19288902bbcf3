"""On-disk formats: cohort JSON lines, oracle JSON, checkpoints and CSV.

Checkpoints are ``.npz`` archives.  Parameter arrays are stored under
``param/<name>`` as raw float64, so a save/load round trip is bit-exact;
a ``meta`` entry holds UTF-8 JSON with the format version, the model
configuration, the time grid and the 2-year classifier.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ._version import __version__
from .errors import InvalidInputError
from .model.network import ModelConfig, check_params
from .model.training import BinaryRelapseModel
from .survival_core import SubjectRecord, TimeGrid
from .synthcohort import OracleModel

CHECKPOINT_FORMAT = 1
_PARAM_PREFIX = "param/"


# ---------------------------------------------------------------------------
# Cohorts
# ---------------------------------------------------------------------------


def subject_to_json(s: SubjectRecord) -> str:
    d = {"id": s.id, "observed_time": float(s.observed_time), "censored": bool(s.censored)}
    if s.true_risk is not None:
        d["true_risk"] = float(s.true_risk)
    d["instances"] = [[float(np.float32(v)) for v in row] for row in s.bag]
    if s.instance_labels is not None:
        d["instance_labels"] = [bool(v) for v in s.instance_labels]
    if s.exclude_from_training:
        d["exclude_from_training"] = True
    return json.dumps(d, separators=(",", ":"))


def subject_from_json(line: str, where: str = "") -> SubjectRecord:
    try:
        d = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{where}malformed JSON: {exc}") from None
    try:
        bag = np.asarray(d["instances"], dtype=np.float64)
        labels = d.get("instance_labels")
        if labels is not None:
            labels = np.asarray(labels, dtype=bool)
        t = float(d["observed_time"])
        cens = d["censored"]
        if not isinstance(cens, bool):
            raise InvalidInputError(f"{where}'censored' must be a boolean")
        risk = d.get("true_risk")
        return SubjectRecord(str(d["id"]), t, cens, bag, labels, None if risk is None else float(risk),
                             bool(d.get("exclude_from_training", False)))
    except KeyError as exc:
        raise InvalidInputError(f"{where}missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"{where}{exc}") from None


def write_cohort(path, cohort: Iterable[SubjectRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in cohort:
            fh.write(subject_to_json(s))
            fh.write("\n")


def read_cohort(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                out.append(subject_from_json(line, f"{path}:{n}: "))
    if not out:
        raise InvalidInputError(f"{path}: no subjects")
    ids = [s.id for s in out]
    if len(set(ids)) != len(ids):
        raise InvalidInputError(f"{path}: duplicate subject ids")
    return out


def write_oracle(path, oracle: OracleModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(oracle.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_oracle(path) -> OracleModel:
    try:
        with open(path, encoding="utf-8") as fh:
            return OracleModel.from_dict(json.load(fh))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: not an oracle file ({exc})") from None


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    params: dict
    config: ModelConfig
    grid: TimeGrid
    binary_model: Optional[BinaryRelapseModel] = None
    extra: Optional[dict] = None


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    check_params(ckpt.params, ckpt.config)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "tool_version": __version__,
        "model": ckpt.config.to_dict(),
        "grid": [float(b) for b in ckpt.grid.boundaries],
        "extra": ckpt.extra or {},
    }
    arrays = {_PARAM_PREFIX + k: np.asarray(v, dtype=np.float64) for k, v in ckpt.params.items()}
    if ckpt.binary_model is not None:
        meta["binary_model"] = {"horizon": ckpt.binary_model.horizon, "iterations": ckpt.binary_model.iterations}
        arrays["binary/weights"] = np.asarray(ckpt.binary_model.weights, dtype=np.float64)
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> Checkpoint:
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(bytes(z["meta"]).decode("utf-8"))
            params = {k[len(_PARAM_PREFIX):]: z[k].copy() for k in z.files if k.startswith(_PARAM_PREFIX)}
            weights = z["binary/weights"].copy() if "binary/weights" in z.files else None
    except (OSError, ValueError, KeyError) as exc:
        raise InvalidInputError(f"{path}: unreadable checkpoint ({exc})") from None
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise InvalidInputError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
    cfg = ModelConfig(**meta["model"])
    check_params(params, cfg)
    binary = None
    if weights is not None:
        bm = meta.get("binary_model", {})
        binary = BinaryRelapseModel(weights, float(bm.get("horizon", 24.0)), int(bm.get("iterations", 0)))
    return Checkpoint(params, cfg, TimeGrid(np.asarray(meta["grid"])), binary, meta.get("extra") or None)


# ---------------------------------------------------------------------------
# CSV with provenance
# ---------------------------------------------------------------------------


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def provenance_line(seed, cfg_hash: str) -> str:
    return f"# hazardlab {__version__} seed={seed} config={cfg_hash}"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "NA" if math.isnan(v) else repr(v)
    return v


def csv_text(header: Sequence[str], rows: Iterable[Sequence], provenance: str) -> str:
    buf = io.StringIO()
    buf.write(provenance.rstrip("\n") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def with_provenance(csv_body: str, provenance: str) -> str:
    """Prefix already-rendered CSV text with the provenance comment."""
    return provenance.rstrip("\n") + "\n" + csv_body.replace("\r\n", "\n")


def write_csv(path, header, rows, provenance: str) -> None:
    Path(path).write_text(csv_text(header, rows, provenance), encoding="utf-8")


def read_csv(path) -> tuple:
    """Return ``(header, rows)`` with ``#`` comment lines skipped; cells stay strings."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise InvalidInputError(f"{path}: empty CSV")
    return rows[0], rows[1:]
