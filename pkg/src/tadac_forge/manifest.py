"""Line-delimited manifest formats.

A manifest is a short header (format version, global seed, phrase-table
checksum) followed by one JSON object per line, rows sorted by image id.
JSON keys are sorted and ASCII-escaped so serialization is byte-stable;
diffable golden files are the primary test instrument.  Unknown fields and
unknown format versions fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .annotations import AnnotationRecord, SourceKind
from .appearance import AppearanceProfile, Level
from .distortions import DistortionSpec, DistortionType
from .errors import IOFailure, ValidationError
from .imaging import CropWindow
from .pairing import CropRef, PairKind, PairRecord, Polarity, TextRef

MANIFEST_VERSION = 1

_RECORD_FIELDS = {
    "image_id",
    "source",
    "content_label",
    "distortion",
    "appearance",
    "texts",
    "seed",
    "path",
    "width",
    "height",
    "saliency",
}
_DISTORTION_FIELDS = {"kind", "level", "seed"}
_APPEARANCE_FIELDS = {
    "br_raw", "ct_raw", "sh_raw", "cl_raw",
    "br_norm", "ct_norm", "sh_norm", "cl_norm",
    "br_level", "ct_level", "sh_level", "cl_level",
}
_PAIR_FIELDS = {
    "kind",
    "polarity",
    "batch",
    "left_image",
    "left_window",
    "right_image",
    "right_window",
    "right_text_index",
    "overlap_fraction",
}


@dataclass(frozen=True)
class Manifest:
    """Ordered annotation records plus the header metadata that binds them
    to one reproducible run."""

    global_seed: int
    table_checksum: str
    records: tuple[AnnotationRecord, ...]
    version: int = MANIFEST_VERSION

    def __post_init__(self):
        ids = [r.image_id for r in self.records]
        if ids != sorted(ids):
            object.__setattr__(
                self,
                "records",
                tuple(sorted(self.records, key=lambda r: r.image_id)),
            )
        if len(set(ids)) != len(ids):
            raise ValidationError("manifest contains duplicate image ids")


def _window_to_json(window: Optional[CropWindow]):
    if window is None:
        return None
    return [window.origin_x, window.origin_y, window.side]


def _window_from_json(value) -> Optional[CropWindow]:
    if value is None:
        return None
    x, y, side = value
    return CropWindow(int(x), int(y), int(side))


def record_to_json(record: AnnotationRecord) -> str:
    payload = {
        "image_id": record.image_id,
        "source": record.source.value,
        "content_label": record.content_label,
        "texts": list(record.texts),
        "seed": record.seed,
        "path": record.path,
        "width": record.width,
        "height": record.height,
        "saliency": record.saliency,
        "distortion": None,
        "appearance": None,
    }
    if record.distortion is not None:
        payload["distortion"] = {
            "kind": record.distortion.kind.value,
            "level": record.distortion.level,
            "seed": record.distortion.seed,
        }
    if record.appearance is not None:
        p = record.appearance
        payload["appearance"] = {
            "br_raw": p.br_raw, "ct_raw": p.ct_raw,
            "sh_raw": p.sh_raw, "cl_raw": p.cl_raw,
            "br_norm": p.br_norm, "ct_norm": p.ct_norm,
            "sh_norm": p.sh_norm, "cl_norm": p.cl_norm,
            "br_level": p.br_level.value, "ct_level": p.ct_level.value,
            "sh_level": p.sh_level.value, "cl_level": p.cl_level.value,
        }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _reject_unknown(given: dict, allowed: set, what: str) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ValidationError(
            f"{what} has fields {sorted(unknown)} not part of manifest "
            f"format v{MANIFEST_VERSION}; a newer reader is required"
        )


def record_from_json(line: str) -> AnnotationRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed manifest row: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValidationError("manifest row must be a JSON object")
    _reject_unknown(payload, _RECORD_FIELDS, "manifest row")
    try:
        distortion = None
        if payload.get("distortion") is not None:
            d = payload["distortion"]
            _reject_unknown(d, _DISTORTION_FIELDS, "distortion block")
            distortion = DistortionSpec(
                kind=DistortionType(d["kind"]), level=int(d["level"]), seed=int(d["seed"])
            )
        appearance = None
        if payload.get("appearance") is not None:
            a = payload["appearance"]
            _reject_unknown(a, _APPEARANCE_FIELDS, "appearance block")
            appearance = AppearanceProfile(
                br_raw=float(a["br_raw"]), ct_raw=float(a["ct_raw"]),
                sh_raw=float(a["sh_raw"]), cl_raw=float(a["cl_raw"]),
                br_norm=float(a["br_norm"]), ct_norm=float(a["ct_norm"]),
                sh_norm=float(a["sh_norm"]), cl_norm=float(a["cl_norm"]),
                br_level=Level(a["br_level"]), ct_level=Level(a["ct_level"]),
                sh_level=Level(a["sh_level"]), cl_level=Level(a["cl_level"]),
            )
        return AnnotationRecord(
            image_id=payload["image_id"],
            source=SourceKind(payload["source"]),
            texts=tuple(payload["texts"]),
            seed=int(payload["seed"]),
            content_label=payload.get("content_label"),
            distortion=distortion,
            appearance=appearance,
            path=payload.get("path"),
            width=payload.get("width"),
            height=payload.get("height"),
            saliency=payload.get("saliency"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed manifest row: {exc}") from exc


def serialize_manifest(manifest: Manifest) -> str:
    lines = [
        f"#manifest-format {manifest.version}",
        f"#global-seed {manifest.global_seed}",
        f"#table-checksum {manifest.table_checksum}",
    ]
    lines.extend(record_to_json(r) for r in manifest.records)
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> Manifest:
    lines = text.splitlines()
    header = _parse_header(lines)
    records = tuple(
        record_from_json(line) for line in lines[3:] if line.strip()
    )
    return Manifest(
        global_seed=header["global-seed"],
        table_checksum=header["table-checksum"],
        records=records,
    )


def _parse_header(lines: list[str]) -> dict:
    if len(lines) < 3:
        raise ValidationError("manifest header truncated")
    header = {}
    for expected_key, line in zip(
        ("manifest-format", "global-seed", "table-checksum"), lines[:3]
    ):
        if not line.startswith("#"):
            raise ValidationError(f"missing manifest header line #{expected_key}")
        key, _, value = line[1:].partition(" ")
        if key != expected_key:
            raise ValidationError(
                f"expected header #{expected_key}, found #{key}"
            )
        header[key] = value
    try:
        version = int(header["manifest-format"])
        header["global-seed"] = int(header["global-seed"])
    except ValueError as exc:
        raise ValidationError(f"malformed manifest header: {exc}") from exc
    if version != MANIFEST_VERSION:
        raise ValidationError(
            f"manifest format v{version} is not readable by this v{MANIFEST_VERSION} reader"
        )
    return header


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    try:
        Path(path).write_text(serialize_manifest(manifest), encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write manifest {path}: {exc}") from exc


def read_manifest(path: str | Path) -> Manifest:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read manifest {path}: {exc}") from exc
    return parse_manifest(text)


# --- pair manifests -------------------------------------------------------


def pair_to_json(pair: PairRecord) -> str:
    payload = {
        "kind": pair.kind.value,
        "polarity": pair.polarity.value,
        "batch": pair.batch_index,
        "left_image": pair.left.image_id,
        "left_window": _window_to_json(pair.left.window),
        "overlap_fraction": pair.overlap_fraction,
        "right_window": None,
        "right_text_index": None,
    }
    if isinstance(pair.right, TextRef):
        payload["right_image"] = pair.right.image_id
        payload["right_text_index"] = pair.right.text_index
    else:
        payload["right_image"] = pair.right.image_id
        payload["right_window"] = _window_to_json(pair.right.window)
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def pair_from_json(line: str) -> PairRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed pair row: {exc}") from exc
    _reject_unknown(payload, _PAIR_FIELDS, "pair row")
    try:
        kind = PairKind(payload["kind"])
        if kind is PairKind.IMAGE_TEXT:
            right: TextRef | CropRef = TextRef(
                payload["right_image"], int(payload["right_text_index"])
            )
        else:
            right = CropRef(
                payload["right_image"], _window_from_json(payload["right_window"])
            )
        return PairRecord(
            kind=kind,
            polarity=Polarity(payload["polarity"]),
            batch_index=int(payload["batch"]),
            left=CropRef(
                payload["left_image"], _window_from_json(payload["left_window"])
            ),
            right=right,
            overlap_fraction=payload.get("overlap_fraction"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed pair row: {exc}") from exc


def serialize_pairs(pairs: Iterable[PairRecord], global_seed: int) -> str:
    lines = [
        f"#pairs-format {MANIFEST_VERSION}",
        f"#global-seed {global_seed}",
    ]
    lines.extend(pair_to_json(p) for p in pairs)
    return "\n".join(lines) + "\n"


def parse_pairs(text: str) -> list[PairRecord]:
    lines = text.splitlines()
    if len(lines) < 2 or not lines[0].startswith("#pairs-format"):
        raise ValidationError("pair manifest header truncated")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"malformed pair manifest header: {exc}") from exc
    if version != MANIFEST_VERSION:
        raise ValidationError(
            f"pair manifest v{version} is not readable by this v{MANIFEST_VERSION} reader"
        )
    return [pair_from_json(line) for line in lines[2:] if line.strip()]
