"""Annotation text generation from the bundled phrase tables.

Phrase tables are data, not code: they ship as a sectioned UTF-8 text file
whose cardinalities the loader enforces (10 templates per distortion kind,
20 pristine phrases, 20 phrases per appearance metric/level, nonempty
degree-word lists for every level and part of speech).  All drawing is
seeded and pure, so re-running a manifest reproduces byte-identical text.
"""

from __future__ import annotations

import enum
import hashlib
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional

from .appearance import AppearanceProfile, Level, MetricKind
from .distortions import DistortionSpec, DistortionType
from .errors import ValidationError
from .seeding import SplitMix64, derive_seed

TABLE_ENV_VAR = "TADAC_FORGE_TABLES"

DISTORTION_PHRASES_PER_KIND = 10
PRISTINE_PHRASE_COUNT = 20
APPEARANCE_PHRASES_PER_CELL = 20

# Order in which appearance metrics are described in a record's text list.
APPEARANCE_TEXT_ORDER = (
    MetricKind.BRIGHTNESS,
    MetricKind.CONTRAST,
    MetricKind.SHARPNESS,
    MetricKind.COLORFULNESS,
)


class PartOfSpeech(enum.Enum):
    ADJECTIVE = "adj"
    QUANTIFIER = "quant"
    ADVERB = "adv"


PLACEHOLDER_MARKERS: Mapping[str, PartOfSpeech] = MappingProxyType(
    {
        "(adj.)": PartOfSpeech.ADJECTIVE,
        "(quant.)": PartOfSpeech.QUANTIFIER,
        "(adv.)": PartOfSpeech.ADVERB,
    }
)

_PLACEHOLDER_RE = re.compile(r"\((?:adj|quant|adv)\.\)")
# Catches marker-like tokens that are not one of the three legal markers.
_MARKER_LIKE_RE = re.compile(r"\((?:adj|quant|adv)\b[^)]*\)")


class SourceKind(enum.Enum):
    PRISTINE = "pristine"
    SYNTHETIC = "synthetic"
    AUTHENTIC = "authentic"


@dataclass(frozen=True)
class PhraseTable:
    """Validated, immutable phrase tables plus the source file checksum."""

    distortion_phrases: Mapping[DistortionType, tuple[str, ...]]
    pristine_phrases: tuple[str, ...]
    appearance_phrases: Mapping[tuple[MetricKind, Level], tuple[str, ...]]
    degree_words: Mapping[tuple[int, PartOfSpeech], tuple[str, ...]]
    checksum: str


def default_table_path() -> Path:
    """Bundled table file, unless overridden via the environment.

    The override may name either the table file itself or a directory
    containing a phrases.txt.
    """
    override = os.environ.get(TABLE_ENV_VAR)
    if override:
        path = Path(override)
        return path / "phrases.txt" if path.is_dir() else path
    return Path(str(resources.files("tadac_forge").joinpath("data/phrases.txt")))


def load_phrase_table(path: str | Path | None = None) -> PhraseTable:
    """Parse and validate a phrase table file.

    Rejects wrong cardinalities, unknown section headers, and malformed
    placeholder markers, so a damaged table cannot silently skew outputs.
    """
    path = Path(path) if path is not None else default_table_path()
    raw = path.read_bytes()
    checksum = "blake2b:" + hashlib.blake2b(raw, digest_size=16).hexdigest()

    sections: dict[str, list[str]] = {}
    current: Optional[list[str]] = None
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if line.startswith("[") and line.rstrip().endswith("]"):
            name = line.strip()[1:-1].strip()
            if name in sections:
                raise ValidationError(f"duplicate section [{name}] at line {lineno}")
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise ValidationError(f"phrase outside any section at line {lineno}")
        current.append(line)

    distortion: dict[DistortionType, tuple[str, ...]] = {}
    pristine: tuple[str, ...] = ()
    appearance: dict[tuple[MetricKind, Level], tuple[str, ...]] = {}
    degrees: dict[tuple[int, PartOfSpeech], tuple[str, ...]] = {}

    for name, phrases in sections.items():
        fields = name.split()
        if fields[0] == "degree" and len(fields) == 3:
            level = int(fields[1])
            if level not in (1, 2, 3, 4, 5):
                raise ValidationError(f"bad degree level in section [{name}]")
            pos = _POS_BY_TAG.get(fields[2])
            if pos is None:
                raise ValidationError(f"bad part of speech in section [{name}]")
            degrees[(level, pos)] = tuple(phrases)
        elif fields[0] == "pristine" and len(fields) == 1:
            pristine = tuple(phrases)
        elif fields[0] == "distortion" and len(fields) == 2:
            try:
                kind = DistortionType(fields[1])
            except ValueError:
                raise ValidationError(f"unknown distortion kind in section [{name}]")
            distortion[kind] = tuple(phrases)
        elif fields[0] == "appearance" and len(fields) == 3:
            try:
                metric = MetricKind(fields[1])
                level_ = Level(fields[2])
            except ValueError:
                raise ValidationError(f"unknown metric/level in section [{name}]")
            appearance[(metric, level_)] = tuple(phrases)
        else:
            raise ValidationError(f"unknown section header [{name}]")

    _validate_cardinalities(distortion, pristine, appearance, degrees)
    return PhraseTable(
        distortion_phrases=MappingProxyType(distortion),
        pristine_phrases=pristine,
        appearance_phrases=MappingProxyType(appearance),
        degree_words=MappingProxyType(degrees),
        checksum=checksum,
    )


_POS_BY_TAG = {pos.value: pos for pos in PartOfSpeech}


def _validate_cardinalities(distortion, pristine, appearance, degrees) -> None:
    for kind in DistortionType:
        templates = distortion.get(kind)
        if templates is None:
            raise ValidationError(f"missing distortion section for {kind.value}")
        if len(templates) != DISTORTION_PHRASES_PER_KIND:
            raise ValidationError(
                f"{kind.value} needs exactly {DISTORTION_PHRASES_PER_KIND} "
                f"templates, got {len(templates)}"
            )
        for template in templates:
            for match in _MARKER_LIKE_RE.finditer(template):
                if match.group(0) not in PLACEHOLDER_MARKERS:
                    raise ValidationError(
                        f"malformed placeholder {match.group(0)!r} in "
                        f"{kind.value} template {template!r}"
                    )
    if len(pristine) != PRISTINE_PHRASE_COUNT:
        raise ValidationError(
            f"need exactly {PRISTINE_PHRASE_COUNT} pristine phrases, got {len(pristine)}"
        )
    for metric in MetricKind:
        for level in Level:
            phrases = appearance.get((metric, level))
            if phrases is None:
                raise ValidationError(
                    f"missing appearance section for {metric.value} {level.value}"
                )
            if len(phrases) != APPEARANCE_PHRASES_PER_CELL:
                raise ValidationError(
                    f"appearance {metric.value} {level.value} needs exactly "
                    f"{APPEARANCE_PHRASES_PER_CELL} phrases, got {len(phrases)}"
                )
    for level in (1, 2, 3, 4, 5):
        for pos in PartOfSpeech:
            words = degrees.get((level, pos))
            if not words:
                raise ValidationError(
                    f"missing degree words for level {level} {pos.value}"
                )


_VOWELS = "aeiou"


def content_text(label: str) -> str:
    """Render the content template, picking a/an by leading vowel."""
    if not label or not label.strip():
        raise ValidationError("content label must be nonempty")
    label = label.strip()
    article = "an" if label[0].lower() in _VOWELS else "a"
    return f"A photo of {article} {label}"


def distortion_text(table: PhraseTable, spec: DistortionSpec, seed: int) -> str:
    """One template for the spec's kind, degree words for its level."""
    rng = SplitMix64(seed)
    template = rng.choice(table.distortion_phrases[spec.kind])
    return _fill_template(table, template, spec.level, rng)


def _fill_template(table: PhraseTable, template: str, level: int, rng: SplitMix64) -> str:
    def substitute(match: re.Match) -> str:
        pos = PLACEHOLDER_MARKERS[match.group(0)]
        return rng.choice(table.degree_words[(level, pos)])

    return _PLACEHOLDER_RE.sub(substitute, template)


def pristine_text(table: PhraseTable, seed: int) -> str:
    """Uniform draw from the pristine phrase list."""
    return SplitMix64(seed).choice(table.pristine_phrases)


def appearance_texts(
    table: PhraseTable, profile: AppearanceProfile, seed: int
) -> list[str]:
    """One phrase per metric, in brightness/contrast/sharpness/colorfulness
    order, drawn from the bin matching the profile's level."""
    rng = SplitMix64(seed)
    return [
        rng.choice(table.appearance_phrases[(metric, profile.level(metric))])
        for metric in APPEARANCE_TEXT_ORDER
    ]


@dataclass(frozen=True)
class AnnotationRecord:
    """One image's identity, provenance, quality facts, and texts.

    `saliency` optionally names a grayscale PNG/PPM saliency map for the
    image; pair building uses it for saliency-max cropping when present.
    """

    image_id: str
    source: SourceKind
    texts: tuple[str, ...]
    seed: int
    content_label: Optional[str] = None
    distortion: Optional[DistortionSpec] = None
    appearance: Optional[AppearanceProfile] = None
    path: Optional[str] = None
    width: Optional[int] = None
    height: Optional[int] = None
    saliency: Optional[str] = None


def record_seed(global_seed: int, image_id: str) -> int:
    """Per-record seed: global seed mixed with the image id."""
    return derive_seed(global_seed, image_id, "record")


def annotate(
    *,
    image_id: str,
    source: SourceKind,
    content_label: str,
    global_seed: int,
    distortion: Optional[DistortionSpec] = None,
    appearance: Optional[AppearanceProfile] = None,
    table: Optional[PhraseTable] = None,
    path: Optional[str] = None,
    width: Optional[int] = None,
    height: Optional[int] = None,
) -> AnnotationRecord:
    """Build the full annotation record for one image.

    Synthetic records need a DistortionSpec and get a distortion text;
    authentic records need an AppearanceProfile and get four appearance
    texts; pristine records get a pristine text.  The content text always
    comes first.  Deterministic in (inputs, global_seed): the record seed
    is derived by hashing, and each text category draws from its own
    sub-seed.
    """
    if table is None:
        table = load_phrase_table()
    if not image_id:
        raise ValidationError("image_id must be nonempty")
    if source is SourceKind.SYNTHETIC and distortion is None:
        raise ValidationError(f"synthetic record {image_id} needs a distortion spec")
    if source is SourceKind.AUTHENTIC and appearance is None:
        raise ValidationError(f"authentic record {image_id} needs an appearance profile")
    if source is SourceKind.PRISTINE and (
        distortion is not None or appearance is not None
    ):
        raise ValidationError(f"pristine record {image_id} cannot carry quality facts")
    if source is SourceKind.SYNTHETIC and appearance is not None:
        raise ValidationError(f"synthetic record {image_id} cannot carry appearance")
    if source is SourceKind.AUTHENTIC and distortion is not None:
        raise ValidationError(f"authentic record {image_id} cannot carry a distortion")

    seed = record_seed(global_seed, image_id)
    texts = [content_text(content_label)]
    if source is SourceKind.SYNTHETIC:
        texts.append(distortion_text(table, distortion, derive_seed(seed, "distortion")))
    elif source is SourceKind.PRISTINE:
        texts.append(pristine_text(table, derive_seed(seed, "pristine")))
    else:
        texts.extend(appearance_texts(table, appearance, derive_seed(seed, "appearance")))
    return AnnotationRecord(
        image_id=image_id,
        source=source,
        texts=tuple(texts),
        seed=seed,
        content_label=content_label,
        distortion=distortion,
        appearance=appearance,
        path=path,
        width=width,
        height=height,
    )


def parse_generated_text(
    table: PhraseTable, kind: DistortionType, level: int, text: str
) -> tuple[str, list[str]]:
    """Reverse-parse a generated distortion text into (template, words).

    Raises ValidationError when the text cannot be produced from any
    bundled template with level-appropriate degree words; used by the
    closure tests and by downstream consistency audits.
    """
    for template in table.distortion_phrases[kind]:
        pattern_parts: list[str] = []
        pos_order: list[PartOfSpeech] = []
        cursor = 0
        for match in _PLACEHOLDER_RE.finditer(template):
            pattern_parts.append(re.escape(template[cursor : match.start()]))
            pattern_parts.append("(.+?)")
            pos_order.append(PLACEHOLDER_MARKERS[match.group(0)])
            cursor = match.end()
        pattern_parts.append(re.escape(template[cursor:]))
        m = re.fullmatch("".join(pattern_parts), text)
        if m is None:
            continue
        words = list(m.groups())
        if all(
            word in table.degree_words[(level, pos)]
            for word, pos in zip(words, pos_order)
        ):
            return template, words
    raise ValidationError(
        f"text {text!r} does not decompose into a {kind.value} template "
        f"with level-{level} degree words"
    )
