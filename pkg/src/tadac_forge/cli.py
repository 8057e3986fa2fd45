"""Command-line surface: distort | appearance | pairs | loss-check | regress | eval.

Runs are reproducible end to end: every record's randomness is derived from
(global seed, image id), output rows are sorted by image id, and worker
count cannot change a single output byte.  Exit codes: 0 success, 2 config
error, 3 I/O failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import functools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import annotations as ann
from .appearance import profile as appearance_profile
from .distortions import LEVELS, DistortionSpec, DistortionType, apply_distortion
from .errors import ConfigError, IOFailure, ToolkitError, ValidationError
from .imaging import load_image, save_image
from .losses import (
    consecutive_batches,
    finite_difference_grad_query,
    image_image_batch_loss,
    image_text_batch_loss,
    info_nce_grad_query,
    joint_loss,
)
from .manifest import Manifest, read_manifest, serialize_pairs, write_manifest
from .pairing import (
    PairingConfig,
    SaliencyMap,
    build_pair_manifest,
    saliency_crop,
    saliency_proxy,
)
from .regression import SplitProtocol, evaluate, ridge_fit
from .seeding import derive_seed

log = logging.getLogger("tadac_forge")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4

_IMAGE_SUFFIXES = (".png", ".ppm", ".pnm")


@dataclass(frozen=True)
class PipelineConfig:
    """Defaults shared by the pipeline commands; flags override the config
    file, the config file overrides these built-ins."""

    seed: int = 0
    workers: int = 1
    crop_side: int = 224
    temperature: float = 0.1
    alpha: float = 0.7
    batch_size: int = 8
    default_label: Optional[str] = None
    tables: Optional[str] = None
    kinds: Optional[str] = None
    levels: Optional[str] = None

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.crop_side < 1:
            raise ConfigError(f"crop side must be >= 1, got {self.crop_side}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")


_CONFIG_PARSERS = {
    "seed": int,
    "workers": int,
    "crop_side": int,
    "batch_size": int,
    "temperature": float,
    "alpha": float,
    "default_label": str,
    "tables": str,
    "kinds": str,
    "levels": str,
}


def load_config_file(path: str | Path) -> dict:
    """Parse the simple `key = value` config format."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read config file {path}: {exc}") from exc
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key in _CONFIG_PARSERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_kind_selection(config: PipelineConfig) -> list[DistortionType]:
    if not config.kinds:
        return list(DistortionType)
    kinds = []
    for name in config.kinds.split(","):
        name = name.strip()
        try:
            kinds.append(DistortionType(name))
        except ValueError:
            raise ConfigError(
                f"unknown distortion kind {name!r}; valid kinds: "
                + ", ".join(k.value for k in DistortionType)
            )
    return kinds


def _parse_level_selection(config: PipelineConfig) -> list[int]:
    if not config.levels:
        return list(LEVELS)
    try:
        levels = [int(v) for v in config.levels.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad level list {config.levels!r}: {exc}") from exc
    for level in levels:
        if level not in LEVELS:
            raise ConfigError(f"severity level must be 1..5, got {level}")
    return levels


def _discover_images(input_dir: Path) -> list[Path]:
    if not input_dir.is_dir():
        raise IOFailure(f"input directory {input_dir} does not exist")
    images = sorted(
        p for p in input_dir.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES
    )
    if not images:
        raise ValidationError(f"no images (png/ppm) found in {input_dir}")
    return images


def _read_labels(input_dir: Path) -> dict[str, str]:
    """Optional labels.txt sidecar: `<filename><TAB or space><label>`."""
    labels_path = input_dir / "labels.txt"
    if not labels_path.is_file():
        return {}
    labels = {}
    for lineno, line in enumerate(
        labels_path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip() or line.startswith("#"):
            continue
        if "\t" in line:
            name, _, label = line.partition("\t")
        else:
            name, _, label = line.partition(" ")
        if not name.strip() or not label.strip():
            raise ValidationError(f"{labels_path}:{lineno}: expected `file<TAB>label`")
        labels[name.strip()] = label.strip()
    return labels


@functools.lru_cache(maxsize=4)
def _cached_table(path: Optional[str]) -> ann.PhraseTable:
    return ann.load_phrase_table(path)


def _labelled_inputs(
    input_dir: Path, default_label: Optional[str]
) -> list[tuple[Path, str, str]]:
    """(path, image_id, label) per usable input; unlabeled inputs are
    skipped with a warning unless a default label is configured."""
    labels = _read_labels(input_dir)
    out = []
    for path in _discover_images(input_dir):
        label = labels.get(path.name, default_label)
        if label is None:
            log.warning("skipping %s: no label and no default_label configured", path.name)
            continue
        out.append((path, path.stem, label))
    if not out:
        raise ValidationError(f"all images in {input_dir} were skipped for missing labels")
    return out


def _distort_one_source(task) -> list[ann.AnnotationRecord]:
    (path_str, image_id, label, kind_names, levels, seed, out_dir_str, tables) = task
    table = _cached_table(tables)
    out_images = Path(out_dir_str)
    source = load_image(path_str)
    if min(source.width, source.height) < 8:
        # fail before writing anything so images/ stays consistent with
        # the manifest when this source is skipped
        raise ValidationError(
            f"{image_id} is {source.width}x{source.height}; "
            "the distortion grid needs at least 8x8"
        )
    records = []
    pristine_name = f"images/{image_id}.png"
    save_image(source, out_images / f"{image_id}.png")
    records.append(
        ann.annotate(
            image_id=image_id,
            source=ann.SourceKind.PRISTINE,
            content_label=label,
            global_seed=seed,
            table=table,
            path=pristine_name,
            width=source.width,
            height=source.height,
        )
    )
    for kind_name in kind_names:
        kind = DistortionType(kind_name)
        for level in levels:
            distorted_id = f"{image_id}__{kind.value}__l{level}"
            spec = DistortionSpec(
                kind=kind, level=level, seed=derive_seed(seed, distorted_id)
            )
            distorted = apply_distortion(source, spec)
            save_image(distorted, out_images / f"{distorted_id}.png")
            records.append(
                ann.annotate(
                    image_id=distorted_id,
                    source=ann.SourceKind.SYNTHETIC,
                    content_label=label,
                    global_seed=seed,
                    distortion=spec,
                    table=table,
                    path=f"images/{distorted_id}.png",
                    width=distorted.width,
                    height=distorted.height,
                )
            )
    return records


def _appearance_one_source(task) -> list[ann.AnnotationRecord]:
    (path_str, image_id, label, seed, tables) = task
    table = _cached_table(tables)
    image = load_image(path_str)
    return [
        ann.annotate(
            image_id=image_id,
            source=ann.SourceKind.AUTHENTIC,
            content_label=label,
            global_seed=seed,
            appearance=appearance_profile(image),
            table=table,
            path=Path(path_str).name,
            width=image.width,
            height=image.height,
        )
    ]


def _run_per_image(worker, tasks, workers: int) -> list[ann.AnnotationRecord]:
    """Map worker over tasks, tolerating per-image failures."""
    records: list[ann.AnnotationRecord] = []
    failures = 0
    if workers <= 1:
        outcomes = []
        for task in tasks:
            try:
                outcomes.append(worker(task))
            except ToolkitError as exc:
                outcomes.append(exc)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(worker, task) for task in tasks]
            outcomes = []
            for future in futures:
                try:
                    outcomes.append(future.result())
                except ToolkitError as exc:
                    outcomes.append(exc)
    for task, outcome in zip(tasks, outcomes):
        if isinstance(outcome, ToolkitError):
            failures += 1
            log.warning("skipping %s: %s", task[0], outcome)
        else:
            records.extend(outcome)
    if failures and not records:
        raise ValidationError("all input images failed processing")
    return records


def cmd_distort(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    kinds = _parse_kind_selection(config)
    levels = _parse_level_selection(config)
    input_dir = Path(args.input)
    out_dir = Path(args.out)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    table = _cached_table(config.tables)

    tasks = [
        (str(path), image_id, label, [k.value for k in kinds], levels,
         config.seed, str(images_dir), config.tables)
        for path, image_id, label in _labelled_inputs(input_dir, config.default_label)
    ]
    records = _run_per_image(_distort_one_source, tasks, config.workers)
    manifest = Manifest(
        global_seed=config.seed,
        table_checksum=table.checksum,
        records=tuple(sorted(records, key=lambda r: r.image_id)),
    )
    out_path = out_dir / "distort.manifest"
    write_manifest(manifest, out_path)
    log.info("wrote %d records to %s", len(manifest.records), out_path)
    return EXIT_OK


def cmd_appearance(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    input_dir = Path(args.input)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = _cached_table(config.tables)

    tasks = [
        (str(path), image_id, label, config.seed, config.tables)
        for path, image_id, label in _labelled_inputs(input_dir, config.default_label)
    ]
    records = _run_per_image(_appearance_one_source, tasks, config.workers)
    manifest = Manifest(
        global_seed=config.seed,
        table_checksum=table.checksum,
        records=tuple(sorted(records, key=lambda r: r.image_id)),
    )
    out_path = out_dir / "appearance.manifest"
    write_manifest(manifest, out_path)
    log.info("wrote %d records to %s", len(manifest.records), out_path)
    return EXIT_OK


def _text_side_windows(manifest, images_root: Path, side: int) -> dict:
    """Saliency-max crop per record whose image file is reachable.

    An externally supplied map (grayscale PNG/PPM named by the record's
    `saliency` field) wins over the built-in local-contrast proxy.
    """
    windows = {}
    for record in manifest.records:
        if record.path is None:
            continue
        image_path = images_root / record.path
        if not image_path.is_file():
            log.warning("no image file for %s; image-text crop omitted", record.image_id)
            continue
        image = load_image(image_path)
        if side > min(image.width, image.height):
            log.warning(
                "crop side %d exceeds %s (%dx%d); image-text crop omitted",
                side, record.image_id, image.width, image.height,
            )
            continue
        if record.saliency is not None:
            sal_img = load_image(images_root / record.saliency)
            if (sal_img.width, sal_img.height) != (image.width, image.height):
                raise ValidationError(
                    f"saliency map for {record.image_id} is "
                    f"{sal_img.width}x{sal_img.height}, image is "
                    f"{image.width}x{image.height}"
                )
            sal = SaliencyMap(sal_img.pixels @ np.array([0.299, 0.587, 0.114]))
        else:
            sal = saliency_proxy(image)
        windows[record.image_id] = saliency_crop(image, sal, side)
    return windows


def cmd_pairs(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    manifest = read_manifest(args.manifest)
    images_root = Path(args.images_root) if args.images_root else Path(args.manifest).parent
    pairs = build_pair_manifest(
        manifest.records,
        PairingConfig(
            batch_size=config.batch_size,
            crop_side=config.crop_side,
            seed=config.seed,
        ),
        text_side_windows=_text_side_windows(manifest, images_root, config.crop_side),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "pairs.manifest"
    try:
        out_path.write_text(serialize_pairs(pairs, config.seed), encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write pair manifest {out_path}: {exc}") from exc
    log.info("wrote %d pair rows to %s", len(pairs), out_path)
    return EXIT_OK


def _load_matrix(path: str, name: str) -> np.ndarray:
    """Whitespace-delimited text matrix, or binary .npy."""
    try:
        if str(path).endswith(".npy"):
            matrix = np.load(path)
        else:
            matrix = np.loadtxt(path, ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise IOFailure(f"cannot read {name} file {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"malformed {name} matrix in {path}: {exc}") from exc
    if matrix.ndim != 2:
        raise ValidationError(f"{name} matrix in {path} must be 2-D")
    return np.asarray(matrix, dtype=np.float64)


def cmd_loss_check(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    print(f"temperature: {config.temperature}")
    print(f"alpha: {config.alpha}")

    text_loss = image_loss = None
    if args.image_emb and args.text_emb:
        img = _load_matrix(args.image_emb, "image embedding")
        txt = _load_matrix(args.text_emb, "text embedding")
        batches = consecutive_batches(img.shape[0], config.batch_size)
        text_loss = image_text_batch_loss(img, txt, batches, config.temperature)
        print(f"image-text loss over {len(batches)} batches: {text_loss:.12g}")
        grad_report = _gradient_check_report(img, txt, batches, config.temperature)
        print(grad_report)
    if args.crop_emb_a and args.crop_emb_b:
        a = _load_matrix(args.crop_emb_a, "crop embedding")
        b = _load_matrix(args.crop_emb_b, "crop embedding")
        batches = consecutive_batches(a.shape[0], config.batch_size)
        image_loss = image_image_batch_loss(a, b, batches, config.temperature)
        print(f"image-image loss over {len(batches)} batches: {image_loss:.12g}")
    if text_loss is not None and image_loss is not None:
        print(f"joint loss: {joint_loss(text_loss, image_loss, config.alpha):.12g}")
    if text_loss is None and image_loss is None:
        raise ConfigError(
            "loss-check needs --image-emb/--text-emb and/or --crop-emb-a/--crop-emb-b"
        )
    return EXIT_OK


def _gradient_check_report(img, txt, batches, temperature) -> str:
    worst = 0.0
    for batch in batches:
        rows = list(batch.rows)
        q = img[rows[batch.positive]]
        analytic = info_nce_grad_query(q, txt[rows], batch.positive, temperature)
        numeric = finite_difference_grad_query(
            q, txt[rows], batch.positive, temperature
        )
        scale = max(float(np.linalg.norm(numeric)), 1e-12)
        worst = max(worst, float(np.linalg.norm(analytic - numeric)) / scale)
    status = "PASS" if worst < 1e-5 else "FAIL"
    return f"gradient check: max relative error {worst:.3e} ({status})"


def _load_feature_file(path: str) -> tuple[np.ndarray, np.ndarray]:
    matrix = _load_matrix(path, "feature")
    if matrix.shape[1] < 2:
        raise ValidationError(
            "feature file needs at least one feature column plus a final score column"
        )
    return matrix[:, :-1], matrix[:, -1]


def cmd_regress(args: argparse.Namespace) -> int:
    X, y = _load_feature_file(args.features)
    model = ridge_fit(X, y, args.lam)
    residual = model.predict(X) - y
    print(f"samples: {X.shape[0]}  features: {X.shape[1]}  lambda: {args.lam}")
    print(f"intercept: {model.intercept:.12g}")
    print(f"weight-norm: {float(np.linalg.norm(model.weights)):.12g}")
    print(f"train-mae: {float(np.abs(residual).mean()):.12g}")
    print(f"train-rmse: {float(np.sqrt((residual**2).mean())):.12g}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    X, y = _load_feature_file(args.features)
    protocol = SplitProtocol(repeats=args.repeats, seed=config.seed)
    report = evaluate(X, y, protocol)
    print(f"samples: {X.shape[0]}  features: {X.shape[1]}  repeats: {protocol.repeats}")
    for result in report.per_repeat:
        print(
            f"repeat {result.repeat}: lambda={result.lam:g} "
            f"srocc={result.srocc:.6f} plcc={result.plcc:.6f}"
        )
    print(f"mean srocc: {report.mean_srocc:.6f}")
    print(f"mean plcc: {report.mean_plcc:.6f}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="global seed (default 0)")
    parser.add_argument("--tables", help="phrase table file (overrides bundled)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tadac-forge",
        description="Quality-annotated image dataset construction and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distort", help="apply the distortion grid and annotate")
    _add_common(p)
    p.add_argument("--input", required=True, help="directory of pristine png/ppm images")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, help="parallel image workers")
    p.add_argument("--kinds", help="comma list of distortion kinds (default all 19)")
    p.add_argument("--levels", help="comma list of severity levels (default 1-5)")
    p.add_argument("--default-label", dest="default_label", help="label for unlabeled images")
    p.set_defaults(func=cmd_distort)

    p = sub.add_parser("appearance", help="measure appearance and annotate")
    _add_common(p)
    p.add_argument("--input", required=True, help="directory of images")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, help="parallel image workers")
    p.add_argument("--default-label", dest="default_label", help="label for unlabeled images")
    p.set_defaults(func=cmd_appearance)

    p = sub.add_parser("pairs", help="build the contrastive pair manifest")
    _add_common(p)
    p.add_argument("--manifest", required=True, help="annotation manifest to pair")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="pairs per batch")
    p.add_argument("--crop-side", dest="crop_side", type=int, help="crop side in pixels")
    p.add_argument(
        "--images-root", dest="images_root",
        help="directory record paths are relative to (default: the manifest's)",
    )
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("loss-check", help="compute batch losses and gradient checks")
    _add_common(p)
    p.add_argument("--image-emb", dest="image_emb", help="image embedding matrix file")
    p.add_argument("--text-emb", dest="text_emb", help="text embedding matrix file")
    p.add_argument("--crop-emb-a", dest="crop_emb_a", help="first crop embedding file")
    p.add_argument("--crop-emb-b", dest="crop_emb_b", help="second crop embedding file")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="pairs per batch")
    p.add_argument("--temperature", type=float, help="softmax temperature")
    p.add_argument("--alpha", type=float, help="branch blend weight")
    p.set_defaults(func=cmd_loss_check)

    p = sub.add_parser("regress", help="fit ridge regression on a feature file")
    p.add_argument("--features", required=True, help="matrix file, score in last column")
    p.add_argument("--lam", type=float, default=1.0, help="ridge penalty (default 1.0)")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("eval", help="run the split/fit/test correlation protocol")
    _add_common(p)
    p.add_argument("--features", required=True, help="matrix file, score in last column")
    p.add_argument("--repeats", type=int, default=10, help="random split repeats")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except IOFailure as exc:
        log.error("i/o error: %s", exc)
        return EXIT_IO
    except ValidationError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
