"""Corpus assembly: generation orchestration, splits, and packed storage.

Every sample is generated from its own child PRNG stream derived from the
master seed, so individual samples can be regenerated byte for byte and the
whole corpus is reproducible from one integer. Bad samples are corruptions
of independently rendered segments (they do not share text with the good
set).

Manifest: JSON lines, one entry per sample. Packed file: magic ``PGDS``,
u32 version, u32 count, `count` label bytes, then `count` raw 45x132 images.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import GrayImage, Rng, derive_child
from .errorsim import ErrorConfig, ErrorKind, UnviableSampleError, corrupt
from .pgm import read_pgm, write_pgm
from .preprocess import STANDARD_HEIGHT, STANDARD_WIDTH, resize_to_standard
from .textgen import GlyphAtlas, SegmentSpec, render_segment, sample_word

PACKED_MAGIC = b"PGDS"
PACKED_VERSION = 1

LABEL_GOOD = 0
LABEL_BAD = 1

SPLIT_FRACTIONS = {"train": 0.6, "test": 0.3, "validation": 0.1}

# Default composition (error counts follow the reported corpus make-up).
DEFAULT_COMPOSITION = {
    None: 10000,                          # good
    ErrorKind.BLOT: 5000,
    ErrorKind.LPE: 2000,
    ErrorKind.LSE: 2000,
    ErrorKind.LSE_VERTICAL_SOLID: 1000,
}

MAX_REGENERATION_ATTEMPTS = 10


class DatasetError(RuntimeError):
    pass


@dataclass
class ManifestEntry:
    id: int
    path: str
    label: int
    error_kind: ErrorKind | None
    seed: int
    split: str = ""

    def to_json(self) -> str:
        return json.dumps({
            "id": self.id,
            "path": self.path,
            "label": self.label,
            "error_kind": self.error_kind.value if self.error_kind else None,
            "seed": self.seed,
            "split": self.split,
        })

    @classmethod
    def from_json(cls, line: str) -> "ManifestEntry":
        d = json.loads(line)
        kind = ErrorKind(d["error_kind"]) if d["error_kind"] else None
        return cls(d["id"], d["path"], d["label"], kind, d["seed"], d["split"])


@dataclass
class GenerationConfig:
    composition: dict = field(default_factory=lambda: dict(DEFAULT_COMPOSITION))
    word_len_lo: int = 2
    word_len_hi: int = 8
    kerning: int = -2
    margin: int = 4
    glyph_scale: int = 6
    errors: ErrorConfig = field(default_factory=ErrorConfig)

    def total(self) -> int:
        return sum(self.composition.values())

    @classmethod
    def scaled(cls, count: int, **kwargs) -> "GenerationConfig":
        """Composition scaled proportionally to `count` samples in total.

        Rounding differences are absorbed by the good class so the total
        stays exact.
        """
        base = DEFAULT_COMPOSITION
        base_total = sum(base.values())
        comp = {k: int(round(count * v / base_total)) for k, v in base.items()}
        comp[None] += count - sum(comp.values())
        if comp[None] < 0:
            raise ValueError(f"count {count} too small for the composition")
        return cls(composition=comp, **kwargs)


def generate_sample(child_seed: int, stream: int, kind: ErrorKind | None,
                    gen: GenerationConfig, atlas: GlyphAtlas
                    ) -> tuple[GrayImage, dict | None]:
    """One standardized segment from its child stream; bad ones corrupted.

    Draw order per sample: word, then (for bad samples) corruption params.
    """
    rng = Rng(child_seed, stream)
    word = sample_word(rng, gen.word_len_lo, gen.word_len_hi)
    seg = render_segment(SegmentSpec(word, gen.kerning, gen.margin), atlas)
    img = resize_to_standard(seg)
    if kind is None:
        return img, None
    return corrupt(img, kind, rng, gen.errors)


def build_dataset(out_dir, master_seed: int,
                  gen: GenerationConfig | None = None,
                  log=None) -> list[ManifestEntry]:
    """Generate the corpus under out_dir and write manifest + params files.

    Samples that stay invisible after the corruption retry budget are
    regenerated from replacement child seeds; the build fails if more than
    0.1% of samples need one.
    """
    gen = gen or GenerationConfig()
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    atlas = GlyphAtlas(gen.glyph_scale)

    plan: list[ErrorKind | None] = []
    for kind, count in gen.composition.items():
        plan.extend([kind] * count)

    total = len(plan)
    entries: list[ManifestEntry] = []
    param_records: list[dict] = []
    unviable = 0
    for index, kind in enumerate(plan):
        attempt = 0
        while True:
            # replacement seeds reuse the index shifted beyond the corpus
            derivation = index if attempt == 0 else total + index + attempt * total
            child_seed, _ = derive_child(master_seed, derivation)
            stream = 2 * index + 1
            try:
                img, record = generate_sample(child_seed, stream, kind, gen, atlas)
                break
            except UnviableSampleError:
                unviable += 1
                attempt += 1
                if log:
                    log(f"sample {index}: unviable, retrying ({attempt})")
                if attempt >= MAX_REGENERATION_ATTEMPTS:
                    raise DatasetError(f"sample {index}: no viable corruption "
                                       f"after {attempt} reseedings")
        rel_path = f"images/{index:05d}.pgm"
        write_pgm(img, out_dir / rel_path)
        entries.append(ManifestEntry(
            id=index, path=rel_path,
            label=LABEL_GOOD if kind is None else LABEL_BAD,
            error_kind=kind, seed=child_seed))
        if record is not None:
            param_records.append({"id": index, **record})
        if log and (index + 1) % 2000 == 0:
            log(f"generated {index + 1}/{total}")

    if unviable > 0.001 * total:
        raise DatasetError(f"{unviable} unviable samples out of {total} "
                           f"exceeds the 0.1% budget")
    write_manifest(entries, out_dir / "manifest.jsonl")
    with open(out_dir / "params.jsonl", "w") as f:
        for rec in param_records:
            f.write(json.dumps(rec) + "\n")
    return entries


def write_manifest(entries: list[ManifestEntry], path) -> None:
    with open(path, "w") as f:
        for e in entries:
            f.write(e.to_json() + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                entries.append(ManifestEntry.from_json(line))
    return entries


def _split_counts(n: int) -> dict[str, int]:
    counts = {name: int(np.floor(frac * n + 0.5))
              for name, frac in SPLIT_FRACTIONS.items()}
    counts["train"] += n - sum(counts.values())  # remainder goes to train
    return counts


def split_dataset(entries: list[ManifestEntry], seed: int
                  ) -> list[ManifestEntry]:
    """Assign 60/30/10 train/test/validation splits, stratified.

    Strata are the good class and each error kind separately, so every
    split keeps both the 50/50 label balance and the error-kind mix.
    """
    rng = Rng(seed, stream=7)
    strata: dict[object, list[ManifestEntry]] = {}
    for e in entries:
        strata.setdefault(e.error_kind, []).append(e)
    for key in sorted(strata, key=lambda k: k.value if k else ""):
        group = strata[key]
        order = np.arange(len(group))
        rng.shuffle(order)
        counts = _split_counts(len(group))
        cut_train = counts["train"]
        cut_test = cut_train + counts["test"]
        for pos, idx in enumerate(order):
            if pos < cut_train:
                group[idx].split = "train"
            elif pos < cut_test:
                group[idx].split = "test"
            else:
                group[idx].split = "validation"
    return entries


@dataclass
class PackedDataset:
    images: np.ndarray   # (count, 45, 132) uint8, values {0, 255}
    labels: np.ndarray   # (count,) uint8
    ids: np.ndarray      # (count,) int64 manifest ids

    @property
    def count(self) -> int:
        return self.images.shape[0]

    def tensors(self) -> tuple[np.ndarray, np.ndarray]:
        """float32 (n, 45, 132, 1) inputs in {0, 1} plus int labels."""
        x = (self.images.astype(np.float32) / 255.0)[..., None]
        return x, self.labels.astype(np.int64)


def pack(entries: list[ManifestEntry], split: str, root) -> PackedDataset:
    """Load a split's images in manifest order, validating each file."""
    root = Path(root)
    selected = [e for e in entries if e.split == split]
    images = np.zeros((len(selected), STANDARD_HEIGHT, STANDARD_WIDTH),
                      dtype=np.uint8)
    labels = np.zeros(len(selected), dtype=np.uint8)
    ids = np.zeros(len(selected), dtype=np.int64)
    for i, e in enumerate(selected):
        img = read_pgm(root / e.path)
        if (img.height, img.width) != (STANDARD_HEIGHT, STANDARD_WIDTH):
            raise DatasetError(f"{e.path}: expected {STANDARD_HEIGHT}x"
                               f"{STANDARD_WIDTH}, got {img.height}x{img.width}")
        if not img.is_binary():
            raise DatasetError(f"{e.path}: non-binary pixel values present")
        images[i] = img.pixels
        labels[i] = e.label
        ids[i] = e.id
    return PackedDataset(images, labels, ids)


def save_packed(packed: PackedDataset, path) -> None:
    with open(path, "wb") as f:
        f.write(PACKED_MAGIC)
        f.write(struct.pack("<II", PACKED_VERSION, packed.count))
        f.write(packed.labels.tobytes())
        f.write(packed.images.tobytes())


def load_packed(path) -> PackedDataset:
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(PACKED_MAGIC):
        raise DatasetError(f"{path}: not a packed dataset")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != PACKED_VERSION:
        raise DatasetError(f"{path}: unsupported version {version}")
    offset = 12
    labels = np.frombuffer(blob, dtype=np.uint8, count=count, offset=offset)
    offset += count
    expected = count * STANDARD_HEIGHT * STANDARD_WIDTH
    if len(blob) - offset != expected:
        raise DatasetError(f"{path}: truncated image block")
    images = np.frombuffer(blob, dtype=np.uint8, count=expected, offset=offset)
    return PackedDataset(
        images.reshape(count, STANDARD_HEIGHT, STANDARD_WIDTH).copy(),
        labels.copy(),
        np.arange(count, dtype=np.int64))
