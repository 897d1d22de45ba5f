"""Recipe corpus ingestion: records, tokenization, vocabularies, splits,
and the on-disk formats (JSON-lines corpus, binary feature segments)."""

import json
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3

# Alphanumeric runs stay whole (digit runs intact); any other non-space
# character becomes a standalone token.
_TOKEN_RE = re.compile(r"[^\W_]+|\S", re.UNICODE)

_FSEG_MAGIC = b"FSEG"
_FSEG_VERSION = 1


def tokenize(sentence):
    """Lowercase and split a sentence into word and punctuation tokens.

    Deterministic; empty input gives an empty list. Punctuation marks
    become standalone tokens, digit runs are kept intact.
    """
    return _TOKEN_RE.findall(sentence.lower())


@dataclass
class FeatureSegment:
    """Precomputed per-frame feature vectors for one aligned video segment."""

    frames: np.ndarray  # (n_frames, dim)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[0] == 0:
            raise ValueError(f"feature segment needs a non-empty (frames, dim) array, got {self.frames.shape}")

    @property
    def dim(self):
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]


@dataclass
class RecipeRecord:
    """One procedure: ingredient names, ordered step sentences, and
    optionally one feature segment per step."""

    id: str
    title: str
    ingredients: list
    steps: list
    segments: list = None
    segment_files: list = None
    category: str = None

    def __post_init__(self):
        if not self.steps:
            raise ValueError(f"recipe {self.id!r}: steps must be non-empty")
        for i, step in enumerate(self.steps):
            if not isinstance(step, str) or not step.strip():
                raise ValueError(f"recipe {self.id!r}: step {i} is empty")
        if self.segments is not None and len(self.segments) != len(self.steps):
            raise ValueError(
                f"recipe {self.id!r}: {len(self.segments)} segments for {len(self.steps)} steps"
            )
        if self.segment_files is not None and len(self.segment_files) != len(self.steps):
            raise ValueError(
                f"recipe {self.id!r}: {len(self.segment_files)} segment files for {len(self.steps)} steps"
            )


def canonical_ingredient(name):
    """Lowercased, whitespace-normalized ingredient string."""
    return " ".join(name.lower().split())


@dataclass
class Vocabulary:
    """Token <-> index map with frequency provenance.

    Indices 0..3 are the reserved PAD/BOS/EOS/UNK tokens; the rest are
    corpus tokens in descending frequency order, ties broken
    lexicographically. Unseen tokens map to UNK at lookup time.
    """

    tokens: list
    index: dict
    counts: dict

    def __len__(self):
        return len(self.tokens)

    def lookup(self, token):
        return self.index.get(token, UNK_ID)

    def encode(self, tokens):
        return [self.lookup(t) for t in tokens]

    def decode(self, ids):
        return [self.tokens[i] for i in ids]

    def to_json(self):
        return {"tokens": self.tokens, "counts": self.counts}

    @classmethod
    def from_json(cls, obj):
        tokens = list(obj["tokens"])
        if tokens[:4] != list(SPECIALS):
            raise ValueError("vocabulary file does not start with the reserved specials")
        return cls(tokens=tokens, index={t: i for i, t in enumerate(tokens)},
                   counts=dict(obj.get("counts", {})))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def build_vocab(corpus, max_size):
    """Frequency-ranked vocabulary over all step sentences.

    Keeps the reserved specials plus the ``max_size - 4`` most frequent
    tokens; ties break lexicographically for deterministic builds.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if max_size < 4:
        raise ValueError(f"max_size must be at least 4, got {max_size}")
    counts = Counter()
    for record in corpus:
        for step in record.steps:
            counts.update(tokenize(step))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, _ in ranked[: max(0, max_size - 4)]]
    tokens = list(SPECIALS) + kept
    return Vocabulary(
        tokens=tokens,
        index={t: i for i, t in enumerate(tokens)},
        counts={t: counts[t] for t in kept},
    )


@dataclass
class IngredientVocabulary:
    """Canonical ingredient name <-> index map, frequency ordered."""

    names: list
    index: dict

    def __len__(self):
        return len(self.names)

    def to_json(self):
        return {"names": self.names}

    @classmethod
    def from_json(cls, obj):
        names = list(obj["names"])
        return cls(names=names, index={n: i for i, n in enumerate(names)})

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def build_ingredient_vocab(corpus):
    """All canonical ingredient names, ordered by descending frequency
    then lexicographically."""
    if not corpus:
        raise ValueError("empty corpus")
    counts = Counter()
    for record in corpus:
        for name in record.ingredients:
            counts[canonical_ingredient(name)] += 1
    names = [n for n, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
    return IngredientVocabulary(names=names, index={n: i for i, n in enumerate(names)})


def encode_ingredients(record, iv, stats=None):
    """Multi-hot vector over the ingredient vocabulary.

    Repeated ingredients set their index once; unknown ingredients are
    skipped (optionally counted into ``stats['unknown_ingredients']``),
    tolerating incomplete or noisy ingredient lists.
    """
    if len(iv) == 0:
        raise ValueError("ingredient vocabulary is empty")
    vec = np.zeros(len(iv), dtype=np.float64)
    for name in record.ingredients:
        idx = iv.index.get(canonical_ingredient(name))
        if idx is None:
            if stats is not None:
                stats["unknown_ingredients"] = stats.get("unknown_ingredients", 0) + 1
        else:
            vec[idx] = 1.0
    return vec


@dataclass
class SplitManifest:
    """Disjoint train/validation/test recipe id lists."""

    train: list
    validation: list
    test: list
    ratio: str = ""

    def validate(self, corpus_ids=None):
        sets = [set(self.train), set(self.validation), set(self.test)]
        names = ["train", "validation", "test"]
        for i in range(3):
            for j in range(i + 1, 3):
                overlap = sets[i] & sets[j]
                if overlap:
                    raise ValueError(f"splits {names[i]}/{names[j]} overlap: {sorted(overlap)[:3]}")
        if corpus_ids is not None:
            missing = set(corpus_ids) - (sets[0] | sets[1] | sets[2])
            if missing:
                raise ValueError(f"split manifest does not cover ids: {sorted(missing)[:3]}")

    def save(self, path):
        Path(path).write_text(json.dumps(
            {"train": self.train, "validation": self.validation, "test": self.test}) + "\n")

    @classmethod
    def load(cls, path):
        obj = json.loads(Path(path).read_text())
        manifest = cls(train=list(obj["train"]), validation=list(obj["validation"]),
                       test=list(obj["test"]))
        manifest.validate()
        return manifest


def make_splits(corpus, ratio=(8, 1, 1), seed=0):
    """Shuffle recipe ids with a seeded RNG and split at the given ratio."""
    ids = [r.id for r in corpus]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    ids = [ids[i] for i in order]
    total = sum(ratio)
    n_train = len(ids) * ratio[0] // total
    n_val = len(ids) * ratio[1] // total
    manifest = SplitManifest(
        train=ids[:n_train],
        validation=ids[n_train:n_train + n_val],
        test=ids[n_train + n_val:],
        ratio=":".join(str(r) for r in ratio),
    )
    manifest.validate(corpus_ids=[r.id for r in corpus])
    return manifest


def _record_from_json(obj, where):
    try:
        return RecipeRecord(
            id=str(obj["id"]),
            title=str(obj.get("title", "")),
            ingredients=[str(x) for x in obj.get("ingredients", [])],
            steps=[str(x) for x in obj["steps"]],
            segment_files=list(obj["segment_files"]) if "segment_files" in obj else None,
            category=str(obj["category"]) if "category" in obj else None,
        )
    except KeyError as exc:
        raise ValueError(f"{where}: missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ValueError(f"{where}: {exc}") from None


def load_corpus(path):
    """Parse a JSON-lines corpus; one recipe per line.

    Malformed lines raise with the 1-based line number.
    """
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}, line {lineno}: invalid JSON ({exc.msg})") from None
            records.append(_record_from_json(obj, f"{path}, line {lineno}"))
    return records


def save_corpus(records, path):
    with open(path, "w", encoding="utf-8") as handle:
        for r in records:
            obj = {"id": r.id, "title": r.title, "ingredients": r.ingredients, "steps": r.steps}
            if r.segment_files is not None:
                obj["segment_files"] = r.segment_files
            if r.category is not None:
                obj["category"] = r.category
            handle.write(json.dumps(obj) + "\n")


def write_features(segment, path):
    """Serialize a FeatureSegment: FSEG magic, version, counts, f32 payload."""
    frames = np.ascontiguousarray(segment.frames, dtype="<f4")
    n, dim = frames.shape
    with open(path, "wb") as handle:
        handle.write(_FSEG_MAGIC)
        handle.write(struct.pack("<III", _FSEG_VERSION, n, dim))
        handle.write(frames.tobytes())


def load_features(path):
    """Read one FeatureSegment, validating header and payload size."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != _FSEG_MAGIC:
        raise ValueError(f"{path}: not a feature segment file (bad magic)")
    version, n, dim = struct.unpack("<III", data[4:16])
    if version != _FSEG_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = 16 + n * dim * 4
    if len(data) < expected:
        raise ValueError(f"{path}: truncated payload ({len(data) - 16} bytes, want {n * dim * 4})")
    frames = np.frombuffer(data[16:expected], dtype="<f4").reshape(n, dim)
    return FeatureSegment(frames=frames.copy())


def attach_segments(record, features_dir):
    """Load the record's segment files and return a copy carrying them."""
    if record.segment_files is None:
        return record
    segments = [load_features(Path(features_dir) / f) for f in record.segment_files]
    dims = {s.dim for s in segments}
    if len(dims) > 1:
        raise ValueError(f"recipe {record.id!r}: inconsistent feature dims {sorted(dims)}")
    return RecipeRecord(
        id=record.id, title=record.title, ingredients=record.ingredients,
        steps=record.steps, segments=segments, segment_files=record.segment_files,
        category=record.category,
    )
