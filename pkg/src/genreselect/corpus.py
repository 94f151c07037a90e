"""CoNLL-U corpus model: parsing, treebank registry, subsampling, splits.

Sentences carry stable global identifiers of the form
``treebank/split/sent_id`` so that selection manifests and embedding files
can refer to them across processes and runs.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ConfigError, DataError, FormatError

# The 18 treebank-level genre labels used throughout.
UD_GENRES = (
    "academic",
    "bible",
    "blog",
    "email",
    "fiction",
    "government",
    "grammar-examples",
    "learner-essays",
    "legal",
    "medical",
    "news",
    "nonfiction",
    "poetry",
    "reviews",
    "social",
    "spoken",
    "web",
    "wiki",
)

# Treebanks whose text cannot be redistributed; dropped by default at load.
DEFAULT_EXCLUSIONS = frozenset(
    {
        "UD_Arabic-NYUAD",
        "UD_English-ESL",
        "UD_English-GUMReddit",
        "UD_French-FTB",
        "UD_Japanese-BCCWJ",
        "UD_Mbya_Guarani-Dooley",
    }
)

SPLIT_ORDER = ("train", "dev", "test")

_SPLIT_RE = re.compile(r"(?:^|[-._])(train|dev|test)\.conllu$")


@dataclass(slots=True)
class Token:
    """One scoring row of a CoNLL-U sentence (plain integer ID)."""

    index: int
    form: str
    lemma: str
    upos: str
    xpos: str
    feats: str
    head: int
    deprel: str
    deps: str
    misc: str

    def columns(self) -> list[str]:
        return [
            str(self.index),
            self.form,
            self.lemma,
            self.upos,
            self.xpos,
            self.feats,
            str(self.head),
            self.deprel,
            self.deps,
            self.misc,
        ]


@dataclass(slots=True)
class NonScoringRow:
    """Multiword-range (``a-b``) or empty-node (``a.b``) row.

    Kept verbatim for round-tripping; excluded from attachment scoring.
    """

    row_id: str
    columns: list[str]

    @property
    def is_range(self) -> bool:
        return "-" in self.row_id


@dataclass(slots=True)
class Sentence:
    global_id: str
    sent_id: str
    comments: list[str]
    rows: list[Token | NonScoringRow]
    _text: str | None = None

    @property
    def tokens(self) -> list[Token]:
        return [r for r in self.rows if isinstance(r, Token)]

    @property
    def text(self) -> str:
        if self._text is not None:
            return self._text
        return _reconstruct_text(self.rows)

    def __len__(self) -> int:
        return sum(1 for r in self.rows if isinstance(r, Token))


@dataclass(slots=True)
class TreebankMeta:
    """Registry entry: language, genre-label set and split sizes."""

    code: str
    language: str
    genres: frozenset[str]
    splits: dict[str, int]

    def __post_init__(self) -> None:
        unknown = set(self.genres) - set(UD_GENRES)
        if unknown:
            raise ConfigError(f"{self.code}: unknown genre labels {sorted(unknown)}")
        if not self.genres:
            raise ConfigError(f"{self.code}: empty genre set")

    @property
    def size(self) -> int:
        return sum(self.splits.values())

    @property
    def is_single_genre(self) -> bool:
        return len(self.genres) == 1


@dataclass(slots=True)
class Treebank:
    code: str
    splits: dict[str, list[Sentence]]

    def sentences(self) -> Iterator[Sentence]:
        for split in _ordered_splits(self.splits):
            yield from self.splits[split]

    @property
    def n_sentences(self) -> int:
        return sum(len(v) for v in self.splits.values())


@dataclass
class Corpus:
    """Immutable collection of treebanks keyed by code.

    Iteration order is canonical everywhere: treebanks sorted by code,
    splits in train/dev/test order, sentences in file order. Embedding
    files and manifests rely on this order being stable.
    """

    treebanks: dict[str, Treebank]
    meta: dict[str, TreebankMeta]
    exclusions: frozenset[str] = frozenset()
    _index: dict[str, Sentence] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        present = self.exclusions & set(self.treebanks)
        if present:
            raise DataError(f"excluded treebanks present in corpus: {sorted(present)}")
        self.treebanks = dict(sorted(self.treebanks.items()))

    def codes(self) -> list[str]:
        return list(self.treebanks)

    def sentences(self) -> Iterator[Sentence]:
        for code in self.treebanks:
            yield from self.treebanks[code].sentences()

    def ids(self) -> list[str]:
        return [s.global_id for s in self.sentences()]

    @property
    def n_sentences(self) -> int:
        return sum(tb.n_sentences for tb in self.treebanks.values())

    def get(self, global_id: str) -> Sentence:
        if not self._index:
            for s in self.sentences():
                self._index[s.global_id] = s
        try:
            return self._index[global_id]
        except KeyError:
            raise DataError(f"unknown sentence id: {global_id}") from None

    def has(self, global_id: str) -> bool:
        if not self._index:
            for s in self.sentences():
                self._index[s.global_id] = s
        return global_id in self._index

    def restrict(self, codes: Iterable[str]) -> "Corpus":
        keep = set(codes)
        missing = keep - set(self.treebanks)
        if missing:
            raise DataError(f"unknown treebank codes: {sorted(missing)}")
        return Corpus(
            treebanks={c: self.treebanks[c] for c in self.treebanks if c in keep},
            meta={c: self.meta[c] for c in self.meta if c in keep},
            exclusions=self.exclusions,
        )


def _ordered_splits(splits: Mapping[str, object]) -> list[str]:
    known = [s for s in SPLIT_ORDER if s in splits]
    extra = sorted(s for s in splits if s not in SPLIT_ORDER)
    return known + extra


def _reconstruct_text(rows: Sequence[Token | NonScoringRow]) -> str:
    """Rebuild surface text from forms, honoring multiword ranges and
    ``SpaceAfter=No`` annotations."""
    parts: list[str] = []
    skip_until = 0
    for row in rows:
        if isinstance(row, NonScoringRow):
            if not row.is_range:
                continue
            start, end = row.row_id.split("-")
            skip_until = int(end)
            parts.append(row.columns[1])
            if "SpaceAfter=No" not in row.columns[9]:
                parts.append(" ")
            continue
        if row.index <= skip_until:
            continue
        parts.append(row.form)
        if "SpaceAfter=No" not in row.misc:
            parts.append(" ")
    return "".join(parts).rstrip()


_RANGE_ID_RE = re.compile(r"^(\d+)-(\d+)$")
_EMPTY_ID_RE = re.compile(r"^(\d+)\.(\d+)$")
_PLAIN_ID_RE = re.compile(r"^\d+$")


def parse_conllu(data: bytes | str, treebank: str = "", split: str = "") -> list[Sentence]:
    """Parse CoNLL-U content into sentences.

    ``treebank`` and ``split`` scope the global ids; when both are empty the
    bare ``sent_id`` is used. Sentences without a ``# sent_id`` comment get
    1-based ordinal ids. Malformed rows raise :class:`FormatError` with the
    offending line number.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"input is not valid UTF-8: {exc}") from None
    else:
        text = data

    sentences: list[Sentence] = []
    comments: list[str] = []
    rows: list[Token | NonScoringRow] = []
    sent_text: str | None = None
    sent_id: str | None = None
    seen_ids: set[str] = set()

    def flush(line_no: int) -> None:
        nonlocal comments, rows, sent_text, sent_id
        if not comments and not rows:
            return
        if not rows:
            raise FormatError(f"line {line_no}: comment block without token rows")
        n = sum(1 for r in rows if isinstance(r, Token))
        expected = 1
        for row in rows:
            if isinstance(row, Token):
                if row.index != expected:
                    raise FormatError(
                        f"line {line_no}: token ids not contiguous "
                        f"(expected {expected}, got {row.index})"
                    )
                expected += 1
                if row.head > n:
                    raise FormatError(
                        f"line {line_no}: head {row.head} out of range for "
                        f"{n}-token sentence"
                    )
        sid = sent_id if sent_id is not None else str(len(sentences) + 1)
        if sid in seen_ids:
            raise FormatError(f"line {line_no}: duplicate sent_id {sid!r}")
        seen_ids.add(sid)
        gid = f"{treebank}/{split}/{sid}" if (treebank or split) else sid
        sentences.append(
            Sentence(global_id=gid, sent_id=sid, comments=comments, rows=rows, _text=sent_text)
        )
        comments, rows, sent_text, sent_id = [], [], None, None

    for line_no, line in enumerate(text.split("\n"), start=1):
        if line == "":
            flush(line_no)
            continue
        if line.startswith("#"):
            comments.append(line)
            body = line[1:].strip()
            if body.startswith("sent_id") and "=" in body:
                sent_id = body.split("=", 1)[1].strip()
            elif body.startswith("text") and "=" in body and not body.startswith("text_"):
                sent_text = body.split("=", 1)[1].strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise FormatError(f"line {line_no}: expected 10 columns, got {len(cols)}")
        row_id = cols[0]
        if _PLAIN_ID_RE.match(row_id):
            try:
                head = int(cols[6])
            except ValueError:
                raise FormatError(f"line {line_no}: malformed HEAD column {cols[6]!r}") from None
            if head < 0:
                raise FormatError(f"line {line_no}: negative head {head}")
            if not cols[7]:
                raise FormatError(f"line {line_no}: empty DEPREL column")
            rows.append(
                Token(
                    index=int(row_id),
                    form=cols[1],
                    lemma=cols[2],
                    upos=cols[3],
                    xpos=cols[4],
                    feats=cols[5],
                    head=head,
                    deprel=cols[7],
                    deps=cols[8],
                    misc=cols[9],
                )
            )
        elif _RANGE_ID_RE.match(row_id) or _EMPTY_ID_RE.match(row_id):
            rows.append(NonScoringRow(row_id=row_id, columns=cols))
        else:
            raise FormatError(f"line {line_no}: malformed ID column {row_id!r}")
    flush(len(text.split("\n")))
    return sentences


def serialize_sentence(sentence: Sentence) -> str:
    lines = list(sentence.comments)
    for row in sentence.rows:
        if isinstance(row, Token):
            lines.append("\t".join(row.columns()))
        else:
            lines.append("\t".join(row.columns))
    return "\n".join(lines) + "\n"


def write_conllu(sentences: Iterable[Sentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for sentence in sentences:
            handle.write(serialize_sentence(sentence))
            handle.write("\n")


def read_conllu_file(path: str | Path, treebank: str = "", split: str = "") -> list[Sentence]:
    raw = Path(path).read_bytes()
    try:
        return parse_conllu(raw, treebank=treebank, split=split)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_registry(path: str | Path) -> dict[str, TreebankMeta]:
    """Read the treebank registry TSV.

    Columns: code, language, comma-separated genres, train, dev, test.
    Lines starting with ``#`` are comments.
    """
    registry: dict[str, TreebankMeta] = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"registry file not found: {path}")
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if cols[0] == "code":
                continue
            if len(cols) != 6:
                raise ConfigError(f"{path}:{line_no}: expected 6 columns, got {len(cols)}")
            code, language, genres_raw, train, dev, test = cols
            if code in registry:
                raise ConfigError(f"{path}:{line_no}: duplicate code {code}")
            genres = frozenset(g.strip() for g in genres_raw.split(",") if g.strip())
            splits = {}
            for name, value in (("train", train), ("dev", dev), ("test", test)):
                count = int(value)
                if count < 0:
                    raise ConfigError(f"{path}:{line_no}: negative split size")
                if count:
                    splits[name] = count
            registry[code] = TreebankMeta(code=code, language=language, genres=genres, splits=splits)
    if not registry:
        raise ConfigError(f"registry file is empty: {path}")
    return registry


def write_registry(registry: Mapping[str, TreebankMeta], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("code\tlanguage\tgenres\ttrain\tdev\ttest\n")
        for code in sorted(registry):
            meta = registry[code]
            genres = ",".join(sorted(meta.genres))
            row = [
                code,
                meta.language,
                genres,
                str(meta.splits.get("train", 0)),
                str(meta.splits.get("dev", 0)),
                str(meta.splits.get("test", 0)),
            ]
            handle.write("\t".join(row) + "\n")


def load_corpus(
    root: str | Path,
    registry: str | Path | Mapping[str, TreebankMeta],
    exclusions: Iterable[str] | None = None,
) -> Corpus:
    """Load every treebank directory under ``root``.

    Each subdirectory containing ``*.conllu`` files must have a registry
    entry; an unknown directory is a configuration error, never guessed.
    Split membership comes from the ``-train/-dev/-test.conllu`` filename
    suffix. Registry split counts are replaced by the actual parsed counts.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"corpus root is not a directory: {root}")
    if not isinstance(registry, Mapping):
        registry = load_registry(registry)
    excluded = DEFAULT_EXCLUSIONS if exclusions is None else frozenset(exclusions)

    treebanks: dict[str, Treebank] = {}
    meta: dict[str, TreebankMeta] = {}
    for directory in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(directory.glob("*.conllu"))
        if not files:
            continue
        code = directory.name
        if code in excluded:
            continue
        if code not in registry:
            raise ConfigError(f"treebank directory {code} has no registry entry")
        splits: dict[str, list[Sentence]] = {}
        for conllu in files:
            match = _SPLIT_RE.search(conllu.name)
            if not match:
                raise DataError(f"{conllu}: cannot infer split from filename")
            split = match.group(1)
            splits.setdefault(split, []).extend(read_conllu_file(conllu, treebank=code, split=split))
        treebanks[code] = Treebank(code=code, splits=splits)
        counts = {s: len(v) for s, v in splits.items()}
        meta[code] = replace(registry[code], splits=counts)
    if not treebanks:
        raise DataError(f"no treebanks found under {root}")
    return Corpus(treebanks=treebanks, meta=meta, exclusions=excluded)


def seeded_permutation(n: int, key: str) -> list[int]:
    """Deterministic permutation of ``range(n)``.

    Contract (relied on by callers and by reference tests): Fisher-Yates
    with descending index ``i`` and ``j = floor(random() * (i + 1))`` drawn
    from ``random.Random(key)``.
    """
    rng = random.Random(key)
    indices = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        indices[i], indices[j] = indices[j], indices[i]
    return indices


def subsample_treebank(tb: Treebank, cap: int, seed: int) -> Treebank:
    """Reduce each split to at most ``cap`` sentences.

    Each split draws one seeded permutation (key ``{seed}:{code}:{split}``)
    and keeps the prefix, so smaller caps always select subsets of larger
    ones. Original sentence order is preserved among kept sentences.
    """
    if cap < 1:
        raise DataError(f"subsample cap must be >= 1, got {cap}")
    splits: dict[str, list[Sentence]] = {}
    for split, sentences in tb.splits.items():
        n = len(sentences)
        if n <= cap:
            splits[split] = list(sentences)
            continue
        perm = seeded_permutation(n, f"{seed}:{tb.code}:{split}")
        keep = sorted(perm[:cap])
        splits[split] = [sentences[i] for i in keep]
    return Treebank(code=tb.code, splits=splits)


def subsample_corpus(corpus: Corpus, cap: int, seed: int) -> Corpus:
    treebanks = {code: subsample_treebank(tb, cap, seed) for code, tb in corpus.treebanks.items()}
    meta = {
        code: replace(corpus.meta[code], splits={s: len(v) for s, v in tb.splits.items()})
        for code, tb in treebanks.items()
    }
    return Corpus(treebanks=treebanks, meta=meta, exclusions=corpus.exclusions)


def split_train_dev(ids: Sequence[str], ratio: float, seed: int) -> tuple[list[str], list[str]]:
    """Partition ids into train/dev with ``|train| = round(ratio * n)``.

    Original input order is preserved within each part; the assignment is a
    seeded permutation prefix, deterministic given ``seed``.
    """
    if not ids:
        raise DataError("cannot split an empty id list")
    if not 0.0 < ratio < 1.0:
        raise DataError(f"split ratio must be in (0, 1), got {ratio}")
    n = len(ids)
    n_train = round(ratio * n)
    perm = seeded_permutation(n, f"{seed}:train-dev")
    train_idx = sorted(perm[:n_train])
    dev_idx = sorted(perm[n_train:])
    return [ids[i] for i in train_idx], [ids[i] for i in dev_idx]
