"""
Matrix ingestion, the bundled exam-score data and the analysis report.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .errors import InputError, ParameterError

__all__ = ["read_matrix", "parse_matrix", "load_exam_scores", "EXAM_SUBJECTS",
           "AnalysisReport", "SCHEMA_VERSION", "DELIMITERS", "fingerprint"]

DELIMITERS = {"comma": ",", "tab": "\t", "space": None}
EXAM_SUBJECTS = ("mechanics", "vectors", "algebra", "analysis", "statistics")
SCHEMA_VERSION = "1.0"


def _detect(line):
    if "," in line:
        return ","
    if "\t" in line:
        return "\t"
    return None


def parse_matrix(text, delimiter=None, header=False):
    """Parse delimited numeric text into a float matrix.

    Lines starting with ``#`` and blank lines are ignored.  The delimiter is
    detected from the first data line (comma, then tab, else runs of
    whitespace) unless ``delimiter`` is one of ``"comma"``, ``"tab"``,
    ``"space"``.  Only ``.`` is accepted as decimal point.  Errors name the
    1-based data row and column of the offending field.
    """
    if delimiter is not None and delimiter not in DELIMITERS:
        raise ParameterError(f"delimiter must be one of {sorted(DELIMITERS)}, got {delimiter!r}")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if header and lines:
        lines = lines[1:]
    if not lines:
        raise InputError("no numeric rows found")
    sep = DELIMITERS[delimiter] if delimiter else _detect(lines[0])
    rows = []
    width = None
    for i, line in enumerate(lines, start=1):
        fields = line.split(sep) if sep else line.split()
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise InputError(f"row {i} has {len(fields)} columns, expected {width}")
        row = []
        for j, tok in enumerate(fields, start=1):
            tok = tok.strip()
            try:
                value = float(tok)
            except ValueError:
                raise InputError(f"row {i}, column {j}: cannot parse {tok!r} as a number") from None
            if not math.isfinite(value):
                raise InputError(f"row {i}, column {j}: non-finite value {tok!r}")
            row.append(value)
        rows.append(row)
    return np.array(rows, dtype=float)


def read_matrix(path, delimiter=None, header=False):
    """Read a matrix file; see :func:`parse_matrix`."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return parse_matrix(text, delimiter, header)


def load_exam_scores():
    """The 88 x 5 open/closed book exam marks (mechanics, vectors, algebra,
    analysis, statistics)."""
    text = resources.files("pcarank").joinpath("data").joinpath("scor.txt").read_text()
    return parse_matrix(text)


def fingerprint(Y):
    """Short SHA-256 digest of the matrix values, for report provenance."""
    Y = np.ascontiguousarray(np.asarray(Y, dtype="<f8"))
    return hashlib.sha256(Y.tobytes() + str(Y.shape).encode()).hexdigest()[:16]


@dataclass
class AnalysisReport:
    """Machine-readable record of one command.

    All fields hold plain JSON types, so ``from_json(to_json())`` returns an
    equal report.
    """

    command: str
    input: dict
    config: dict
    version: str
    seed: int = None
    spectrum: list = None
    tests: list = field(default_factory=list)
    rank: dict = None
    noise: list = field(default_factory=list)
    intervals: list = field(default_factory=list)
    caveats: list = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            setattr(self, name, _plain(getattr(self, name)))

    def to_dict(self):
        return _plain(asdict(self))

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise InputError(f"unsupported report schema {version!r}; expected {SCHEMA_VERSION}")
        names = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - names
        if unknown:
            raise InputError(f"unknown report fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _plain(x):
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x
