import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from .data_utils import ColumnKind, Dataset, Task, load_csv
from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManifestEntry:
    csv_path: str
    target: str
    task: Task
    t_max: float


def parse_kinds(text: Optional[str]) -> Optional[dict[str, ColumnKind]]:
    """
    Column kind declarations.
    Accepts: empty, or comma separated NAME=KIND pairs with KIND numeric / categorical / datetime.
    """
    if not text:
        return None
    kinds: dict[str, ColumnKind] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, kind = item.partition("=")
        if not sep or not name.strip():
            raise DataError(f"Invalid kind declaration: {item!r} (expected NAME=KIND)")
        try:
            kinds[name.strip()] = ColumnKind(kind.strip().lower())
        except ValueError:
            raise DataError(f"Unknown column kind {kind!r} for {name.strip()}") from None
    return kinds


def read_manifest(path: str) -> list[ManifestEntry]:
    """One `csv_path<TAB>target<TAB>task<TAB>t_max` line per dataset; blank and # lines are skipped."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise DataError(f"Cannot read manifest {path}: {e}") from e

    entries = []
    for number, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{path}:{number}: expected 4 tab-separated fields, got {len(parts)}")
        csv_path, target, task, t_max = (p.strip() for p in parts)
        try:
            budget = float(t_max)
        except ValueError:
            raise DataError(f"{path}:{number}: invalid t_max {t_max!r}") from None
        if budget <= 0:
            raise DataError(f"{path}:{number}: t_max must be positive")
        entries.append(ManifestEntry(csv_path, target, Task.parse(task), budget))
    if not entries:
        raise DataError(f"Manifest {path} lists no datasets")
    return entries


def load_corpus(entries: list[ManifestEntry]) -> list[Tuple[Dataset, float]]:
    corpus = []
    for entry in entries:
        d = load_csv(entry.csv_path, entry.target, task=entry.task)
        corpus.append((d, entry.t_max))
    logger.info(f"Loaded {len(corpus)} training dataset(s)")
    return corpus
