"""File formats: CSV data, tree DSL files, model and config JSON."""
import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .density import LpNestedModel
from .exceptions import DataError
from .models import Dataset, FitConfig, GridSpec, ModelSpec
from .tree import P_MAX, P_MIN, LpTree, parse_tree

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"


def read_csv(path: PathLike) -> Dataset:
    """Read a numeric CSV with a header row; rows are samples."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse {path}: {e}")
    if frame.empty:
        raise DataError(f"no samples in {path}")
    try:
        values = frame.to_numpy(dtype=float)
    except ValueError as e:
        raise DataError(f"non-numeric values in {path}: {e}")
    if not np.all(np.isfinite(values)):
        raise DataError(f"missing or non-finite values in {path}")
    logger.debug(f"Read {values.shape[0]} x {values.shape[1]} samples from {path}")
    return Dataset(values=values, labels=[str(c) for c in frame.columns])


def write_csv(
    path: PathLike,
    values: np.ndarray,
    labels: Optional[Sequence[str]] = None,
    extra: Optional[dict] = None,
) -> None:
    """Write rows of samples with 17 significant digits.

    Args:
        path: Output file
        values: (m, k) array
        labels: Column names; x0..x{k-1} when omitted
        extra: Additional named columns appended on the right
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    labels = list(labels) if labels is not None else [f"x{i}" for i in range(values.shape[1])]
    frame = pd.DataFrame(values, columns=labels)
    for name, column in (extra or {}).items():
        frame[name] = column
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8")
    logger.debug(f"Wrote {len(frame)} rows to {path}")


def read_tree(source: PathLike, p_min: float = P_MIN, p_max: float = P_MAX) -> LpTree:
    """Parse a tree from a DSL file, or from the text itself when no such file exists."""
    path = Path(source)
    try:
        is_file = path.is_file()
    except OSError:
        is_file = False
    text = path.read_text(encoding="utf-8") if is_file else str(source)
    return parse_tree(text.strip(), p_min=p_min, p_max=p_max)


def _read_json(path: PathLike) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON in {path}: {e}")


def _write_json(path: PathLike, model: BaseModel) -> None:
    Path(path).write_text(
        model.model_dump_json(indent=2, by_alias=True) + "\n",
        encoding="utf-8",
    )


def load_model(path: PathLike) -> LpNestedModel:
    return LpNestedModel.from_spec(ModelSpec.model_validate(_read_json(path)))


def save_model(model: LpNestedModel, path: PathLike) -> None:
    _write_json(path, model.to_spec())


def load_fit_config(path: Optional[PathLike], base: Optional[FitConfig] = None) -> FitConfig:
    """Fit settings from JSON, layered over ``base``."""
    values = base.model_dump() if base is not None else {}
    if path is not None:
        values.update(_read_json(path))
    return FitConfig.model_validate(values)


def load_grid(path: PathLike) -> GridSpec:
    return GridSpec.model_validate(_read_json(path))


def write_report(path: PathLike, report: BaseModel) -> None:
    _write_json(path, report)
