"""CSV and JSON result files."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from cli.config import settings
from utils.helpers import clean_for_json


logger = logging.getLogger(__name__)

Table = Union[pd.DataFrame, List[Dict[str, Any]], Dict[str, Any]]


class ResultWriter:
    """
    Writes command outputs into one directory.

    CSV files carry a header row; every float in CSV and JSON is written with
    `settings.float_digits` significant digits.
    """

    def __init__(self, out_dir: Path, float_digits: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.float_digits = settings.float_digits if float_digits is None else float_digits
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, name: str) -> Path:
        return self.out_dir / name

    def write_csv(self, name: str, table: Table) -> Path:
        """Write a table (DataFrame, list of row dicts or dict of columns)."""
        frame = table if isinstance(table, pd.DataFrame) else pd.DataFrame(table)
        path = self.path_for(name)
        frame.to_csv(path, index=False, float_format=f"%.{self.float_digits}g")
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.path_for(name)
        text = json.dumps(clean_for_json(payload, self.float_digits), indent=2)
        path.write_text(text + "\n", encoding="utf-8")
        logger.info(f"Wrote {path}")
        return path

    def read_csv(self, name: str) -> pd.DataFrame:
        """Read back a CSV written by `write_csv`."""
        return pd.read_csv(self.path_for(name), float_precision="round_trip")


def dumps_json(payload: Any, float_digits: Optional[int] = None) -> str:
    """JSON text for stdout, with the same float formatting as files."""
    digits = settings.float_digits if float_digits is None else float_digits
    return json.dumps(clean_for_json(payload, digits), indent=2)


__all__ = ["ResultWriter", "dumps_json"]
