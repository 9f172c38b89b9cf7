"""
Delimited-text reading and writing shared by loaders and reports.
"""
import csv
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pinvgcn.errors import ParseError

logger = logging.getLogger(__name__)


class CSVHandler:
    """A class for reading and writing delimiter-separated tables."""

    @staticmethod
    def read_table(file_path: str, delimiter: str = ",", has_header: bool = True,
                   row_filter: Optional[Callable[[List[str]], bool]] = None
                   ) -> Tuple[List[str], List[List[str]]]:
        """
        Read a delimited table.

        Args:
            file_path: Path to the table
            delimiter: Field delimiter
            has_header: Whether the first row holds column names
            row_filter: Optional predicate; rows it rejects are not kept

        Returns:
            Tuple of (headers, rows); headers is empty without a header row

        Raises:
            ParseError: if rows have inconsistent field counts
        """
        headers: List[str] = []
        rows: List[List[str]] = []
        with open(file_path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f, delimiter=delimiter)
            if has_header:
                headers = [h.strip() for h in next(reader, [])]
            width = len(headers) if headers else None
            for row in reader:
                if not row or all(not cell.strip() for cell in row):
                    continue
                if width is None:
                    width = len(row)
                if len(row) != width:
                    raise ParseError(
                        file_path, reader.line_num,
                        f"expected {width} fields, found {len(row)}"
                    )
                cells = [cell.strip() for cell in row]
                if row_filter is None or row_filter(cells):
                    rows.append(cells)

        logger.debug("Read %d rows from %s", len(rows), file_path)
        return headers, rows

    @staticmethod
    def write_csv(file_path: str, headers: Sequence[str], rows: Sequence[Sequence[Any]],
                  mode: str = "w") -> None:
        """
        Write rows to a CSV file.

        Args:
            file_path: Path to the CSV file
            headers: Column headers (written only in 'w' mode)
            rows: Rows as sequences of values
            mode: 'w' to overwrite, 'a' to append
        """
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, mode, encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            if mode == "w" and headers:
                writer.writerow(headers)
            writer.writerows(rows)
        logger.debug("Wrote %d rows to %s", len(rows), file_path)

    @staticmethod
    def write_csv_from_dicts(file_path: str, rows: Sequence[Dict[str, Any]],
                             fieldnames: Optional[List[str]] = None) -> None:
        """
        Write dictionaries to a CSV file.

        Args:
            file_path: Path to the CSV file
            rows: Row dictionaries
            fieldnames: Column order (keys of the first row if omitted)
        """
        if fieldnames is None:
            if not rows:
                raise ValueError("no rows and no fieldnames given")
            fieldnames = list(rows[0].keys())
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
        logger.debug("Wrote %d rows to %s", len(rows), file_path)
