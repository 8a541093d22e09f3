import json
import os
from typing import Any, Dict, List, Optional
import pandas as pd
from dercoopt_hub.infra.settings import settings


class ResultsStore:
    """Writes experiment outputs (CSV, JSON) into one results directory"""

    def __init__(self, results_dir: Optional[str] = None):
        self.results_dir = results_dir or settings.get("results_dir", "results")
        self._ensure_results_dir()

    def _ensure_results_dir(self):
        """Ensure results directory exists"""
        os.makedirs(self.results_dir, exist_ok=True)

    def _get_file_path(self, filename: str) -> str:
        """Get full path to results file"""
        return os.path.join(self.results_dir, filename)

    def _replace(self, filename: str, write) -> str:
        # Atomic write using temporary file
        temp_file = self._get_file_path(filename + ".tmp")
        final_file = self._get_file_path(filename)
        directory = os.path.dirname(final_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        write(temp_file)
        os.replace(temp_file, final_file)
        return final_file

    def save_frame(self, filename: str, frame: pd.DataFrame) -> str:
        """Save a table as CSV with shortest round-trip float formatting"""
        return self._replace(
            filename,
            lambda path: frame.to_csv(path, index=False, lineterminator="\n"),
        )

    def save_rows(self, filename: str, rows: List[Dict[str, Any]],
                  columns: Optional[List[str]] = None) -> str:
        """Save a list of flat dicts as CSV"""
        return self.save_frame(filename, pd.DataFrame(rows, columns=columns))

    def save_json(self, filename: str, data: Dict[str, Any]) -> str:
        """Save a JSON document"""
        def write(path: str):
            with open(path, "w", encoding="utf-8") as f:
                json.dump(data, f, indent=2, ensure_ascii=False)
                f.write("\n")
        return self._replace(filename, write)
