"""
Sweep result container shared by the metrics grid helpers and the harness.
"""

from dataclasses import dataclass, field
from typing import Dict, List

import pandas as pd

from . import __version__


@dataclass
class SweepResult:
    """
    One row per grid point.

    Columns are the axis names, then the metric columns, then diagnostics
    ('skipped' holds the reason a point could not be evaluated, '' otherwise).
    """
    name: str
    axes: List[str]
    metrics: List[str]
    table: pd.DataFrame
    seed: int
    snapshot: Dict = field(default_factory=dict)
    version: str = __version__

    @property
    def evaluated(self) -> pd.DataFrame:
        return self.table[self.table['skipped'] == '']

    @property
    def skipped(self) -> pd.DataFrame:
        return self.table[self.table['skipped'] != '']
