"""Month-index arithmetic over a fixed analysis horizon.

All dates inside the simulator are plain integers: the number of months
elapsed since the configured epoch (index 0). Calendar strings only appear
at the I/O boundary.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_DATE_RE = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?$")

DEFAULT_EPOCH = "2008-01"
DEFAULT_HORIZON_END = "2020-01"


class DataError(Exception):
    """Base class for problems in input data."""


class MonthFormatError(DataError):
    """Date string is not YYYY-MM (or YYYY-MM-DD)."""


class BeforeEpochError(DataError):
    """Date falls before the analysis epoch."""


class AfterHorizonError(DataError):
    """Date falls after the end of the analysis horizon."""


def split_date(text: str) -> tuple[int, int, bool]:
    """Split YYYY-MM or YYYY-MM-DD into (year, month, had_day_part)."""
    m = _DATE_RE.match(text.strip())
    if not m:
        raise MonthFormatError(f"expected YYYY-MM date, got {text!r}")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise MonthFormatError(f"month out of range in {text!r}")
    return year, month, m.group(3) is not None


def _split(text: str) -> tuple[int, int]:
    year, month, _ = split_date(text)
    return year, month


@dataclass(frozen=True)
class Horizon:
    """Analysis window [epoch, end], both inclusive, month granularity."""

    epoch_year: int
    epoch_month: int
    end_index: int

    @classmethod
    def from_strings(cls, epoch: str = DEFAULT_EPOCH, end: str = DEFAULT_HORIZON_END) -> "Horizon":
        ey, em = _split(epoch)
        ny, nm = _split(end)
        end_index = 12 * (ny - ey) + (nm - em)
        if end_index <= 0:
            raise MonthFormatError(f"horizon end {end!r} must be after epoch {epoch!r}")
        return cls(ey, em, end_index)

    @property
    def n_months(self) -> int:
        return self.end_index + 1

    def parse(self, text: str) -> int:
        """Parse a YYYY-MM (day suffix tolerated and ignored) into an index."""
        year, month = _split(text)
        index = 12 * (year - self.epoch_year) + (month - self.epoch_month)
        if index < 0:
            raise BeforeEpochError(f"{text!r} is before the epoch {self.format(0)}")
        if index > self.end_index:
            raise AfterHorizonError(f"{text!r} is after the horizon end {self.format(self.end_index)}")
        return index

    def parse_clamped(self, text: str) -> tuple[int, bool]:
        """Like parse() but pre-epoch dates clamp to index 0.

        Returns (index, clamped). Dates past the horizon still raise: the
        window end is a hard bound, while "before the epoch" just means
        "already available when the analysis starts".
        """
        year, month = _split(text)
        index = 12 * (year - self.epoch_year) + (month - self.epoch_month)
        if index > self.end_index:
            raise AfterHorizonError(f"{text!r} is after the horizon end {self.format(self.end_index)}")
        if index < 0:
            return 0, True
        return index, False

    def format(self, index: int) -> str:
        if not 0 <= index <= self.end_index:
            raise ValueError(f"month index {index} outside [0, {self.end_index}]")
        total = (self.epoch_year * 12 + self.epoch_month - 1) + index
        return f"{total // 12:04d}-{total % 12 + 1:02d}"


def parse_month(text: str, horizon: Horizon) -> int:
    """Strict month parser: YYYY-MM within [epoch, horizon end]."""
    return horizon.parse(text)


def format_month(index: int, horizon: Horizon) -> str:
    return horizon.format(index)
