"""Define the UTC timestamps of run manifests."""
from datetime import datetime
from typing import Optional

import pytz

UTC = pytz.utc


def utc_now() -> datetime:
    """Return the current time in UTC."""
    return datetime.now(UTC)


def utc_stamp(moment: Optional[datetime] = None) -> str:
    """Return the ISO 8601 stamp (whole seconds, UTC) of ``moment`` or of now."""
    moment = utc_now() if moment is None else moment.astimezone(UTC)
    return moment.replace(microsecond=0).isoformat()


def seconds_between(start: str, end: str) -> float:
    """Return the seconds elapsed between two stamps from :func:`utc_stamp`."""
    return (datetime.fromisoformat(end) - datetime.fromisoformat(start)).total_seconds()
