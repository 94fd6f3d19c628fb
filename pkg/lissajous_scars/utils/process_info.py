"""Process and machine information for run metadata and memory budgeting."""

import os
import platform
import logging
from typing import Dict

import psutil

THREADS_ENV_VAR = "LISSAJOUS_SCARS_THREADS"

logger = logging.getLogger("LissajousScars.runner")


def fft_workers() -> int:
    """Number of FFT worker threads.

    Read from ``LISSAJOUS_SCARS_THREADS``. Defaults to 1, the mode in which
    every run is reproducible bit for bit.

    Returns:
        Positive worker count
    """
    raw = os.environ.get(THREADS_ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={raw!r}")
        return 1
    if value <= 0:
        # 0 or negative means "all cores"
        return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return value


class ResourceMonitor:
    """Tracks memory use of the current process."""

    def __init__(self):
        self._process = psutil.Process(os.getpid())
        self._peak_rss = self._process.memory_info().rss

    def sample(self) -> int:
        """Record the current resident set size and return it in bytes."""
        rss = self._process.memory_info().rss
        self._peak_rss = max(self._peak_rss, rss)
        return rss

    @property
    def peak_rss(self) -> int:
        return self._peak_rss

    def check_budget(self, required_bytes: int, what: str) -> bool:
        """Warn when an allocation would not fit into available memory.

        Args:
            required_bytes: Estimated size of the allocation
            what: Human-readable description for the log record

        Returns:
            True if the allocation fits, False otherwise
        """
        available = psutil.virtual_memory().available
        if required_bytes > available:
            logger.warning(
                f"{what} needs about {required_bytes / 2**30:.2f} GiB "
                f"but only {available / 2**30:.2f} GiB is available"
            )
            return False
        logger.debug(f"{what}: {required_bytes / 2**20:.1f} MiB of {available / 2**20:.0f} MiB available")
        return True

    def snapshot(self) -> Dict:
        """Machine description and memory figures for run metadata."""
        self.sample()
        return {
            'platform': platform.platform(),
            'python': platform.python_version(),
            'cpu_count_logical': psutil.cpu_count(),
            'cpu_count_physical': psutil.cpu_count(logical=False),
            'fft_workers': fft_workers(),
            'peak_rss_bytes': self._peak_rss,
        }
