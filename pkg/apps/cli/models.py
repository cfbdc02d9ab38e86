from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from apps.shared.exceptions import ResourceCapExceeded
from config import settings

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """Output location, worker count and bookkeeping for one subcommand run."""

    out_dir: Path
    threads: int
    plots: bool
    started: float = field(default_factory=time.monotonic)
    artifacts: list[Path] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def record(self, *paths: Path) -> None:
        self.artifacts.extend(Path(p) for p in paths)

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def check_clock(self, stage: str) -> None:
        if self.elapsed > settings.MAX_WALL_SECONDS:
            raise ResourceCapExceeded(
                f"Run exceeded MAX_WALL_SECONDS={settings.MAX_WALL_SECONDS:g} after {stage}.",
                {"stage": stage, "elapsed": round(self.elapsed, 3), "cap": settings.MAX_WALL_SECONDS},
            )

    @contextmanager
    def timed(self, stage: str):
        start = time.monotonic()
        yield
        self.timings[stage] = round(time.monotonic() - start, 6)
        logger.info("%s finished in %.3f s", stage, self.timings[stage])
        self.check_clock(stage)

    def artifact_names(self) -> list[str]:
        return sorted(str(p.relative_to(self.out_dir)) for p in self.artifacts)
