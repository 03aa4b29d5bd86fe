"""Worker-pool job registry for long-running analyses."""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field


@dataclass
class Job:
    id: str
    intent: str
    status: str = "pending"  # pending | running | done | error
    result: dict | None = None
    error: str | None = None
    session_id: str | None = None


@dataclass
class JobRunner:
    workers: int = 4
    _jobs: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self):
        self._pool = ThreadPoolExecutor(max_workers=self.workers)

    def submit(self, intent: str, fn, session_id: str | None = None) -> Job:
        job = Job(id=uuid.uuid4().hex, intent=intent, session_id=session_id)
        with self._lock:
            self._jobs[job.id] = job

        def run():
            with self._lock:
                job.status = "running"
            try:
                result = fn()
                with self._lock:
                    job.result = result
                    job.status = "done"
            except Exception as exc:  # error text published once, immutable
                with self._lock:
                    job.error = str(exc)
                    job.status = "error"

        self._pool.submit(run)
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)
