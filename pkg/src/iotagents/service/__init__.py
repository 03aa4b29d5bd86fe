from .app import ServiceConfig, create_app
from .jobs import Job, JobRunner

__all__ = ["Job", "JobRunner", "ServiceConfig", "create_app"]
