from .app import app, create_app
from .client import in_process_client

__all__ = ["app", "create_app", "in_process_client"]
