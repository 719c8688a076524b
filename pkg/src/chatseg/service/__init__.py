from .app import create_app
from .store import SessionRecord, SessionStore

__all__ = ["create_app", "SessionRecord", "SessionStore"]
