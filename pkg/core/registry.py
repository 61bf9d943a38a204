# core/registry.py
import logging
import threading
import uuid
from typing import Any, Dict, List, Optional, Tuple

from core.config import OramConfig
from core.recursive_oram import OramStack, build_recursive

logger = logging.getLogger(__name__)


class SessionNotFound(KeyError):
    pass


class OramRegistry:
    """
    Holds the ORAM stacks created through the API, keyed by session id.
    One lock per session serialises operations on the same stack.
    """

    def __init__(self, max_sessions: int = 64):
        self.max_sessions = max_sessions
        self._sessions: Dict[str, OramStack] = {}
        self._locks: Dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def __len__(self) -> int:
        return len(self._sessions)

    def create(self, config: OramConfig) -> str:
        stack = build_recursive(config.n, config)
        with self._guard:
            if len(self._sessions) >= self.max_sessions:
                raise OverflowError(f"session limit of {self.max_sessions} reached; delete a session first")
            session_id = uuid.uuid4().hex
            self._sessions[session_id] = stack
            self._locks[session_id] = threading.Lock()
        logger.info(f"Created ORAM session {session_id} (n={config.n}, levels={len(stack.levels)})")
        return session_id

    def get(self, session_id: str) -> OramStack:
        return self._entry(session_id)[0]

    def _entry(self, session_id: str) -> Tuple[OramStack, threading.Lock]:
        with self._guard:
            try:
                return self._sessions[session_id], self._locks[session_id]
            except KeyError:
                raise SessionNotFound(session_id) from None

    def access(self, session_id: str, kind: str, address: int, value: Optional[int] = None) -> int:
        stack, lock = self._entry(session_id)
        with lock:
            return stack.access(kind, address, value)

    def stats(self, session_id: str) -> Dict[str, Any]:
        stack, lock = self._entry(session_id)
        with lock:
            return {
                "session_id": session_id,
                "n": stack.n,
                "halted": stack.abort is not None,
                "abort": {"kind": stack.abort.kind.value, "op_serial": stack.abort.op_serial} if stack.abort else None,
                "physical_accesses": stack.physical_accesses(),
                "cache_words": stack.cache_words(),
                "external_words": stack.external_words(),
                "levels": stack.summary(),
            }

    def delete(self, session_id: str) -> None:
        with self._guard:
            if self._sessions.pop(session_id, None) is None:
                raise SessionNotFound(session_id)
            self._locks.pop(session_id, None)
        logger.info(f"Deleted ORAM session {session_id}")

    def session_ids(self) -> List[str]:
        return list(self._sessions)
