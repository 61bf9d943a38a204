import threading

import pytest

from core.config import OramConfig
from core.registry import OramRegistry, SessionNotFound


@pytest.fixture
def registry():
    return OramRegistry(max_sessions=2)


def test_create_access_delete(registry):
    session_id = registry.create(OramConfig(n=4096, rng_seed=1))
    assert registry.access(session_id, "write", 5, 9) == 0
    assert registry.access(session_id, "read", 5) == 9
    assert registry.stats(session_id)["levels"][0]["ops"] == 2
    registry.delete(session_id)
    assert len(registry) == 0


def test_deleted_session_is_not_found(registry):
    session_id = registry.create(OramConfig(n=4096))
    registry.delete(session_id)
    with pytest.raises(SessionNotFound):
        registry.access(session_id, "read", 0)
    with pytest.raises(SessionNotFound):
        registry.stats(session_id)
    with pytest.raises(SessionNotFound):
        registry.delete(session_id)


def test_session_limit(registry):
    registry.create(OramConfig(n=4096))
    registry.create(OramConfig(n=4096))
    with pytest.raises(OverflowError):
        registry.create(OramConfig(n=4096))


def test_delete_racing_with_access(registry):
    session_id = registry.create(OramConfig(n=4096))
    errors = []
    start = threading.Barrier(5)

    def worker():
        start.wait()
        for address in range(40):
            try:
                registry.access(session_id, "read", address)
                registry.stats(session_id)
            except SessionNotFound:
                return
            except Exception as e:  # anything else is a bug
                errors.append(e)
                return

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    start.wait()
    registry.delete(session_id)
    for t in threads:
        t.join()
    assert errors == []
