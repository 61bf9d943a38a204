# routers/oram.py
import sys
from pathlib import Path

# Keep the project root importable from this router.
current_file_dir = Path(__file__).resolve().parent
project_dir = current_file_dir.parent
if str(project_dir) not in sys.path:
    sys.path.insert(0, str(project_dir))

import logging
from typing import Any, Dict, Literal, Optional

from fastapi import APIRouter, Depends, HTTPException
from pydantic import BaseModel, Field, ValidationError

from core.config import Mutation, OramConfig, OverflowRule
from core.errors import InstanceHalted, OramAbort, OramError
from core.registry import OramRegistry, SessionNotFound
from dependencies import get_registry

logger = logging.getLogger(__name__)

router = APIRouter()


# --- Pydantic Models ---
class SessionRequest(BaseModel):
    n: int = Field(..., ge=1)
    alpha: int = Field(16, ge=1)
    ell: Optional[int] = None
    ell_leaf: Optional[int] = None
    q_max: Optional[int] = None
    rng_seed: int = 0
    overflow_rule: OverflowRule = "figure"
    mutation: Mutation = "none"
    recursion_cutoff: int = Field(4096, ge=1)


class ReadRequest(BaseModel):
    address: int = Field(..., ge=0)


class WriteRequest(BaseModel):
    address: int = Field(..., ge=0)
    value: int


def _abort_detail(event) -> Dict[str, Any]:
    return {"error": event.kind.value, "op_serial": event.op_serial}


def _access(registry: OramRegistry, session_id: str, kind: Literal["read", "write"],
            address: int, value: Optional[int] = None) -> Dict[str, Any]:
    try:
        old = registry.access(session_id, kind, address, value)
        return {"session_id": session_id, "address": address, "value": old}
    except SessionNotFound:
        raise HTTPException(status_code=404, detail=f"Unknown session {session_id}.")
    except (OramAbort, InstanceHalted) as e:
        raise HTTPException(status_code=409, detail=_abort_detail(e.event))
    except IndexError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except OramError as e:
        logger.error(f"ORAM error in session {session_id}: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"ORAM state error: {str(e)}")


# --- API Endpoints ---

@router.post("/sessions")
def create_session_endpoint(request: SessionRequest, registry: OramRegistry = Depends(get_registry)):
    try:
        config = OramConfig(record_trace=False, **request.model_dump())
        session_id = registry.create(config)
        return {"session_id": session_id, "levels": registry.stats(session_id)["levels"]}
    except (ValidationError, OramError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except OverflowError as e:
        raise HTTPException(status_code=429, detail=str(e))


@router.post("/sessions/{session_id}/read")
def read_endpoint(session_id: str, request: ReadRequest, registry: OramRegistry = Depends(get_registry)):
    return _access(registry, session_id, "read", request.address)


@router.post("/sessions/{session_id}/write")
def write_endpoint(session_id: str, request: WriteRequest, registry: OramRegistry = Depends(get_registry)):
    return _access(registry, session_id, "write", request.address, request.value)


@router.get("/sessions/{session_id}/stats")
def stats_endpoint(session_id: str, registry: OramRegistry = Depends(get_registry)):
    try:
        return registry.stats(session_id)
    except SessionNotFound:
        raise HTTPException(status_code=404, detail=f"Unknown session {session_id}.")


@router.delete("/sessions/{session_id}")
def delete_session_endpoint(session_id: str, registry: OramRegistry = Depends(get_registry)):
    try:
        registry.delete(session_id)
        return {"message": f"Session {session_id} deleted."}
    except SessionNotFound:
        raise HTTPException(status_code=404, detail=f"Unknown session {session_id}.")
