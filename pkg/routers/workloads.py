# routers/workloads.py
import sys
from pathlib import Path

# Keep the project root importable from this router.
current_file_dir = Path(__file__).resolve().parent
project_dir = current_file_dir.parent
if str(project_dir) not in sys.path:
    sys.path.insert(0, str(project_dir))

import logging
from typing import Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field, ValidationError

from core.config import OverflowRule
from core.errors import OramError
from core.experiments import ExperimentConfig, run_workload
from core.records import json_safe

logger = logging.getLogger(__name__)

router = APIRouter()


class WorkloadRequest(BaseModel):
    n: int = Field(4096, ge=1)
    ops: int = Field(1000, ge=0)
    workload: str = "uniform-random"
    seed: int = 0
    block_size: int = Field(16, ge=1)
    ell: Optional[int] = None
    ell_leaf: Optional[int] = None
    q_max: Optional[int] = None
    overflow_rule: OverflowRule = "figure"
    hot_address: int = Field(0, ge=0)


@router.post("/run")
def run_workload_endpoint(request: WorkloadRequest):
    if request.workload == "scripted-file":
        raise HTTPException(status_code=400, detail="Scripted workloads are only available from the command line.")
    try:
        config = ExperimentConfig(**request.model_dump())
        outcome = run_workload(config)
        return json_safe(outcome.model_dump(exclude={"outputs"}))
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except (OramError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Workload run failed unexpectedly: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"An internal server error occurred: {str(e)}")
