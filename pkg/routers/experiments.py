# routers/experiments.py
import sys
from pathlib import Path

# Keep the project root importable from this router.
current_file_dir = Path(__file__).resolve().parent
project_dir = current_file_dir.parent
if str(project_dir) not in sys.path:
    sys.path.insert(0, str(project_dir))

import logging
from typing import Any, Dict, Optional

from fastapi import APIRouter, Body, HTTPException
from pydantic import ValidationError

from core.errors import NoConvergence, OramError
from core.experiments import EXPERIMENT_KINDS, ExperimentConfig, run_experiment
from core.records import json_safe

logger = logging.getLogger(__name__)

router = APIRouter()


@router.get("/")
async def list_experiments_endpoint():
    return {"kinds": list(EXPERIMENT_KINDS)}


@router.post("/{kind}")
def run_experiment_endpoint(kind: str, params: Optional[Dict[str, Any]] = Body(None)):
    """Runs one experiment kind with ExperimentConfig fields given as a JSON object; no files are written."""
    if kind not in EXPERIMENT_KINDS:
        raise HTTPException(status_code=404, detail=f"Unknown experiment kind '{kind}'.")
    try:
        config = ExperimentConfig(**(params or {})).model_copy(update={"output": None})
        result = run_experiment(kind, config)
        return {"kind": kind, "passed": result.passed, "rows": json_safe(result.rows)}
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except NoConvergence as e:
        raise HTTPException(status_code=500, detail=str(e))
    except (OramError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Experiment {kind} failed unexpectedly: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"An internal server error occurred: {str(e)}")
