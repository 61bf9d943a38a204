# main.py
import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from core.settings import ARTIFACT_VERSION, get_settings

settings = get_settings()
logging.basicConfig(level=settings.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)

# ------------------------------
# FastAPI App Setup
# ------------------------------
app = FastAPI(title="Oblivious RAM Lab API", version=ARTIFACT_VERSION)

origins = [
    "http://localhost",
    "http://localhost:8080",
    "http://127.0.0.1",
    "http://127.0.0.1:8080",
]
app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# ------------------------------
# Include Routers
# ------------------------------
from routers import experiments, oram, workloads

app.include_router(oram.router, prefix="/api/oram", tags=["ORAM Sessions"])
app.include_router(experiments.router, prefix="/api/experiments", tags=["Experiments"])
app.include_router(workloads.router, prefix="/api/workloads", tags=["Workloads"])


@app.get("/")
async def root():
    return {"message": "Oblivious RAM Lab is running!", "version": ARTIFACT_VERSION}


# ------------------------------
# Local Development Only
# ------------------------------
if __name__ == "__main__":
    import uvicorn
    uvicorn.run("main:app", host="127.0.0.1", port=8000, reload=True)
