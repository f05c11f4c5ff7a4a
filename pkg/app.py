"""
Prompt Tuning Service
FastAPI application for parameter accounting, prompt interpretation and
evaluation of tuned checkpoints.
"""

import os
from typing import Dict, Optional

from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ValidationError

from config.settings import RunConfig, default_out_dir
from config.templates import TEMPLATES
from errors import PPTError
from orchestrator.checkpoint import read_checkpoint
from orchestrator.reporter import format_interpretation
from orchestrator.runner import ExperimentRunner

# Load environment variables
load_dotenv()

app = FastAPI(
    title="Prompt Tuning Service",
    description="Learnable-parameter accounting, learned-prompt interpretation and evaluation",
    version="1.0.0",
)


# API Models
class DryRunRequest(BaseModel):
    config: Dict


class CheckpointRequest(BaseModel):
    checkpoint: str


class EvaluateRequest(BaseModel):
    checkpoint: str
    templates: bool = False
    data_root: Optional[str] = None


def _require_checkpoint(path: str) -> None:
    if not os.path.isfile(path):
        raise HTTPException(status_code=404, detail=f"Checkpoint {path} not found")


# Endpoints
@app.get("/")
def root():
    """Root endpoint with API information."""
    return {
        "name": "Prompt Tuning Service",
        "version": "1.0.0",
        "endpoints": {
            "health": "/health",
            "templates": "/templates",
            "dry_run": "/dry-run",
            "interpret": "/interpret",
            "evaluate": "/evaluate",
        },
    }


@app.get("/health")
def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "out_dir": default_out_dir()}


@app.get("/templates")
def list_templates():
    """Get list of manual prompt templates."""
    return {"count": len(TEMPLATES), "templates": TEMPLATES}


@app.post("/dry-run")
def dry_run(request: DryRunRequest):
    """
    Validate a config and return its learnable-parameter breakdown.
    """
    try:
        cfg = RunConfig.model_validate(request.config)
        summary = ExperimentRunner(cfg, default_out_dir()).dry_run()
        total, groups = summary["learnable"]
        return {
            "config_hash": summary["config_hash"],
            "learnable": total,
            "groups": groups,
            "expected_learnable": summary["expected_learnable"],
        }
    except (PPTError, ValidationError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/interpret")
def interpret(request: CheckpointRequest):
    """
    Nearest vocabulary word of every learned context vector.
    """
    _require_checkpoint(request.checkpoint)
    try:
        cfg = read_checkpoint(request.checkpoint).run_config
        rows = ExperimentRunner(cfg, default_out_dir()).interpret(request.checkpoint)
        return {"rows": rows, "table": format_interpretation(rows)}
    except PPTError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/evaluate")
def evaluate(request: EvaluateRequest):
    """
    Evaluate a tuned checkpoint on its test split.
    """
    _require_checkpoint(request.checkpoint)
    try:
        cfg = read_checkpoint(request.checkpoint).run_config
        if request.data_root:
            cfg = cfg.with_overrides(dataset="off", data_root=request.data_root)
        summary = ExperimentRunner(cfg, default_out_dir()).run_eval(request.checkpoint, templates=request.templates)
        return {
            "metrics": summary["metrics"],
            "class_names": summary["class_names"],
            "baselines": summary.get("baselines", {}),
        }
    except (PPTError, ValidationError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
