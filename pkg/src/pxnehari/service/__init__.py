"""HTTP service layer: pydantic schemas, request runner, FastAPI app."""
