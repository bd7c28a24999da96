from fastapi import APIRouter
from ..schemas import OrbitRequest, OrbitResponse
from ..engine import engine

router = APIRouter(prefix="/orbits", tags=["orbits"])


@router.post("/compare", response_model=OrbitResponse)
async def compare(payload: OrbitRequest) -> OrbitResponse:
    return engine.orbit(payload)
