from fastapi import APIRouter
from ..schemas import WallTestRequest, WallTestResponse
from ..engine import engine

router = APIRouter(prefix="/walls", tags=["walls"])


@router.post("/test", response_model=WallTestResponse)
async def wall_test(payload: WallTestRequest) -> WallTestResponse:
    return engine.wall_test(payload)
