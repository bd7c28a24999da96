from fastapi import APIRouter
from ..schemas import ChamberQuery, ChamberResponse
from ..engine import engine

router = APIRouter(prefix="/chambers", tags=["chambers"])


@router.post("", response_model=ChamberResponse)
async def chamber(payload: ChamberQuery) -> ChamberResponse:
    return engine.chamber(payload)
