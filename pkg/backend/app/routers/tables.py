from fastapi import APIRouter, Query
from ..schemas import TableResponse, TypeList
from ..engine import engine

router = APIRouter(prefix="/tables", tags=["tables"])


@router.get("/{n}", response_model=TableResponse)
async def get_table(n: int, types: TypeList = Query("candidate")) -> TableResponse:
    return engine.tabulate(n, types)
