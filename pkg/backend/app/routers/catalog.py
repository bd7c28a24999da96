from typing import List, Optional
from fastapi import APIRouter
from ..catalog import FixtureReport
from ..engine import engine

router = APIRouter(prefix="/catalog", tags=["catalog"])


@router.get("", response_model=List[str])
async def list_catalog() -> List[str]:
    return engine.catalog()


@router.get("/{name}", response_model=FixtureReport)
async def verify(name: str, n: Optional[int] = None) -> FixtureReport:
    return engine.verify(name, n)
