import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import LOG_FORMAT, get_settings
from .errors import ConfigurationError, EnumerationLimitError, InputError, OnWallError
from .routers import catalog, chambers, orbits, tables, walls

logging.basicConfig(level=get_settings().log_level, format=LOG_FORMAT)

app = FastAPI(
    title="wallkit API",
    description=(
        "wallkit - exact wall divisors and Kahler chambers for manifolds of K3^[n] type. "
        "This API exposes wall-type tables, Markman and Bayer-Macri wall tests, "
        "Eichler orbit comparison, chamber queries for Picard lattices and the fixture catalog."
    ),
    version="0.1.0",
)

app.include_router(tables.router)
app.include_router(walls.router)
app.include_router(orbits.router)
app.include_router(chambers.router)
app.include_router(catalog.router)


@app.exception_handler(OnWallError)
async def on_wall(request: Request, exc: OnWallError):
    wall = None if exc.wall is None else list(exc.wall.D.coords)
    return JSONResponse(status_code=409, content={"detail": str(exc), "wall": wall})


@app.exception_handler(InputError)
async def bad_input(request: Request, exc: InputError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(ConfigurationError)
async def bad_configuration(request: Request, exc: ConfigurationError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(EnumerationLimitError)
async def too_large(request: Request, exc: EnumerationLimitError):
    return JSONResponse(status_code=503, content={"detail": str(exc)})


@app.get("/health")
async def health():
    return {"status": "ok"}
