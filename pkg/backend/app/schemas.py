from typing import Dict, List, Literal, Optional, Union

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, model_validator


# Exact rationals travel as ints or "p/q" strings, never floats.
Rat = Union[int, str]
TypeList = Literal["candidate", "confirmed"]
Blocks = Dict[str, Union[int, List[int]]]


class WallTypeRow(BaseModel):
    n: int
    square: int
    div: int
    ray_square: str


class TableResponse(BaseModel):
    n: int
    types: TypeList
    rows: List[WallTypeRow]
    caveat: Optional[str] = None


class WallTestRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=2)
    coords: Optional[List[int]] = None  # 23 coordinates in the fixed basis of L_n
    blocks: Optional[Blocks] = None  # e.g. {"U1": [1, -1], "delta": 1}
    square: Optional[int] = None
    div: Optional[int] = None

    @model_validator(mode="after")
    def _one_input(self) -> "WallTestRequest":
        given = [self.coords is not None, self.blocks is not None, self.square is not None or self.div is not None]
        if sum(given) != 1:
            raise ValueError("give exactly one of coords, blocks or (square, div)")
        if given[2] and (self.square is None or self.div is None):
            raise ValueError("a wall type needs both square and div")
        return self


class WitnessOut(BaseModel):
    condition: str
    lattice: str
    gram: List[List[int]]
    vectors: List[List[int]]
    pairing_data: List[int]
    v: Optional[List[int]] = None
    verified: bool


class WallTestResponse(BaseModel):
    n: int
    divisor: List[int]
    square: int
    div: int
    ray_square: str
    ht_bound: bool
    detected: bool
    witness: Optional[WitnessOut] = None


class OrbitRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=2)
    v: Union[List[int], Blocks]
    w: Union[List[int], Blocks]
    assume_eichler: bool = False


class InvariantsOut(BaseModel):
    square: int
    div: int
    disc: List[int]
    invariant_factors: List[int]


class OrbitResponse(BaseModel):
    n: int
    v: InvariantsOut
    w: InvariantsOut
    same_orbit: bool


class ChamberQuery(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=2)
    pic_gram: List[List[int]]
    embed: List[List[int]]  # 23 x rho (columns are images) or rho x 23
    omega: Optional[List[Rat]] = None
    reference: Optional[List[Rat]] = None
    alpha: Optional[List[Rat]] = None
    beta: Optional[List[Rat]] = None
    types: TypeList = "candidate"
    search_bound: Optional[int] = Field(
        default=None, ge=1, validation_alias=AliasChoices("bound", "search_bound")
    )

    @model_validator(mode="after")
    def _pair_or_nothing(self) -> "ChamberQuery":
        if (self.alpha is None) != (self.beta is None):
            raise ValueError("alpha and beta must be given together")
        if self.omega is None and self.reference is None:
            raise ValueError("give omega or a reference class")
        return self


class WallOut(BaseModel):
    D: List[int]
    square: int
    div: int
    ray: List[Rat]
    ray_square: str
    minus_two: bool
    certificate: Optional[List[Rat]] = None


class RayOut(BaseModel):
    ray: List[Rat]
    ray_square: str


class ChamberResponse(BaseModel):
    n: int
    reference: List[Rat]
    walls_crossed: List[WallOut]
    supporting: List[WallOut]
    rays: List[RayOut]
    completeness: str
    caveat: Optional[str] = None


class CheckOrbitsResponse(BaseModel):
    seed: int
    samples: int
    n_values: List[int]
    violations: int
    failures: List[str] = []
