"""JSON network and effort files.

Node ids in files are 1-based; everything returned here is 0-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Union

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, Field

from .errors import EffortNetError, ValidationError
from .model import (
    Attenuation,
    EpParams,
    EpProduct,
    Kind,
    LinearProduct,
    NetworkTopology,
    ProductivityModel,
    RewardScheme,
    effort_profile,
    validate_topology,
)


class ParseError(EffortNetError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MuOne(_Strict):
    kind: Literal["one"]


class MuPower(_Strict):
    kind: Literal["power"]
    alpha: float = Field(ge=0)


class NetworkSpecFile(_Strict):
    nodes: int = Field(ge=1)
    edges: list[tuple[int, int]] = Field(default_factory=list)
    kind: Literal["hierarchy", "dag"] = "hierarchy"
    beta: float = Field(ge=0)
    b: float = Field(ge=0)
    mu: Union[MuOne, MuPower] = Field(default_factory=lambda: MuOne(kind="one"), discriminator="kind")
    productivity: Literal["ep", "linear"] = "ep"
    h: list[tuple[int, int, float]] = Field(default_factory=list)


class EffortFile(_Strict):
    x: list[float]


@dataclass
class NetworkBundle:
    net: NetworkTopology
    model: ProductivityModel
    params: EpParams
    H: RewardScheme

    def with_beta(self, beta: float) -> NetworkBundle:
        params = EpParams(beta, self.params.b, self.params.mu)
        model = EpProduct(params) if isinstance(self.model, EpProduct) else self.model
        return NetworkBundle(self.net, model, params, self.H)

    def with_scheme(self, H: RewardScheme) -> NetworkBundle:
        return NetworkBundle(self.net, self.model, self.params, H)


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _schema_error(path, exc: pydantic.ValidationError) -> ValidationError:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: field '{loc}': {err['msg']} (got {err.get('input')!r})")
    return ValidationError("\n".join(lines))


def parse_network(data: dict, source: str = "<network>") -> NetworkBundle:
    try:
        spec = NetworkSpecFile.model_validate(data)
    except pydantic.ValidationError as exc:
        raise _schema_error(source, exc) from None
    try:
        net = validate_topology([(i - 1, j - 1) for i, j in spec.edges], spec.nodes, Kind(spec.kind))
    except ValidationError as exc:
        raise type(exc)(f"{source}: field 'edges': {exc}") from None
    mu = Attenuation("one") if spec.mu.kind == "one" else Attenuation("power", spec.mu.alpha)
    params = EpParams(spec.beta, spec.b, mu)
    model = EpProduct(params) if spec.productivity == "ep" else LinearProduct()
    try:
        H = RewardScheme.from_entries(net, [(i - 1, j - 1, v) for i, j, v in spec.h])
    except ValidationError as exc:
        raise type(exc)(f"{source}: field 'h': {exc}") from None
    return NetworkBundle(net, model, params, H)


def load_network(path) -> NetworkBundle:
    return parse_network(_read_json(path), str(path))


def dump_network(bundle: NetworkBundle) -> dict:
    """Inverse of :func:`parse_network` (1-based ids)."""
    mu = bundle.params.mu
    return {
        "nodes": bundle.net.n,
        "edges": [[i + 1, j + 1] for i, j in bundle.net.edges],
        "kind": bundle.net.kind.value,
        "beta": bundle.params.beta,
        "b": bundle.params.b,
        "mu": {"kind": "one"} if mu.kind == "one" else {"kind": "power", "alpha": mu.alpha},
        "productivity": "ep" if isinstance(bundle.model, EpProduct) else "linear",
        "h": [[i + 1, j + 1, v] for i, j, v in bundle.H.triples()],
    }


def load_efforts(path, n: int) -> np.ndarray:
    data = _read_json(path)
    try:
        spec = EffortFile.model_validate(data)
    except pydantic.ValidationError as exc:
        raise _schema_error(path, exc) from None
    try:
        return effort_profile(spec.x, n)
    except ValidationError as exc:
        raise ValidationError(f"{path}: field 'x': {exc}") from None
