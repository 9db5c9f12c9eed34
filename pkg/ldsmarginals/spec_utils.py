"""Parsing of the compact strings used on the command line and in configs.

Target specs look like ``family:key=value,key=value``. A comma-separated
token without ``=`` extends the list of the preceding key, so
``skewed:shapes=1,2,3,4,5`` gives five shapes. Every family accepts
``offset=<log factor>``, which multiplies the target by exp(offset).

    gaussian:dim=5[,mean=...][,sd=...][,rho=0.3]
    skewed:shapes=1,2,3 | skewed:dim=3
    bimodal:dim=5,axis=2,sep=6,w=0.5      (axis is 1-based)
    constant:dim=2

Method specs are ``grid``, ``stm`` or ``stm<degree>``, ``qa``,
``cx<degree>``, ``half-gaussian`` and ``oracle``.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .errors import InvalidArgumentError
from .pointset import IntegrationRegion
from .targets import (TargetDensity, make_bimodal, make_constant, make_gaussian,
                      make_skewed, region_from_bounds)

logger = logging.getLogger(__name__)

SpecParams = Dict[str, List[float]]

TARGET_FAMILIES = ("gaussian", "skewed", "bimodal", "constant")

_METHOD_PATTERN = re.compile(r'^(grid|qa|half-gaussian|oracle|stm|cx)(\d+)?$')


@dataclass(frozen=True)
class MethodSpec:
    """A marginalization method and its polynomial degree, when it has one."""
    name: str
    degree: int | None = None

    @property
    def tag(self) -> str:
        if self.name == "cx":
            return f"cx{self.degree}"
        return self.name


def _number(token: str, spec: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise InvalidArgumentError(f"{spec!r}: {token!r} is not a number") from exc


def split_spec(spec: str) -> tuple[str, SpecParams]:
    """Split ``family:key=v,key=v1,v2`` into the family and numeric lists."""
    text = spec.strip()
    family, _, body = text.partition(":")
    family = family.strip().lower()
    if not family:
        raise InvalidArgumentError(f"{spec!r}: missing target family")

    params: SpecParams = {}
    key = None
    for token in filter(None, (t.strip() for t in body.split(","))):
        if "=" in token:
            key, _, value = token.partition("=")
            key = key.strip().lower()
            if key in params:
                raise InvalidArgumentError(f"{spec!r}: {key} given twice")
            params[key] = [_number(value.strip(), spec)]
        elif key is None:
            raise InvalidArgumentError(f"{spec!r}: value {token!r} has no key")
        else:
            params[key].append(_number(token, spec))
    return family, params


def _scalar(params: SpecParams, key: str, spec: str, default: float | None = None) -> float:
    if key not in params:
        if default is None:
            raise InvalidArgumentError(f"{spec!r}: missing {key}=")
        return default
    values = params[key]
    if len(values) != 1:
        raise InvalidArgumentError(f"{spec!r}: {key} takes one value, got {len(values)}")
    return values[0]


def _integer(params: SpecParams, key: str, spec: str, default: int | None = None) -> int:
    value = _scalar(params, key, spec, None if default is None else float(default))
    if value != int(value):
        raise InvalidArgumentError(f"{spec!r}: {key} must be an integer, got {value}")
    return int(value)


def _vector(params: SpecParams, key: str, dim: int, default: float, spec: str) -> np.ndarray:
    values = params.get(key, [default])
    if len(values) == 1:
        return np.full(dim, values[0])
    if len(values) != dim:
        raise InvalidArgumentError(f"{spec!r}: {key} needs 1 or {dim} values, got {len(values)}")
    return np.asarray(values)


def _check_keys(params: SpecParams, allowed: set[str], spec: str) -> None:
    unknown = sorted(set(params) - allowed - {"offset"})
    if unknown:
        raise InvalidArgumentError(f"{spec!r}: unknown parameters {', '.join(unknown)}")


def parse_target_spec(spec: str) -> TargetDensity:
    """Build a target density from its compact string form."""
    family, params = split_spec(spec)
    if family == "gaussian":
        _check_keys(params, {"dim", "mean", "sd", "rho"}, spec)
        dim = _integer(params, "dim", spec)
        if dim < 1:
            raise InvalidArgumentError(f"{spec!r}: dim must be positive")
        sd = _vector(params, "sd", dim, 1.0, spec)
        rho = _scalar(params, "rho", spec, 0.0)
        corr = np.full((dim, dim), rho)
        np.fill_diagonal(corr, 1.0)
        target = make_gaussian(_vector(params, "mean", dim, 0.0, spec),
                               corr * np.outer(sd, sd))
    elif family == "skewed":
        _check_keys(params, {"dim", "shapes"}, spec)
        if "shapes" in params:
            shapes = params["shapes"]
            dim = _integer(params, "dim", spec, len(shapes))
        else:
            dim = _integer(params, "dim", spec)
            shapes = list(range(1, dim + 1))
        target = make_skewed(dim, shapes)
    elif family == "bimodal":
        _check_keys(params, {"dim", "axis", "sep", "w"}, spec)
        dim = _integer(params, "dim", spec)
        axis = _integer(params, "axis", spec, 1)
        target = make_bimodal(dim, axis - 1, _scalar(params, "sep", spec, 6.0),
                              _scalar(params, "w", spec, 0.5))
    elif family == "constant":
        _check_keys(params, {"dim"}, spec)
        target = make_constant(_integer(params, "dim", spec))
    else:
        raise InvalidArgumentError(
            f"{spec!r}: unknown target family {family!r}, expected one of "
            f"{', '.join(TARGET_FAMILIES)}"
        )

    offset = _scalar(params, "offset", spec, 0.0)
    if offset:
        logger.debug(f"{target.label}: log offset {offset}")
        target = target.shifted(offset)
    return target


def parse_region(text: str) -> IntegrationRegion:
    """Region from ``a1,b1,a2,b2,...``."""
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    return region_from_bounds([_number(t, text) for t in tokens])


def parse_method(text: str) -> MethodSpec:
    """Method name with its optional degree suffix."""
    match = _METHOD_PATTERN.match(text.strip().lower())
    if not match:
        raise InvalidArgumentError(
            f"unknown method {text!r}, expected grid, stm[N], qa, cx<N>, "
            f"half-gaussian or oracle"
        )
    name, digits = match.groups()
    if digits is not None and name not in ("stm", "cx"):
        raise InvalidArgumentError(f"method {name} takes no degree, got {text!r}")
    if name == "cx":
        if digits is None:
            raise InvalidArgumentError("cx needs a correction degree, e.g. cx3")
        if int(digits) < 3:
            raise InvalidArgumentError(f"correction degree must be at least 3, got {digits}")
    return MethodSpec(name, int(digits) if digits is not None else None)
