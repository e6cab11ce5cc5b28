"""Weak elliptic-curve assessment over prime fields.

Order computation is an exhaustive affine point count plus the point at
infinity, viable for p below 2^20. Larger moduli go to a remote
computer-algebra endpoint when one is configured, otherwise the assessment
is skipped with an explanation (never a hard failure).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import sympy

from .errors import CryptoAuditError


@dataclass(frozen=True)
class CurveParams:
    """y^2 = x^3 + a*x + b over F_p."""

    p: int
    a: int
    b: int
    claimed_order: int | None = None

    def __post_init__(self) -> None:
        if self.p < 3:
            raise ValueError(f"modulus p must be >= 3, got {self.p}")
        if not sympy.isprime(self.p):
            raise ValueError(f"modulus p={self.p} is not prime")
        if not 0 <= self.a < self.p:
            raise ValueError(f"coefficient a={self.a} not reduced into [0, p)")
        if not 0 <= self.b < self.p:
            raise ValueError(f"coefficient b={self.b} not reduced into [0, p)")


class CurveFlag(str, Enum):
    SINGULAR = "singular"
    ANOMALOUS = "anomalous"
    SMOOTH_ORDER = "smooth_order"
    SMALL_ORDER = "small_order"
    LOW_EMBEDDING_DEGREE_CHECKED = "low_embedding_degree_checked"


class CurveExecutorKind(str, Enum):
    LOCAL_BRUTEFORCE = "local_bruteforce"
    REMOTE_CAS = "remote_cas"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class CurveAssessment:
    order: int | None
    flags: frozenset[CurveFlag]
    evidence: str
    executor: CurveExecutorKind


@dataclass(frozen=True)
class CurveExecutorConfig:
    kind: str = "local"  # "local" or "remote"
    remote_endpoint: str | None = None
    local_prime_bound: int = 2**20
    smooth_bound: int = 2**16
    small_order_bound: int = 2**16
    remote_timeout: float = 60.0


def discriminant_is_zero(p: int, a: int, b: int) -> bool:
    return (4 * a**3 + 27 * b**2) % p == 0


def count_points(p: int, a: int, b: int) -> int:
    """Group order by exhaustive count: affine solutions plus infinity.

    int64 stays safe: with p < 2^20 every intermediate is below 2^40.
    """
    x = np.arange(p, dtype=np.int64)
    rhs = (x * x % p * x + a * x + b) % p
    square_counts = np.bincount(x * x % p, minlength=p)
    return int(square_counts[rhs].sum()) + 1


def hasse_interval(p: int) -> tuple[int, int]:
    width = 2 * math.isqrt(4 * p)  # floor(2*sqrt(p)) computed exactly: isqrt(4p)
    return p + 1 - width, p + 1 + width


def _assess_from_order(
    params: CurveParams, order: int, executor: CurveExecutorKind, cfg: CurveExecutorConfig
) -> CurveAssessment:
    p = params.p
    low, high = hasse_interval(p)
    if not low <= order <= high:
        raise CryptoAuditError(
            f"computed order {order} violates the Hasse bound [{low}, {high}] for p={p}"
        )

    flags: set[CurveFlag] = set()
    notes = [f"order={order}", f"hasse_interval=[{low}, {high}]"]

    if order == p:
        flags.add(CurveFlag.ANOMALOUS)
        notes.append("order equals p: additive-transfer attacks solve the discrete log")

    if order < cfg.small_order_bound:
        flags.add(CurveFlag.SMALL_ORDER)
        notes.append(f"order is below {cfg.small_order_bound}: brute-force territory")

    factors = sympy.factorint(order) if order > 1 else {}
    largest_prime = max(factors, default=1)
    if largest_prime < cfg.smooth_bound:
        flags.add(CurveFlag.SMOOTH_ORDER)
        notes.append(
            f"largest prime factor {largest_prime} < {cfg.smooth_bound}: "
            "Pohlig-Hellman splits the discrete log"
        )
    if factors:
        notes.append(
            "order factorization: "
            + " * ".join(f"{q}^{e}" if e > 1 else str(q) for q, e in sorted(factors.items()))
        )

    # Embedding-degree (MOV) check for the largest prime-order subgroup;
    # only possible when that prime differs from p.
    if largest_prime > 1 and largest_prime != p:
        embedding_degree = int(sympy.n_order(p % largest_prime, largest_prime))
        flags.add(CurveFlag.LOW_EMBEDDING_DEGREE_CHECKED)
        if embedding_degree <= 6:
            notes.append(
                f"embedding degree {embedding_degree} for subgroup of order {largest_prime}: "
                "pairing transfer (MOV) applies"
            )
        else:
            notes.append(f"embedding degree {embedding_degree} (no pairing transfer)")

    if params.claimed_order is not None and params.claimed_order != order:
        notes.append(
            f"claimed order {params.claimed_order} disagrees with computed order {order}"
        )

    return CurveAssessment(
        order=order,
        flags=frozenset(flags),
        evidence="; ".join(notes),
        executor=executor,
    )


def build_cas_script(params: CurveParams) -> str:
    """Computer-algebra script (Sage-compatible syntax) for remote execution."""
    return (
        f"p = {params.p}\n"
        f"a = {params.a}\n"
        f"b = {params.b}\n"
        "E = EllipticCurve(GF(p), [a, b])\n"
        'print("order=%d" % E.order())\n'
    )


def _parse_cas_output(text: str) -> int:
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("order="):
            return int(line.split("=", 1)[1])
    raise ValueError(f"no order= line in remote output: {text[:200]!r}")


def _run_remote(params: CurveParams, cfg: CurveExecutorConfig) -> CurveAssessment:
    import requests

    script = build_cas_script(params)
    try:
        response = requests.post(
            cfg.remote_endpoint,
            json={"script": script},
            timeout=cfg.remote_timeout,
        )
        response.raise_for_status()
        order = _parse_cas_output(response.text)
    except Exception as exc:
        return CurveAssessment(
            order=None,
            flags=frozenset(),
            evidence=f"remote computer-algebra execution failed: {exc}; assessment skipped",
            executor=CurveExecutorKind.SKIPPED,
        )
    return _assess_from_order(params, order, CurveExecutorKind.REMOTE_CAS, cfg)


def assess_curve(
    params: CurveParams, cfg: CurveExecutorConfig = CurveExecutorConfig()
) -> CurveAssessment:
    """Flag weak curves: singular, anomalous, smooth or small order."""
    if discriminant_is_zero(params.p, params.a, params.b):
        return CurveAssessment(
            order=None,
            flags=frozenset({CurveFlag.SINGULAR}),
            evidence=(
                f"discriminant 4a^3 + 27b^2 = 0 (mod {params.p}): "
                "not an elliptic curve; the singular group is attackable directly"
            ),
            executor=CurveExecutorKind.LOCAL_BRUTEFORCE,
        )

    if cfg.kind == "remote" and cfg.remote_endpoint:
        return _run_remote(params, cfg)

    if params.p < cfg.local_prime_bound:
        order = count_points(params.p, params.a, params.b)
        return _assess_from_order(params, order, CurveExecutorKind.LOCAL_BRUTEFORCE, cfg)

    if cfg.remote_endpoint:
        return _run_remote(params, cfg)

    return CurveAssessment(
        order=None,
        flags=frozenset(),
        evidence=(
            f"p={params.p} is at or above the local brute-force bound "
            f"{cfg.local_prime_bound} and no remote computer-algebra endpoint is "
            "configured; assessment skipped"
        ),
        executor=CurveExecutorKind.SKIPPED,
    )
