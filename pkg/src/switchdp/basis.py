"""Polynomial basis sets for linear-in-parameter value approximation.

Two families are supported:

* ``powers(dim=1,min=a,max=b)``: univariate ``x^a .. x^b``.
* ``monomials(dim=n,maxdeg=d,constant=true)``: every monomial in ``n``
  variables of total degree ``<= d`` in graded-lexicographic order
  (degree ascending, then exponent of ``x0`` descending, and so on).

The descriptor string is what gets persisted next to trained weights, so the
term order it denotes must never change.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import comb

import numpy as np

from .model import ArgumentError


class BasisDescriptorError(ArgumentError):
    """A basis descriptor string could not be parsed."""


@dataclass(frozen=True)
class BasisSet:
    """Ordered list of monomials over R^n.

    ``exponents`` has shape ``(m, n)``; row ``t`` holds the exponents of
    term ``t``.
    """

    exponents: np.ndarray
    descriptor: str

    def __post_init__(self):
        exps = np.array(self.exponents, dtype=np.int64)
        if exps.ndim != 2 or exps.shape[0] < 1 or exps.shape[1] < 1:
            raise ArgumentError("basis needs at least one term over at least one variable")
        if np.any(exps < 0):
            raise ArgumentError("monomial exponents must be non-negative")
        exps.setflags(write=False)
        object.__setattr__(self, "exponents", exps)

    @property
    def input_dim(self) -> int:
        return self.exponents.shape[1]

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    @property
    def max_degree(self) -> int:
        return int(self.exponents.max())

    def evaluate_batch(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on ``(..., n)`` inputs, returning ``(..., m)``.

        Powers are built by repeated multiplication so ``x^j`` for integer
        ``x`` and moderate ``j`` is exact.
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ArgumentError(f"basis expects {self.input_dim}-dimensional input, got {x.shape[-1]}")
        top = self.max_degree
        # table[..., d, j] = x_d ** j
        table = np.empty(x.shape + (top + 1,))
        table[..., 0] = 1.0
        for j in range(1, top + 1):
            table[..., j] = table[..., j - 1] * x
        out = np.ones(x.shape[:-1] + (self.size,))
        for d in range(self.input_dim):
            out *= table[..., d, self.exponents[:, d]]
        return out

    def scale_over_box(self, lower, upper) -> np.ndarray:
        """Largest ``|phi_t(x)|`` over the box, per term (attained at a corner)."""
        reach = np.maximum(np.abs(np.asarray(lower, float)), np.abs(np.asarray(upper, float)))
        scale = np.prod(reach[None, :] ** self.exponents, axis=1)
        scale[scale == 0.0] = 1.0
        return scale


def evaluate(basis: BasisSet, x) -> np.ndarray:
    """Evaluate ``basis`` at a single state, returning ``m`` values."""
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.size != basis.input_dim:
        raise ArgumentError(f"basis expects {basis.input_dim}-dimensional input, got {arr.size}")
    return basis.evaluate_batch(arr)


def univariate_powers(j_min: int, j_max: int) -> BasisSet:
    if not 0 <= j_min <= j_max:
        raise ArgumentError(f"need 0 <= j_min <= j_max, got ({j_min}, {j_max})")
    exps = np.arange(j_min, j_max + 1).reshape(-1, 1)
    return BasisSet(exps, f"powers(dim=1,min={j_min},max={j_max})")


def graded_lex_exponents(n: int, d: int) -> list:
    """All exponent tuples in ``n`` variables with total degree ``<= d``."""

    def fixed_total(vars_left, total):
        if vars_left == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in fixed_total(vars_left - 1, total - first):
                yield (first,) + rest

    return [e for deg in range(d + 1) for e in fixed_total(n, deg)]


def total_degree_monomials(n: int, d: int, constant: bool = True) -> BasisSet:
    if n < 1 or d < 0:
        raise ArgumentError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    exps = graded_lex_exponents(n, d)
    if not constant:
        exps = exps[1:]
        if not exps:
            raise ArgumentError("basis without constant needs d >= 1")
    flag = "true" if constant else "false"
    return BasisSet(np.array(exps), f"monomials(dim={n},maxdeg={d},constant={flag})")


def expected_size(n: int, d: int) -> int:
    return comb(n + d, n)


_DESCRIPTOR = re.compile(r"^\s*(?P<kind>[a-z]+)\((?P<args>[^()]*)\)\s*$")


def parse_descriptor(text: str) -> BasisSet:
    """Rebuild a basis from its descriptor string."""
    match = _DESCRIPTOR.match(text)
    if not match:
        raise BasisDescriptorError(f"malformed basis descriptor: {text!r}")
    args = {}
    for part in filter(None, (p.strip() for p in match["args"].split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise BasisDescriptorError(f"expected key=value in {text!r}, got {part!r}")
        args[key.strip()] = value.strip()

    def integer(key):
        try:
            return int(args[key])
        except KeyError:
            raise BasisDescriptorError(f"descriptor {text!r} is missing {key!r}") from None
        except ValueError:
            raise BasisDescriptorError(f"descriptor field {key!r} must be an integer") from None

    kind = match["kind"]
    if kind == "powers":
        if integer("dim") != 1:
            raise BasisDescriptorError("powers basis is univariate (dim=1)")
        return univariate_powers(integer("min"), integer("max"))
    if kind == "monomials":
        constant = args.get("constant", "true").lower()
        if constant not in ("true", "false"):
            raise BasisDescriptorError("constant must be true or false")
        return total_degree_monomials(integer("dim"), integer("maxdeg"), constant == "true")
    raise BasisDescriptorError(f"unknown basis family {kind!r}")
