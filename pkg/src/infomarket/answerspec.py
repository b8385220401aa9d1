"""Machine-checkable answer sets.

A buyer fixes the set of admissible answers up front; membership of any
submitted answer must be decidable deterministically, with no judgment call.
Three variants cover the useful cases: an enumerated list of options, an
integer range, and a fixed-point decimal range with an explicit scale.

Free text is deliberately unsupported: the settlement rules hinge on an
objective outside-the-set test, so every variant must admit one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union


class Membership(Enum):
    IN_SET = "in_set"
    OUTSIDE_SET = "outside_set"


class InvalidSpec(Exception):
    """Base class for answer-spec validation failures."""


class EmptyOptionSet(InvalidSpec):
    pass


class DuplicateOption(InvalidSpec):
    pass


class EmptyRange(InvalidSpec):
    pass


class VacuousSpec(InvalidSpec):
    """A spec admitting exactly one answer carries no information."""


class Unparseable(Exception):
    """Raw answer cannot be interpreted under the spec variant."""


@dataclass(frozen=True, slots=True)
class AnswerValue:
    """A submitted answer plus its canonical form under some spec."""

    raw: str
    canonical: str


@dataclass(frozen=True, slots=True)
class EnumeratedSpec:
    """A closed list of named options, matched case-insensitively."""

    options: tuple[str, ...]

    def __init__(self, options) -> None:
        object.__setattr__(self, "options", tuple(str(o).strip() for o in options))


@dataclass(frozen=True, slots=True)
class IntegerRangeSpec:
    lo: int
    hi: int


@dataclass(frozen=True, slots=True)
class DecimalRangeSpec:
    """Inclusive fixed-point range; bounds held in scaled integer units.

    ``scale`` is the number of decimal digits; an answer with more digits
    than ``scale`` is rejected rather than rounded, so membership never
    depends on a rounding convention.
    """

    lo_units: int
    hi_units: int
    scale: int

    @classmethod
    def parse(cls, lo: str, hi: str, scale: int) -> "DecimalRangeSpec":
        return cls(
            lo_units=_parse_fixed_point(lo, scale),
            hi_units=_parse_fixed_point(hi, scale),
            scale=scale,
        )

    def format_units(self, units: int) -> str:
        return _format_fixed_point(units, self.scale)


AnswerSpec = Union[EnumeratedSpec, IntegerRangeSpec, DecimalRangeSpec]

_INT_RE = re.compile(r"[+-]?[0-9]+")
_FIXED_RE = re.compile(r"([+-]?)([0-9]+)(?:\.([0-9]+))?")


def _parse_int(text: str) -> int:
    # int() is too permissive (underscores, unicode digits); match strictly.
    stripped = text.strip()
    if not _INT_RE.fullmatch(stripped):
        raise Unparseable(f"not a base-10 integer: {text!r}")
    return int(stripped)


def _parse_fixed_point(text: str, scale: int) -> int:
    """Parse a plain decimal literal into scaled integer units.

    At most ``scale`` fractional digits are accepted; missing digits are
    zero-padded. No exponents, no leading/trailing dot.
    """
    stripped = text.strip()
    m = _FIXED_RE.fullmatch(stripped)
    if not m:
        raise Unparseable(f"not a fixed-point decimal: {text!r}")
    sign, int_part, frac_part = m.group(1), m.group(2), m.group(3) or ""
    if len(frac_part) > scale:
        raise Unparseable(
            f"{text!r} has {len(frac_part)} decimal digits, spec allows {scale}"
        )
    units = int(int_part) * 10**scale + int(frac_part.ljust(scale, "0") or "0")
    return -units if sign == "-" else units


def _format_fixed_point(units: int, scale: int) -> str:
    if scale == 0:
        return str(units)
    sign = "-" if units < 0 else ""
    magnitude = abs(units)
    return f"{sign}{magnitude // 10**scale}.{magnitude % 10**scale:0{scale}d}"


def validate_spec(spec: AnswerSpec) -> AnswerSpec:
    """Accept iff all spec invariants hold; raise the first violated rule."""
    if isinstance(spec, EnumeratedSpec):
        if not spec.options:
            raise EmptyOptionSet("option list is empty")
        if any(not o for o in spec.options):
            raise EmptyOptionSet("option text is empty")
        folded = [o.casefold() for o in spec.options]
        if len(set(folded)) != len(folded):
            raise DuplicateOption("options are not distinct after canonicalization")
        if len(spec.options) == 1:
            raise VacuousSpec("a single allowed answer is vacuous")
        return spec
    if isinstance(spec, IntegerRangeSpec):
        if spec.lo > spec.hi:
            raise EmptyRange(f"lo {spec.lo} > hi {spec.hi}")
        if spec.lo == spec.hi:
            raise VacuousSpec("range admits exactly one answer")
        return spec
    if isinstance(spec, DecimalRangeSpec):
        if spec.scale < 0:
            raise InvalidSpec("scale must be >= 0")
        if spec.lo_units > spec.hi_units:
            raise EmptyRange(
                f"lo {spec.format_units(spec.lo_units)} > hi {spec.format_units(spec.hi_units)}"
            )
        if spec.lo_units == spec.hi_units:
            raise VacuousSpec("range admits exactly one answer")
        return spec
    raise InvalidSpec(f"unknown spec type {type(spec).__name__}")


def canonicalize(spec: AnswerSpec, raw: str) -> AnswerValue:
    """Normalize a raw answer under the spec variant.

    Enumerated answers are trimmed and matched case-insensitively against the
    stored options; the stored option text is the canonical form. Range
    answers are parsed strictly and reprinted in canonical digits.
    """
    if isinstance(spec, EnumeratedSpec):
        needle = raw.strip().casefold()
        for option in spec.options:
            if option.casefold() == needle:
                return AnswerValue(raw=raw, canonical=option)
        raise Unparseable(f"{raw!r} matches no allowed option")
    if isinstance(spec, IntegerRangeSpec):
        return AnswerValue(raw=raw, canonical=str(_parse_int(raw)))
    if isinstance(spec, DecimalRangeSpec):
        units = _parse_fixed_point(raw, spec.scale)
        return AnswerValue(raw=raw, canonical=spec.format_units(units))
    raise InvalidSpec(f"unknown spec type {type(spec).__name__}")


def check_membership(spec: AnswerSpec, value: AnswerValue) -> Membership:
    """Total on canonicalized input: exactly InSet or OutsideSet, never an error."""
    if isinstance(spec, EnumeratedSpec):
        return (
            Membership.IN_SET if value.canonical in spec.options else Membership.OUTSIDE_SET
        )
    if isinstance(spec, IntegerRangeSpec):
        number = int(value.canonical)
        return (
            Membership.IN_SET
            if spec.lo <= number <= spec.hi
            else Membership.OUTSIDE_SET
        )
    if isinstance(spec, DecimalRangeSpec):
        units = _parse_fixed_point(value.canonical, spec.scale)
        return (
            Membership.IN_SET
            if spec.lo_units <= units <= spec.hi_units
            else Membership.OUTSIDE_SET
        )
    raise InvalidSpec(f"unknown spec type {type(spec).__name__}")


def evaluate_answer(spec: AnswerSpec, raw: str) -> tuple[Optional[AnswerValue], Membership]:
    """Canonicalize then test membership; unparseable input is OutsideSet."""
    try:
        value = canonicalize(spec, raw)
    except Unparseable:
        return None, Membership.OUTSIDE_SET
    return value, check_membership(spec, value)


# -- JSON wire format ---------------------------------------------------

def spec_to_dict(spec: AnswerSpec) -> dict:
    if isinstance(spec, EnumeratedSpec):
        return {"variant": "Enumerated", "options": list(spec.options)}
    if isinstance(spec, IntegerRangeSpec):
        return {"variant": "IntegerRange", "lo": spec.lo, "hi": spec.hi}
    if isinstance(spec, DecimalRangeSpec):
        return {
            "variant": "DecimalRange",
            "lo": spec.format_units(spec.lo_units),
            "hi": spec.format_units(spec.hi_units),
            "scale": spec.scale,
        }
    raise InvalidSpec(f"unknown spec type {type(spec).__name__}")


def spec_from_dict(data: dict) -> AnswerSpec:
    try:
        variant = data["variant"]
        if variant == "Enumerated":
            return EnumeratedSpec(options=data["options"])
        if variant == "IntegerRange":
            return IntegerRangeSpec(lo=int(data["lo"]), hi=int(data["hi"]))
        if variant == "DecimalRange":
            scale = int(data["scale"])
            return DecimalRangeSpec.parse(str(data["lo"]), str(data["hi"]), scale)
    except (KeyError, TypeError, ValueError, Unparseable) as exc:
        raise InvalidSpec(f"malformed answer spec: {exc}") from exc
    raise InvalidSpec(f"unknown spec variant {variant!r}")
