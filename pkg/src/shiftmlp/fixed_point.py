"""Fixed-point values and multiplier-free scalar arithmetic.

Multiplication by a quantized level never touches a hardware multiplier:
a level is a short sum of signed powers of two, so each product is realized
as sign flips, shifts, and additions. The one scalar that is not a power of
two, the quantization range alpha, is folded in through a constant shift-add
expansion over the set bits of its raw representation (the usual FPGA
constant-multiplier idiom).

Two shift semantics are supported. The default widens frac_bits on right
shifts so every result is exact; truncate=True reproduces hardware behaviour
(arithmetic right shift, low bits discarded).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

# Guard rails for the simulated datapath: 16-bit operands with <=48 bits of
# widening never need shifts past this, and accumulators stay in range for
# dot products up to length 2^16.
MAX_SHIFT = 63
ACC_WIDTH = 64

DEFAULT_FRAC_BITS = 12  # activations: 16 raw bits, 12 fractional


class FixedPointError(ValueError):
    """Malformed fixed-point operation (frac_bits mismatch, bad operand)."""


class ShiftRangeError(FixedPointError):
    """Shift amount exceeds the representable range (total information loss)."""


class FixedPointOverflowError(FixedPointError):
    """Result exceeds the simulated register width; never wraps silently."""


@dataclass(frozen=True)
class FixedPointValue:
    """A scaled integer: value = raw / 2**frac_bits."""

    raw: int
    frac_bits: int

    def __post_init__(self):
        if self.frac_bits < 0:
            raise FixedPointError(f"frac_bits must be >= 0, got {self.frac_bits}")

    @classmethod
    def from_float(cls, x: float, frac_bits: int = DEFAULT_FRAC_BITS) -> "FixedPointValue":
        """Round-to-nearest conversion at a fixed fractional width."""
        return cls(int(round(x * (1 << frac_bits))), frac_bits)

    @classmethod
    def from_float_exact(cls, x: float) -> "FixedPointValue":
        """Exact conversion; every finite float is a dyadic rational."""
        p, q = float(x).as_integer_ratio()  # q is a power of two
        frac = q.bit_length() - 1
        while p != 0 and p % 2 == 0 and frac > 0:
            p //= 2
            frac -= 1
        return cls(p, frac)

    def to_float(self) -> float:
        return self.raw / (1 << self.frac_bits)

    def as_fraction(self) -> Fraction:
        return Fraction(self.raw, 1 << self.frac_bits)

    def with_frac_bits(self, frac_bits: int) -> "FixedPointValue":
        """Re-align to a different fractional width; must be exact."""
        delta = frac_bits - self.frac_bits
        if delta >= 0:
            return FixedPointValue(self.raw << delta, frac_bits)
        if self.raw % (1 << -delta) != 0:
            raise FixedPointError(
                f"narrowing to {frac_bits} frac bits would drop set bits of {self}"
            )
        return FixedPointValue(self.raw >> -delta, frac_bits)

    def __add__(self, other: "FixedPointValue") -> "FixedPointValue":
        if self.frac_bits != other.frac_bits:
            raise FixedPointError(
                f"frac_bits mismatch: {self.frac_bits} vs {other.frac_bits}"
            )
        return FixedPointValue(self.raw + other.raw, self.frac_bits)

    def __neg__(self) -> "FixedPointValue":
        return FixedPointValue(-self.raw, self.frac_bits)


@dataclass(frozen=True)
class Accumulator:
    """Running dot-product sum; wider than the operands it absorbs."""

    raw: int
    frac_bits: int
    width: int = ACC_WIDTH

    def value(self) -> Fraction:
        return Fraction(self.raw, 1 << self.frac_bits)

    def to_fixed(self) -> FixedPointValue:
        return FixedPointValue(self.raw, self.frac_bits)

    def _check(self) -> "Accumulator":
        if self.raw.bit_length() >= self.width:
            raise FixedPointOverflowError(
                f"accumulator overflow: |raw| needs {self.raw.bit_length()} bits, "
                f"width is {self.width}"
            )
        return self


@dataclass
class OpCounter:
    """Datapath instrumentation. mults exists to witness that it stays 0."""

    shifts: int = 0
    adds: int = 0
    sign_flips: int = 0
    macs: int = 0
    mults: int = 0

    def merge(self, other: "OpCounter") -> None:
        self.shifts += other.shifts
        self.adds += other.adds
        self.sign_flips += other.sign_flips
        self.macs += other.macs
        self.mults += other.mults

    def as_dict(self) -> dict:
        return {
            "shifts": self.shifts,
            "adds": self.adds,
            "sign_flips": self.sign_flips,
            "macs": self.macs,
            "mults": self.mults,
        }


def shift_mul(
    q: FixedPointValue,
    m: int,
    counter: OpCounter | None = None,
    truncate: bool = False,
) -> FixedPointValue:
    """q * 2**m via shifting. m < 0 shrinks the value, m > 0 grows it.

    Exact mode keeps every bit by widening frac_bits on right shifts;
    truncate mode drops low bits like a bare arithmetic shifter would.
    """
    if abs(m) > MAX_SHIFT:
        raise ShiftRangeError(f"|m| = {abs(m)} exceeds MAX_SHIFT = {MAX_SHIFT}")
    if m == 0:
        return q
    if counter is not None:
        counter.shifts += 1
    if m > 0:
        out = FixedPointValue(q.raw << m, q.frac_bits)
        if out.raw.bit_length() >= ACC_WIDTH:
            raise FixedPointOverflowError(
                f"left shift by {m} overflows {ACC_WIDTH}-bit range"
            )
        return out
    if truncate:
        return FixedPointValue(q.raw >> -m, q.frac_bits)
    return FixedPointValue(q.raw, q.frac_bits - m)


def scale_by_alpha(
    q: FixedPointValue,
    alpha_fixed: FixedPointValue,
    counter: OpCounter | None = None,
) -> FixedPointValue:
    """q * alpha as a shift-add expansion over the set bits of alpha's raw.

    alpha is a per-codebook constant, so hardware realizes this as a fixed
    adder tree; no general multiplier is involved.
    """
    a = alpha_fixed.raw
    if a <= 0:
        raise FixedPointError("alpha_fixed must be positive")
    acc = 0
    first = True
    bit = 0
    while a:
        if a & 1:
            term = q.raw << bit
            if counter is not None and bit > 0:
                counter.shifts += 1
            if first:
                acc = term
                first = False
            else:
                acc = acc + term
                if counter is not None:
                    counter.adds += 1
        a >>= 1
        bit += 1
    return FixedPointValue(acc, q.frac_bits + alpha_fixed.frac_bits)


def level_mul(
    q: FixedPointValue,
    decomposition: tuple[tuple[int, int], ...],
    alpha_fixed: FixedPointValue,
    counter: OpCounter | None = None,
    truncate: bool = False,
) -> FixedPointValue:
    """q * level where level = alpha * sum(s_j * 2**m_j).

    Each term is one shift of the alpha-scaled operand; terms combine by
    addition with sign flips for negative branches. An empty decomposition
    is the level 0 and short-circuits to an exact zero.
    """
    if not decomposition:
        return FixedPointValue(0, q.frac_bits + alpha_fixed.frac_bits)
    qa = scale_by_alpha(q, alpha_fixed, counter)
    depth = max(0, max(-m for _, m in decomposition))
    out_frac = qa.frac_bits if truncate else qa.frac_bits + depth
    total = 0
    first = True
    for sign, m in decomposition:
        term = shift_mul(qa, m, counter, truncate)
        raw = term.raw << (out_frac - term.frac_bits)
        if sign < 0:
            raw = -raw
            if counter is not None:
                counter.sign_flips += 1
        if first:
            total = raw
            first = False
        else:
            total = total + raw
            if counter is not None:
                counter.adds += 1
    return FixedPointValue(total, out_frac)


def mac(
    acc: Accumulator,
    q: FixedPointValue,
    decomposition: tuple[tuple[int, int], ...],
    alpha_fixed: FixedPointValue,
    counter: OpCounter | None = None,
    truncate: bool = False,
) -> Accumulator:
    """acc + q * level. Levels with an empty decomposition cost nothing."""
    if counter is not None:
        counter.macs += 1
    if not decomposition:
        return acc
    prod = level_mul(q, decomposition, alpha_fixed, counter, truncate)
    if prod.frac_bits > acc.frac_bits:
        raise FixedPointError(
            f"accumulator frac_bits {acc.frac_bits} cannot hold product "
            f"frac_bits {prod.frac_bits}"
        )
    raw = acc.raw + (prod.raw << (acc.frac_bits - prod.frac_bits))
    if counter is not None:
        counter.adds += 1
    return Accumulator(raw, acc.frac_bits, acc.width)._check()
