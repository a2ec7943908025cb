"""Arithmetic in F_q, q = p^e, for small p and e.

Elements are encoded as integers in ``[0, q)``: the base-p digits of the
encoding are the coefficients (constant term first) of the residue
polynomial modulo a fixed monic irreducible polynomial.  The modulus for a
given ``(p, e)`` is the irreducible candidate with the lowest encoding, so
element encodings are reproducible across runs.

Hot loops use the vectorised methods on :class:`FieldSpec`, which accept
ints or integer numpy arrays.  :class:`FieldElem` is the checked scalar
wrapper with operator overloading.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

MAX_Q = 1 << 16
# Above this size the full q x q tables are not materialised.
TABLE_Q = 1024


class FieldError(ValueError):
    """Invalid field parameters or a domain error (e.g. inverting zero)."""


class FieldMismatchError(FieldError):
    """Operands belong to different fields."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _prime_factors(n: int) -> list[int]:
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


# ---------------------------------------------------------------------------
# Polynomials over F_p as coefficient lists, constant term first.
# ---------------------------------------------------------------------------

def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_rem(a: list[int], b: list[int], p: int) -> list[int]:
    a = _trim(list(a))
    b = _trim(list(b))
    inv_lead = pow(b[-1], p - 2, p)
    while len(a) >= len(b):
        coef = (a[-1] * inv_lead) % p
        shift = len(a) - len(b)
        for i, bc in enumerate(b):
            a[shift + i] = (a[shift + i] - coef * bc) % p
        _trim(a)
    return a


def _monic_polys(degree: int, p: int):
    for low in product(range(p), repeat=degree):
        # product() varies the last slot fastest; reverse so the constant
        # term varies fastest, matching the integer encoding.
        yield list(reversed(low)) + [1]


def is_irreducible(poly: list[int], p: int) -> bool:
    """Trial division by every monic polynomial of degree 1..deg/2."""
    poly = _trim(list(poly))
    deg = len(poly) - 1
    if deg < 1:
        return False
    if deg == 1:
        return True
    for d in range(1, deg // 2 + 1):
        for divisor in _monic_polys(d, p):
            if not _poly_rem(poly, divisor, p):
                return False
    return True


def lowest_irreducible(p: int, e: int) -> tuple[int, ...]:
    """Monic irreducible of degree ``e`` with the lowest base-p encoding."""
    if e == 1:
        return (0, 1)
    for code in range(p**e):
        low = [(code // p**i) % p for i in range(e)]
        cand = low + [1]
        if low[0] != 0 and is_irreducible(cand, p):
            return tuple(cand)
    raise RuntimeError(f"no irreducible polynomial of degree {e} over F_{p}")


# ---------------------------------------------------------------------------


class FieldSpec:
    """The finite field F_q with a fixed modulus.

    Immutable after construction; all arithmetic methods are pure.
    """

    def __init__(self, p: int, e: int, modulus: tuple[int, ...]):
        self.p = p
        self.e = e
        self.q = p**e
        self.modulus = tuple(modulus)
        self._pow = np.array([p**i for i in range(e)], dtype=np.int64)
        digits = (np.arange(self.q)[:, None] // self._pow[None, :]) % p
        self._digits = digits.astype(np.int64)
        self._digits.setflags(write=False)
        self._build_log_tables()

    # -- construction helpers -------------------------------------------

    def _mul_scalar(self, a: int, b: int) -> int:
        if self.e == 1:
            return (a * b) % self.p
        p, e = self.p, self.e
        da = [(a // p**i) % p for i in range(e)]
        db = [(b // p**i) % p for i in range(e)]
        prod = [0] * (2 * e - 1)
        for i, x in enumerate(da):
            if x:
                for j, y in enumerate(db):
                    prod[i + j] = (prod[i + j] + x * y) % p
        rem = _poly_rem(prod, list(self.modulus), p)
        return sum(c * p**i for i, c in enumerate(rem))

    def _pow_scalar(self, a: int, k: int) -> int:
        result, base = 1, a
        while k:
            if k & 1:
                result = self._mul_scalar(result, base)
            base = self._mul_scalar(base, base)
            k >>= 1
        return result

    def _build_log_tables(self) -> None:
        q = self.q
        if q == 2:
            gen = 1
        else:
            factors = _prime_factors(q - 1)
            gen = next(
                g for g in range(2, q)
                if all(self._pow_scalar(g, (q - 1) // r) != 1 for r in factors)
            )
        self.generator = gen
        exp = np.empty(q - 1, dtype=np.int64)
        log = np.full(q, -1, dtype=np.int64)
        x = 1
        for i in range(q - 1):
            exp[i] = x
            log[x] = i
            x = self._mul_scalar(x, gen)
        exp.setflags(write=False)
        log.setflags(write=False)
        self._exp, self._log = exp, log

    # -- identity ---------------------------------------------------------

    @property
    def key(self) -> tuple:
        return (self.p, self.e, self.modulus)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FieldSpec) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"FieldSpec(p={self.p}, e={self.e}, modulus={self.modulus})"

    def __call__(self, rep: int) -> "FieldElem":
        return FieldElem(self, int(rep))

    # -- vectorised arithmetic on encodings --------------------------------

    def add(self, a, b):
        if self.e == 1:
            return (a + b) % self.p
        if self.p == 2:
            return a ^ b
        s = (self._digits[a] + self._digits[b]) % self.p
        return s @ self._pow

    def neg(self, a):
        if self.e == 1:
            return (-a) % self.p
        d = (-self._digits[a]) % self.p
        return d @ self._pow

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        if self.e == 1:
            return (a * b) % self.p
        if np.isscalar(a) and np.isscalar(b):
            if a == 0 or b == 0:
                return 0
            return int(self._exp[(self._log[a] + self._log[b]) % (self.q - 1)])
        a = np.asarray(a)
        b = np.asarray(b)
        idx = (self._log[a] + self._log[b]) % (self.q - 1)
        return np.where((a == 0) | (b == 0), 0, self._exp[idx])

    def inv(self, a):
        if np.any(np.asarray(a) == 0):
            raise FieldError("zero has no multiplicative inverse")
        if np.isscalar(a):
            return int(self._exp[(-self._log[a]) % (self.q - 1)])
        return self._exp[(-self._log[np.asarray(a)]) % (self.q - 1)]

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def square(self, a):
        return self.mul(a, a)

    def from_int(self, k: int) -> int:
        """Image of the integer ``k`` under Z -> F_q."""
        return k % self.p

    # -- tables ------------------------------------------------------------

    @cached_property
    def add_table(self) -> np.ndarray:
        self._check_table_size()
        a, b = np.meshgrid(np.arange(self.q), np.arange(self.q), indexing="ij")
        t = np.asarray(self.add(a, b), dtype=np.int64)
        t.setflags(write=False)
        return t

    @cached_property
    def mul_table(self) -> np.ndarray:
        self._check_table_size()
        a, b = np.meshgrid(np.arange(self.q), np.arange(self.q), indexing="ij")
        t = np.asarray(self.mul(a, b), dtype=np.int64)
        t.setflags(write=False)
        return t

    @cached_property
    def neg_table(self) -> np.ndarray:
        t = np.asarray(self.neg(np.arange(self.q)), dtype=np.int64)
        t.setflags(write=False)
        return t

    @cached_property
    def inv_table(self) -> np.ndarray:
        """Inverse of each element; entry 0 is set to 0 as a placeholder."""
        t = np.zeros(self.q, dtype=np.int64)
        t[1:] = self.inv(np.arange(1, self.q))
        t.setflags(write=False)
        return t

    def _check_table_size(self) -> None:
        if self.q > TABLE_Q:
            raise FieldError(f"q={self.q} too large for full arithmetic tables")

    def elements(self) -> range:
        return range(self.q)


@dataclass(frozen=True)
class FieldElem:
    field: FieldSpec
    rep: int

    def __post_init__(self):
        if not 0 <= self.rep < self.field.q:
            raise FieldError(f"rep {self.rep} out of range for F_{self.field.q}")

    def _other(self, other) -> int:
        if isinstance(other, FieldElem):
            if other.field != self.field:
                raise FieldMismatchError(f"{self.field!r} vs {other.field!r}")
            return other.rep
        if isinstance(other, (int, np.integer)):
            return self.field.from_int(int(other))
        return NotImplemented

    def _wrap(self, rep) -> "FieldElem":
        return FieldElem(self.field, int(rep))

    def __add__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.add(self.rep, o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.sub(self.rep, o))

    def __rsub__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.sub(o, self.rep))

    def __mul__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.mul(self.rep, o))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.div(self.rep, o))

    def __neg__(self):
        return self._wrap(self.field.neg(self.rep))

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        return self._wrap(self.field._pow_scalar(self.rep, k))

    def inverse(self) -> "FieldElem":
        return self._wrap(self.field.inv(self.rep))

    def __int__(self) -> int:
        return self.rep

    def __repr__(self) -> str:
        return f"F{self.field.q}({self.rep})"


# -- functional surface -------------------------------------------------------

def ff_build(p: int, e: int = 1) -> FieldSpec:
    """Build F_{p^e} with the deterministic lowest irreducible modulus."""
    if not is_prime(p):
        raise FieldError(f"characteristic {p} is not prime")
    if e < 1:
        raise FieldError("extension degree must be >= 1")
    if p**e > MAX_Q:
        raise FieldError(f"q = {p}^{e} exceeds the cap {MAX_Q}")
    return _build_cached(p, e)


_CACHE: dict[tuple[int, int], FieldSpec] = {}


def _build_cached(p: int, e: int) -> FieldSpec:
    if (p, e) not in _CACHE:
        _CACHE[(p, e)] = FieldSpec(p, e, lowest_irreducible(p, e))
    return _CACHE[(p, e)]


def field_of_order(q: int) -> FieldSpec:
    """F_q for a prime power ``q``."""
    if q < 2:
        raise FieldError(f"{q} is not a prime power")
    for p in range(2, q + 1):
        if q % p == 0:
            break
    e, r = 0, q
    while r % p == 0:
        r //= p
        e += 1
    if r != 1 or not is_prime(p):
        raise FieldError(f"{q} is not a prime power")
    return ff_build(p, e)


def ff_add(a: FieldElem, b: FieldElem) -> FieldElem:
    return a + b


def ff_sub(a: FieldElem, b: FieldElem) -> FieldElem:
    return a - b


def ff_mul(a: FieldElem, b: FieldElem) -> FieldElem:
    return a * b


def ff_neg(a: FieldElem) -> FieldElem:
    return -a


def ff_inv(a: FieldElem) -> FieldElem:
    return a.inverse()


def ff_enumerate(spec: FieldSpec) -> list[FieldElem]:
    return [FieldElem(spec, r) for r in range(spec.q)]
