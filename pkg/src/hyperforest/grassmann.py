"""Exact Grassmann algebra with Berezin integration and the Q operators.

Each vertex ``v`` of a graph carries ``2n`` anticommuting generators,
a conjugate pair (psibar_v^l, psi_v^l) per component ``l = 1..n``.  The
linear encoding is

    index(v, l, bar) = 2*(v*n + (l-1)) + (0 if bar else 1)

so a monomial is a bitmask over ``2*n*|V|`` bits (bit set <=> generator
present), always stored in ascending-index ("canonical") order.  The
total generator count is capped at 128: exact exterior computations are
exponential and this library is desk-scale on purpose.

Elements are sparse maps monomial -> Fraction.  All arithmetic is exact;
there is no floating path here.

Sign conventions
----------------
The product of canonical monomials picks up the crossing-count parity of
merging the two ascending index lists.  Left derivatives remove the
generator and multiply by (-1)^(number of generators preceding it).

A full Berezin integral is a derivative string: for every (vertex,
component) pair, both pair derivatives are applied, and a global sign is
applied at the end.  Two free choices remain — the order within each
pair, and the global sign — and the algebra cannot fix them on its own.
`DEFAULT_CONVENTION` ships the unique choice under which the fermionic
partition function at one component per site reproduces the independent
spanning-forest sum (see `hyperforest.fermionic.calibrate`, which
re-derives it at import of the test-suite rather than trusting this
constant).  Under that convention the integral of the canonical top
monomial equals +1 if the per-pair order is "psi before psibar is
differentiated", i.e. each adjacent (psibar, psi) pair contributes one
crossing, and the global sign is (+1).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

GENERATOR_CAP = 128


class CapExceeded(ValueError):
    """The requested algebra needs more than 128 generators."""


class UniverseMismatch(TypeError):
    """Operands live in different generator universes."""


class OddElement(ValueError):
    """An operation required an even element (all monomials even degree)."""


class NonpositiveConstantTerm(ValueError):
    """Fractional powers need a strictly positive constant term."""


@dataclass(frozen=True)
class BerezinConvention:
    """Orientation data for Berezin integration.

    psi_first:
        True means each pair is integrated as "apply d/dpsi, then
        d/dpsibar" (the operator string written `d_psibar d_psi`).
    global_sign:
        Overall +-1 applied to full integrals.
    """

    psi_first: bool = True
    global_sign: int = 1


# Fixed by the forest-oracle self-test; see the module docstring.
DEFAULT_CONVENTION = BerezinConvention(psi_first=True, global_sign=1)


class Algebra:
    """Generator universe for a fixed (vertex count, component count)."""

    def __init__(self, n_vertices, n_components):
        if n_vertices < 1 or n_components < 0:
            raise ValueError("need >= 1 vertex and >= 0 components")
        n_gen = 2 * n_vertices * n_components
        if n_gen > GENERATOR_CAP:
            raise CapExceeded(
                f"{n_gen} generators exceed the cap of {GENERATOR_CAP} "
                f"(n * |V| must stay <= {GENERATOR_CAP // 2})")
        self.n_vertices = n_vertices
        self.n = n_components
        self.n_gen = n_gen
        self.top_mask = (1 << n_gen) - 1
        self._sigma = {}

    # -- generator bookkeeping -------------------------------------------

    def gen_index(self, vertex, component, bar):
        if not (0 <= vertex < self.n_vertices):
            raise ValueError(f"vertex {vertex} out of range")
        if not (1 <= component <= self.n):
            raise ValueError(f"component {component} out of range 1..{self.n}")
        return 2 * (vertex * self.n + (component - 1)) + (0 if bar else 1)

    def gen_name(self, index):
        pair, unbarred = divmod(index, 2)
        vertex, comp = divmod(pair, self.n)
        stem = "psi" if unbarred else "psibar"
        return f"{stem}[{vertex},{comp + 1}]"

    def zero(self):
        return GrassmannElement(self, {})

    def one(self):
        return self.scalar(1)

    def scalar(self, c):
        c = Fraction(c)
        return GrassmannElement(self, {0: c} if c else {})

    def monomial(self, indices, coeff=1):
        """Element from a generator index iterable (must be distinct)."""
        mask = 0
        sign = 1
        for idx in indices:
            bit = 1 << idx
            if mask & bit:
                return self.zero()
            # crossings with already-placed higher generators
            if (mask >> (idx + 1)).bit_count() & 1:
                sign = -sign
            mask |= bit
        c = Fraction(coeff) * sign
        return GrassmannElement(self, {mask: c} if c else {})

    def psibar(self, vertex, component):
        return self.monomial([self.gen_index(vertex, component, True)])

    def psi(self, vertex, component):
        return self.monomial([self.gen_index(vertex, component, False)])

    def pair_product(self, i, j):
        """psibar_i . psi_j = sum_l psibar_i^l psi_j^l."""
        out = self.zero()
        for l in range(1, self.n + 1):
            out = out + self.psibar(i, l) * self.psi(j, l)
        return out

    def pi(self, vertex, component):
        """pi_v^l = -psibar_v^l psi_v^l  (an even, squared-to-zero element)."""
        return -(self.psibar(vertex, component) * self.psi(vertex, component))

    def sigma(self, vertex):
        """sigma_v = sqrt(1 + 2 psibar_v . psi_v), computed exactly."""
        if vertex not in self._sigma:
            x = self.one() + 2 * self.pair_product(vertex, vertex)
            self._sigma[vertex] = nilpotent_series(x, Fraction(1, 2))
        return self._sigma[vertex]

    def sigma_inv(self, vertex):
        return nilpotent_series(self.one() + 2 * self.pair_product(vertex, vertex),
                                Fraction(-1, 2))


class GrassmannElement:
    """Sparse exact element of an `Algebra`.

    Supports +, -, scalar and Grassmann multiplication.  Instances are
    treated as immutable values.
    """

    __slots__ = ("algebra", "terms")

    def __init__(self, algebra, terms):
        self.algebra = algebra
        self.terms = terms

    # -- helpers -----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, GrassmannElement):
            if other.algebra is not self.algebra:
                raise UniverseMismatch("elements from different algebras")
            return other
        if isinstance(other, (int, Fraction)):
            return self.algebra.scalar(other)
        return None

    @property
    def constant_term(self):
        return self.terms.get(0, Fraction(0))

    def is_zero(self):
        return not self.terms

    def is_even(self):
        return all(m.bit_count() % 2 == 0 for m in self.terms)

    def is_homogeneous(self):
        degs = {m.bit_count() for m in self.terms}
        return len(degs) <= 1

    def degree(self):
        return max((m.bit_count() for m in self.terms), default=0)

    def without_constant(self):
        t = dict(self.terms)
        t.pop(0, None)
        return GrassmannElement(self.algebra, t)

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        terms = dict(self.terms)
        for m, c in o.terms.items():
            s = terms.get(m, Fraction(0)) + c
            if s:
                terms[m] = s
            else:
                terms.pop(m, None)
        return GrassmannElement(self.algebra, terms)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.algebra, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return mul(self, o)

    def __rmul__(self, other):
        # scalars commute with everything, so reuse __mul__
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return mul(o, self)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.algebra.scalar(other)
        if not isinstance(other, GrassmannElement):
            return NotImplemented
        return self.algebra is other.algebra and self.terms == other.terms

    def __hash__(self):
        return hash((id(self.algebra), frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "<0>"
        return "<" + " ".join(dump(self).splitlines()) + ">"


def mul(x, y):
    """Sign-correct bilinear product of two elements."""
    if x.algebra is not y.algebra:
        raise UniverseMismatch("elements from different algebras")
    out = {}
    yterms = y.terms
    for m1, c1 in x.terms.items():
        for m2, c2 in yterms.items():
            if m1 & m2:
                continue
            # parity of crossings when merging m2's generators below m1's
            sign_bits = 0
            rest = m2
            while rest:
                low = rest & -rest
                sign_bits ^= (m1 >> low.bit_length()).bit_count() & 1
                rest ^= low
            c = c1 * c2
            if sign_bits:
                c = -c
            m = m1 | m2
            s = out.get(m)
            if s is None:
                out[m] = c
            else:
                s = s + c
                if s:
                    out[m] = s
                else:
                    del out[m]
    return GrassmannElement(x.algebra, out)


def left_derivative(x, gen_index):
    """Left Grassmann derivative with respect to one generator."""
    bit = 1 << gen_index
    below = bit - 1
    out = {}
    for m, c in x.terms.items():
        if not (m & bit):
            continue
        if (m & below).bit_count() & 1:
            c = -c
        out[m ^ bit] = c
    return GrassmannElement(x.algebra, out)


def _binom(alpha, k):
    """binom(alpha, k) for Fraction alpha, integer k >= 0."""
    out = Fraction(1)
    for i in range(k):
        out *= (alpha - i) / (i + 1)
    return out


def nilpotent_series(x, exponent):
    """x^exponent for even x with positive constant term, exactly.

    Writes x = c(1 + y) with nilpotent y and expands the binomial
    series, which terminates.  ``exponent`` may be any Fraction; for
    non-integer exponents the prefactor c^exponent must itself be
    rational, which holds for the uses here (c a perfect power) — if it
    is not, a ValueError surfaces rather than a silent float.
    """
    if not x.is_even():
        raise OddElement("fractional powers need an even element")
    exponent = Fraction(exponent)
    c = x.constant_term
    if c <= 0:
        raise NonpositiveConstantTerm(f"constant term {c} must be positive")
    y = x.without_constant() * (1 / c)
    alg = x.algebra

    # c^exponent as an exact rational
    if exponent.denominator == 1:
        prefactor = c ** exponent
    else:
        root = _rational_root(c, exponent.denominator)
        if root is None:
            raise ValueError(f"{c}^{exponent} is not rational")
        prefactor = root ** exponent.numerator

    out = alg.scalar(1)
    power = alg.scalar(1)
    k = 0
    while True:
        k += 1
        power = power * y
        if power.is_zero():
            break
        out = out + _binom(exponent, k) * power
    return prefactor * out


def _rational_root(c, q):
    """Exact q-th root of a positive Fraction, or None."""
    def iroot(n):
        r = round(n ** (1.0 / q))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** q == n:
                return cand
        return None

    a, b = iroot(c.numerator), iroot(c.denominator)
    if a is None or b is None:
        return None
    return Fraction(a, b)


def nilpotent_exp(x):
    """exp(x) for even nilpotent x (zero constant term), exactly.

    For a nonzero constant term c the factor e^c is irrational; split it
    off yourself (`x.without_constant()`) and track e^c separately.
    """
    if not x.is_even():
        raise OddElement("exp needs an even element")
    if x.constant_term != 0:
        raise ValueError("nonzero constant term: e^c is not rational, "
                         "split it off with without_constant()")
    alg = x.algebra
    out = alg.scalar(1)
    power = alg.scalar(1)
    k = 0
    while True:
        k += 1
        power = power * x * Fraction(1, k)
        if power.is_zero():
            break
        out = out + power
    return out


def berezin_integrate(x, convention=None):
    """Full Berezin integral: scalar left after all pair derivatives.

    Equal to the coefficient of the canonical top monomial times an
    orientation sign; computed here literally via the derivative string
    so the convention choice is exercised, not hand-folded.
    """
    conv = convention or DEFAULT_CONVENTION
    alg = x.algebra
    # Cheap closed form: with psi differentiated first each pair
    # contributes one crossing on the top monomial, else none.
    n_pairs = alg.n_gen // 2
    sign = conv.global_sign * ((-1) ** n_pairs if conv.psi_first else 1)
    return sign * x.terms.get(alg.top_mask, Fraction(0))


def berezin_integrate_slow(x, convention=None):
    """Derivative-string reference implementation of `berezin_integrate`."""
    conv = convention or DEFAULT_CONVENTION
    alg = x.algebra
    for pair in range(alg.n_gen // 2):
        bar_idx, psi_idx = 2 * pair, 2 * pair + 1
        first, second = ((psi_idx, bar_idx) if conv.psi_first
                         else (bar_idx, psi_idx))
        x = left_derivative(left_derivative(x, first), second)
    return conv.global_sign * x.constant_term


def site_measure(x, vertex, convention=None):
    """Partial integral over one vertex: weight by sigma^(-1), then
    apply that vertex's pair derivatives in the configured order."""
    conv = convention or DEFAULT_CONVENTION
    alg = x.algebra
    x = alg.sigma_inv(vertex) * x
    for l in range(1, alg.n + 1):
        bar_idx = alg.gen_index(vertex, l, True)
        psi_idx = alg.gen_index(vertex, l, False)
        first, second = ((psi_idx, bar_idx) if conv.psi_first
                         else (bar_idx, psi_idx))
        x = left_derivative(left_derivative(x, first), second)
    return x


def integrate_all_sites(x, convention=None):
    """sigma^(-1)-weighted integral over every vertex, with the global sign.

    This is the functional whose value on F e^(-S) is the unnormalized
    fermionic state of F.
    """
    conv = convention or DEFAULT_CONVENTION
    for v in range(x.algebra.n_vertices):
        x = site_measure(x, v, conv)
    if x.terms and set(x.terms) != {0}:
        raise OddElement("integral left unintegrated generators behind")
    return conv.global_sign * x.constant_term


def apply_Q(x, direction, component):
    """Supersymmetry operators  Q_+^l = sum_i sigma_i d/dpsi_i^l  and
    Q_-^l = sum_i sigma_i d/dpsibar_i^l."""
    if direction not in ("+", "-"):
        raise ValueError("direction must be '+' or '-'")
    alg = x.algebra
    bar = direction == "-"
    out = alg.zero()
    for i in range(alg.n_vertices):
        d = left_derivative(x, alg.gen_index(i, component, bar))
        if not d.is_zero():
            out = out + alg.sigma(i) * d
    return out


def dump(x):
    """One line per term: "+p/q name name ...", ascending monomial order."""
    lines = []
    for m in sorted(x.terms):
        c = x.terms[m]
        names = [x.algebra.gen_name(i) for i in range(x.algebra.n_gen)
                 if m >> i & 1]
        sign = "+" if c > 0 else "-"
        mag = abs(c)
        body = " ".join([f"{mag.numerator}/{mag.denominator}" if mag.denominator != 1
                         else f"{mag.numerator}"] + names)
        lines.append(f"{sign}{body}")
    return "\n".join(lines)
