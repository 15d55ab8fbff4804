"""Exact combinatorics for the moment-comparison inequalities.

Everything in this module is integer/rational arithmetic -- no floats.
The objects are:

* odd-gap chain counts ``C(n, p)`` and their weighted generalization
  ``A_n(p, t)`` (sums of products of odd numbers over decreasing index
  chains with odd gaps),
* descending odd products and their half-integer Gamma-ratio cousin,
  which show up as normalizing constants in the moment comparison,
* Hermite coefficients ``c_{w;r}`` (probabilists' normalization),
* the two first-order operators D1, D2 acting on functions of an
  auxiliary variable v, their iterated action P_{L,m} = D1^L D2^m 1,
  and the assembled polynomial Q(v; a, b),
* the collected coefficients d(l; k) of Q(1; a, b) = sum_l d(l;k) a^l
  b^{2k-n-l}, computed three independent ways (operator recursion,
  Hermite collection in u = sqrt(a/b) v, and a closed-form sum that is
  transcribed literally from its source and kept for comparison),
* the recursion constants D_n(l; k) together with their closed lower
  bounds, and
* batch verifiers for the growth inequalities of C(n, p) and for the
  domination inequality  A * D >= |d|.

The verifiers never patch a failing inequality: each reading of an
ambiguous display is evaluated separately and reported.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple

from .fermionic import AssertionFailure

__all__ = [
    "DomainError",
    "HomogeneityViolation",
    "chain_sets",
    "chain_count_weighted",
    "c_chain",
    "c_row",
    "desc_product",
    "half_gamma_ratio",
    "hermite_coefficient",
    "hermite_polynomial",
    "descending_factorial",
    "eval_epoly",
    "epoly_str",
    "apply_d1",
    "apply_d2",
    "p_poly",
    "p_degree",
    "q_assemble",
    "d_coefficients",
    "d_hermite_route",
    "d_printed",
    "d_printed_signed",
    "b_first",
    "m_bound",
    "a_seq",
    "d_recursion_exact",
    "d_recursion_lower",
    "verify_c_inequalities",
    "verify_domination",
    "CoefficientTable",
    "build_coefficient_table",
    "write_c_table_csv",
    "write_domination_csv",
]


class DomainError(ValueError):
    """Raised when an argument leaves the validity region of a formula."""


class HomogeneityViolation(AssertionError):
    """The assembled Q(1; a, b) failed to be homogeneous of degree 2k - n."""


# ----------------------------------------------------------------------
# odd-gap chains
# ----------------------------------------------------------------------

def chain_sets(n: int, p: int, t: int) -> List[Tuple[int, ...]]:
    """All decreasing chains n >= i_1 > ... > i_p >= t with odd gaps.

    A chain qualifies when consecutive differences i_s - i_{s+1} are all
    odd and the head gap n - i_1 is even.  Returned as tuples
    (i_1, ..., i_p); for p = 0 the single empty chain is returned.

    Parameters
    ----------
    n : int
        Upper bound for the chain entries (also fixes the head parity).
    p : int
        Chain length.
    t : int
        Lower bound for the smallest entry.
    """
    if p < 0:
        raise DomainError(f"chain length must be >= 0, got {p}")
    if p == 0:
        return [()]
    out: List[Tuple[int, ...]] = []

    def extend(prefix: Tuple[int, ...], last: int) -> None:
        if len(prefix) == p:
            out.append(prefix)
            return
        # next entry: below `last` by an odd amount, but still >= t
        nxt = last - 1
        while nxt >= t:
            extend(prefix + (nxt,), nxt)
            nxt -= 2

    head = n
    while head >= t:
        extend((head,), head)   # n - head even by construction
        head -= 2
    return out


def chain_count_weighted(n: int, p: int, t: int) -> int:
    """Sum of prod_s (2 i_s - 1) over the chains of `chain_sets`."""
    total = 0
    for chain in chain_sets(n, p, t):
        w = 1
        for i in chain:
            w *= 2 * i - 1
        total += w
    return total


@lru_cache(maxsize=None)
def c_chain(n: int, p: int) -> int:
    """Chain count C(n, p) via the two-step recursion.

    C(n, p) = (2n - 1) C(n-1, p-1) + C(n-2, p), with C(n, 0) = 1,
    C(n, p) = 0 for p < 0 or p > n.  Agrees with
    ``chain_count_weighted(n, p, 1)`` (tested, not assumed).
    """
    if n < 0:
        return 0
    if p == 0:
        return 1
    if p < 0 or p > n:
        return 0
    if n == 1:
        return 1  # p == 1 here; the single chain (1) has weight 1
    return (2 * n - 1) * c_chain(n - 1, p - 1) + c_chain(n - 2, p)


def c_row(n: int) -> Tuple[int, ...]:
    """The row (C(n, 0), ..., C(n, n))."""
    return tuple(c_chain(n, p) for p in range(n + 1))


# ----------------------------------------------------------------------
# normalizing products
# ----------------------------------------------------------------------

def desc_product(n: int, k: int) -> int:
    """prod_{j=0}^{k-1} (2n - 1 - 2j): descending odd product.

    This equals the weighted chain count over chains of length k bounded
    below by n - k (there is exactly one such chain, the consecutive
    one), which is how the constant enters the moment comparison.
    """
    if k < 0:
        raise DomainError(f"need k >= 0, got {k}")
    out = 1
    for j in range(k):
        out *= 2 * n - 1 - 2 * j
    return out


def half_gamma_ratio(k: int, n: int) -> Fraction:
    """2^k Gamma(n + 1/2) / Gamma(n - k - 1/2), exactly.

    Equals (1/2) prod_{j=0}^{k} (2n - 1 - 2j).  Note the off-by-one
    relative to `desc_product`: half_gamma_ratio(k, n) =
    desc_product(n, k + 1) / 2 = desc_product(n, k) * (n - k - 1/2).
    The two normalizations therefore agree for no (k, n); both are kept
    and the domination report evaluates both.
    """
    if k < 0 or k >= n:
        raise DomainError(f"need 0 <= k < n, got k={k}, n={n}")
    num = 1
    for j in range(k + 1):
        num *= 2 * n - 1 - 2 * j
    return Fraction(num, 2)


def descending_factorial(x: Fraction, j: int) -> Fraction:
    """(x)_j = x (x-1) ... (x-j+1), with (x)_0 = 1."""
    if j < 0:
        raise DomainError(f"need j >= 0, got {j}")
    out = Fraction(1)
    x = Fraction(x)
    for i in range(j):
        out *= x - i
    return out


# ----------------------------------------------------------------------
# Hermite data (probabilists' normalization)
# ----------------------------------------------------------------------

def hermite_coefficient(w: int, r: int) -> Fraction:
    """Unsigned Hermite coefficient c_{w;r}.

    c_{w;r} = r! / (w! 2^{(r-w)/2} ((r-w)/2)!) when r - w is even and
    0 <= w <= r, else 0.  These count perfect matchings: He_r(y) =
    sum_w (-1)^{(r-w)/2} c_{w;r} y^w.
    """
    if w < 0 or w > r or (r - w) % 2 != 0:
        return Fraction(0)
    h = (r - w) // 2
    return Fraction(math.factorial(r), math.factorial(w) * 2**h * math.factorial(h))


def hermite_polynomial(r: int) -> Dict[int, Fraction]:
    """Coefficient dict {w: coeff} of He_r (probabilists', signed)."""
    if r < 0:
        raise DomainError(f"need r >= 0, got {r}")
    return {
        w: Fraction((-1) ** ((r - w) // 2)) * hermite_coefficient(w, r)
        for w in range(r % 2, r + 1, 2)
    }


# ----------------------------------------------------------------------
# polynomials in eps0: plain dicts {power: Fraction}
# ----------------------------------------------------------------------

EPoly = Dict[int, Fraction]


def _eadd(a: EPoly, b: EPoly) -> EPoly:
    out = dict(a)
    for k, v in b.items():
        w = out.get(k, Fraction(0)) + v
        if w:
            out[k] = w
        elif k in out:
            del out[k]
    return out


def eval_epoly(poly: EPoly, eps: Fraction) -> Fraction:
    """Evaluate a {power: coeff} polynomial at eps exactly."""
    eps = Fraction(eps)
    return sum((c * eps**p for p, c in poly.items()), Fraction(0))


def epoly_str(poly: EPoly, var: str = "e") -> str:
    """Readable rendering, highest power first; '0' for the zero poly."""
    if not poly:
        return "0"
    bits = []
    for p in sorted(poly, reverse=True):
        c = poly[p]
        term = f"{c}" if p == 0 else (f"{c}*{var}" if p == 1 else f"{c}*{var}^{p}")
        bits.append(term)
    return " + ".join(bits).replace("+ -", "- ")


# ----------------------------------------------------------------------
# the operator ring: Laurent in v, polynomial in a, b, eps0
# ----------------------------------------------------------------------
#
# elements are dicts {(v_pow, a_pow, b_pow, e_pow): Fraction};
# v_pow may be negative, the rest are >= 0.

Ring = Dict[Tuple[int, int, int, int], Fraction]


def _radd(elem: Ring, key: Tuple[int, int, int, int], val: Fraction) -> None:
    w = elem.get(key, Fraction(0)) + val
    if w:
        elem[key] = w
    elif key in elem:
        del elem[key]


def apply_d1(elem: Ring) -> Ring:
    """D1 = -(b/v) d/dv + a."""
    out: Ring = {}
    for (vp, ap, bp, ep), c in elem.items():
        if vp != 0:
            _radd(out, (vp - 2, ap, bp + 1, ep), -c * vp)
        _radd(out, (vp, ap + 1, bp, ep), c)
    return out


def apply_d2(elem: Ring) -> Ring:
    """D2 = eps0 [a v - b/v - eps0 b - b d/dv]."""
    out: Ring = {}
    for (vp, ap, bp, ep), c in elem.items():
        _radd(out, (vp + 1, ap + 1, bp, ep + 1), c)
        _radd(out, (vp - 1, ap, bp + 1, ep + 1), -c)
        _radd(out, (vp, ap, bp + 1, ep + 2), -c)
        if vp != 0:
            _radd(out, (vp - 1, ap, bp + 1, ep + 1), -c * vp)
    return out


@lru_cache(maxsize=None)
def _p_ring_cached(L: int, m: int) -> Tuple[Tuple[Tuple[int, int, int, int], Fraction], ...]:
    if L < 0 or m < 0:
        raise DomainError(f"need L, m >= 0, got L={L}, m={m}")
    elem: Ring = {(0, 0, 0, 0): Fraction(1)}
    for _ in range(m):
        elem = apply_d2(elem)
    for _ in range(L):
        elem = apply_d1(elem)
    return tuple(sorted(elem.items()))


def p_poly(L: int, m: int) -> Ring:
    """P_{L,m}(v; a, b) = D1^L D2^m 1 as a ring element."""
    return dict(_p_ring_cached(L, m))


def p_degree(L: int, m: int) -> int:
    """Total degree in (a, b) of P_{L,m}; stated to equal L + m."""
    elem = p_poly(L, m)
    if not elem:
        return 0
    return max(ap + bp for (_, ap, bp, _) in elem)


def q_assemble(n: int, k: int, at_v: Fraction | None = Fraction(1)) -> Dict[Tuple[int, int], EPoly]:
    """Q(v; a, b) = sum_{p=0}^{2k-n-1} C(p) P_{p, 2k-n-p}, evaluated at v.

    Returns {(a_pow, b_pow): eps0-polynomial}.  With at_v = 1 every
    monomial must satisfy a_pow + b_pow = 2k - n; a violation raises
    HomogeneityViolation (at other v no such constraint is imposed and
    at_v=None is rejected since the ring element itself is returned by
    `p_poly`).
    """
    if not (math.ceil(n / 2) <= k <= n - 1):
        raise DomainError(f"need ceil(n/2) <= k <= n-1, got n={n}, k={k}")
    if at_v is None:
        raise DomainError("q_assemble evaluates at a point; use p_poly for the ring element")
    at_v = Fraction(at_v)
    top = 2 * k - n
    acc: Dict[Tuple[int, int], EPoly] = {}
    for p in range(top):
        cp = c_chain(n, p)
        for (vp, ap, bp, ep), c in p_poly(p, top - p).items():
            val = c * cp * at_v**vp
            key = (ap, bp)
            acc[key] = _eadd(acc.get(key, {}), {ep: val})
    acc = {key: poly for key, poly in acc.items() if poly}
    if at_v == 1:
        bad = [key for key in acc if key[0] + key[1] != top]
        if bad:
            raise HomogeneityViolation(
                f"Q(1; a, b) at n={n}, k={k} has off-degree monomials {sorted(bad)}; "
                f"expected total degree {top}"
            )
    return acc


def d_coefficients(n: int, k: int) -> Dict[int, EPoly]:
    """Collected coefficients of Q(1; a, b) -- the operator route.

    Returns {l: eps0-polynomial} with Q(1; a, b) =
    sum_l d(l) a^l b^{2k-n-l}, for l = 0 .. 2k-n.  This is the
    reference value the other two routes are compared against.
    """
    out: Dict[int, EPoly] = {}
    for (ap, _bp), poly in q_assemble(n, k).items():
        out[ap] = poly
    return out


# ----------------------------------------------------------------------
# route two: collect in u = sqrt(a/b) v
# ----------------------------------------------------------------------
#
# Writing r = a/b, s = sqrt(r) and u = s v, the operators become
#   D1 = (b r / u) [u - d/du],      D2 = (eps0 b s / u) [u - d/du - eps0/s] u,
# and D2^m 1 = (eps0 b s)^m (1/u) [He_{m+1}(u - eps0/s) + (eps0/s) He_m(u - eps0/s)].
# We expand everything in a Laurent ring with keys (u_pow, s_pow, e_pow),
# an implicit global factor b^{2k-n}, substitute u -> s at the end
# (v = 1), and read off a^l b^{2k-n-l} as s^{2l}.

URing = Dict[Tuple[int, int, int], Fraction]


def _uadd(elem: URing, key: Tuple[int, int, int], val: Fraction) -> None:
    w = elem.get(key, Fraction(0)) + val
    if w:
        elem[key] = w
    elif key in elem:
        del elem[key]


def _u_reduce(elem: URing) -> URing:
    """Apply R = (1/u)(u - d/du): u^t -> u^t - t u^{t-2}."""
    out: URing = {}
    for (up, sp, ep), c in elem.items():
        _uadd(out, (up, sp, ep), c)
        if up != 0:
            _uadd(out, (up - 2, sp, ep), -c * up)
    return out


def _u_shifted_hermite(order: int) -> URing:
    """He_order(u - eps0/s) expanded into the (u, s, eps0) ring."""
    out: URing = {}
    for j in range(order + 1):
        binom = math.comb(order, j)
        for w, coeff in hermite_polynomial(order - j).items():
            # (-eps0/s)^j * binom * He_{order-j}(u) term
            _uadd(out, (w, -j, j), Fraction((-1) ** j * binom) * coeff)
    return out


def d_hermite_route(n: int, k: int) -> Dict[int, EPoly]:
    """Collected coefficients via the Hermite form -- independent route.

    Builds Q(1; a, b) from
      sum_p C(p) (eps0 b s)^{t_p} (b s^2)^p R^p (1/u)[He_{t_p+1}(u - eps0/s)
                                                 + (eps0/s) He_{t_p}(u - eps0/s)]
    with t_p = 2k - n - p and R = (1/u)(u - d/du), then sets u = s.  Any
    surviving odd power of s would contradict polynomiality in (a, b)
    and raises HomogeneityViolation.
    """
    if not (math.ceil(n / 2) <= k <= n - 1):
        raise DomainError(f"need ceil(n/2) <= k <= n-1, got n={n}, k={k}")
    top = 2 * k - n
    total: URing = {}
    for p in range(top):
        tp = top - p
        block: URing = {}
        for key, c in _u_shifted_hermite(tp + 1).items():
            _uadd(block, key, c)
        for (up, sp, ep), c in _u_shifted_hermite(tp).items():
            _uadd(block, (up, sp - 1, ep + 1), c)
        # prefactors (1/u) and (eps0 s)^{t_p} (s^2)^p; b powers are implicit
        shifted: URing = {}
        for (up, sp, ep), c in block.items():
            _uadd(shifted, (up - 1, sp + tp + 2 * p, ep + tp), c)
        for _ in range(p):
            shifted = _u_reduce(shifted)
        cp = c_chain(n, p)
        for key, c in shifted.items():
            _uadd(total, key, c * cp)
    # u -> s
    collected: Dict[int, EPoly] = {}
    for (up, sp, ep), c in total.items():
        spow = up + sp
        if spow < 0 or spow % 2 != 0 or spow > 2 * top:
            raise HomogeneityViolation(
                f"stray s^{spow} monomial at n={n}, k={k}: coefficient {c} eps0^{ep}"
            )
        l = spow // 2
        collected[l] = _eadd(collected.get(l, {}), {ep: c})
    return {l: poly for l, poly in collected.items() if poly}


# ----------------------------------------------------------------------
# route three: the closed-form sum, transcribed literally
# ----------------------------------------------------------------------

def b_first(n: int, l: int, k: int) -> EPoly:
    """Leading term C(2k-n-l) eps0^l 2^{2k-n-l} (l/2)_{2k-n-l}."""
    top = 2 * k - n
    val = (
        Fraction(c_chain(n, top - l))
        * 2 ** (top - l)
        * descending_factorial(Fraction(l, 2), top - l)
    )
    return {l: val} if val else {}


def _d_closed_sum(n: int, l: int, k: int, restore_signs: bool) -> EPoly:
    """Shared body of `d_printed` / `d_printed_signed`."""
    if not (math.ceil(n / 2) <= k <= n - 1):
        raise DomainError(f"need ceil(n/2) <= k <= n-1, got n={n}, k={k}")
    top = 2 * k - n
    if not (0 <= l <= top - 1):
        raise DomainError(f"need 0 <= l <= {top - 1}, got l={l}")
    acc: EPoly = dict(b_first(n, l, k))
    for p in range(top):
        tp = top - p
        cp = c_chain(n, p)
        for j in range(tp + 1):
            sign = (-1) ** (tp + j - 1)
            if restore_signs:
                # the Hermite expansion carries (-1)^{(r-w)/2} on each
                # c_{w;r}; for the surviving terms that factor equals
                # (-1)^{1 + l - j} in both braces
                sign *= (-1) ** (1 + l - j)
            epow = 2 * tp + j - 1 - 2 * l
            if epow < 0:
                # with the unsigned coefficients below these terms vanish
                # identically; guard anyway so the transcription is total
                brace = hermite_coefficient(tp + j - 2 - 2 * l, tp - j) * math.comb(tp, j) \
                    + hermite_coefficient(tp + j - 1 - 2 * l, tp + 1 - j) * math.comb(tp + 1, j)
                if brace:
                    raise DomainError(
                        f"negative eps0 power {epow} with nonzero weight at "
                        f"n={n}, l={l}, k={k}, p={p}, j={j}"
                    )
                continue
            brace = hermite_coefficient(tp + j - 2 - 2 * l, tp - j) * math.comb(tp, j) \
                + hermite_coefficient(tp + j - 1 - 2 * l, tp + 1 - j) * math.comb(tp + 1, j)
            if not brace:
                continue
            val = Fraction(sign) * cp * 2**p * descending_factorial(Fraction(j - 1, 2), p) * brace
            acc = _eadd(acc, {epow: val})
    return acc


def d_printed(n: int, l: int, k: int) -> EPoly:
    """The closed-form coefficient sum exactly as displayed.

    Kept verbatim for comparison; see `d_coefficients` for the value the
    operators actually produce.  The two disagree in general because the
    display drops the alternating signs of the Hermite coefficients.
    """
    return _d_closed_sum(n, l, k, restore_signs=False)


def d_printed_signed(n: int, l: int, k: int) -> EPoly:
    """The closed-form sum with the Hermite signs restored."""
    return _d_closed_sum(n, l, k, restore_signs=True)


def m_bound(n: int, l: int, k: int) -> Fraction:
    """M_l = max(|(l/2)_{2k-n-l}|, |((l+1)/2)_{2k-n-l}|)."""
    top = 2 * k - n
    return max(
        abs(descending_factorial(Fraction(l, 2), top - l)),
        abs(descending_factorial(Fraction(l + 1, 2), top - l)),
    )


# ----------------------------------------------------------------------
# recursion constants D_n(l; k)
# ----------------------------------------------------------------------

def a_seq(m: int, nu: int) -> Fraction:
    """a_{m,nu} = [2(m-1)]!! / (m-1)! * sum_{j=m}^{nu} (j-1)!/(j-m)!.

    The one-index sequence used in the k = n-1 recursion is a_m =
    a_{m, n-1}.  [2(m-1)]!!/(m-1)! = 2^{m-1}.
    """
    if m < 1:
        raise DomainError(f"need m >= 1, got {m}")
    total = sum(
        Fraction(math.factorial(j - 1), math.factorial(j - m)) for j in range(m, nu + 1)
    )
    return Fraction(2 ** (m - 1)) * total


def _compositions(m: int) -> Iterable[Tuple[int, ...]]:
    if m == 0:
        yield ()
        return
    for first in range(1, m + 1):
        for rest in _compositions(m - first):
            yield (first,) + rest


def d_recursion_exact(n: int, l: int, k: int) -> Fraction:
    """The exact recursion constant D_n(l; k), 0 <= l <= k <= n-1.

    For k <= n-2 this is the closed sum
        (n-k-1)! k! / l! * sum_{J<=k-l} binom(J+n-k-2, J) 2^{J+n-k-2};
    for k = n-1 it is the composition sum
        D_n(n-m-1; n-1) = sum over compositions (j_1..j_s) of m of
        prod_i a_{j_{i+1}, n - J_i - 1},  J_i = j_1 + ... + j_i.
    """
    if not (0 <= l <= k <= n - 1):
        raise DomainError(f"need 0 <= l <= k <= n-1, got n={n}, l={l}, k={k}")
    if k <= n - 2:
        total = sum(
            Fraction(math.comb(J + n - k - 2, J)) * Fraction(2) ** (J + n - k - 2)
            for J in range(k - l + 1)
        )
        return Fraction(math.factorial(n - k - 1) * math.factorial(k), math.factorial(l)) * total
    m = n - 1 - l
    total = Fraction(0)
    for comp in _compositions(m):
        prod = Fraction(1)
        consumed = 0
        for j in comp:
            prod *= a_seq(j, n - consumed - 1)
            consumed += j
        total += prod
    return total


def d_recursion_lower(n: int, l: int, k: int, variant: str = "statement") -> Fraction:
    """Closed lower bound for D_n(l; k).

    variant="statement" uses, for k = n-1,
        2^{n-l-2} Gamma(n-l-1/2) (n-2)! / (Gamma(n-l) Gamma(1/2) l!),
    while variant="proof" uses the form appearing at the end of the
    derivation, which carries (l+1)! in place of l!.  The k <= n-2
    branch  (n-k-1)! k! 2^{n-l-2} binom(n-l-2, k-l) / l!  is common.
    All Gamma ratios are evaluated exactly:
    Gamma(m + 1/2)/Gamma(1/2) = (2m)! / (4^m m!).
    """
    if variant not in ("statement", "proof"):
        raise DomainError(f"unknown variant {variant!r}")
    if not (0 <= l <= k <= n - 1):
        raise DomainError(f"need 0 <= l <= k <= n-1, got n={n}, l={l}, k={k}")
    if k <= n - 2:
        return Fraction(
            math.factorial(n - k - 1) * math.factorial(k) * 2 ** max(n - l - 2, 0)
        ) * math.comb(max(n - l - 2, 0), k - l) / math.factorial(l)
    m = n - l - 1
    gamma_ratio = Fraction(math.factorial(2 * m), 4**m * math.factorial(m))
    denom = math.factorial(l) if variant == "statement" else math.factorial(l + 1)
    return Fraction(2 ** max(n - l - 2, 0)) * gamma_ratio * math.factorial(n - 2) / (
        Fraction(math.factorial(n - l - 1)) * denom
    )


# ----------------------------------------------------------------------
# verifiers
# ----------------------------------------------------------------------

def verify_c_inequalities(n_max: int = 40, raise_on_violation: bool = True) -> Dict[str, object]:
    """Check the growth inequalities and identities of C(n, p).

    Checked for 4 <= n <= n_max:

    * "growth": C(n, p) >= [2(n-p) - 1] C(n, p-1) for 0 <= p <= n-3,
    * "top": C(n, n) == C(n, n-1) >= 2 C(n, n-2),
    * "fifteen_sevenths": C(n, n-2) >= (15/7) C(n, n-3),
    * "monotone" / "doubling": C(n, p) nondecreasing in p, and
      >= 2 C(n, p-1) for p <= n-3,
    * "telescope": C(n, n-2) == C(n, n) * sum_{j=2}^n 1/((2j-1)(2j-3))
      with the sum equal to 1/2 - 1/(2(2n-1)), hence <= C(n, n)/2.

    With raise_on_violation the first violation raises AssertionFailure
    carrying the violating tuple.  Beware: the growth bound genuinely
    fails from n = 10 on (first at n=10, p=6 where the ratio is 20/3
    against the required 7), so the default call raises once n_max >= 10.
    With raise_on_violation=False the full violation lists are returned
    instead.  The displayed difference claim
    C(n, n-2) - C(n, n-3) = 4 C(n, n)/15 is never asserted, only
    evaluated: the report records whether it holds and whether the
    replacement value C(n, n)/3 does.
    """
    if n_max < 4:
        raise DomainError(f"need n_max >= 4, got {n_max}")
    violations: Dict[str, List[tuple]] = {
        "growth": [], "top": [], "fifteen_sevenths": [],
        "monotone": [], "doubling": [], "telescope": [],
    }

    def flag(kind: str, detail: tuple, msg: str) -> None:
        if raise_on_violation:
            raise AssertionFailure(msg)
        violations[kind].append(detail)

    printed_diff_holds: List[bool] = []
    third_diff_holds: List[bool] = []
    for n in range(4, n_max + 1):
        row = c_row(n)
        for p in range(0, n - 2):
            lhs, rhs = row[p], (2 * (n - p) - 1) * (row[p - 1] if p >= 1 else 0)
            if lhs < rhs:
                flag("growth", (n, p, Fraction(lhs, rhs // (2 * (n - p) - 1))),
                     f"growth bound fails at (n={n}, p={p}): {lhs} < {rhs}")
        if row[n] != row[n - 1] or row[n] < 2 * row[n - 2]:
            flag("top", (n,), f"top relations fail at n={n}")
        if 7 * row[n - 2] < 15 * row[n - 3]:
            flag("fifteen_sevenths", (n,),
                 f"15/7 bound fails at n={n}: 7*{row[n-2]} < 15*{row[n-3]}")
        for p in range(1, n + 1):
            if row[p] < row[p - 1]:
                flag("monotone", (n, p), f"monotonicity fails at (n={n}, p={p})")
            if p <= n - 3 and row[p] < 2 * row[p - 1]:
                flag("doubling", (n, p), f"doubling fails at (n={n}, p={p})")
        telescope = sum(Fraction(1, (2 * j - 1) * (2 * j - 3)) for j in range(2, n + 1))
        if (
            telescope != Fraction(1, 2) - Fraction(1, 2 * (2 * n - 1))
            or Fraction(row[n - 2]) != row[n] * telescope
            or 2 * row[n - 2] > row[n]
        ):
            flag("telescope", (n,), f"telescoping identity fails at n={n}")
        diff = row[n - 2] - row[n - 3]
        printed_diff_holds.append(Fraction(diff) == Fraction(4 * row[n], 15))
        third_diff_holds.append(Fraction(diff) == Fraction(row[n], 3))
    return {
        "n_max": n_max,
        "holds": {kind: not v for kind, v in violations.items()},
        "violations": violations,
        "printed_difference_claim_holds": all(printed_diff_holds),
        "one_third_difference_holds": all(third_diff_holds),
    }


_EPS_GRID_DEFAULT = tuple(Fraction(i, 8) for i in range(9))

_A_READINGS = ("descending", "gamma")
_D_INDEXINGS = ("direct", "shifted")
_D_FORMS = ("lower", "exact")


def _domination_lhs(n: int, k: int, l: int, a_reading: str, d_indexing: str,
                    d_form: str) -> Fraction:
    if a_reading == "descending":
        a_val = Fraction(desc_product(n, k))
    elif a_reading == "gamma":
        a_val = half_gamma_ratio(k, n)
    else:
        raise DomainError(f"unknown A reading {a_reading!r}")
    slot = l if d_indexing == "direct" else n - k + l
    if d_indexing not in _D_INDEXINGS:
        raise DomainError(f"unknown D indexing {d_indexing!r}")
    if d_form == "lower":
        d_val = d_recursion_lower(n, slot, k)
    elif d_form == "exact":
        d_val = d_recursion_exact(n, slot, k)
    else:
        raise DomainError(f"unknown D form {d_form!r}")
    return a_val * d_val


def verify_domination(n_min: int = 4, n_max: int = 12,
                      eps_grid: Sequence[Fraction] = _EPS_GRID_DEFAULT,
                      require: Tuple[str, str, str] = ("descending", "direct", "lower"),
                      ) -> Dict[str, object]:
    """Check A * D >= |d(l; k)| over the (n, k, l, eps0) grid.

    The display leaves two choices open: which normalization A means
    (descending product vs the Gamma-ratio printed alongside it -- they
    differ by a factor n - k - 1/2) and whether the recursion constant
    is indexed directly as D_n(l; k) or with the shifted slot
    D_n(n-k+l; k).  Every combination, with both the exact constant and
    its closed lower bound, is evaluated; nothing is chosen silently.

    The |d| values come from the operator route (`d_coefficients`),
    maximized over the eps0 grid.  The combination named in `require`
    must hold everywhere, else AssertionFailure; the report carries the
    margins and violation lists for all eight combinations.
    """
    combos = [(a, di, df) for a in _A_READINGS for di in _D_INDEXINGS for df in _D_FORMS]
    violations = {c: [] for c in combos}
    min_margin: Dict[Tuple[str, str, str], Fraction | None] = {c: None for c in combos}
    checked = 0
    for n in range(n_min, n_max + 1):
        for k in range(math.ceil(n / 2), n):
            if 2 * k - n - 1 < 0:
                continue
            dvals = d_coefficients(n, k)
            for l in range(0, 2 * k - n):
                poly = dvals.get(l, {})
                dmax = max(abs(eval_epoly(poly, e)) for e in eps_grid)
                checked += 1
                for combo in combos:
                    lhs = _domination_lhs(n, k, l, *combo)
                    margin = lhs - dmax
                    prev = min_margin[combo]
                    if prev is None or margin < prev:
                        min_margin[combo] = margin
                    if margin < 0:
                        violations[combo].append((n, k, l, lhs, dmax))
    report = {
        "grid": {"n_min": n_min, "n_max": n_max, "eps": [str(e) for e in eps_grid]},
        "checked": checked,
        "combinations": {
            "/".join(c): {
                "holds": not violations[c],
                "min_margin": min_margin[c],
                "violations": violations[c][:10],
            }
            for c in combos
        },
    }
    if violations[require]:
        first = violations[require][0]
        raise AssertionFailure(
            f"domination fails for reading {'/'.join(require)} at "
            f"(n={first[0]}, k={first[1]}, l={first[2]}): {first[3]} < {first[4]}"
        )
    report["required"] = "/".join(require)
    return report


# ----------------------------------------------------------------------
# bundled table + CSV export
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientTable:
    """Everything the (n, k) comparison needs, in one bundle."""

    n: int
    k: int
    c_values: Tuple[int, ...]
    d_operator: Dict[int, EPoly]
    d_closed_literal: Dict[int, EPoly]
    d_closed_signed: Dict[int, EPoly]
    leading_terms: Dict[int, EPoly]
    m_values: Dict[int, Fraction]
    d_constants_exact: Dict[int, Fraction]
    d_constants_lower: Dict[int, Fraction]
    normalizer_descending: int
    normalizer_gamma: Fraction


def build_coefficient_table(n: int, k: int) -> CoefficientTable:
    """Assemble the full coefficient bundle for one (n, k) pair."""
    top = 2 * k - n
    return CoefficientTable(
        n=n,
        k=k,
        c_values=c_row(n),
        d_operator=d_coefficients(n, k),
        d_closed_literal={l: d_printed(n, l, k) for l in range(top)},
        d_closed_signed={l: d_printed_signed(n, l, k) for l in range(top)},
        leading_terms={l: b_first(n, l, k) for l in range(top)},
        m_values={l: m_bound(n, l, k) for l in range(top)},
        d_constants_exact={l: d_recursion_exact(n, l, k) for l in range(k + 1)},
        d_constants_lower={l: d_recursion_lower(n, l, k) for l in range(k + 1)},
        normalizer_descending=desc_product(n, k),
        normalizer_gamma=half_gamma_ratio(k, n),
    )


def _fmt_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def write_c_table_csv(path: str, n_max: int) -> None:
    """Rows (n, p, C(n, p)) for 0 <= p <= n <= n_max."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "p", "C"])
        for n in range(n_max + 1):
            for p, val in enumerate(c_row(n)):
                w.writerow([n, p, val])


def write_domination_csv(path: str, n: int, k: int,
                         eps_grid: Sequence[Fraction] = _EPS_GRID_DEFAULT) -> None:
    """Per-l comparison rows for one (n, k): |d|, constants, margins."""
    table = build_coefficient_table(n, k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "n", "k", "l", "d_max_abs", "d_max_abs_float",
            "A_descending", "A_gamma", "D_exact_direct", "D_lower_direct",
            "D_exact_shifted", "D_lower_shifted",
        ])
        for l in range(2 * k - n):
            poly = table.d_operator.get(l, {})
            dmax = max(abs(eval_epoly(poly, e)) for e in eps_grid)
            shifted = n - k + l
            row = [
                n, k, l, _fmt_rational(dmax), f"{float(dmax):.17g}",
                table.normalizer_descending, _fmt_rational(table.normalizer_gamma),
                _fmt_rational(table.d_constants_exact[l]),
                _fmt_rational(table.d_constants_lower[l]),
                _fmt_rational(d_recursion_exact(n, shifted, k)) if shifted <= k else "",
                _fmt_rational(d_recursion_lower(n, shifted, k)) if shifted <= k else "",
            ]
            w.writerow(row)
