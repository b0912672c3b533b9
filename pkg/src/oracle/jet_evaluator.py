"""
Exact evaluation of invariants on random polynomial metrics.

Tensor fields are truncated Taylor series around the origin of a
4-dimensional chart: a mapping from exponent tuples to numpy object arrays
of Fractions. The metric is g = eta + h with h vanishing at the origin, so
everything at the origin stays rational and epsilon components are +-1.
Riemann follows R_{abc}^e w_e = (D_a D_b - D_b D_a) w_c.
"""

import itertools
import logging
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from core.enumerator import InvariantId
from core.errors import InsufficientJetError, MalformedInputError
from core.monomial import LinComb, Monomial

logger = logging.getLogger(__name__)

DIM = 4
Exponent = Tuple[int, ...]


def _zeros(rank: int) -> np.ndarray:
    return np.full((DIM,) * rank, Fraction(0), dtype=object)


def eta(signature: int = -1) -> np.ndarray:
    diag = [Fraction(signature)] + [Fraction(1)] * (DIM - 1)
    result = _zeros(2)
    for i, v in enumerate(diag):
        result[i, i] = v
    return result


def epsilon_at_origin() -> np.ndarray:
    """Lower-index epsilon with eps_{0123} = +1 (|det g| = 1 at the origin)"""
    result = _zeros(4)
    for perm in itertools.permutations(range(DIM)):
        inversions = sum(1 for i in range(DIM) for j in range(i + 1, DIM) if perm[i] > perm[j])
        result[perm] = Fraction(-1 if inversions % 2 else 1)
    return result


class Jet:
    """Truncated series sum_mu C_mu x^mu with exact tensor coefficients"""

    def __init__(self, coeffs: Dict[Exponent, np.ndarray], order: int, rank: int):
        self.order = order
        self.rank = rank
        self.coeffs = {mu: c for mu, c in coeffs.items() if sum(mu) <= order}

    @classmethod
    def constant(cls, value: np.ndarray, order: int) -> "Jet":
        return cls({(0,) * DIM: value}, order, value.ndim)

    def at_origin(self) -> np.ndarray:
        return self.coeffs.get((0,) * DIM, _zeros(self.rank))

    def _combine(self, other: "Jet", factor: int) -> "Jet":
        order = min(self.order, other.order)
        out = {mu: c for mu, c in self.coeffs.items() if sum(mu) <= order}
        for mu, c in other.coeffs.items():
            if sum(mu) > order:
                continue
            out[mu] = out[mu] + factor * c if mu in out else factor * c
        return Jet(out, order, self.rank)

    def __add__(self, other: "Jet") -> "Jet":
        return self._combine(other, 1)

    def __sub__(self, other: "Jet") -> "Jet":
        return self._combine(other, -1)

    def scaled(self, factor: Fraction) -> "Jet":
        return Jet({mu: c * factor for mu, c in self.coeffs.items()}, self.order, self.rank)

    def transpose(self, axes: Sequence[int]) -> "Jet":
        return Jet({mu: np.transpose(c, axes) for mu, c in self.coeffs.items()}, self.order, self.rank)

    def moveaxis(self, source: int, destination: int) -> "Jet":
        return Jet({mu: np.moveaxis(c, source, destination) for mu, c in self.coeffs.items()}, self.order, self.rank)

    def tensordot(self, other: "Jet", axes) -> "Jet":
        order = min(self.order, other.order)
        contracted = len(axes[0]) if isinstance(axes, (list, tuple)) else axes
        out: Dict[Exponent, np.ndarray] = {}
        for mu, a in self.coeffs.items():
            degree = sum(mu)
            for nu, b in other.coeffs.items():
                if degree + sum(nu) > order:
                    continue
                key = tuple(i + j for i, j in zip(mu, nu))
                term = np.tensordot(a, b, axes=axes)
                out[key] = out[key] + term if key in out else term
        return Jet(out, order, self.rank + other.rank - 2 * contracted)

    def partial(self) -> "Jet":
        """Coordinate derivative, new index appended last"""
        out: Dict[Exponent, np.ndarray] = {}
        for mu, c in self.coeffs.items():
            if sum(mu) == 0:
                continue
            for i in range(DIM):
                if mu[i] == 0:
                    continue
                lower = mu[:i] + (mu[i] - 1,) + mu[i + 1:]
                block = out.setdefault(lower, _zeros(self.rank + 1))
                block[..., i] = block[..., i] + c * mu[i]
        return Jet(out, self.order - 1, self.rank + 1)


def _exponents(max_degree: int, min_degree: int = 1) -> List[Exponent]:
    result = []
    for mu in itertools.product(range(max_degree + 1), repeat=DIM):
        if min_degree <= sum(mu) <= max_degree:
            result.append(mu)
    return sorted(result, key=lambda m: (sum(m), m))


class JetMetric:
    """g_ab = eta_ab + sum_mu c_{ab,mu} x^mu, polynomial of degree `degree`"""

    def __init__(self, perturbation: Dict[Exponent, np.ndarray], degree: int, signature: int = -1,
                 seed: Optional[int] = None):
        for mu, c in perturbation.items():
            if sum(mu) == 0 or sum(mu) > degree:
                raise MalformedInputError(f"Perturbation term x^{mu} outside degrees 1..{degree}")
            if any(c[a, b] != c[b, a] for a in range(DIM) for b in range(DIM)):
                raise MalformedInputError("Metric perturbation must be symmetric")
        self.perturbation = perturbation
        self.degree = degree
        self.signature = signature
        self.seed = seed
        self.eta = eta(signature)

    @classmethod
    def random(cls, seed: int, degree: int, signature: int = -1, scale: int = 3) -> "JetMetric":
        rng = np.random.default_rng(seed)
        perturbation = {}
        for mu in _exponents(degree):
            c = _zeros(2)
            for a in range(DIM):
                for b in range(a, DIM):
                    value = Fraction(int(rng.integers(-scale, scale + 1)), int(rng.integers(1, scale + 1)))
                    c[a, b] = c[b, a] = value
            perturbation[mu] = c
        logger.debug(f"Random metric: seed={seed}, degree={degree}, {len(perturbation)} monomials")
        return cls(perturbation, degree, signature, seed)

    @classmethod
    def flat(cls, degree: int, signature: int = -1) -> "JetMetric":
        return cls({}, degree, signature)

    @classmethod
    def from_components(cls, components: Dict[Tuple[int, int], Dict[Exponent, Union[int, Fraction]]],
                        degree: int, signature: int = -1) -> "JetMetric":
        perturbation: Dict[Exponent, np.ndarray] = {}
        for (a, b), series in components.items():
            for mu, value in series.items():
                c = perturbation.setdefault(tuple(mu), _zeros(2))
                c[a, b] = c[b, a] = Fraction(value)
        return cls(perturbation, degree, signature)

    def metric_jet(self) -> Jet:
        coeffs = dict(self.perturbation)
        zero = (0,) * DIM
        coeffs[zero] = self.eta.copy()
        return Jet(coeffs, self.degree, 2)

    def inverse_jet(self) -> Jet:
        """Neumann series (1 + eta h)^-1 eta, exact to the metric degree"""
        h = Jet(dict(self.perturbation), self.degree, 2)
        eta_jet = Jet.constant(self.eta, self.degree)
        step = eta_jet.tensordot(h, ([1], [0])).scaled(Fraction(-1))
        power = Jet.constant(eta(1), self.degree)
        inverse = eta_jet
        for _ in range(self.degree):
            power = power.tensordot(step, ([1], [0]))
            if not power.coeffs:
                break
            inverse = inverse + power.tensordot(eta_jet, ([1], [0]))
        return inverse


class CurvatureJet:
    """Components of D^k R_{abcd} at the origin for k = 0..max_deriv"""

    def __init__(self, derivatives: List[np.ndarray], metric: JetMetric):
        self.derivatives = derivatives
        self.metric = metric
        self.max_deriv = len(derivatives) - 1
        self.inverse_eta_diag = [metric.eta[i, i] for i in range(DIM)]
        self.epsilon = epsilon_at_origin()

    def riemann(self) -> np.ndarray:
        return self.derivatives[0]


def christoffel(metric: JetMetric) -> Jet:
    """G[e,a,c] = Gamma^e_{ac}"""
    g_inv = metric.inverse_jet()
    dg = metric.metric_jet().partial()
    lowered = (dg.transpose((0, 2, 1)) + dg - dg.transpose((2, 0, 1))).scaled(Fraction(1, 2))
    return g_inv.tensordot(lowered, ([1], [0]))


def covariant_derivative(tensor: Jet, gamma: Jet) -> Jet:
    """D_f T_{a1..ar}, with f appended as the last index"""
    result = tensor.partial()
    rank = tensor.rank
    for i in range(rank):
        correction = tensor.tensordot(gamma, ([i], [0])).moveaxis(rank, i)
        result = result - correction
    return result


def riemann_jet(metric: JetMetric, gamma: Optional[Jet] = None) -> Jet:
    gamma = gamma if gamma is not None else christoffel(metric)
    d_gamma = gamma.partial()
    quadratic = gamma.tensordot(gamma, ([0], [2]))
    upper = (d_gamma.transpose((1, 3, 2, 0)) - d_gamma.transpose((3, 1, 2, 0))
             + quadratic.transpose((0, 3, 1, 2)) - quadratic.transpose((3, 0, 1, 2)))
    return upper.tensordot(metric.metric_jet(), ([3], [0]))


def curvature_jet(metric: JetMetric, max_deriv: int) -> CurvatureJet:
    if metric.degree < max_deriv + 2:
        raise InsufficientJetError(
            f"Metric degree {metric.degree} too low for {max_deriv} derivatives of curvature")
    gamma = christoffel(metric)
    current = riemann_jet(metric, gamma)
    arrays = [current.at_origin()]
    for k in range(max_deriv):
        current = covariant_derivative(current, gamma)
        arrays.append(current.at_origin())
    logger.debug(f"Curvature jet to order {max_deriv} (seed={metric.seed})")
    return CurvatureJet(arrays, metric)


def riemann_via_sympy(metric: JetMetric) -> np.ndarray:
    """R_{abcd} at the origin from symbolic first and second metric derivatives"""
    xs = sympy.symbols("x0:4")
    g = sympy.zeros(DIM, DIM)
    for a in range(DIM):
        for b in range(DIM):
            expr = sympy.Rational(metric.eta[a, b].numerator, metric.eta[a, b].denominator)
            for mu, c in metric.perturbation.items():
                value = c[a, b]
                if value:
                    expr += sympy.Rational(value.numerator, value.denominator) * sympy.Mul(*[x ** p for x, p in zip(xs, mu)])
            g[a, b] = expr
    origin = {x: 0 for x in xs}

    def at0(expr):
        return sympy.Rational(expr.subs(origin))

    dg = [[[at0(sympy.diff(g[a, b], xs[c])) for c in range(DIM)] for b in range(DIM)] for a in range(DIM)]
    ddg = [[[[at0(sympy.diff(g[a, b], xs[c], xs[d])) for d in range(DIM)] for c in range(DIM)]
            for b in range(DIM)] for a in range(DIM)]
    inv = [at0(g[i, i]) for i in range(DIM)]
    half = sympy.Rational(1, 2)

    def gamma_low(d, a, c):
        return half * (dg[d][c][a] + dg[d][a][c] - dg[a][c][d])

    def d_gamma_low(d, a, c, b):
        return half * (ddg[d][c][a][b] + ddg[d][a][c][b] - ddg[a][c][d][b])

    def gamma_up(e, a, c):
        return inv[e] * gamma_low(e, a, c)

    def d_gamma_up(e, a, c, b):
        # D_b g^{ed} = -g^{ep} D_b g_pq g^{qd}; eta is diagonal
        return inv[e] * d_gamma_low(e, a, c, b) - sum(
            inv[e] * dg[e][q][b] * inv[q] * gamma_low(q, a, c) for q in range(DIM))

    result = _zeros(4)
    for a, b, c, d in itertools.product(range(DIM), repeat=4):
        e = d
        value = (d_gamma_up(e, a, c, b) - d_gamma_up(e, b, c, a)
                 + sum(gamma_up(f, a, c) * gamma_up(e, b, f) - gamma_up(f, b, c) * gamma_up(e, a, f)
                       for f in range(DIM)))
        lowered = sympy.Rational(value * inv[d])
        result[a, b, c, d] = Fraction(int(lowered.p), int(lowered.q))
    return result


class _Node:
    __slots__ = ("array", "labels")

    def __init__(self, array: np.ndarray, labels: List[int]):
        self.array = array
        self.labels = labels


def _raise_axis(array: np.ndarray, axis: int, eta_diag: Sequence[Fraction]) -> np.ndarray:
    shape = [1] * array.ndim
    shape[axis] = DIM
    weights = np.array(list(eta_diag), dtype=object).reshape(shape)
    return array * weights


def _trace_internal(node: _Node, eta_diag: Sequence[Fraction]) -> _Node:
    array, labels = node.array, list(node.labels)
    while True:
        pair = None
        for p in range(len(labels)):
            for q in range(p + 1, len(labels)):
                if labels[p] == labels[q]:
                    pair = (p, q)
                    break
            if pair:
                break
        if pair is None:
            return _Node(array, labels)
        p, q = pair
        traced = np.diagonal(_raise_axis(array, p, eta_diag), axis1=p, axis2=q).sum(axis=-1)
        array = np.asarray(traced, dtype=object)
        labels = [l for k, l in enumerate(labels) if k not in (p, q)]


def contract(nodes: List[Tuple[np.ndarray, Sequence[int]]], eta_diag: Sequence[Fraction]) -> Fraction:
    """Full contraction: trace within nodes, then merge the pair sharing most indices"""
    scalar = Fraction(1)
    pending: List[_Node] = []
    for array, labels in nodes:
        node = _trace_internal(_Node(array, list(labels)), eta_diag)
        if not node.labels:
            scalar *= Fraction(node.array.item() if isinstance(node.array, np.ndarray) else node.array)
        else:
            pending.append(node)
    while pending:
        best = None
        for i in range(len(pending)):
            for j in range(i + 1, len(pending)):
                shared = len(set(pending[i].labels) & set(pending[j].labels))
                if best is None or shared > best[0]:
                    best = (shared, i, j)
        if best is None or best[0] == 0:
            raise MalformedInputError("Contraction left uncontracted indices")
        _, i, j = best
        a, b = pending[i], pending[j]
        shared = [l for l in a.labels if l in b.labels]
        axes_a = [a.labels.index(l) for l in shared]
        axes_b = [b.labels.index(l) for l in shared]
        left = a.array
        for axis in axes_a:
            left = _raise_axis(left, axis, eta_diag)
        merged = np.asarray(np.tensordot(left, b.array, axes=(axes_a, axes_b)), dtype=object)
        labels = [l for l in a.labels if l not in shared] + [l for l in b.labels if l not in shared]
        pending = [n for k, n in enumerate(pending) if k not in (i, j)]
        node = _trace_internal(_Node(merged, labels), eta_diag)
        if not node.labels:
            scalar *= Fraction(node.array.item())
        else:
            pending.append(node)
    return scalar


def evaluate_monomial(m: Monomial, jet: CurvatureJet) -> Fraction:
    if m.sign == 0:
        return Fraction(0)
    deepest = max(m.case.lambdas, default=0)
    if deepest > jet.max_deriv:
        raise InsufficientJetError(f"Need {deepest} derivatives of curvature, jet has {jet.max_deriv}")
    labels = m.labels()
    nodes = []
    for off, lam in zip(m.case.factor_offsets(), m.case.lambdas):
        nodes.append((jet.derivatives[lam], labels[off:off + 4 + lam]))
    if m.case.dual:
        off = m.case.epsilon_offset
        nodes.append((jet.epsilon, labels[off:off + 4]))
    return m.sign * contract(nodes, jet.inverse_eta_diag)


class JetEvaluator:
    """Numeric value of id combinations on one curvature jet, memoised per id"""

    def __init__(self, jet: CurvatureJet, monomial_of: Callable[[InvariantId], Monomial]):
        self.logger = logging.getLogger(__name__)
        self.jet = jet
        self.monomial_of = monomial_of
        self._values: Dict[InvariantId, Fraction] = {}

    def value_of(self, ident: InvariantId) -> Fraction:
        if ident not in self._values:
            self._values[ident] = evaluate_monomial(self.monomial_of(ident), self.jet)
        return self._values[ident]

    def evaluate(self, comb: LinComb) -> Fraction:
        total = Fraction(0)
        for term, coeff in comb.items():
            if isinstance(term, InvariantId):
                total += coeff * self.value_of(term)
            else:
                product = Fraction(1)
                for factor in term:
                    product *= self.value_of(factor)
                total += coeff * product
        return total


def evaluate(comb: LinComb, jet: CurvatureJet, monomial_of: Callable[[InvariantId], Monomial]) -> Fraction:
    return JetEvaluator(jet, monomial_of).evaluate(comb)
