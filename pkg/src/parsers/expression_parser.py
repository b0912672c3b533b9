"""
Invariant expression language.

Parses sums of products of differentiated Riemann tensors into monomials
and prints monomials back in the same notation:

    CD[c][R[a,b,-a,-b]] * CD[-e][R[-c,d,-d,e]]
    1/8 * CD[-e]@CD[e]@R[a,b,c,d] * ...

A metric is assumed, so variance marks are accepted and ignored: an index
letter used twice is contracted wherever it appears.

Derivatives may also follow a semicolon inside the tensor brackets, innermost
first, so R[a,b,c,d;e,f] is CD[f][CD[e][R[a,b,c,d]]] and R[;e,-e] is the
Laplacian of the Ricci scalar.
"""

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Tuple

from core.canonicalizer import canonicalize_lincomb
from core.enumerator import InvariantId
from core.errors import ExpressionSyntaxError, MalformedInputError
from core.monomial import Factor, LinComb, Monomial
from relations.reducer import order_key

logger = logging.getLogger(__name__)

_TOKEN_PATTERN = re.compile(r"(?P<number>\d+)|(?P<name>[A-Za-z][A-Za-z0-9]*)|(?P<punct>[\[\](),*+\-/@;])")

# a parsed sum: (coefficient, factors) with string labels
Terms = List[Tuple[Fraction, List[Factor]]]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        match = _TOKEN_PATTERN.match(text, pos)
        if not match:
            raise ExpressionSyntaxError(f"Unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class ExpressionParser:
    """Recursive-descent parser; one instance per input text"""

    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0
        self._fresh = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def _accept(self, text: str) -> bool:
        if self.current.kind in ("punct", "name") and self.current.text == text:
            self.index += 1
            return True
        return False

    def _expect(self, text: str) -> Token:
        if not self._accept(text):
            found = self.current.text or "end of input"
            raise ExpressionSyntaxError(f"Expected {text!r}, found {found!r}", self.current.position)
        return self.tokens[self.index - 1]

    def _fresh_label(self) -> str:
        self._fresh += 1
        return f"_{self._fresh}"

    def parse(self) -> Terms:
        if self.current.kind == "end":
            raise ExpressionSyntaxError("Empty expression", 0)
        terms = self._expr()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(f"Unexpected {self.current.text!r}", self.current.position)
        return terms

    def _expr(self) -> Terms:
        sign = Fraction(1)
        if self._accept("-"):
            sign = Fraction(-1)
        else:
            self._accept("+")
        result = _scale(self._term(), sign)
        while True:
            if self._accept("+"):
                result.extend(self._term())
            elif self._accept("-"):
                result.extend(_scale(self._term(), Fraction(-1)))
            else:
                return result

    def _term(self) -> Terms:
        coeff = Fraction(1)
        start = self.current.position
        if self.current.kind == "number":
            coeff = self._rational()
            if not self._accept("*"):
                if self.current.kind == "end" or self.current.text in ("+", "-", ")", "]"):
                    raise ExpressionSyntaxError("Constant terms are not invariants", start)
        result: Terms = [(coeff, [])]
        while True:
            result = _multiply(result, self._factor())
            if not self._accept("*"):
                break
        return result

    def _rational(self) -> Fraction:
        numerator = int(self._advance().text)
        if self._accept("/"):
            if self.current.kind != "number":
                raise ExpressionSyntaxError("Expected a denominator", self.current.position)
            denominator = int(self._advance().text)
            if denominator == 0:
                raise ExpressionSyntaxError("Zero denominator", self.tokens[self.index - 1].position)
            return Fraction(numerator, denominator)
        return Fraction(numerator)

    def _factor(self) -> Terms:
        token = self.current
        if self._accept("("):
            inner = self._expr()
            self._expect(")")
            return inner
        if token.kind != "name":
            found = token.text or "end of input"
            raise ExpressionSyntaxError(f"Expected a tensor, found {found!r}", token.position)
        self._advance()
        if token.text == "CD":
            index = self._bracketed_indices(1)[0]
            return _differentiate(self._operand(), index)
        if token.text == "R":
            if self.current.text == "[":
                head, derivatives = self._covariant_indices((0, 4))
                if not head:
                    return [(Fraction(1), [self._ricci_scalar(derivatives)])]
                return [(Fraction(1), [Factor("R", tuple(head), derivatives)])]
            return [(Fraction(1), [self._ricci_scalar()])]
        if token.text == "RicciScalar":
            return [(Fraction(1), [self._ricci_scalar()])]
        if token.text == "Ricci":
            (a, b), derivatives = self._covariant_indices((2,))
            c = self._fresh_label()
            return [(Fraction(1), [Factor("R", (c, a, c, b), derivatives)])]
        if token.text == "eps":
            return [(Fraction(1), [Factor("eps", tuple(self._bracketed_indices(4)))])]
        raise ExpressionSyntaxError(f"Unknown tensor {token.text!r}", token.position)

    def _operand(self) -> Terms:
        if self._accept("@"):
            return self._factor()
        if self._accept("["):
            inner = self._expr()
            self._expect("]")
            return inner
        return self._factor()

    def _ricci_scalar(self, derivatives: Tuple[str, ...] = ()) -> Factor:
        c, d = self._fresh_label(), self._fresh_label()
        return Factor("R", (c, d, c, d), derivatives)

    def _index_letters(self) -> List[str]:
        labels = []
        while True:
            self._accept("-")
            token = self.current
            if token.kind != "name":
                raise ExpressionSyntaxError("Expected an index letter", token.position)
            labels.append(self._advance().text)
            if not self._accept(","):
                return labels

    def _bracketed_indices(self, count: int) -> List[str]:
        open_token = self._expect("[")
        if self.current.text == ";":
            raise ExpressionSyntaxError("Derivative indices are not allowed here", self.current.position)
        labels = self._index_letters()
        if self.current.text == ";":
            raise ExpressionSyntaxError("Derivative indices are not allowed here", self.current.position)
        self._expect("]")
        if len(labels) != count:
            raise ExpressionSyntaxError(f"Expected {count} indices, found {len(labels)}", open_token.position)
        return labels

    def _covariant_indices(self, counts: Tuple[int, ...]) -> Tuple[List[str], Tuple[str, ...]]:
        """`[a,b,c,d;e,f]`: head indices, then derivative indices innermost first"""
        open_token = self._expect("[")
        head = [] if self.current.text == ";" else self._index_letters()
        derivatives: List[str] = []
        if self._accept(";"):
            derivatives = self._index_letters()
        self._expect("]")
        if len(head) not in counts:
            raise ExpressionSyntaxError(f"Expected {max(counts)} indices, found {len(head)}", open_token.position)
        return head, tuple(derivatives)


def _scale(terms: Terms, factor: Fraction) -> Terms:
    return [(c * factor, fs) for c, fs in terms]


def _multiply(left: Terms, right: Terms) -> Terms:
    return [(a * b, fa + fb) for a, fa in left for b, fb in right]


def _differentiate(terms: Terms, index: str) -> Terms:
    """Leibniz rule; epsilon is covariantly constant"""
    result: Terms = []
    for coeff, factors in terms:
        for k, factor in enumerate(factors):
            if factor.kind != "R":
                continue
            moved = Factor("R", factor.head, tuple(factor.derivatives) + (index,))
            result.append((coeff, factors[:k] + [moved] + factors[k + 1:]))
    return result


def parse(text: str) -> List[Tuple[Fraction, Monomial]]:
    """Expression text to (coefficient, monomial) terms, monomials carrying sign 1"""
    terms = ExpressionParser(text).parse()
    result = []
    for coeff, factors in terms:
        if coeff:
            result.append((coeff, Monomial.from_factors(factors)))
    logger.debug(f"Parsed {len(result)} terms")
    return result


def parse_lincomb(text: str) -> LinComb:
    """Parse and merge terms by canonical form"""
    return canonicalize_lincomb(parse(text))


def _letters() -> Iterable[str]:
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    for letter in alphabet:
        yield letter
    round_ = 1
    while True:
        for letter in alphabet:
            yield f"{letter}{round_}"
        round_ += 1


def _format_coefficient(coeff: Fraction, leading: bool) -> str:
    sign = "-" if coeff < 0 else ("" if leading else "+")
    magnitude = abs(coeff)
    if magnitude == 1:
        body = ""
    else:
        body = f"{magnitude} * "
    if leading:
        return f"{sign}{body}"
    return f" {sign} {body}"


NOTATIONS = ("brackets", "semicolon")


def _format_monomial_body(m: Monomial, notation: str = "brackets") -> str:
    if notation not in NOTATIONS:
        raise MalformedInputError(f"Unknown notation {notation!r}; expected one of {', '.join(NOTATIONS)}")
    names: Dict[int, str] = {}
    used: Dict[int, int] = {}
    letters = _letters()

    def index(label: int) -> str:
        if label not in names:
            names[label] = next(letters)
        used[label] = used.get(label, 0) + 1
        return names[label] if used[label] == 1 else f"-{names[label]}"

    pieces = []
    for factor in m.factors():
        if factor.kind == "eps":
            pieces.append(f"eps[{','.join(index(x) for x in factor.head)}]")
            continue
        if notation == "brackets":
            outer = [index(x) for x in reversed(factor.derivatives)]
        a, b, c, d = factor.head
        if a == c and b == d:
            name, head = "R", []
        elif a == c:
            name, head = "Ricci", [index(b), index(d)]
        elif b == d:
            name, head = "Ricci", [index(a), index(c)]
        else:
            name, head = "R", [index(a), index(b), index(c), index(d)]
        if notation == "semicolon":
            inner = [index(x) for x in factor.derivatives]
            if inner:
                pieces.append(f"{name}[{','.join(head)};{','.join(inner)}]")
            else:
                pieces.append(f"{name}[{','.join(head)}]" if head else name)
            continue
        text = f"{name}[{','.join(head)}]" if head else name
        for derivative in reversed(outer):
            text = f"CD[{derivative}][{text}]"
        pieces.append(text)
    return " * ".join(pieces)


def format_monomial(m: Monomial, notation: str = "brackets") -> str:
    """Monomial text with its sign or rational prefix; letters in first-use order"""
    if m.sign == 0:
        return "0"
    return f"{_format_coefficient(m.sign, True)}{_format_monomial_body(m, notation)}"


def format_terms(terms: Iterable[Tuple[Fraction, Monomial]], notation: str = "brackets") -> str:
    parts = []
    for coeff, m in terms:
        total = coeff * m.sign
        if total == 0:
            continue
        parts.append(f"{_format_coefficient(total, not parts)}{_format_monomial_body(m, notation)}")
    return "".join(parts) if parts else "0"


def format_id_combination(comb: LinComb) -> str:
    """Combination over invariant ids and products of ids, greatest term first"""
    parts = []
    for term, coeff in sorted(comb.items(), key=lambda kv: order_key(kv[0]), reverse=True):
        if isinstance(term, InvariantId):
            body = str(term)
        elif term:
            body = " * ".join(str(t) for t in term)
        else:
            body = None
        if body is None:
            sign = "-" if coeff < 0 else ("" if not parts else "+")
            text = f"{sign}{abs(coeff)}" if not parts else f" {sign} {abs(coeff)}"
            parts.append(text)
        else:
            parts.append(f"{_format_coefficient(coeff, not parts)}{body}")
    return "".join(parts) if parts else "0"
