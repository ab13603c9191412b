import math, re
from dataclasses import dataclass, field

import mpmath
import numpy as np

from errors import (ExpressionSyntaxError, UnknownIdentifierError, DomainError,
                    ExpressionOverflowError, NonSmoothError)

# Density formulas: a small recursive descent parser into an immutable AST, a printer,
# and evaluators for plain floats, numpy arrays, mpmath numbers and dual numbers.
# The grammar is written out in file_structure_documentation.txt

FUNCTIONS = ("abs", "exp", "log", "sqrt", "atan")
BINARY_SYMBOLS = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
SYMBOL_OF = {name: symbol for symbol, name in BINARY_SYMBOLS.items()}

TOKEN_PATTERN = re.compile(r"""
    (?P<space>\s+)
  | (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^])
  | (?P<lparen>\()
  | (?P<rparen>\))
""", re.VERBOSE)


##### AST #####

@dataclass(frozen=True)
class Constant:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Variable:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # neg, abs, exp, log, sqrt, atan
    operand: object
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str  # add, sub, mul, div, pow
    left: object
    right: object
    offset: int = field(default=0, compare=False)


class DensityExpr:
    """
    A parsed density formula with exactly one free variable. Immutable; equality is structural
    """

    def __init__(self, root, variable, text=None):
        self.root = root
        self.variable = variable
        self.text = text if text is not None else toText(root)

    def __eq__(self, other):
        return isinstance(other, DensityExpr) and self.root == other.root and self.variable == other.variable

    def __hash__(self):
        return hash((self.root, self.variable))

    def __repr__(self):
        return "DensityExpr(" + repr(self.text) + ")"

    def __str__(self):
        return self.text


##### Lexer and parser #####

class Token:

    def __init__(self, kind, text, offset):
        self.kind = kind
        self.text = text
        self.offset = offset

    def __repr__(self):
        return "(" + self.kind + ", " + self.text + ", " + str(self.offset) + ")"


def tokenize(text):
    """
    Split a formula into tokens, recording the byte offset of each

    Args:
        text (str): formula source

    Returns:
        list: list of Tokens ending with an "end" token
    """
    lstTokens = []
    intPosition = 0
    while intPosition < len(text):
        match = TOKEN_PATTERN.match(text, intPosition)
        if match is None:
            raise ExpressionSyntaxError("unexpected character " + repr(text[intPosition]),
                                        _byteOffset(text, intPosition))
        if match.lastgroup != "space":
            lstTokens.append(Token(match.lastgroup, match.group(), _byteOffset(text, intPosition)))
        intPosition = match.end()

    lstTokens.append(Token("end", "", _byteOffset(text, len(text))))
    return lstTokens


def _byteOffset(text, index):
    return len(text[:index].encode("utf-8"))


class Parser:
    """
    Precedence, loosest first: add/sub, mul/div, unary minus, pow.
    Binary operators associate to the left except pow, which associates to the right
    """

    def __init__(self, text, variable=None):
        self.text = text
        self.tokens = tokenize(text)
        self.position = 0
        self.variable = variable

    def peek(self):
        return self.tokens[self.position]

    def advance(self):
        token = self.tokens[self.position]
        self.position += 1
        return token

    def expect(self, kind, description):
        token = self.peek()
        if token.kind != kind:
            raise ExpressionSyntaxError("expected " + description + _found(token), token.offset)
        return self.advance()

    def parse(self):
        root = self.expression()
        token = self.peek()
        if token.kind != "end":
            raise ExpressionSyntaxError("unexpected " + repr(token.text), token.offset)
        if self.variable is None:
            raise ExpressionSyntaxError("formula has no free variable", 0)
        return DensityExpr(root, self.variable, self.text)

    def expression(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            token = self.advance()
            node = Binary(BINARY_SYMBOLS[token.text], node, self.term(), token.offset)
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            token = self.advance()
            node = Binary(BINARY_SYMBOLS[token.text], node, self.unary(), token.offset)
        return node

    def unary(self):
        token = self.peek()
        if token.kind == "op" and token.text == "-":
            self.advance()
            return Unary("neg", self.unary(), token.offset)
        if token.kind == "op" and token.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            token = self.advance()
            # The exponent may carry its own sign, e.g. V^-2
            node = Binary("pow", node, self.unary(), token.offset)
        return node

    def atom(self):
        token = self.advance()

        if token.kind == "number":
            floatValue = float(token.text)
            if math.isinf(floatValue):
                raise ExpressionSyntaxError("number out of range " + repr(token.text), token.offset)
            return Constant(floatValue, token.offset)

        if token.kind == "lparen":
            node = self.expression()
            self.expect("rparen", "')'")
            return node

        if token.kind == "ident":
            if token.text in FUNCTIONS:
                self.expect("lparen", "'(' after " + token.text)
                node = self.expression()
                self.expect("rparen", "')'")
                return Unary(token.text, node, token.offset)

            if self.peek().kind == "lparen":
                raise UnknownIdentifierError("unknown function " + repr(token.text), token.offset)

            # Any other identifier is the free variable; a second distinct one is unknown
            if self.variable is None:
                self.variable = token.text
            elif token.text != self.variable:
                raise UnknownIdentifierError("unknown identifier " + repr(token.text), token.offset)
            return Variable(token.text, token.offset)

        if token.kind == "end":
            raise ExpressionSyntaxError("unexpected end of input", token.offset)
        raise ExpressionSyntaxError("unexpected " + repr(token.text), token.offset)


def _found(token):
    if token.kind == "end":
        return " at end of input"
    return ", found " + repr(token.text)


def parse(text, variable=None):
    """
    Parse a density formula

    Args:
        text (str): formula, e.g. "sqrt(V^2 + 1) - 1/2"
        variable (str): the coordinate symbol to accept; inferred from the first identifier if None

    Returns:
        DensityExpr: the parsed expression
    """
    return Parser(text, variable).parse()


def toText(node):
    """
    Fully parenthesized rendering of an expression; parsing the result gives back the same AST

    Args:
        node: DensityExpr or AST node

    Returns:
        str: formula text
    """
    if isinstance(node, DensityExpr):
        node = node.root
    if isinstance(node, Constant):
        return repr(node.value)
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return "(-" + toText(node.operand) + ")"
        return node.op + "(" + toText(node.operand) + ")"
    return "(" + toText(node.left) + " " + SYMBOL_OF[node.op] + " " + toText(node.right) + ")"


##### Value evaluation #####

class _Backend:
    """Function table plus the predicates the domain checks need, for one number type."""

    def __init__(self, name, functions, anyTrue, checkFinite):
        self.name = name
        self.functions = functions
        self.anyTrue = anyTrue
        self.checkFinite = checkFinite


def _floatPower(a, b):
    return a ** b


FLOAT = _Backend("float",
                 {"exp": math.exp, "log": math.log, "sqrt": math.sqrt, "atan": math.atan, "abs": abs,
                  "pow": _floatPower},
                 lambda mask: bool(mask), True)
ARRAY = _Backend("array",
                 {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "atan": np.arctan, "abs": np.abs,
                  "pow": np.power},
                 lambda mask: bool(np.any(mask)), True)
PRECISE = _Backend("mpmath",
                   {"exp": mpmath.exp, "log": mpmath.log, "sqrt": mpmath.sqrt, "atan": mpmath.atan,
                    "abs": abs, "pow": mpmath.power},
                   lambda mask: bool(mask), False)


def _isInteger(b, backend):
    if backend is ARRAY:
        return np.all(np.floor(b) == b)
    return math.floor(b) == b


def _evaluateNode(node, v, backend):
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, Variable):
        return v

    if isinstance(node, Unary):
        u = _evaluateNode(node.operand, v, backend)
        if node.op == "neg":
            return -u
        if node.op == "log" and backend.anyTrue(u <= 0):
            raise DomainError("log of a non-positive value", toText(node), node.offset)
        if node.op == "sqrt" and backend.anyTrue(u < 0):
            raise DomainError("sqrt of a negative value", toText(node), node.offset)
        return _checked(backend.functions[node.op], (u,), node, backend)

    a = _evaluateNode(node.left, v, backend)
    b = _evaluateNode(node.right, v, backend)
    if node.op == "add":
        return _checked(lambda p, q: p + q, (a, b), node, backend)
    if node.op == "sub":
        return _checked(lambda p, q: p - q, (a, b), node, backend)
    if node.op == "mul":
        return _checked(lambda p, q: p * q, (a, b), node, backend)
    if node.op == "div":
        if backend.anyTrue(b == 0):
            raise DomainError("division by zero", toText(node), node.offset)
        return _checked(lambda p, q: p / q, (a, b), node, backend)

    # pow
    _checkPowerDomain(a, b, node, backend)
    return _checked(backend.functions["pow"], (a, b), node, backend)


def _checkPowerDomain(a, b, node, backend):
    if backend.anyTrue(a < 0) and not _isInteger(b, backend):
        raise DomainError("non-integer power of a negative value", toText(node), node.offset)
    if backend.anyTrue((a == 0) & (b < 0)) if backend is ARRAY else (a == 0 and b < 0):
        raise DomainError("negative power of zero", toText(node), node.offset)


def _checked(function, args, node, backend):
    try:
        if backend is ARRAY:
            with np.errstate(all="ignore"):
                result = function(*args)
        else:
            result = function(*args)
    except OverflowError:
        raise ExpressionOverflowError("overflow", toText(node), node.offset)

    if backend.checkFinite and backend.anyTrue(~np.isfinite(result)):
        raise ExpressionOverflowError("overflow", toText(node), node.offset)
    return result


def evaluate(expr, v):
    """
    Evaluate a formula in IEEE doubles

    Args:
        expr (DensityExpr): formula
        v (float): value of the free variable

    Returns:
        float: formula value
    """
    return float(_evaluateNode(expr.root, float(v), FLOAT))


def evaluateArray(expr, values):
    """
    Evaluate a formula elementwise over a numpy array

    Args:
        expr (DensityExpr): formula
        values (array): values of the free variable

    Returns:
        np.ndarray: formula values, same shape as values
    """
    arrValues = np.asarray(values, dtype=float)
    return np.broadcast_to(_evaluateNode(expr.root, arrValues, ARRAY), arrValues.shape).astype(float)


def evaluatePrecise(expr, v, digits):
    """
    Evaluate a formula in mpmath at the given number of significant digits

    Args:
        expr (DensityExpr): formula
        v: value of the free variable (float or mpf)
        digits (int): working precision in decimal digits

    Returns:
        mpmath.mpf: formula value at the working precision
    """
    with mpmath.workdps(digits):
        return +_evaluateNode(expr.root, mpmath.mpf(v), PRECISE)


##### Dual numbers #####

class DualValue:
    """
    Forward-mode dual number: primal value plus tangent (first derivative).
    Works for float or numpy array components
    """

    __slots__ = ("primal", "tangent")

    def __init__(self, primal, tangent=0.0):
        self.primal = primal
        self.tangent = tangent

    def __repr__(self):
        return "DualValue(" + repr(self.primal) + ", " + repr(self.tangent) + ")"

    @staticmethod
    def lift(other):
        if isinstance(other, DualValue):
            return other
        return DualValue(other, 0.0)

    def __add__(self, other):
        other = DualValue.lift(other)
        return DualValue(self.primal + other.primal, self.tangent + other.tangent)

    __radd__ = __add__

    def __sub__(self, other):
        other = DualValue.lift(other)
        return DualValue(self.primal - other.primal, self.tangent - other.tangent)

    def __rsub__(self, other):
        return DualValue.lift(other) - self

    def __mul__(self, other):
        other = DualValue.lift(other)
        return DualValue(self.primal * other.primal,
                         self.primal * other.tangent + self.tangent * other.primal)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = DualValue.lift(other)
        return DualValue(self.primal / other.primal,
                         (self.tangent * other.primal - self.primal * other.tangent) / (other.primal * other.primal))

    def __rtruediv__(self, other):
        return DualValue.lift(other) / self

    def __neg__(self):
        return DualValue(-self.primal, -self.tangent)

    def __pow__(self, other):
        other = DualValue.lift(other)
        primal = np.power(self.primal, other.primal)
        if not np.any(other.tangent):
            # Power rule; a zero base with zero tangent contributes nothing
            tangent = np.where(self.tangent == 0, 0.0,
                               other.primal * np.power(self.primal, other.primal - 1) * self.tangent)
        else:
            tangent = primal * (other.tangent * np.log(self.primal) + other.primal * self.tangent / self.primal)
        return DualValue(primal, tangent)

    def exp(self):
        primal = np.exp(self.primal)
        return DualValue(primal, primal * self.tangent)

    def log(self):
        return DualValue(np.log(self.primal), self.tangent / self.primal)

    def sqrt(self):
        primal = np.sqrt(self.primal)
        tangent = np.where(self.tangent == 0, 0.0, self.tangent / (2 * np.where(primal == 0, 1.0, primal)))
        return DualValue(primal, tangent)

    def atan(self):
        return DualValue(np.arctan(self.primal), self.tangent / (1 + self.primal * self.primal))

    def absolute(self, side=1):
        """
        |u| with the one-sided convention at u = 0: the right derivative is |u'|, the left one -|u'|
        """
        sign = np.sign(self.primal)
        kink = side * np.abs(self.tangent)
        return DualValue(np.abs(self.primal), np.where(sign == 0, kink, sign * self.tangent))


def _dualNode(node, v, side, kinks):
    if isinstance(node, Constant):
        return DualValue(node.value, 0.0)
    if isinstance(node, Variable):
        return DualValue(v, np.ones_like(v))

    if isinstance(node, Unary):
        u = _dualNode(node.operand, v, side, kinks)
        if node.op == "neg":
            return -u
        if node.op == "abs":
            if np.any(u.primal == 0):
                kinks.append(node)
            return u.absolute(side)
        if node.op == "log" and np.any(u.primal <= 0):
            raise DomainError("log of a non-positive value", toText(node), node.offset)
        if node.op == "sqrt":
            if np.any(u.primal < 0):
                raise DomainError("sqrt of a negative value", toText(node), node.offset)
            if np.any((u.primal == 0) & (u.tangent != 0)):
                raise NonSmoothError("sqrt is not differentiable at 0 in " + toText(node))
        return _finiteDual(getattr(u, node.op)(), node)

    a = _dualNode(node.left, v, side, kinks)
    b = _dualNode(node.right, v, side, kinks)
    if node.op == "add":
        return _finiteDual(a + b, node)
    if node.op == "sub":
        return _finiteDual(a - b, node)
    if node.op == "mul":
        return _finiteDual(a * b, node)
    if node.op == "div":
        if np.any(b.primal == 0):
            raise DomainError("division by zero", toText(node), node.offset)
        return _finiteDual(a / b, node)

    # pow
    if np.any(b.tangent):
        if np.any(a.primal <= 0):
            raise DomainError("variable power of a non-positive value", toText(node), node.offset)
    else:
        _checkPowerDomain(a.primal, b.primal, node, ARRAY)
        if np.any((a.primal == 0) & (b.primal < 1) & (a.tangent != 0)):
            raise NonSmoothError("power below one is not differentiable at 0 in " + toText(node))
    return _finiteDual(a ** b, node)


def _finiteDual(value, node):
    if not (np.all(np.isfinite(value.primal)) and np.all(np.isfinite(value.tangent))):
        raise ExpressionOverflowError("overflow", toText(node), node.offset)
    return value


def _runDual(expr, v, side):
    lstKinks = []
    with np.errstate(all="ignore"):
        value = _dualNode(expr.root, v, side, lstKinks)
    return value, lstKinks


def evalDual(expr, v, side=None, kinkTolerance=1e-8):
    """
    Evaluate a formula and its exact first derivative by forward-mode dual arithmetic

    At a kink (abs of zero) both one-sided derivatives are computed; they must agree within
    kinkTolerance for the formula to count as C1 there, and their mean is returned.

    Args:
        expr (DensityExpr): formula
        v (float or array): value of the free variable
        side (int): +1 or -1 to request a one-sided derivative without certification
        kinkTolerance (float): allowed gap between the one-sided derivatives

    Returns:
        DualValue: primal (formula value) and tangent (derivative)
    """
    boolScalar = np.ndim(v) == 0
    v = np.asarray(v, dtype=float) if not boolScalar else float(v)

    if side is not None:
        value, _ = _runDual(expr, v, side)
        return _shaped(value, boolScalar, v)

    right, lstKinks = _runDual(expr, v, 1)
    if lstKinks:
        left, _ = _runDual(expr, v, -1)
        gap = np.abs(np.asarray(right.tangent) - np.asarray(left.tangent))
        if np.any(gap > kinkTolerance):
            raise NonSmoothError("one-sided derivatives disagree at a kink of " + toText(lstKinks[0]),
                                 left=left.tangent, right=right.tangent)
        right = DualValue(right.primal, (np.asarray(right.tangent) + np.asarray(left.tangent)) / 2)

    return _shaped(right, boolScalar, v)


def _shaped(value, boolScalar, v):
    if boolScalar:
        return DualValue(float(value.primal), float(value.tangent))
    shape = np.shape(v)
    return DualValue(np.broadcast_to(value.primal, shape).astype(float),
                     np.broadcast_to(value.tangent, shape).astype(float))
