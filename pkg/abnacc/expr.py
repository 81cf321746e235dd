"""
Expression language of the vector fields.

Grammar (whitespace-insensitive):

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' INT)?
    atom  := NUMBER | x<k> | func '(' expr ')' | '(' expr ')'
    func  := sin | cos | exp | sqrt

Variables are x1..xn. A tree is folded over an algebra: the same walk evaluates
plain floats (arrays of points) and truncated Taylor jets, so both see the same
sequence of floating-point operations.

"""
from dataclasses import dataclass
from re import compile as re_compile

import numpy as np

import jet as jets
from errors import (
    DimensionMismatchError,
    ExprSyntaxError,
    JetEvaluationError,
    UnknownIdentifierError,
    error_map
)
from jet import Jet, JetSpace

FUNCTIONS = ('sin', 'cos', 'exp', 'sqrt')

# |denominator| below this fraction of max(|numerator|, 1) is rejected
DIVISOR_TOLERANCE = 1e-12

_TOKEN = re_compile(
    r'\s*(?:'
    r'(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)'
    r'|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)'
    r'|(?P<op>[-+*/^()]))'
)

class Expr:

    """
    Definition of the expression tree nodes.

    """

    def fold(self, algebra):
        raise NotImplementedError # pragma: no cover

    def evaluate(self, x):
        """
        Evaluate the expression on points.

        :x: Array of shape (..., n).
        :returns: Array of shape (...).

        """
        x = np.asarray(x, dtype=float)
        value = self.fold(NumericAlgebra(x))

        return np.broadcast_to(value, x.shape[:-1]).astype(float)

@dataclass(frozen=True)
class Const(Expr):
    value: float

    def fold(self, algebra):
        return algebra.const(self.value)

    def __str__(self):
        return repr(float(self.value))

@dataclass(frozen=True)
class Var(Expr):
    index: int

    def fold(self, algebra):
        return algebra.var(self.index - 1)

    def __str__(self):
        return 'x{}'.format(self.index)

@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def fold(self, algebra):
        return algebra.neg(self.arg.fold(algebra))

    def __str__(self):
        return '(-{})'.format(self.arg)

@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def fold(self, algebra):
        a = self.left.fold(algebra)
        b = self.right.fold(algebra)

        if self.op == '+':
            return algebra.add(a, b)
        if self.op == '-':
            return algebra.sub(a, b)
        if self.op == '*':
            return algebra.mul(a, b)

        return algebra.div(a, b, self)

    def __str__(self):
        return '({} {} {})'.format(self.left, self.op, self.right)

@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def fold(self, algebra):
        return _ipow(self.base.fold(algebra), self.exponent, algebra)

    def __str__(self):
        return '({}^{})'.format(self.base, self.exponent)

@dataclass(frozen=True)
class Call(Expr):
    name: str
    arg: Expr

    def fold(self, algebra):
        return algebra.call(self.name, self.arg.fold(algebra), self)

    def __str__(self):
        return '{}({})'.format(self.name, self.arg)

def _ipow(base, exponent, algebra):
    """
    Integer power by repeated multiplication, shared by every algebra.

    """
    if exponent == 0:
        return algebra.one(base)

    result = base
    for _ in range(exponent - 1):
        result = algebra.mul(result, base)

    return result

class NumericAlgebra:

    """
    Implementation of the plain floating-point algebra over arrays of points.

    """

    def __init__(self, x):
        self.x = x

    def const(self, value):
        return float(value)

    def var(self, index):
        return self.x[..., index]

    def one(self, base):
        return np.ones_like(np.asarray(base, dtype=float))

    def neg(self, a):
        return -a

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b, node):
        bad = np.abs(b) < DIVISOR_TOLERANCE * np.maximum(np.abs(a), 1.0)
        if np.any(bad):
            raise JetEvaluationError('divisor', str(node), _first_point(self.x, bad))

        return a / b

    def call(self, name, a, node):
        if name == 'sqrt' and np.any(np.asarray(a) < 0.0):
            raise JetEvaluationError(
                'sqrt',
                str(node),
                _first_point(self.x, np.asarray(a) < 0.0)
            )

        return getattr(np, name)(a)

class JetAlgebra:

    """
    Implementation of the truncated Taylor algebra at base points.

    """

    def __init__(self, space, point):
        self.space = space
        self.point = point

    def const(self, value):
        return Jet.constant(self.space, value)

    def var(self, index):
        return Jet.variable(self.space, self.point, index)

    def one(self, base):
        return Jet.constant(self.space, np.ones(base.coeffs.shape[:-1]))

    def neg(self, a):
        return -a

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b, node):
        a0, b0 = np.broadcast_arrays(a.value, b.value)
        bad = np.abs(b0) < DIVISOR_TOLERANCE * np.maximum(np.abs(a0), 1.0)
        if np.any(bad):
            raise JetEvaluationError('divisor', str(node), _first_point(self.point, bad))

        return a / b

    def call(self, name, a, node):
        if name == 'sqrt':
            # the series needs a strictly positive base above order 0
            bad = a.value < 0.0 if self.space.order == 0 else a.value <= 0.0
            if np.any(bad):
                raise JetEvaluationError(
                    'sqrt',
                    str(node),
                    _first_point(self.point, bad)
                )

        return getattr(jets, name)(a)

def _first_point(x, mask):
    mask = np.broadcast_to(mask, np.asarray(x).shape[:-1])
    if mask.ndim == 0:
        return np.asarray(x).tolist()

    return np.asarray(x)[tuple(np.argwhere(mask)[0])].tolist()

class Parser:

    """
    Implementation of the recursive-descent parser of a single component.

    """

    def __init__(self, text, n):
        """
        Initialize the parser internal data.

        :text: Source text of the expression.
        :n: Dimension of the state space (accepted variables x1..xn).

        """
        self.text = text
        self.n = n
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text):
        tokens = []
        offset = 0

        while offset < len(text):
            if text[offset:].strip() == '':
                offset = len(text)
                break

            found = _TOKEN.match(text, offset)
            if not found or found.end() == offset:
                stripped = len(text) - len(text[offset:].lstrip())
                raise ExprSyntaxError(
                    stripped,
                    'unexpected character \'{}\''.format(text[stripped])
                )

            kind = found.lastgroup
            tokens.append((kind, found.group(kind), found.start(kind)))
            offset = found.end()

        tokens.append(('end', '', len(text)))

        return tokens

    def _peek(self):
        return self.tokens[self.pos]

    def _take(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect(self, value):
        kind, text, offset = self._take()
        if text != value or kind == 'end':
            raise ExprSyntaxError(
                offset,
                'expected \'{}\', found {}'.format(value, _describe(kind, text))
            )

    def parse(self):
        """
        Parse the whole input.

        :returns: The expression tree.

        """
        tree = self._expr()

        kind, text, offset = self._peek()
        if kind != 'end':
            raise ExprSyntaxError(offset, 'unexpected {}'.format(_describe(kind, text)))

        return tree

    def _expr(self):
        node = self._term()
        while self._peek()[1] in ('+', '-') and self._peek()[0] == 'op':
            op = self._take()[1]
            node = BinOp(op, node, self._term())

        return node

    def _term(self):
        node = self._unary()
        while self._peek()[1] in ('*', '/') and self._peek()[0] == 'op':
            op = self._take()[1]
            node = BinOp(op, node, self._unary())

        return node

    def _unary(self):
        if self._peek()[0] == 'op' and self._peek()[1] == '-':
            self._take()
            return Neg(self._unary())

        return self._power()

    def _power(self):
        base = self._atom()

        if self._peek()[0] == 'op' and self._peek()[1] == '^':
            self._take()
            kind, text, offset = self._take()
            if kind != 'number' or not text.isdigit():
                raise ExprSyntaxError(
                    offset,
                    'integer exponent expected, found {}'.format(_describe(kind, text))
                )
            return Pow(base, int(text))

        return base

    def _atom(self):
        kind, text, offset = self._take()

        if kind == 'number':
            return Const(float(text))

        if kind == 'ident':
            if text in FUNCTIONS:
                self._expect('(')
                arg = self._expr()
                self._expect(')')
                return Call(text, arg)

            if text[0] == 'x' and text[1:].isdigit():
                index = int(text[1:])
                if 1 <= index <= self.n and text[1] != '0':
                    return Var(index)

            raise UnknownIdentifierError(offset, text)

        if kind == 'op' and text == '(':
            node = self._expr()
            self._expect(')')
            return node

        raise ExprSyntaxError(offset, 'unexpected {}'.format(_describe(kind, text)))

def _describe(kind, text):
    return 'end of input' if kind == 'end' else '\'{}\''.format(text)

@dataclass(frozen=True)
class VectorFieldExpr:

    """
    Implementation of a symbolic vector field: n expression trees sharing the
    dimension n.

    """

    n: int
    components: tuple
    name: str = 'field'

    def evaluate(self, x):
        """
        Evaluate the field on points.

        :x: Array of shape (..., n).
        :returns: Array of shape (..., n).

        """
        x = np.asarray(x, dtype=float)
        return np.stack([c.evaluate(x) for c in self.components], axis=-1)

    def texts(self):
        return [str(c) for c in self.components]

    def __str__(self):
        return '{}: ({})'.format(self.name, ', '.join(self.texts()))

def parse_expr(text, n):
    """
    Parse a single component expression.

    :text: Source text.
    :n: Dimension of the state space.
    :returns: The expression tree.

    """
    return Parser(text, n).parse()

def parse_field(texts, n, name='field'):
    """
    Parse a vector field from its component expressions.

    :texts: List of n expression strings in the variables x1..xn.
    :n: Dimension of the state space.
    :name: Display name of the field.
    :returns: The VectorFieldExpr.

    """
    if len(texts) != n:
        raise DimensionMismatchError(error_map['dimension'].format(n, len(texts)))

    return VectorFieldExpr(n, tuple(parse_expr(t, n) for t in texts), name)

def eval_jet(field, point, order):
    """
    Evaluate a field on truncated Taylor jets.

    :field: The VectorFieldExpr.
    :point: Base point, shape (n,), or a batch of base points (..., n).
    :order: Truncation order m >= 0.
    :returns: List of n Jets whose coefficient tables share the batch shape.

    """
    if order < 0:
        raise ValueError('jet order must be nonnegative')

    point = np.asarray(point, dtype=float)
    space = JetSpace.get(field.n, order)
    algebra = JetAlgebra(space, point)

    out = []
    for component in field.components:
        value = component.fold(algebra)
        coeffs = np.broadcast_to(value.coeffs, point.shape[:-1] + (space.size,))
        out.append(Jet(space, np.array(coeffs)))

    return out
