"""MiniSol: a loop-free, Solidity-flavoured contract language.

Grammar summary (docs/minisol.md has the full version)::

    contract Name {
        mapping(address => uint) balances;
        uint total = 0;
        address owner = msg.sender;
        function deposit() payable { balances[msg.sender] += msg.value; }
        function withdraw(uint amount) {
            if (balances[msg.sender] >= amount) {
                require(msg.sender.call.value(amount)());
                balances[msg.sender] -= amount;
            }
        }
        function() { }
    }

Statements: assignment (``=``, ``+=``, ``-=``, ``*=``), local declarations,
``if``/``else``, ``require(e)``, ``throw``/``revert()``, ``return [e]``,
``skip`` and expression statements.  Value transfers use
``a.send(v)``, ``a.transfer(v)`` and ``a.call.value(v)(["fn", args...])``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

SCALAR_TYPES = ("uint", "bool", "address")
FALLBACK = "FALLBACK"


class MiniSolError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class ParseError(MiniSolError):
    pass


class TypeCheckError(MiniSolError):
    pass


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+)
  | (?P<str>"[A-Za-z_][A-Za-z0-9_]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=>|==|!=|<=|>=|&&|\|\||\+=|-=|\*=|[{}()\[\];,.=<>+\-*!])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "contract", "function", "payable", "private", "returns", "mapping",
    "if", "else", "require", "throw", "revert", "return", "skip",
    "true", "false", "msg", "this", "uint", "bool", "address",
}


@dataclass
class Token:
    kind: str  # num, str, ident, kw, op, eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("num", "str", "op"):
            tokens.append(Token(kind, text, line, col))
        elif kind == "ident":
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ------------------------------------------------------------------ AST

@dataclass(eq=False)
class Node:
    line: int = field(default=0, kw_only=True)


@dataclass(eq=False)
class Num(Node):
    value: int


@dataclass(eq=False)
class BoolLit(Node):
    value: bool


@dataclass(eq=False)
class MsgSender(Node):
    pass


@dataclass(eq=False)
class MsgValue(Node):
    pass


@dataclass(eq=False)
class This(Node):
    pass


@dataclass(eq=False)
class ThisBalance(Node):
    pass


@dataclass(eq=False)
class Name(Node):
    name: str
    scope: str = "state"  # state | param | local


@dataclass(eq=False)
class Index(Node):
    name: str
    key: "Expr"


@dataclass(eq=False)
class Unary(Node):
    op: str
    operand: "Expr"


@dataclass(eq=False)
class Binary(Node):
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(eq=False)
class Send(Node):
    to: "Expr"
    amount: "Expr"


@dataclass(eq=False)
class Transfer(Node):
    to: "Expr"
    amount: "Expr"


@dataclass(eq=False)
class CallValue(Node):
    to: "Expr"
    amount: "Expr"
    function: Optional[str]
    args: list


@dataclass(eq=False)
class InternalCall(Node):
    function: str
    args: list


Expr = Union[Num, BoolLit, MsgSender, MsgValue, This, ThisBalance, Name, Index,
             Unary, Binary, Send, Transfer, CallValue, InternalCall]


@dataclass(eq=False)
class Assign(Node):
    target: Union[Name, Index]
    op: str  # = += -= *=
    value: Expr


@dataclass(eq=False)
class LocalDecl(Node):
    type: str
    name: str
    value: Expr


@dataclass(eq=False)
class If(Node):
    cond: Expr
    then: list
    orelse: Optional[list]
    then_block: int = -1
    else_block: int = -1
    join_block: int = -1


@dataclass(eq=False)
class Require(Node):
    cond: Expr


@dataclass(eq=False)
class Throw(Node):
    pass


@dataclass(eq=False)
class Return(Node):
    value: Optional[Expr]


@dataclass(eq=False)
class Skip(Node):
    pass


@dataclass(eq=False)
class ExprStmt(Node):
    expr: Expr


Stmt = Union[Assign, LocalDecl, If, Require, Throw, Return, Skip, ExprStmt]


@dataclass
class StateVar:
    name: str
    type: str  # uint | bool | address | mapping
    init: Optional[Expr] = None


@dataclass
class Param:
    name: str
    type: str


@dataclass
class FunctionDef:
    name: str
    params: list
    payable: bool
    body: list
    private: bool = False
    returns: Optional[str] = None
    basic_blocks: list = field(default_factory=list)  # list of lists of statements
    line: int = 0

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass
class ContractProgram:
    name: str
    state_vars: list
    functions: list
    fallback: Optional[FunctionDef] = None
    source: str = ""

    def __post_init__(self):
        self._fn_index = {f.name: f for f in self.functions}
        self._var_index = {v.name: v for v in self.state_vars}

    def function(self, name: str) -> FunctionDef:
        if name == FALLBACK:
            if self.fallback is None:
                return FunctionDef(FALLBACK, [], True, [])
            return self.fallback
        try:
            return self._fn_index[name]
        except KeyError:
            raise KeyError(f"{self.name} has no function {name!r}") from None

    def has_function(self, name: str) -> bool:
        return name in self._fn_index

    def var(self, name: str) -> StateVar:
        return self._var_index[name]

    @property
    def public_functions(self) -> list:
        return [f for f in self.functions if not f.private]

    @property
    def payable_functions(self) -> list:
        return [f for f in self.functions if f.payable and not f.private]

    def mapping_vars(self) -> list:
        return [v for v in self.state_vars if v.type == "mapping"]


# --------------------------------------------------------------- parser

class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset=1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def accept(self, text) -> Optional[Token]:
        if self.at(text):
            tok = self.tok
            self.pos += 1
            return tok
        return None

    def expect(self, text) -> Token:
        tok = self.accept(text)
        if tok is None:
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.pos += 1
        return tok

    # -- top level

    def contract(self) -> ContractProgram:
        self.expect("contract")
        name = self.ident().text
        self.expect("{")
        state_vars, functions, fallback = [], [], None
        while not self.accept("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated contract body")
            if self.at("function"):
                fn = self.function()
                if fn.name == FALLBACK:
                    if fallback is not None:
                        raise self.error("duplicate fallback function")
                    fallback = fn
                else:
                    functions.append(fn)
            else:
                state_vars.append(self.state_var())
        if self.tok.kind != "eof":
            raise self.error("trailing input after contract")
        return ContractProgram(name, state_vars, functions, fallback)

    def type_name(self) -> str:
        if self.accept("mapping"):
            self.expect("(")
            self.expect("address")
            self.expect("=>")
            self.expect("uint")
            self.expect(")")
            return "mapping"
        for t in SCALAR_TYPES:
            if self.accept(t):
                return t
        raise self.error(f"expected a type, found {self.tok.text!r}")

    def state_var(self) -> StateVar:
        typ = self.type_name()
        name = self.ident().text
        init = None
        if self.accept("="):
            if typ == "mapping":
                raise self.error("mappings cannot be initialised")
            init = self.expr()
        self.expect(";")
        return StateVar(name, typ, init)

    def function(self) -> FunctionDef:
        start = self.expect("function")
        if self.at("("):
            name = FALLBACK
        else:
            name = self.ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                tok = self.tok
                typ = self.type_name()
                if typ == "mapping":
                    raise self.error("mapping parameters are not supported", tok)
                params.append(Param(self.ident().text, typ))
                if not self.accept(","):
                    break
        self.expect(")")
        if name == FALLBACK and params:
            raise self.error("fallback function takes no parameters", start)
        payable = private = False
        returns = None
        while True:
            if self.accept("payable"):
                payable = True
            elif self.accept("private"):
                private = True
            elif self.accept("returns"):
                self.expect("(")
                returns = self.type_name()
                self.expect(")")
            else:
                break
        body = self.block()
        return FunctionDef(name, params, payable, body, private, returns, line=start.line)

    def block(self) -> list:
        self.expect("{")
        stmts = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            stmts.append(self.statement())
        return stmts

    # -- statements

    def statement(self) -> Stmt:
        tok = self.tok
        line = tok.line
        if self.accept("if"):
            return self.if_rest(line)
        if self.accept("require"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect(";")
            return Require(cond, line=line)
        if self.accept("throw"):
            self.expect(";")
            return Throw(line=line)
        if self.accept("revert"):
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return Throw(line=line)
        if self.accept("return"):
            value = None if self.at(";") else self.expr()
            self.expect(";")
            return Return(value, line=line)
        if self.accept("skip"):
            self.expect(";")
            return Skip(line=line)
        if tok.kind == "kw" and tok.text in SCALAR_TYPES:
            typ = self.type_name()
            name = self.ident().text
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return LocalDecl(typ, name, value, line=line)
        if tok.kind == "ident" and self.peek().text in ("=", "+=", "-=", "*=", "["):
            save = self.pos
            name = self.ident().text
            target: Union[Name, Index]
            if self.accept("["):
                key = self.expr()
                self.expect("]")
                target = Index(name, key, line=line)
            else:
                target = Name(name, line=line)
            if self.tok.kind == "op" and self.tok.text in ("=", "+=", "-=", "*="):
                op = self.tok.text
                self.pos += 1
                value = self.expr()
                self.expect(";")
                return Assign(target, op, value, line=line)
            self.pos = save
        expr = self.expr()
        self.expect(";")
        return ExprStmt(expr, line=line)

    def if_rest(self, line) -> If:
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then = self.block()
        orelse = None
        if self.accept("else"):
            if self.at("if"):
                inner_line = self.tok.line
                self.pos += 1
                orelse = [self.if_rest(inner_line)]
            else:
                orelse = self.block()
        return If(cond, then, orelse, line=line)

    # -- expressions (precedence climbing)

    def expr(self) -> Expr:
        left = self.and_expr()
        while self.at("||"):
            line = self.tok.line
            self.pos += 1
            left = Binary("||", left, self.and_expr(), line=line)
        return left

    def and_expr(self) -> Expr:
        left = self.cmp_expr()
        while self.at("&&"):
            line = self.tok.line
            self.pos += 1
            left = Binary("&&", left, self.cmp_expr(), line=line)
        return left

    def cmp_expr(self) -> Expr:
        left = self.add_expr()
        if self.tok.kind == "op" and self.tok.text in ("==", "!=", "<", "<=", ">", ">="):
            op = self.tok.text
            line = self.tok.line
            self.pos += 1
            left = Binary(op, left, self.add_expr(), line=line)
        return left

    def add_expr(self) -> Expr:
        left = self.mul_expr()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            line = self.tok.line
            self.pos += 1
            left = Binary(op, left, self.mul_expr(), line=line)
        return left

    def mul_expr(self) -> Expr:
        left = self.unary()
        while self.at("*"):
            line = self.tok.line
            self.pos += 1
            left = Binary("*", left, self.unary(), line=line)
        return left

    def unary(self) -> Expr:
        if self.at("!"):
            line = self.tok.line
            self.pos += 1
            return Unary("!", self.unary(), line=line)
        return self.postfix()

    def postfix(self) -> Expr:
        expr = self.primary()
        while self.at("."):
            line = self.tok.line
            self.pos += 1
            member = self.tok
            if member.kind != "ident" or member.text not in ("send", "transfer", "call"):
                raise self.error(f"unknown member {member.text!r}", member)
            self.pos += 1
            if member.text == "call":
                self.expect(".")
                if self.tok.text != "value":
                    raise self.error("expected 'value' after '.call.'")
                self.pos += 1
                self.expect("(")
                amount = self.expr()
                self.expect(")")
                self.expect("(")
                fn, args = None, []
                if self.tok.kind == "str":
                    fn = self.tok.text[1:-1]
                    self.pos += 1
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
                expr = CallValue(expr, amount, fn, args, line=line)
            else:
                self.expect("(")
                amount = self.expr()
                self.expect(")")
                cls = Send if member.text == "send" else Transfer
                expr = cls(expr, amount, line=line)
        return expr

    def primary(self) -> Expr:
        tok = self.tok
        line = tok.line
        if tok.kind == "num":
            self.pos += 1
            return Num(int(tok.text), line=line)
        if self.accept("true"):
            return BoolLit(True, line=line)
        if self.accept("false"):
            return BoolLit(False, line=line)
        if self.accept("msg"):
            self.expect(".")
            member = self.tok
            self.pos += 1
            if member.text == "sender":
                return MsgSender(line=line)
            if member.text == "value":
                return MsgValue(line=line)
            raise self.error(f"unknown member msg.{member.text}", member)
        if self.accept("this"):
            if self.at(".") and self.peek().text == "balance":
                self.pos += 2
                return ThisBalance(line=line)
            return This(line=line)
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            self.pos += 1
            if self.accept("["):
                key = self.expr()
                self.expect("]")
                return Index(tok.text, key, line=line)
            if self.accept("("):
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
                return InternalCall(tok.text, args, line=line)
            return Name(tok.text, line=line)
        raise self.error(f"unexpected token {tok.text or 'end of input'!r}")


# ----------------------------------------------------------- type check

class _Checker:
    def __init__(self, program: ContractProgram):
        self.program = program
        self.state = {v.name: v.type for v in program.state_vars}
        self.fns = {}
        self.scopes: list = []
        self.fn: Optional[FunctionDef] = None

    def check(self):
        seen_vars = set()
        for v in self.program.state_vars:
            if v.name in seen_vars:
                raise TypeCheckError(f"duplicate state variable {v.name!r}")
            seen_vars.add(v.name)
        for f in self.program.functions:
            if f.name in self.fns:
                raise TypeCheckError(f"duplicate function {f.name!r}", f.line)
            self.fns[f.name] = f
        for v in self.program.state_vars:
            if v.init is not None:
                self.fn = None
                self.scopes = [{}]
                got = self.expr(v.init)
                self._assignable(v.type, got, v.init)
        fns = list(self.program.functions)
        if self.program.fallback is not None:
            fns.append(self.program.fallback)
        for f in fns:
            self.fn = f
            self.scopes = [{p.name: ("param", p.type) for p in f.params}]
            if len({p.name for p in f.params}) != len(f.params):
                raise TypeCheckError(f"duplicate parameter in {f.name!r}", f.line)
            self.block(f.body)
        self._check_recursion()

    def _check_recursion(self):
        graph = {}
        for f in self.fns.values():
            calls = set()
            _collect_calls(f.body, calls)
            graph[f.name] = calls
        state = {}

        def visit(name):
            state[name] = 1
            for callee in graph.get(name, ()):
                if state.get(callee) == 1:
                    raise TypeCheckError(f"recursive internal call through {callee!r}")
                if callee not in state:
                    visit(callee)
            state[name] = 2

        for name in graph:
            if name not in state:
                visit(name)

    def _assignable(self, want, got, node):
        if want == "bool" and got != "bool" or want != "bool" and got == "bool":
            raise TypeCheckError(f"cannot assign {got} to {want}", node.line)

    def lookup(self, name, node):
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        if name in self.state:
            return ("state", self.state[name])
        raise TypeCheckError(f"undeclared identifier {name!r}", node.line)

    def block(self, stmts):
        self.scopes.append({})
        for s in stmts:
            self.stmt(s)
        self.scopes.pop()

    def stmt(self, s):
        if isinstance(s, Assign):
            if isinstance(s.target, Name):
                scope, typ = self.lookup(s.target.name, s.target)
                s.target.scope = scope
                if typ == "mapping":
                    raise TypeCheckError(f"mapping {s.target.name!r} used as scalar", s.line)
            else:
                self.expr(s.target)
                typ = "uint"
            got = self.expr(s.value)
            if s.op != "=" and (typ == "bool" or got == "bool"):
                raise TypeCheckError(f"arithmetic assignment on bool", s.line)
            self._assignable(typ, got, s)
        elif isinstance(s, LocalDecl):
            got = self.expr(s.value)
            self._assignable(s.type, got, s)
            self.scopes[-1][s.name] = ("local", s.type)
        elif isinstance(s, If):
            self._want_bool(s.cond)
            self.block(s.then)
            if s.orelse is not None:
                self.block(s.orelse)
        elif isinstance(s, Require):
            self._want_bool(s.cond)
        elif isinstance(s, Return):
            if s.value is not None:
                self.expr(s.value)
        elif isinstance(s, ExprStmt):
            self.expr(s.expr, statement=True)

    def _want_bool(self, e):
        if self.expr(e) != "bool":
            raise TypeCheckError("condition must be bool", e.line)

    def _want_value(self, e):
        t = self.expr(e)
        if t in ("bool", "void"):
            raise TypeCheckError(f"expected a number or address, got {t}", e.line)
        return t

    def expr(self, e, statement=False) -> str:
        if isinstance(e, Num):
            return "uint"
        if isinstance(e, BoolLit):
            return "bool"
        if isinstance(e, (MsgSender, This)):
            return "address"
        if isinstance(e, MsgValue):
            if self.fn is not None and not self.fn.payable and self.fn.name != FALLBACK:
                raise TypeCheckError(
                    f"msg.value used in non-payable function {self.fn.name!r}", e.line)
            return "uint"
        if isinstance(e, ThisBalance):
            return "uint"
        if isinstance(e, Name):
            scope, typ = self.lookup(e.name, e)
            e.scope = scope
            if typ == "mapping":
                raise TypeCheckError(f"mapping {e.name!r} used as scalar", e.line)
            return typ
        if isinstance(e, Index):
            if e.name not in self.state:
                raise TypeCheckError(f"undeclared identifier {e.name!r}", e.line)
            if self.state[e.name] != "mapping":
                raise TypeCheckError(f"{e.name!r} is not a mapping", e.line)
            self._want_value(e.key)
            return "uint"
        if isinstance(e, Unary):
            self._want_bool(e.operand)
            return "bool"
        if isinstance(e, Binary):
            if e.op in ("&&", "||"):
                self._want_bool(e.left)
                self._want_bool(e.right)
                return "bool"
            if e.op in ("==", "!="):
                lt, rt = self.expr(e.left), self.expr(e.right)
                if (lt == "bool") != (rt == "bool"):
                    raise TypeCheckError("mismatched comparison operands", e.line)
                return "bool"
            self._want_value(e.left)
            self._want_value(e.right)
            return "bool" if e.op in ("<", "<=", ">", ">=") else "uint"
        if isinstance(e, (Send, Transfer)):
            self._want_value(e.to)
            self._want_value(e.amount)
            if isinstance(e, Transfer):
                if not statement:
                    raise TypeCheckError("transfer() has no value", e.line)
                return "void"
            return "bool"
        if isinstance(e, CallValue):
            self._want_value(e.to)
            self._want_value(e.amount)
            for a in e.args:
                self.expr(a)
            return "bool"
        if isinstance(e, InternalCall):
            if e.function not in self.fns:
                raise TypeCheckError(f"unknown function {e.function!r}", e.line)
            callee = self.fns[e.function]
            if len(e.args) != len(callee.params):
                raise TypeCheckError(f"wrong argument count for {e.function!r}", e.line)
            if callee.payable and not statement:
                pass
            for a, p in zip(e.args, callee.params):
                self._assignable(p.type, self.expr(a), a)
            if callee.returns is None:
                if not statement:
                    raise TypeCheckError(f"{e.function!r} returns nothing", e.line)
                return "void"
            return callee.returns
        raise TypeCheckError(f"unsupported expression {type(e).__name__}", getattr(e, "line", 0))


def _collect_calls(stmts, out: set):
    for s in stmts:
        for e in _stmt_exprs(s):
            _expr_calls(e, out)
        if isinstance(s, If):
            _collect_calls(s.then, out)
            if s.orelse:
                _collect_calls(s.orelse, out)


def _stmt_exprs(s):
    if isinstance(s, Assign):
        return [s.target, s.value]
    if isinstance(s, (LocalDecl,)):
        return [s.value]
    if isinstance(s, (If, Require)):
        return [s.cond]
    if isinstance(s, Return):
        return [s.value] if s.value is not None else []
    if isinstance(s, ExprStmt):
        return [s.expr]
    return []


def _expr_calls(e, out):
    if isinstance(e, InternalCall):
        out.add(e.function)
    for child in _children(e):
        _expr_calls(child, out)


def _children(e):
    if isinstance(e, Index):
        return [e.key]
    if isinstance(e, Unary):
        return [e.operand]
    if isinstance(e, Binary):
        return [e.left, e.right]
    if isinstance(e, (Send, Transfer)):
        return [e.to, e.amount]
    if isinstance(e, CallValue):
        return [e.to, e.amount, *e.args]
    if isinstance(e, InternalCall):
        return list(e.args)
    return []


# --------------------------------------------------------- basic blocks

def assign_blocks(fn: FunctionDef) -> None:
    """Partition ``fn.body`` into basic blocks, numbering them in preorder.

    Block 0 is the entry.  Each ``if`` closes the current block and opens
    one block per branch plus a join block, which also holds the statements
    that follow the ``if``.
    """
    blocks: list = [[]]

    def walk(stmts, current):
        for s in stmts:
            blocks[current].append(s)
            if isinstance(s, If):
                s.then_block = len(blocks)
                blocks.append([])
                walk(s.then, s.then_block)
                if s.orelse is not None:
                    s.else_block = len(blocks)
                    blocks.append([])
                    walk(s.orelse, s.else_block)
                else:
                    s.else_block = -1
                s.join_block = len(blocks)
                blocks.append([])
                current = s.join_block
        return current

    walk(fn.body, 0)
    fn.basic_blocks = blocks


def count_statements(stmts) -> int:
    n = 0
    for s in stmts:
        n += 1
        if isinstance(s, If):
            n += count_statements(s.then)
            if s.orelse:
                n += count_statements(s.orelse)
    return n


def static_statement_bound(program: ContractProgram, fn: FunctionDef) -> int:
    """Upper bound on statements executed by one activation of ``fn``,
    including statements of internal callees."""
    calls: set = set()
    _collect_calls(fn.body, calls)
    total = count_statements(fn.body)
    for name in sorted(calls):
        total += static_statement_bound(program, program.function(name))
    return total


def parse_contract(source: str) -> ContractProgram:
    """Parse and validate MiniSol source.

    Raises ParseError or TypeCheckError carrying line/column information.
    """
    program = _Parser(source).contract()
    program.source = source
    _Checker(program).check()
    for fn in program.functions:
        assign_blocks(fn)
    if program.fallback is not None:
        assign_blocks(program.fallback)
    return program


def parse_file(path) -> ContractProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_contract(fh.read())
