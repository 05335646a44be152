"""Lexer, parser, and printer for the driving-policy language.

The surface is a small indentation-structured language. Grammar (EBNF):

    program    = [def_header] { statement } ;
    def_header = "def" NAME "(" ")" ":" NEWLINE INDENT { statement } DEDENT ;
    statement  = simple NEWLINE | if_stmt | while_stmt ;
    simple     = assign | "yield" call | "return" | "pass" ;
    assign     = targets "=" expr ;
    targets    = NAME { "," NAME } | "(" NAME { "," NAME } ")" ;
    if_stmt    = "if" expr ":" block { "elif" expr ":" block } [ "else" ":" block ] ;
    while_stmt = "while" expr ":" block ;
    block      = NEWLINE INDENT { statement } DEDENT ;
    expr       = or_expr ;
    or_expr    = and_expr { "or" and_expr } ;
    and_expr   = not_expr { "and" not_expr } ;
    not_expr   = "not" not_expr | comparison ;
    comparison = arith [ ("<"|"<="|">"|">="|"=="|"!=") arith ] ;
    arith      = term { ("+"|"-") term } ;
    term       = factor { ("*"|"/") factor } ;
    factor     = "-" factor | atom ;
    atom       = NUMBER | "true" | "false" | DIRECTION | NAME | call | "(" expr ")" ;
    call       = NAME "(" [ expr { "," expr } ] ")" ;

Only whitelisted API names may be called; action calls are legal only as the
operand of ``yield``. ``left``, ``right``, and ``straight`` are direction
literals, not names.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .intents import DIRECTIONS, INTENT_SPECS

# Query name -> number of values it returns (tuples unpack on assignment).
QUERY_ARITY: dict[str, int] = {
    "check_front_vehicle": 3,   # (present, distance_m, speed_ms)
    "check_speed_limit": 1,
    "current_speed": 1,
    "current_lane": 2,          # (index, count)
    "at_intersection": 1,
}
QUERY_NAMES = tuple(QUERY_ARITY)
ACTION_NAMES = tuple(INTENT_SPECS)

KEYWORDS = {
    "def", "if", "elif", "else", "while", "yield", "return", "pass",
    "and", "or", "not", "true", "false", "True", "False",
}
BANNED_WORDS = {
    "import", "from", "for", "lambda", "class", "global", "nonlocal", "with",
    "try", "except", "raise", "exec", "eval", "open", "print", "assert",
}
DIRECTION_WORDS = set(DIRECTIONS)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.reason = message
        self.line = line
        self.col = col


# --- AST ---------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class Direction:
    value: str


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Unary:
    op: str  # "-" | "not"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Num | Bool | Direction | Name | Call | Unary | Binary


@dataclass(frozen=True)
class Assign:
    targets: tuple[str, ...]
    value: Expr


@dataclass(frozen=True)
class YieldAction:
    call: Call


@dataclass(frozen=True)
class Return:
    pass


@dataclass(frozen=True)
class Pass:
    pass


@dataclass(frozen=True)
class If:
    branches: tuple[tuple[Expr, tuple["Stmt", ...]], ...]
    orelse: tuple["Stmt", ...]


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple["Stmt", ...]


Stmt = Assign | YieldAction | Return | Pass | If | While


@dataclass(frozen=True)
class LmpProgram:
    source: str
    entry_name: str | None
    body: tuple[Stmt, ...]


# --- Lexer -------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str   # NAME, NUMBER, OP, KEYWORD, DIRECTION, NEWLINE, INDENT, DEDENT, EOF
    text: str
    line: int
    col: int


_TWO_CHAR_OPS = ("<=", ">=", "==", "!=")
_ONE_CHAR_OPS = "+-*/<>=(),:"


def _tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    indent_stack = [0]
    paren_depth = 0
    lines = source.splitlines()
    for line_no, raw in enumerate(lines, start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        if "\t" in raw[: len(raw) - len(raw.lstrip())]:
            raise ParseError("tabs are not allowed in indentation", line_no, 1)
        indent = len(body) - len(body.lstrip(" "))
        if paren_depth == 0:
            # Inside parentheses lines join implicitly and indentation is free.
            if indent > indent_stack[-1]:
                indent_stack.append(indent)
                tokens.append(Token("INDENT", "", line_no, 1))
            else:
                while indent < indent_stack[-1]:
                    indent_stack.pop()
                    tokens.append(Token("DEDENT", "", line_no, 1))
                if indent != indent_stack[-1]:
                    raise ParseError("inconsistent indentation", line_no, indent + 1)
        i = indent
        text = body
        while i < len(text):
            c = text[i]
            col = i + 1
            if c == " ":
                i += 1
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                word = text[i:j]
                if word in BANNED_WORDS:
                    raise ParseError(f"banned construct {word!r}", line_no, col)
                if word in KEYWORDS:
                    tokens.append(Token("KEYWORD", word, line_no, col))
                elif word in DIRECTION_WORDS:
                    tokens.append(Token("DIRECTION", word, line_no, col))
                else:
                    tokens.append(Token("NAME", word, line_no, col))
                i = j
                continue
            if c.isdigit() or (c == "." and i + 1 < len(text) and text[i + 1].isdigit()):
                j = i
                seen_dot = False
                while j < len(text) and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                    seen_dot = seen_dot or text[j] == "."
                    j += 1
                tokens.append(Token("NUMBER", text[i:j], line_no, col))
                i = j
                continue
            if text[i: i + 2] in _TWO_CHAR_OPS:
                tokens.append(Token("OP", text[i: i + 2], line_no, col))
                i += 2
                continue
            if c in _ONE_CHAR_OPS:
                if c == "(":
                    paren_depth += 1
                elif c == ")":
                    paren_depth = max(0, paren_depth - 1)
                tokens.append(Token("OP", c, line_no, col))
                i += 1
                continue
            raise ParseError(f"unexpected character {c!r}", line_no, col)
        if paren_depth == 0:
            tokens.append(Token("NEWLINE", "", line_no, len(body) + 1))
    last_line = len(lines) + 1
    while indent_stack[-1] > 0:
        indent_stack.pop()
        tokens.append(Token("DEDENT", "", last_line, 1))
    tokens.append(Token("EOF", "", last_line, 1))
    return tokens


# --- Parser ------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.cur.line, self.cur.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if self.cur.kind != kind or (text is not None and self.cur.text != text):
            want = text if text is not None else kind
            got = self.cur.text or self.cur.kind
            raise self.error(f"expected {want!r}, found {got!r}")
        return self.advance()

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.cur.kind == kind and (text is None or self.cur.text == text)

    def parse_program(self, source: str) -> LmpProgram:
        entry_name: str | None = None
        if self.at("KEYWORD", "def"):
            self.advance()
            entry_name = self.expect("NAME").text
            self.expect("OP", "(")
            self.expect("OP", ")")
            self.expect("OP", ":")
            self.expect("NEWLINE")
            self.expect("INDENT")
            body = self.parse_statements()
            self.expect("DEDENT")
            if not self.at("EOF"):
                raise self.error("only one entry block is allowed")
        else:
            body = self.parse_statements()
        self.expect("EOF")
        if not body:
            raise ParseError("empty program", 1, 1)
        return LmpProgram(source=source, entry_name=entry_name, body=tuple(body))

    def parse_statements(self) -> list[Stmt]:
        stmts: list[Stmt] = []
        while not self.at("EOF") and not self.at("DEDENT"):
            stmts.append(self.parse_statement())
        return stmts

    def parse_statement(self) -> Stmt:
        if self.at("KEYWORD", "if"):
            return self.parse_if()
        if self.at("KEYWORD", "while"):
            return self.parse_while()
        stmt = self.parse_simple()
        self.expect("NEWLINE")
        return stmt

    def parse_block(self) -> tuple[Stmt, ...]:
        self.expect("OP", ":")
        self.expect("NEWLINE")
        self.expect("INDENT")
        stmts = self.parse_statements()
        self.expect("DEDENT")
        if not stmts:
            raise self.error("empty block")
        return tuple(stmts)

    def parse_if(self) -> If:
        self.expect("KEYWORD", "if")
        branches = [(self.parse_expr(), self.parse_block())]
        orelse: tuple[Stmt, ...] = ()
        while self.at("KEYWORD", "elif"):
            self.advance()
            branches.append((self.parse_expr(), self.parse_block()))
        if self.at("KEYWORD", "else"):
            self.advance()
            orelse = self.parse_block()
        return If(branches=tuple(branches), orelse=orelse)

    def parse_while(self) -> While:
        self.expect("KEYWORD", "while")
        cond = self.parse_expr()
        body = self.parse_block()
        return While(cond=cond, body=body)

    def parse_simple(self) -> Stmt:
        if self.at("KEYWORD", "yield"):
            self.advance()
            expr = self.parse_atom()
            if not isinstance(expr, Call):
                raise self.error("yield expects an action call")
            return YieldAction(call=expr)
        if self.at("KEYWORD", "return"):
            self.advance()
            return Return()
        if self.at("KEYWORD", "pass"):
            self.advance()
            return Pass()
        return self.parse_assign()

    def parse_assign(self) -> Assign:
        targets: list[str] = []
        if self.at("OP", "("):
            self.advance()
            targets.append(self.expect("NAME").text)
            while self.at("OP", ","):
                self.advance()
                targets.append(self.expect("NAME").text)
            self.expect("OP", ")")
        else:
            targets.append(self.expect("NAME").text)
            while self.at("OP", ","):
                self.advance()
                targets.append(self.expect("NAME").text)
        self.expect("OP", "=")
        value = self.parse_expr()
        return Assign(targets=tuple(targets), value=value)

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.at("KEYWORD", "or"):
            self.advance()
            left = Binary("or", left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.at("KEYWORD", "and"):
            self.advance()
            left = Binary("and", left, self.parse_not())
        return left

    def parse_not(self) -> Expr:
        if self.at("KEYWORD", "not"):
            self.advance()
            return Unary("not", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        left = self.parse_arith()
        if self.cur.kind == "OP" and self.cur.text in ("<", "<=", ">", ">=", "==", "!="):
            op = self.advance().text
            return Binary(op, left, self.parse_arith())
        return left

    def parse_arith(self) -> Expr:
        left = self.parse_term()
        while self.cur.kind == "OP" and self.cur.text in ("+", "-"):
            op = self.advance().text
            left = Binary(op, left, self.parse_term())
        return left

    def parse_term(self) -> Expr:
        left = self.parse_factor()
        while self.cur.kind == "OP" and self.cur.text in ("*", "/"):
            op = self.advance().text
            left = Binary(op, left, self.parse_factor())
        return left

    def parse_factor(self) -> Expr:
        if self.at("OP", "-"):
            self.advance()
            return Unary("-", self.parse_factor())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "NUMBER":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "KEYWORD" and tok.text in ("true", "True"):
            self.advance()
            return Bool(True)
        if tok.kind == "KEYWORD" and tok.text in ("false", "False"):
            self.advance()
            return Bool(False)
        if tok.kind == "DIRECTION":
            self.advance()
            return Direction(tok.text)
        if tok.kind == "NAME":
            self.advance()
            if self.at("OP", "("):
                self.advance()
                args: list[Expr] = []
                if not self.at("OP", ")"):
                    args.append(self.parse_expr())
                    while self.at("OP", ","):
                        self.advance()
                        args.append(self.parse_expr())
                self.expect("OP", ")")
                return Call(name=tok.text, args=tuple(args), line=tok.line, col=tok.col)
            return Name(id=tok.text)
        if tok.kind == "OP" and tok.text == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect("OP", ")")
            return inner
        raise self.error(f"unexpected token {tok.text or tok.kind!r}")


# --- Static validation --------------------------------------------------


def _walk_exprs(e: Expr):
    yield e
    if isinstance(e, Call):
        for a in e.args:
            yield from _walk_exprs(a)
    elif isinstance(e, Unary):
        yield from _walk_exprs(e.operand)
    elif isinstance(e, Binary):
        yield from _walk_exprs(e.left)
        yield from _walk_exprs(e.right)


def _walk_stmts(stmts: tuple[Stmt, ...]):
    for s in stmts:
        yield s
        if isinstance(s, If):
            for _, body in s.branches:
                yield from _walk_stmts(body)
            yield from _walk_stmts(s.orelse)
        elif isinstance(s, While):
            yield from _walk_stmts(s.body)


def _stmt_exprs(s: Stmt):
    if isinstance(s, Assign):
        yield from _walk_exprs(s.value)
    elif isinstance(s, YieldAction):
        yield from _walk_exprs(s.call)
    elif isinstance(s, If):
        for cond, _ in s.branches:
            yield from _walk_exprs(cond)
    elif isinstance(s, While):
        yield from _walk_exprs(s.cond)


def _validate(program: LmpProgram) -> None:
    assigned: set[str] = set()
    for s in _walk_stmts(program.body):
        if isinstance(s, Assign):
            assigned.update(s.targets)
    for s in _walk_stmts(program.body):
        for e in _stmt_exprs(s):
            if isinstance(e, Call):
                if e.name not in QUERY_ARITY and e.name not in INTENT_SPECS:
                    raise ParseError(f"unknown identifier {e.name!r}", e.line, e.col)
                if e.name in INTENT_SPECS and not (
                    isinstance(s, YieldAction) and e is s.call
                ):
                    raise ParseError(
                        f"action {e.name!r} may only appear directly after yield", e.line, e.col
                    )
                if e.name in QUERY_ARITY and len(e.args) != 0:
                    raise ParseError(f"query {e.name}() takes no arguments", e.line, e.col)
                if e.name in INTENT_SPECS:
                    want = len(INTENT_SPECS[e.name][0])
                    if len(e.args) != want:
                        raise ParseError(
                            f"action {e.name}() takes {want} argument(s), got {len(e.args)}",
                            e.line,
                            e.col,
                        )
            elif isinstance(e, Name) and e.id not in assigned:
                raise ParseError(f"unknown identifier {e.id!r}", 0, 0)
        if isinstance(s, Assign) and isinstance(s.value, Call) and s.value.name in QUERY_ARITY:
            arity = QUERY_ARITY[s.value.name]
            if len(s.targets) not in (1, arity):
                raise ParseError(
                    f"query {s.value.name}() yields {arity} value(s), "
                    f"cannot unpack into {len(s.targets)}",
                    s.value.line,
                    s.value.col,
                )
        elif isinstance(s, Assign) and len(s.targets) != 1:
            raise ParseError("only query results can be unpacked", 0, 0)
    for s in _walk_stmts(program.body):
        if isinstance(s, While):
            has_progress = any(
                isinstance(inner, (YieldAction, Assign)) for inner in _walk_stmts(s.body)
            )
            if not has_progress:
                raise ParseError("while body must contain a yield or an assignment", 0, 0)


def parse_program(source: str) -> LmpProgram:
    """Parse and statically validate a policy program."""
    tokens = _tokenize(source)
    program = _Parser(tokens).parse_program(source)
    _validate(program)
    return program


# --- Printer ------------------------------------------------------------

_PRECEDENCE = {
    "or": 1, "and": 2,
    "<": 4, "<=": 4, ">": 4, ">=": 4, "==": 4, "!=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}


def _print_expr(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, Num):
        return format(e.value, "g")
    if isinstance(e, Bool):
        return "true" if e.value else "false"
    if isinstance(e, Direction):
        return e.value
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Call):
        return f"{e.name}({', '.join(_print_expr(a) for a in e.args)})"
    if isinstance(e, Unary):
        prec = 3 if e.op == "not" else 7
        inner = _print_expr(e.operand, prec)
        text = f"not {inner}" if e.op == "not" else f"-{inner}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(e, Binary):
        prec = _PRECEDENCE[e.op]
        text = f"{_print_expr(e.left, prec)} {e.op} {_print_expr(e.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"unknown expression {e!r}")


def _print_stmts(stmts: tuple[Stmt, ...], indent: int, out: list[str]) -> None:
    pad = "    " * indent
    for s in stmts:
        if isinstance(s, Assign):
            lhs = ", ".join(s.targets)
            if len(s.targets) > 1:
                lhs = f"({lhs})"
            out.append(f"{pad}{lhs} = {_print_expr(s.value)}")
        elif isinstance(s, YieldAction):
            out.append(f"{pad}yield {_print_expr(s.call)}")
        elif isinstance(s, Return):
            out.append(f"{pad}return")
        elif isinstance(s, Pass):
            out.append(f"{pad}pass")
        elif isinstance(s, While):
            out.append(f"{pad}while {_print_expr(s.cond)}:")
            _print_stmts(s.body, indent + 1, out)
        elif isinstance(s, If):
            first = True
            for cond, body in s.branches:
                out.append(f"{pad}{'if' if first else 'elif'} {_print_expr(cond)}:")
                _print_stmts(body, indent + 1, out)
                first = False
            if s.orelse:
                out.append(f"{pad}else:")
                _print_stmts(s.orelse, indent + 1, out)
        else:
            raise TypeError(f"unknown statement {s!r}")


def pretty_print(program: LmpProgram) -> str:
    """Canonical source form; reparsing it yields an identical AST."""
    out: list[str] = []
    indent = 0
    if program.entry_name is not None:
        out.append(f"def {program.entry_name}():")
        indent = 1
    _print_stmts(program.body, indent, out)
    return "\n".join(out) + "\n"
