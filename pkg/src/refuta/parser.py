"""Parser for problem files (.nun core language, .dnun dependent frontend).

Statements end with ``;``; clause separators inside pred/rec blocks are ``;``
or ``|`` (a ``;`` ends the statement when a statement keyword or end of input
follows).  Lambda is ``fun``, logical symbols have ASCII forms (->, =>, &&,
||, ~), and ``t asserting phi`` binds loosest.  ``#`` starts a line comment.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError, Span
from .problems import (
    AxiomStmt,
    ClassDef,
    CtorDecl,
    DataDef,
    DepCtor,
    DepDataDef,
    GoalStmt,
    InstanceDef,
    PredDef,
    PredOne,
    Problem,
    RecDef,
    RecOne,
    TypedVar,
    ValDecl,
)
from .terms import (
    FALSE,
    INT,
    PROP,
    TRUE,
    TYPE,
    And,
    App,
    Arrow,
    Asserting,
    Builtin,
    Const,
    Eq,
    Exists,
    Forall,
    Implies,
    IntLit,
    IntOp,
    Ite,
    Lam,
    Match,
    MatchBranch,
    Not,
    Or,
    Pi,
    Term,
    Var,
    app,
)

KEYWORDS = frozenset({
    "data", "codata", "pred", "copred", "rec", "val", "axiom", "goal", "and",
    "depdata", "depcodata", "class", "instance", "where",
    "forall", "exists", "pi", "fun", "if", "then", "else",
    "match", "with", "end", "asserting",
    "true", "false", "prop", "type", "int",
})

STATEMENT_KEYWORDS = frozenset({
    "data", "codata", "pred", "copred", "rec", "val", "axiom", "goal",
    "depdata", "depcodata", "class", "instance",
})

BUILTIN_CONSTS = frozenset({"select", "array"})

_SYMBOLS = [":=", "->", "=>", "&&", "||", "<=", ">=",
            ":", ";", "|", "(", ")", ".", "~", "=", "<", ">", "+", "-", "*"]


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "kw" | "int" | symbol text | "eof"
    text: str
    line: int
    col: int

    def span(self, file: str) -> Span:
        return Span(file, self.line, self.col, self.line, self.col + len(self.text))


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            start = i
            while i < n and text[i].isdigit():
                i += 1
            tokens.append(Token("int", text[start:i], line, col))
            col += i - start
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] in "_'"):
                i += 1
            word = text[start:i]
            if not word.isascii():
                raise ParseError("non-ASCII identifier", Span(file, line, col, line, col + 1))
            kind = "kw" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, line, col))
            col += i - start
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(sym, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {c!r}",
                             Span(file, line, col, line, col + 1))
    tokens.append(Token("eof", "", line, col))
    return tokens


class Parser:
    def __init__(self, text: str, file: str = "<input>", dependent: bool = False):
        self.tokens = tokenize(text, file)
        self.pos = 0
        self.file = file
        self.dependent = dependent
        self.known: dict[str, str] = {}  # symbol -> rough kind, for Var/Const resolution
        for b in BUILTIN_CONSTS:
            self.known[b] = "builtin"
        self.scopes: list[set[str]] = []

    # -- token plumbing ---------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {tok.text or 'end of input'!r}",
                             tok.span(self.file))
        return self.next()

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.peek().span(self.file))

    # -- scope ------------------------------------------------------------

    def push_scope(self, names) -> None:
        self.scopes.append(set(names))

    def pop_scope(self) -> None:
        self.scopes.pop()

    def is_bound(self, name: str) -> bool:
        return any(name in s for s in self.scopes)

    def declare(self, name: str, kind: str, tok: Token | None = None) -> None:
        if name in self.known and self.known[name] != "provisional":
            span = tok.span(self.file) if tok else None
            raise ParseError(f"duplicate symbol {name!r}", span)
        self.known[name] = kind

    # -- entry points ------------------------------------------------------

    def parse_problem(self) -> Problem:
        statements = []
        while not self.at("eof"):
            statements.append(self.parse_statement())
        problem = Problem(statements)
        problem.check_declared_before_use()
        return problem

    def parse_statement(self):
        tok = self.peek()
        if tok.kind != "kw" or tok.text not in STATEMENT_KEYWORDS:
            raise self.error(f"expected a statement keyword, found {tok.text!r}")
        if tok.text in ("data", "codata"):
            return self.parse_data()
        if tok.text in ("pred", "copred"):
            return self.parse_pred()
        if tok.text == "rec":
            return self.parse_rec()
        if tok.text == "val":
            return self.parse_val()
        if tok.text == "axiom":
            return self.parse_axiom()
        if tok.text == "goal":
            return self.parse_goal()
        if tok.text in ("depdata", "depcodata", "class", "instance"):
            if not self.dependent:
                raise ParseError(
                    f"{tok.text!r} statements require the dependent frontend (.dnun)",
                    tok.span(self.file))
            if tok.text in ("depdata", "depcodata"):
                return self.parse_depdata()
            if tok.text == "class":
                return self.parse_class()
            return self.parse_instance()
        raise self.error(f"unknown statement keyword {tok.text!r}")

    # -- statements --------------------------------------------------------

    def parse_data(self) -> DataDef:
        kw = self.next()
        name_tok = self.expect("ident")
        params = []
        while self.at("ident"):
            params.append(self.next().text)
        self.declare(name_tok.text, "type", name_tok)
        self.expect(":=")
        self.push_scope(params)
        ctors = []
        while True:
            ctor_tok = self.expect("ident")
            args = []
            while self._at_atomic_type_start():
                args.append(self.parse_atomic_term())
            self.declare(ctor_tok.text, "ctor", ctor_tok)
            ctors.append(CtorDecl(ctor_tok.text, tuple(args)))
            if self.at("|"):
                self.next()
                continue
            break
        self.pop_scope()
        self.expect(";")
        return DataDef(name_tok.text, tuple(params), tuple(ctors),
                       codata=(kw.text == "codata"), span=kw.span(self.file))

    def _at_atomic_type_start(self) -> bool:
        tok = self.peek()
        return tok.kind in ("ident", "(") or (
            tok.kind == "kw" and tok.text in ("prop", "type", "int"))

    def _scan_block_names(self) -> list[str]:
        """Look ahead for the definition names of a mutual pred/rec block."""
        names = []
        i = self.pos
        depth = 0
        expecting_name = True
        while i < len(self.tokens):
            tok = self.tokens[i]
            if tok.kind == "(":
                depth += 1
            elif tok.kind == ")":
                depth -= 1
            elif depth == 0:
                if expecting_name and tok.kind == "ident":
                    names.append(tok.text)
                    expecting_name = False
                elif tok.kind == "kw" and tok.text == "and":
                    expecting_name = True
                elif tok.kind == ";" and self._ends_statement(i):
                    break
                elif tok.kind == "eof":
                    break
            i += 1
        return names

    def _ends_statement(self, semi_index: int) -> bool:
        nxt = self.tokens[min(semi_index + 1, len(self.tokens) - 1)]
        return nxt.kind == "eof" or (nxt.kind == "kw" and nxt.text in STATEMENT_KEYWORDS)

    def parse_pred(self) -> PredDef:
        kw = self.next()
        for n in self._scan_block_names():
            if n not in self.known:
                self.known[n] = "provisional"
        defs = [self._parse_def_one("pred")]
        while self.at("kw", "and"):
            self.next()
            defs.append(self._parse_def_one("pred"))
        self.expect(";")
        return PredDef(tuple(defs), co=(kw.text == "copred"), span=kw.span(self.file))

    def parse_rec(self) -> RecDef:
        kw = self.next()
        for n in self._scan_block_names():
            if n not in self.known:
                self.known[n] = "provisional"
        defs = [self._parse_def_one("rec")]
        while self.at("kw", "and"):
            self.next()
            defs.append(self._parse_def_one("rec"))
        self.expect(";")
        return RecDef(tuple(RecOne(d.name, d.ty, d.clauses) for d in defs),
                      span=kw.span(self.file))

    def _parse_def_one(self, kind: str) -> PredOne:
        name_tok = self.expect("ident")
        self.declare(name_tok.text, kind, name_tok)
        self.expect(":")
        ty = self.parse_term()
        self.expect(":=")
        # the scheme's pi-bound type variables scope over the clauses
        tyvars = []
        scheme = ty
        while isinstance(scheme, Pi):
            tyvars.append(scheme.var)
            scheme = scheme.body
        self.push_scope(tyvars)
        clauses = [self.parse_term()]
        while True:
            if self.at(";") and not self._ends_statement(self.pos) \
                    and not self._and_follows(self.pos):
                self.next()
                clauses.append(self.parse_term())
            elif self.at("|"):
                self.next()
                clauses.append(self.parse_term())
            elif self.at(";") and self._and_follows(self.pos):
                self.next()
                break
            else:
                break
        self.pop_scope()
        return PredOne(name_tok.text, ty, tuple(clauses))

    def _and_follows(self, semi_index: int) -> bool:
        nxt = self.tokens[min(semi_index + 1, len(self.tokens) - 1)]
        return nxt.kind == "kw" and nxt.text == "and"

    def parse_val(self) -> ValDecl:
        kw = self.next()
        name_tok = self.expect("ident")
        self.expect(":")
        ty = self.parse_term()
        self.declare(name_tok.text, "type" if ty == TYPE else "val", name_tok)
        self.expect(";")
        return ValDecl(name_tok.text, ty, span=kw.span(self.file))

    def parse_axiom(self) -> AxiomStmt:
        kw = self.next()
        formula = self.parse_term()
        self.expect(";")
        return AxiomStmt(formula, span=kw.span(self.file))

    def parse_goal(self) -> GoalStmt:
        kw = self.next()
        formula = self.parse_term()
        self.expect(";")
        return GoalStmt(formula, span=kw.span(self.file))

    def parse_depdata(self) -> DepDataDef:
        kw = self.next()
        name_tok = self.expect("ident")
        term_params: list[TypedVar] = []
        type_params: list[str] = []
        while self.at("("):
            self.next()
            pnames = [self.expect("ident").text]
            while self.at("ident"):
                pnames.append(self.next().text)
            self.expect(":")
            pty = self.parse_term()
            self.expect(")")
            for pname in pnames:
                if pty == TYPE:
                    type_params.append(pname)
                else:
                    if type_params:
                        raise ParseError(
                            "term parameters must precede type parameters",
                            name_tok.span(self.file))
                    term_params.append(TypedVar(pname, pty))
        self.declare(name_tok.text, "depdata", name_tok)
        self.expect(":=")
        if self.at("|"):
            self.next()
        ctors = []
        while True:
            ctors.append(self.parse_depctor(name_tok.text, term_params, type_params))
            if self.at("|"):
                self.next()
                continue
            break
        self.expect(";")
        return DepDataDef(name_tok.text, tuple(term_params), tuple(type_params),
                          tuple(ctors), codata=(kw.text == "depcodata"),
                          span=kw.span(self.file))

    def parse_depctor(self, dname: str, term_params, type_params) -> DepCtor:
        binders: list[TypedVar] = []
        self.push_scope(type_params)
        if self.at("kw", "forall"):
            self.next()
            raw = self.parse_binders()
            self.expect(".")
            for bname, bty in raw:
                if bty is None:
                    raise self.error("dependent constructor binders must be typed")
                binders.append(TypedVar(bname, bty))
        self.push_scope([b.name for b in binders])
        ctor_tok = self.expect("ident")
        args = []
        while self.at("ident"):
            arg_tok = self.next()
            if arg_tok.text not in {b.name for b in binders}:
                raise ParseError(
                    f"constructor argument {arg_tok.text!r} is not a bound variable",
                    arg_tok.span(self.file))
            args.append(arg_tok.text)
        self.expect(":")
        ret = self.parse_term()
        self.pop_scope()
        self.pop_scope()
        head, ret_args = self._spine(ret)
        if not (isinstance(head, Const) and head.name == dname):
            raise ParseError(
                f"constructor {ctor_tok.text!r} must return {dname!r}",
                ctor_tok.span(self.file))
        m, n = len(term_params), len(type_params)
        if len(ret_args) != m + n:
            raise ParseError(
                f"return type of {ctor_tok.text!r} must apply {dname!r} to "
                f"{m} index terms and {n} type parameters", ctor_tok.span(self.file))
        indices = ret_args[:m]
        for i, ta in enumerate(ret_args[m:]):
            if not (isinstance(ta, Var) and ta.name == type_params[i]):
                raise ParseError(
                    "type parameters must occur uniformly (type indices and "
                    "polymorphic recursion are not supported)",
                    ctor_tok.span(self.file))
        self.declare(ctor_tok.text, "ctor", ctor_tok)
        return DepCtor(ctor_tok.text, tuple(binders), tuple(args), tuple(indices))

    @staticmethod
    def _spine(t: Term) -> tuple[Term, tuple[Term, ...]]:
        if isinstance(t, App):
            return t.fn, t.args
        return t, ()

    def parse_class(self) -> ClassDef:
        kw = self.next()
        name_tok = self.expect("ident")
        param_tok = self.expect("ident")
        self.declare(name_tok.text, "class", name_tok)
        self.expect("kw", "where")
        data_fields: list[tuple[str, Term]] = []
        axiom_fields: list[tuple[str, Term]] = []
        self.push_scope([param_tok.text])
        while True:
            fname_tok = self.expect("ident")
            self.expect(":")
            body = self.parse_term()
            if self._is_type_expr(body, param_tok.text):
                self.declare(fname_tok.text, "field", fname_tok)
                data_fields.append((fname_tok.text, body))
            else:
                axiom_fields.append((fname_tok.text, body))
            if self.at(";") and not self._ends_statement(self.pos):
                self.next()
                continue
            break
        self.pop_scope()
        self.expect(";")
        return ClassDef(name_tok.text, param_tok.text, tuple(data_fields),
                        tuple(axiom_fields), span=kw.span(self.file))

    def _is_type_expr(self, t: Term, param: str) -> bool:
        match t:
            case Builtin(kind):
                return kind in ("prop", "type", "int")
            case Var(name):
                return name == param or self.known.get(name) in ("type", "depdata")
            case Const(name, _):
                return self.known.get(name) in ("type", "depdata", "class", "builtin")
            case Arrow(d, c):
                return self._is_type_expr(d, param) and self._is_type_expr(c, param)
            case Pi(_, _, body):
                return self._is_type_expr(body, param)
            case App(fn, args):
                return self._is_type_expr(fn, param) and all(
                    self._is_type_expr(a, param) for a in args)
        return False

    def parse_instance(self) -> InstanceDef:
        kw = self.next()
        cname_tok = self.expect("ident")
        if self.known.get(cname_tok.text) != "class":
            raise ParseError(f"{cname_tok.text!r} is not a class",
                             cname_tok.span(self.file))
        ty = self.parse_atomic_term()
        self.expect("kw", "where")
        assignments = []
        while True:
            fname_tok = self.expect("ident")
            self.expect("=")
            value = self.parse_term()
            assignments.append((fname_tok.text, value))
            if self.at(";") and not self._ends_statement(self.pos):
                self.next()
                continue
            break
        self.expect(";")
        return InstanceDef(cname_tok.text, ty, tuple(assignments), span=kw.span(self.file))

    # -- terms -------------------------------------------------------------

    def parse_term(self) -> Term:
        t = self.parse_implies()
        while self.at("kw", "asserting"):
            self.next()
            guard = self.parse_implies()
            t = Asserting(t, guard)
        return t

    def parse_implies(self) -> Term:
        t = self.parse_arrow()
        if self.at("=>"):
            self.next()
            return Implies(t, self.parse_implies())
        return t

    def parse_arrow(self) -> Term:
        t = self.parse_disj()
        if self.at("->"):
            self.next()
            return Arrow(t, self.parse_arrow())
        return t

    def parse_disj(self) -> Term:
        t = self.parse_conj()
        while self.at("||"):
            self.next()
            t = Or(t, self.parse_conj())
        return t

    def parse_conj(self) -> Term:
        t = self.parse_cmp()
        while self.at("&&"):
            self.next()
            t = And(t, self.parse_cmp())
        return t

    def parse_cmp(self) -> Term:
        t = self.parse_addsub()
        tok = self.peek()
        if tok.kind in ("=", "<=", "<", ">", ">="):
            self.next()
            rhs = self.parse_addsub()
            if tok.kind == "=":
                return Eq(t, rhs)
            if tok.kind == "<=":
                return IntOp("<=", t, rhs)
            if tok.kind == "<":
                return Not(IntOp("<=", rhs, t))
            if tok.kind == ">":
                return Not(IntOp("<=", t, rhs))
            return IntOp("<=", rhs, t)
        return t

    def parse_addsub(self) -> Term:
        t = self.parse_mul()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            t = IntOp(op, t, self.parse_mul())
        return t

    def parse_mul(self) -> Term:
        t = self.parse_unary()
        while self.at("*"):
            self.next()
            t = IntOp("*", t, self.parse_unary())
        return t

    def parse_unary(self) -> Term:
        if self.at("~"):
            self.next()
            return Not(self.parse_unary())
        return self.parse_app()

    def parse_app(self) -> Term:
        t = self.parse_atomic_term()
        args = []
        while self._at_atom_start():
            args.append(self.parse_atomic_term())
        return app(t, tuple(args)) if args else t

    def _at_atom_start(self) -> bool:
        tok = self.peek()
        if tok.kind in ("ident", "int", "("):
            return True
        if tok.kind == "kw":
            return tok.text in ("true", "false", "prop", "type", "int",
                                "if", "match", "forall", "exists", "pi", "fun")
        return False

    def parse_atomic_term(self) -> Term:
        tok = self.peek()
        span = tok.span(self.file)
        if tok.kind == "int":
            self.next()
            return IntLit(int(tok.text), span=span)
        if tok.kind == "-" and self.peek(1).kind == "int":
            self.next()
            lit = self.next()
            return IntLit(-int(lit.text), span=span)
        if tok.kind == "ident":
            self.next()
            name = tok.text
            if self.is_bound(name):
                return Var(name, span=span)
            if name in self.known:
                return Const(name, span=span)
            raise ParseError(f"use of undeclared symbol {name!r}", span)
        if tok.kind == "(":
            self.next()
            t = self.parse_term()
            self.expect(")")
            return t
        if tok.kind == "kw":
            if tok.text == "true":
                self.next()
                return TRUE
            if tok.text == "false":
                self.next()
                return FALSE
            if tok.text == "prop":
                self.next()
                return PROP
            if tok.text == "type":
                self.next()
                return TYPE
            if tok.text == "int":
                self.next()
                return INT
            if tok.text == "if":
                self.next()
                cond = self.parse_term()
                self.expect("kw", "then")
                then = self.parse_term()
                self.expect("kw", "else")
                els = self.parse_term()
                return Ite(cond, then, els, span=span)
            if tok.text == "match":
                return self.parse_match()
            if tok.text in ("forall", "exists", "fun"):
                self.next()
                binders = self.parse_binders()
                self.expect(".")
                self.push_scope([b for b, _ in binders])
                body = self.parse_term()
                self.pop_scope()
                node = {"forall": Forall, "exists": Exists, "fun": Lam}[tok.text]
                for bname, bty in reversed(binders):
                    body = node(bname, bty, body, span=span)
                return body
            if tok.text == "pi":
                self.next()
                binders = self.parse_binders()
                self.expect(".")
                self.push_scope([b for b, _ in binders])
                body = self.parse_term()
                self.pop_scope()
                for bname, bty in reversed(binders):
                    body = Pi(bname, bty if bty is not None else TYPE, body, span=span)
                return body
        raise self.error(f"expected a term, found {tok.text or 'end of input'!r}")

    def parse_match(self) -> Term:
        kw = self.next()
        scrut = self.parse_term()
        self.expect("kw", "with")
        if self.at("|"):
            self.next()
        branches = []
        while True:
            ctor_tok = self.expect("ident")
            vars_ = []
            while self.at("ident"):
                vars_.append(self.next().text)
            self.expect("->")
            self.push_scope(vars_)
            rhs = self.parse_term()
            self.pop_scope()
            branches.append(MatchBranch(ctor_tok.text, tuple(vars_), rhs))
            if self.at("|"):
                self.next()
                continue
            break
        self.expect("kw", "end")
        return Match(scrut, tuple(branches), span=kw.span(self.file))

    def parse_binders(self) -> list[tuple[str, Term | None]]:
        binders: list[tuple[str, Term | None]] = []
        while True:
            if self.at("ident"):
                binders.append((self.next().text, None))
            elif self.at("("):
                self.next()
                names = [self.expect("ident").text]
                while self.at("ident"):
                    names.append(self.next().text)
                self.expect(":")
                self.push_scope([b for b, _ in binders])
                ty = self.parse_term()
                self.pop_scope()
                self.expect(")")
                binders.extend((n, ty) for n in names)
            else:
                break
        if not binders:
            raise self.error("expected at least one binder")
        return binders


def parse_problem(text: str, file: str = "<input>") -> Problem:
    """Parse a core-language problem (.nun)."""
    return Parser(text, file, dependent=False).parse_problem()


def parse_dep_problem(text: str, file: str = "<input>") -> Problem:
    """Parse a dependent-frontend problem (.dnun): core plus depdata, class,
    and instance statements."""
    return Parser(text, file, dependent=True).parse_problem()
