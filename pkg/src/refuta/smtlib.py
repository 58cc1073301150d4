"""SMT-LIB 2 emission and model-response parsing.

The backend problem is emitted with declare-datatypes / declare-sort /
declare-fun and asserted axioms plus the goal (the input is already the
negated conjecture), ending in (check-sat)(get-model).  Symbols are
sanitized through a reversible mangling table.  The solver-specific
finite-model-finding flag belongs on the command line, keeping scripts
solver-neutral.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SmtError
from .models import FunctionEntry, FunctionTable, Model
from .problems import (
    AxiomStmt,
    DataDef,
    GoalStmt,
    Problem,
    RecDef,
    ValDecl,
)
from .terms import (
    And,
    App,
    Arrow,
    Builtin,
    Const,
    Eq,
    Exists,
    Forall,
    INT,
    Implies,
    IntLit,
    IntOp,
    Ite,
    Not,
    Or,
    PROP,
    TYPE,
    Term,
    Unknown,
    Var,
    app,
    strip_arrows,
    strip_foralls,
)

SMT_RESERVED = frozenset({
    "assert", "check-sat", "declare-fun", "declare-sort", "declare-const",
    "define-fun", "get-model", "set-logic", "set-option", "exit", "push", "pop",
    "and", "or", "not", "xor", "ite", "let", "forall", "exists", "distinct",
    "true", "false", "select", "store", "as", "is", "match", "par",
    "Int", "Bool", "Array", "abs", "div", "mod", "model", "error", "sat",
    "unsat", "unknown",
})

_SAFE = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


class Mangler:
    """Reversible name sanitization for the SMT-LIB lexical rules."""

    def __init__(self):
        self.fwd: dict[str, str] = {}
        self.bwd: dict[str, str] = {}

    def mangle(self, name: str) -> str:
        if name in self.fwd:
            return self.fwd[name]
        out = "".join(c if c in _SAFE else "_q" for c in name)
        if not out or out[0].isdigit():
            out = "s_" + out
        if out in SMT_RESERVED:
            out = "s_" + out
        base = out
        i = 1
        while out in self.bwd:
            i += 1
            out = f"{base}_{i}"
        self.fwd[name] = out
        self.bwd[out] = name
        return out

    def demangle(self, name: str) -> str:
        return self.bwd.get(name, name)

    def table(self) -> dict[str, str]:
        return dict(self.fwd)


@dataclass
class SmtScript:
    lines: list[str]
    mangler: Mangler
    problem: Problem

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _sort_sexp(ty: Term, mg: Mangler) -> str:
    if ty == PROP:
        return "Bool"
    if ty == INT:
        return "Int"
    match ty:
        case Const(name, _):
            return mg.mangle(name)
        case App(Const("array", _), (k, v)):
            return f"(Array {_sort_sexp(k, mg)} {_sort_sexp(v, mg)})"
    raise SmtError(f"cannot emit sort {ty!r}")


def _term_sexp(t: Term, mg: Mangler, selectors: dict) -> str:
    def go(t: Term) -> str:
        match t:
            case Builtin("true"):
                return "true"
            case Builtin("false"):
                return "false"
            case IntLit(v):
                return str(v) if v >= 0 else f"(- {-v})"
            case Var(name):
                return mg.mangle(name)
            case Const(name, _):
                if name in selectors and selectors[name][0] == "disc":
                    raise SmtError("bare discriminator cannot be emitted")
                return mg.mangle(name)
            case App(Const(name, _), args):
                inner = " ".join(go(a) for a in args)
                if name in selectors:
                    role, ctor, _ = selectors[name]
                    if role == "disc":
                        return f"((_ is {mg.mangle(ctor)}) {inner})"
                    return f"({mg.mangle(name)} {inner})"
                return f"({mg.mangle(name)} {inner})"
            case App(fn, args):
                inner = " ".join([go(fn)] + [go(a) for a in args])
                return f"({inner})"
            case And(a, b):
                return f"(and {go(a)} {go(b)})"
            case Or(a, b):
                return f"(or {go(a)} {go(b)})"
            case Implies(a, b):
                return f"(=> {go(a)} {go(b)})"
            case Not(a):
                return f"(not {go(a)})"
            case Eq(a, b):
                return f"(= {go(a)} {go(b)})"
            case IntOp(op, a, b):
                return f"({op} {go(a)} {go(b)})"
            case Ite(c, a, b):
                return f"(ite {go(c)} {go(a)} {go(b)})"
            case Forall(v, ty, body) | Exists(v, ty, body):
                kw = "forall" if isinstance(t, Forall) else "exists"
                if ty is None:
                    raise SmtError("unannotated quantifier binder")
                return (f"({kw} (({mg.mangle(v)} {_sort_sexp(ty, mg)})) "
                        f"{go(body)})")
        raise SmtError(f"cannot emit term {t!r} to SMT-LIB")

    return go(t)


def emit(p: Problem) -> SmtScript:
    """Emit a backend-fragment problem as a solver-neutral SMT-LIB 2 script."""
    mg = Mangler()
    lines = ["(set-logic ALL)"]

    datatypes = [s for s in p.statements if isinstance(s, DataDef)]
    if datatypes:
        heads = " ".join(f"({mg.mangle(d.name)} 0)" for d in datatypes)
        bodies = []
        for d in datatypes:
            ctors = []
            for c in d.ctors:
                sels = " ".join(
                    f"({mg.mangle(_sel_name_for(p, c.name, i))} "
                    f"{_sort_sexp(at, mg)})"
                    for i, at in enumerate(c.arg_types))
                ctors.append(f"({mg.mangle(c.name)}{(' ' + sels) if sels else ''}")
                ctors[-1] += ")"
            bodies.append("(" + " ".join(ctors) + ")")
        lines.append(f"(declare-datatypes ({heads}) ({' '.join(bodies)}))")

    for stmt in p.statements:
        match stmt:
            case ValDecl(name, ty) if ty == TYPE:
                lines.append(f"(declare-sort {mg.mangle(name)} 0)")
            case ValDecl(name, ty):
                if name in p.selectors:
                    continue  # carried by declare-datatypes
                doms, ret = strip_arrows(ty)
                dom_s = " ".join(_sort_sexp(d, mg) for d in doms)
                lines.append(f"(declare-fun {mg.mangle(name)} ({dom_s}) "
                             f"{_sort_sexp(ret, mg)})")
            case RecDef(defs):
                for d in defs:
                    doms, ret = strip_arrows(d.ty)
                    dom_s = " ".join(_sort_sexp(x, mg) for x in doms)
                    lines.append(f"(declare-fun {mg.mangle(d.name)} ({dom_s}) "
                                 f"{_sort_sexp(ret, mg)})")
                    for eqn in d.equations:
                        lines.append(f"(assert {_term_sexp(eqn, mg, p.selectors)})")
            case AxiomStmt(formula):
                lines.append(f"(assert {_term_sexp(formula, mg, p.selectors)})")
            case GoalStmt(formula):
                lines.append(f"(assert {_term_sexp(formula, mg, p.selectors)})")
            case DataDef():
                pass
            case _:
                raise SmtError(f"cannot emit statement {stmt!r}")

    lines.append("(check-sat)")
    lines.append("(get-model)")
    return SmtScript(lines, mg, p)


def _sel_name_for(p: Problem, ctor: str, index: int) -> str:
    for name, (role, c, i) in p.selectors.items():
        if role == "sel" and c == ctor and i == index:
            return name
    return f"sel_{ctor}_{index + 1}"


# -- s-expression reader ------------------------------------------------------


def parse_sexps(text: str) -> list:
    """Parse a whole string into a list of s-expressions (atoms are str)."""
    tokens = _sexp_tokens(text)
    out = []
    pos = 0
    while pos < len(tokens):
        node, pos = _sexp_read(tokens, pos)
        out.append(node)
    return out


def _sexp_tokens(text: str) -> list[str]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SmtError("unterminated quoted symbol")
            tokens.append(text[i + 1:j])
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            tokens.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def _sexp_read(tokens: list[str], pos: int):
    tok = tokens[pos]
    if tok == "(":
        out = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            node, pos = _sexp_read(tokens, pos)
            out.append(node)
        if pos >= len(tokens):
            raise SmtError("unbalanced parentheses in SMT response")
        return out, pos + 1
    if tok == ")":
        raise SmtError("unexpected ')' in SMT response")
    return tok, pos + 1


def validate_script(text: str) -> dict:
    """Structural check of an emitted script: declarations precede uses,
    arities are consistent.  Returns a summary dict (for tests)."""
    sexps = parse_sexps(text)
    sorts: set[str] = {"Bool", "Int", "Array"}
    funs: dict[str, int] = {}
    asserts = 0
    check_sat = get_model = False

    def check_sort(s):
        if isinstance(s, str):
            if s not in sorts:
                raise SmtError(f"sort {s!r} used before declaration")
            return
        if s and s[0] == "Array":
            for x in s[1:]:
                check_sort(x)
            return
        raise SmtError(f"bad sort {s!r}")

    for node in sexps:
        if not isinstance(node, list) or not node:
            raise SmtError("top-level atom in script")
        head = node[0]
        if head == "set-logic":
            pass
        elif head == "declare-sort":
            sorts.add(node[1])
        elif head == "declare-datatypes":
            for decl in node[1]:
                sorts.add(decl[0])
            for body in node[2]:
                for ctor in body:
                    funs[ctor[0]] = len(ctor) - 1
                    for sel in ctor[1:]:
                        check_sort(sel[1])
                        funs[sel[0]] = 1
        elif head == "declare-fun":
            for d in node[2]:
                check_sort(d)
            check_sort(node[3])
            funs[node[1]] = len(node[2])
        elif head == "assert":
            asserts += 1
        elif head == "check-sat":
            check_sat = True
        elif head == "get-model":
            get_model = True
        else:
            raise SmtError(f"unexpected command {head!r}")
    if not check_sat or not get_model:
        raise SmtError("script must end with (check-sat)(get-model)")
    return {"sorts": sorts, "functions": funs, "asserts": asserts}


# -- model response parsing ----------------------------------------------------


class ModelParser:
    def __init__(self, p: Problem, mangler: Mangler):
        self.p = p
        self.mg = mangler
        self.warnings: list[str] = []
        self.domain_elems: dict[str, dict[str, int]] = {}

    def parse(self, text: str) -> Model:
        sexps = parse_sexps(text)
        entries = []
        for node in sexps:
            if isinstance(node, list) and node and node[0] == "model":
                entries.extend(node[1:])
            elif isinstance(node, list) and node and node[0] == "define-fun":
                entries.append(node)
            elif isinstance(node, list):
                entries.extend(x for x in node
                               if isinstance(x, list) and x
                               and x[0] == "define-fun")
        constants = []
        functions = []
        for e in entries:
            if not (isinstance(e, list) and len(e) >= 5 and e[0] == "define-fun"):
                continue
            name = self.mg.demangle(e[1])
            params = e[2]
            body = e[4]
            if not params:
                try:
                    constants.append((name, self.value_term(body)))
                except SmtError as ex:
                    self.warnings.append(f"{name}: {ex}")
                    constants.append((name, Unknown("?__")))
            else:
                try:
                    functions.append((name, self.function_table(params, body)))
                except SmtError as ex:
                    self.warnings.append(f"{name}: {ex}")
                    functions.append((name, FunctionTable(
                        tuple((pn, INT) for pn, _ in
                              ((q[0], q[1]) for q in params)), ())))
        carriers = tuple(
            (ty, tuple(Const(f"${ty}_{i}") for i in range(len(elems))))
            for ty, elems in self.domain_elems.items())
        return Model(carriers=carriers, constants=tuple(constants),
                     functions=tuple(functions))

    def value_term(self, node) -> Term:
        if isinstance(node, str):
            if node.lstrip("-").isdigit():
                return IntLit(int(node))
            if node == "true":
                return Builtin("true")
            if node == "false":
                return Builtin("false")
            name = self.mg.demangle(node)
            info = self.p.symbols.get(name)
            if info is not None and info.kind == "ctor":
                return Const(name)
            if node.startswith("@"):
                return self.domain_element(node, None)
            raise SmtError(f"unknown model atom {node!r}")
        if isinstance(node, list) and node:
            if node[0] == "-" and len(node) == 2:
                inner = self.value_term(node[1])
                if isinstance(inner, IntLit):
                    return IntLit(-inner.value)
            if node[0] == "as" and len(node) == 3:
                # (as @elem sort)
                if isinstance(node[1], str) and node[1].startswith("@"):
                    return self.domain_element(node[1], node[2])
                return self.value_term(node[1])
            head = node[0]
            if isinstance(head, str):
                name = self.mg.demangle(head)
                info = self.p.symbols.get(name)
                if info is not None and info.kind == "ctor":
                    return app(Const(name),
                               tuple(self.value_term(a) for a in node[1:]))
        raise SmtError(f"unsupported model value {node!r}")

    def domain_element(self, atom: str, sort) -> Term:
        sort_name = self.mg.demangle(sort) if isinstance(sort, str) else None
        if sort_name is None:
            # cvc-style @uc_<sort>_<n> atoms carry the sort inline
            parts = atom.lstrip("@").split("_")
            sort_name = self.mg.demangle(parts[1]) if len(parts) >= 2 else "u"
        table = self.domain_elems.setdefault(sort_name, {})
        if atom not in table:
            table[atom] = len(table)
        return Const(f"${sort_name}_{table[atom]}")

    def function_table(self, params, body) -> FunctionTable:
        names = [q[0] for q in params]
        tys = [self._sort_term(q[1]) for q in params]
        entries: list[FunctionEntry] = []

        def walk(node):
            if isinstance(node, list) and node and node[0] == "ite":
                cond, then, els = node[1], node[2], node[3]
                binding = self._cond_binding(cond, names)
                if binding is not None:
                    try:
                        value = self.value_term(then)
                        args = tuple(binding.get(n, None) for n in names)
                        if all(a is not None for a in args):
                            entries.append(FunctionEntry(args, value))
                        else:
                            self.warnings.append(
                                "partially constrained ite branch ignored")
                    except SmtError as ex:
                        self.warnings.append(str(ex))
                else:
                    self.warnings.append("unrecognized ite condition ignored")
                walk(els)
                return
            # final else branch: outside the finite fragment, becomes ?__
            try:
                self.value_term(node)
            except SmtError:
                pass

        walk(body)
        return FunctionTable(tuple(zip(names, tys)), tuple(entries))

    def _cond_binding(self, cond, names) -> dict | None:
        """Recognize (= x v), (and (= x v) (= y w)), binding params to values."""
        out: dict = {}

        def eat(c) -> bool:
            if not isinstance(c, list) or not c:
                return False
            if c[0] == "and":
                return all(eat(x) for x in c[1:])
            if c[0] == "=" and len(c) == 3:
                lhs, rhs = c[1], c[2]
                if isinstance(lhs, str) and lhs in names:
                    try:
                        out[lhs] = self.value_term(rhs)
                        return True
                    except SmtError:
                        return False
                if isinstance(rhs, str) and rhs in names:
                    try:
                        out[rhs] = self.value_term(lhs)
                        return True
                    except SmtError:
                        return False
            return False

        if eat(cond):
            return out
        return None

    def _sort_term(self, node) -> Term:
        if node == "Bool":
            return PROP
        if node == "Int":
            return INT
        if isinstance(node, str):
            return Const(self.mg.demangle(node))
        if isinstance(node, list) and node and node[0] == "Array":
            return App(Const("array"), (self._sort_term(node[1]),
                                        self._sort_term(node[2])))
        raise SmtError(f"unsupported sort {node!r}")


def parse_smt_model(p: Problem, text: str, mangler: Mangler) -> tuple[Model, list[str]]:
    """Parse a get-model response into a Model over the problem's symbols."""
    parser = ModelParser(p, mangler)
    model = parser.parse(text)
    return model, parser.warnings
