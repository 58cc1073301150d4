"""Printing for problems, terms, and models.

``parse_problem(print_problem(p))`` is alpha-equivalent to ``p``.  Model
output follows the ``val f := fun (x : t). if ... else ?__ x.`` format, one
line per symbol in the source problem's declaration order.
"""

from __future__ import annotations

from .models import FunctionTable, Model
from .problems import (
    AxiomStmt,
    ClassDef,
    DataDef,
    DepDataDef,
    GoalStmt,
    InstanceDef,
    PredDef,
    Problem,
    RecDef,
    Statement,
    ValDecl,
)
from .terms import (
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
    Not,
    Or,
    Pi,
    Term,
    Unknown,
    Var,
    conj,
    disj,
)

# precedence levels, loosest first
_ASSERTING, _IMPLIES, _ARROW, _OR, _AND, _CMP, _ADD, _MUL, _NOT, _APP, _ATOM = range(11)


def print_term(t: Term) -> str:
    return _term(t, _ASSERTING)


def _paren(s: str, level: int, node_level: int) -> str:
    """Parenthesize when the node binds looser than the position allows."""
    return f"({s})" if node_level < level else s


def _binder_prefix(kw: str, t: Term) -> tuple[str, Term]:
    """Collect a run of identical binders, grouping equal adjacent types."""
    node = type(t)
    groups: list[tuple[list[str], Term | None]] = []
    while isinstance(t, node):
        v, ty, t = t.var, t.var_ty, t.body
        if groups and groups[-1][1] == ty and ty is not None:
            groups[-1][0].append(v)
        elif groups and groups[-1][1] is None and ty is None:
            groups[-1][0].append(v)
        else:
            groups.append(([v], ty))
    parts = []
    for names, ty in groups:
        if ty is None:
            parts.extend(names)
        else:
            parts.append(f"({' '.join(names)} : {_term(ty, _ASSERTING)})")
    return f"{kw} {' '.join(parts)}. ", t


def _term(t: Term, level: int) -> str:
    match t:
        case Var(name):
            return name
        case Const(name, _):
            return name
        case IntLit(v):
            return str(v) if v >= 0 else _paren(str(v), level, _ADD)
        case Builtin(kind):
            return kind
        case Unknown(tag):
            return tag
        case App(fn, args):
            parts = [_term(fn, _ATOM)] + [_term(a, _ATOM) for a in args]
            return _paren(" ".join(parts), level, _APP)
        case Lam():
            prefix, body = _binder_prefix("fun", t)
            return _paren(prefix + _term(body, _ASSERTING), level, _ASSERTING)
        case Forall():
            prefix, body = _binder_prefix("forall", t)
            return _paren(prefix + _term(body, _ASSERTING), level, _ASSERTING)
        case Exists():
            prefix, body = _binder_prefix("exists", t)
            return _paren(prefix + _term(body, _ASSERTING), level, _ASSERTING)
        case Pi():
            names = []
            while isinstance(t, Pi) and t.var_ty == Builtin("type"):
                names.append(t.var)
                t = t.body
            if names:
                prefix = f"pi {' '.join(names)}. "
                body = _term(t, _ASSERTING)
                if isinstance(t, Pi):  # mixed term-dependent tail
                    body = _term(t, _ASSERTING + 1)
                return _paren(prefix + body, level, _ASSERTING)
            prefix, body = _binder_prefix("pi", t)
            return _paren(prefix + _term(body, _ASSERTING), level, _ASSERTING)
        case Arrow(dom, cod):
            s = f"{_term(dom, _ARROW + 1)} -> {_term(cod, _ARROW)}"
            return _paren(s, level, _ARROW)
        case Implies(a, b):
            s = f"{_term(a, _IMPLIES + 1)} => {_term(b, _IMPLIES)}"
            return _paren(s, level, _IMPLIES)
        case Or(a, b):
            s = f"{_term(a, _OR)} || {_term(b, _OR + 1)}"
            return _paren(s, level, _OR)
        case And(a, b):
            s = f"{_term(a, _AND)} && {_term(b, _AND + 1)}"
            return _paren(s, level, _AND)
        case Not(IntOp("<=", a, b)):
            s = f"{_term(a, _CMP + 1)} > {_term(b, _CMP + 1)}"
            return _paren(s, level, _CMP)
        case Not(a):
            return _paren(f"~ {_term(a, _NOT)}", level, _NOT)
        case Eq(a, b):
            s = f"{_term(a, _CMP + 1)} = {_term(b, _CMP + 1)}"
            return _paren(s, level, _CMP)
        case IntOp("<=", a, b):
            s = f"{_term(a, _CMP + 1)} <= {_term(b, _CMP + 1)}"
            return _paren(s, level, _CMP)
        case IntOp("*", a, b):
            s = f"{_term(a, _MUL)} * {_term(b, _MUL + 1)}"
            return _paren(s, level, _MUL)
        case IntOp(op, a, b):
            s = f"{_term(a, _ADD)} {op} {_term(b, _ADD + 1)}"
            return _paren(s, level, _ADD)
        case Ite(c, a, b):
            s = (f"if {_term(c, _ASSERTING)} then {_term(a, _ASSERTING)} "
                 f"else {_term(b, _ASSERTING)}")
            return _paren(s, level, _ASSERTING)
        case Match(scrut, branches):
            arms = " | ".join(
                " ".join([b.ctor, *b.vars]) + f" -> {_term(b.rhs, _ASSERTING)}"
                for b in branches)
            return f"match {_term(scrut, _ASSERTING)} with {arms} end"
        case Asserting(body, guard):
            s = f"{_term(body, _ASSERTING + 1)} asserting {_term(guard, _ASSERTING + 1)}"
            return _paren(s, level, _ASSERTING)
    raise TypeError(f"cannot print term {t!r}")


def print_statement(stmt: Statement) -> str:
    match stmt:
        case DataDef(name, params, ctors, codata):
            kw = "codata" if codata else "data"
            head = " ".join([name, *params])
            body = " | ".join(
                " ".join([c.name, *(_term(t, _ATOM) for t in c.arg_types)])
                for c in ctors)
            return f"{kw} {head} := {body};"
        case PredDef(defs, co):
            kw = "copred" if co else "pred"
            chunks = []
            for d in defs:
                clauses = ";\n  ".join(_term(c, _ASSERTING) for c in d.clauses)
                chunks.append(f"{d.name} : {_term(d.ty, _ASSERTING)} :=\n  {clauses}")
            return f"{kw} " + "\nand ".join(chunks) + ";"
        case RecDef(defs):
            chunks = []
            for d in defs:
                eqs = ";\n  ".join(_term(e, _ASSERTING) for e in d.equations)
                chunks.append(f"{d.name} : {_term(d.ty, _ASSERTING)} :=\n  {eqs}")
            return "rec " + "\nand ".join(chunks) + ";"
        case ValDecl(name, ty):
            return f"val {name} : {_term(ty, _ASSERTING)};"
        case AxiomStmt(formula):
            return f"axiom {_term(formula, _ASSERTING)};"
        case GoalStmt(formula):
            return f"goal {_term(formula, _ASSERTING)};"
        case DepDataDef(name, term_params, type_params, ctors, codata):
            kw = "depcodata" if codata else "depdata"
            params = "".join(f" ({tv.name} : {_term(tv.ty, _ASSERTING)})"
                             for tv in term_params)
            params += "".join(f" ({p} : type)" for p in type_params)
            arms = []
            for c in ctors:
                prefix = ""
                if c.binders:
                    bs = " ".join(f"({tv.name} : {_term(tv.ty, _ASSERTING)})"
                                  for tv in c.binders)
                    prefix = f"forall {bs}. "
                ret_args = [_term(ix, _ATOM) for ix in c.ret_indices] + list(type_params)
                ret = " ".join([name, *ret_args])
                arms.append(f"{prefix}{' '.join([c.name, *c.args])} : {ret}")
            return f"{kw} {name}{params} :=\n    " + "\n  | ".join(arms) + ";"
        case ClassDef(name, type_param, data_fields, axiom_fields):
            fields = [f"{n} : {_term(t, _ASSERTING)}" for n, t in data_fields]
            fields += [f"{n} : {_term(t, _ASSERTING)}" for n, t in axiom_fields]
            return f"class {name} {type_param} where\n  " + ";\n  ".join(fields) + ";"
        case InstanceDef(class_name, ty, assignments):
            assigns = ";\n  ".join(f"{n} = {_term(t, _ASSERTING)}" for n, t in assignments)
            return f"instance {class_name} {_term(ty, _ATOM)} where\n  {assigns};"
    raise TypeError(f"cannot print statement {stmt!r}")


def print_problem(p: Problem) -> str:
    return "\n".join(print_statement(s) for s in p.statements) + "\n"


def _table_value_groups(table: FunctionTable):
    """Group argument tuples by their value, preserving first-seen order."""
    groups: list[tuple[Term, list[tuple[Term, ...]]]] = []
    for e in table.entries:
        for value, argses in groups:
            if value == e.value:
                argses.append(e.args)
                break
        else:
            groups.append((e.value, [e.args]))
    return groups


def print_model_function(name: str, table: FunctionTable) -> str:
    params = " ".join(f"({n} : {_term(ty, _ASSERTING)})" for n, ty in table.params)
    args = [Var(n) for n, _ in table.params]
    body = f"{table.default.tag} " + " ".join(_term(a, _ATOM) for a in args)
    groups = _table_value_groups(table)
    for value, argses in reversed(groups):
        cond = disj(conj(Eq(v, a) for v, a in zip(args, argtuple))
                    for argtuple in argses)
        body = (f"if {_term(cond, _ASSERTING)} then {_term(value, _ASSERTING)} "
                f"else {body}")
    return f"val {name} := fun {params}. {body}."


def print_model(m: Model, order: list[str] | None = None) -> str:
    """Print a model; ``order`` fixes the symbol order (declaration order)."""
    lines: dict[str, str] = {}
    for name, value in m.constants:
        lines[name] = f"val {name} := {_term(value, _ASSERTING)}."
    for name, table in m.functions:
        lines[name] = print_model_function(name, table)
    if order is None:
        order = list(lines)
    out = [lines[n] for n in order if n in lines]
    out += [line for n, line in lines.items() if n not in set(order)]
    return "\n".join(out) + ("\n" if out else "")
