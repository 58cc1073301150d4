"""Reference evaluator: classical semantics over finite carriers.

This is the model-checking oracle.  ``asserting(t, phi)`` evaluates t only if
phi is true, otherwise the result is *undefined*; ``?__`` branches evaluate to
undefined; undefinedness propagates except through untaken ite branches and
through conjunctions/disjunctions whose other operand already decides the
result.  Recursive functions and (co)inductive predicates without a model
table are evaluated definitionally (equation unfolding / derivation search),
cut off by a fuel counter.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EvalError
from .models import FunctionTable, Model
from .problems import PredOne, Problem
from .terms import (
    FALSE,
    free_vars,
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
    Not,
    Or,
    Pi,
    Term,
    Unknown,
    Var,
    app,
    strip_arrows,
    strip_foralls,
    strip_pis,
)


class _Undef:
    """Distinguished evaluator outcome; not a domain element."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEF"


UNDEF = _Undef()


class FuelExhausted(EvalError):
    pass


_NO_DESTRUCTURE = object()


def _flatten_and(t: Term) -> list[Term]:
    if isinstance(t, And):
        return _flatten_and(t.lhs) + _flatten_and(t.rhs)
    return [t]


def _is_value_pattern(problem, t: Term, unbound: set) -> bool:
    match t:
        case Var(name):
            return name in unbound
        case App(Const(cname, _), args):
            info = problem.symbols.get(cname)
            return info is not None and info.kind == "ctor" and any(
                _is_value_pattern(problem, a, unbound) for a in args)
        case _:
            return False


@dataclass(frozen=True)
class VCtor:
    name: str
    args: tuple = ()

    def __repr__(self):
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(map(repr, self.args))})"


@dataclass(frozen=True)
class VDom:
    """Domain element i of abstract type ty; printed as ``$ty_i``."""

    ty: str
    index: int

    def __repr__(self):
        return f"${self.ty}_{self.index}"


@dataclass(frozen=True)
class VArr:
    """Finite total function as a tuple of (key, value) pairs in key order."""

    entries: tuple

    def lookup(self, key):
        for k, v in self.entries:
            if k == key:
                return v
        return UNDEF


@dataclass(frozen=True)
class VClosure:
    var: str
    body: Term
    env: tuple  # sorted tuple of (name, value)


@dataclass(frozen=True)
class VPartial:
    """Partially applied symbol or constructor."""

    name: str
    kind: str  # "ctor" | "sym"
    arity: int
    args: tuple = ()
    targs: tuple = ()


def type_key(ty: Term) -> str:
    """Canonical carrier key for a (monomorphic) type term."""
    match ty:
        case Builtin(kind):
            return kind
        case Const(name, targs):
            if targs:
                return "(" + " ".join([name] + [type_key(t) for t in targs]) + ")"
            return name
        case Var(name):
            return name
        case App(Const(name, _), args):
            return "(" + " ".join([name] + [type_key(a) for a in args]) + ")"
        case Arrow(d, c):
            return f"(-> {type_key(d)} {type_key(c)})"
    raise EvalError(f"no carrier key for type {ty!r}")


def term_to_value(problem: Problem, t: Term):
    """Convert a closed value term (model entry) to an evaluator value."""
    match t:
        case Builtin("true"):
            return True
        case Builtin("false"):
            return False
        case IntLit(v):
            return v
        case Unknown():
            return UNDEF
        case Const(name, _):
            if name.startswith("$"):
                base, _, idx = name[1:].rpartition("_")
                return VDom(base, int(idx))
            info = problem.symbols.get(name)
            if info is not None and info.kind == "ctor":
                arity = len(strip_arrows(strip_pis(info.ty)[1])[0])
                if arity == 0:
                    return VCtor(name)
                return VPartial(name, "ctor", arity)
            raise EvalError(f"model value mentions non-constructor symbol {name!r}")
        case App(Const(name, _), args):
            info = problem.symbols.get(name)
            if info is not None and info.kind == "ctor":
                return VCtor(name, tuple(term_to_value(problem, a) for a in args))
            raise EvalError(f"model value mentions non-constructor symbol {name!r}")
        case Lam(v, _, body):
            return VClosure(v, body, ())
        case IntOp("-", IntLit(0), IntLit(v)):
            return -v
    raise EvalError(f"cannot interpret model value term {t!r}")


def value_to_term(v, ty: Term | None = None) -> Term:
    """Convert an evaluator value back to a term (for models and printing)."""
    if v is True:
        return TRUE
    if v is False:
        return FALSE
    if isinstance(v, int):
        return IntLit(v)
    if v is UNDEF:
        return Unknown("?__")
    match v:
        case VCtor(name, args):
            return app(Const(name), tuple(value_to_term(a) for a in args))
        case VDom(tyname, i):
            return Const(f"${tyname}_{i}")
        case VArr(entries):
            dom_ty = cod_ty = None
            if ty is not None:
                if isinstance(ty, Arrow):
                    dom_ty, cod_ty = ty.dom, ty.cod
                elif isinstance(ty, App) and isinstance(ty.fn, Const) and ty.fn.name == "array":
                    dom_ty, cod_ty = ty.args
            body: Term = value_to_term(entries[-1][1], cod_ty)
            for k, val in reversed(entries[:-1]):
                body = Ite(Eq(Var("x"), value_to_term(k, dom_ty)),
                           value_to_term(val, cod_ty), body)
            return Lam("x", dom_ty, body)
    raise EvalError(f"cannot express value {v!r} as a term")


class Evaluator:
    def __init__(self, problem: Problem, model: Model | None = None, fuel: int = 200_000):
        self.problem = problem
        self.model = model if model is not None else Model()
        self.fuel = fuel
        self._tables: dict[str, dict[tuple, object]] = {}
        self._carriers: dict[str, list] = {}
        for name, table in self.model.functions:
            self._tables[name] = {
                tuple(term_to_value(problem, a) for a in e.args):
                    term_to_value(problem, e.value)
                for e in table.entries
            }

    # -- carriers ---------------------------------------------------------

    def carrier_of(self, ty: Term) -> list:
        key = type_key(ty)
        if key in self._carriers:
            return self._carriers[key]
        values: list
        if ty == PROP:
            values = [False, True]
        elif ty == INT:
            if not self.model.int_carrier:
                raise EvalError("quantifier over int but model has no int carrier")
            values = list(self.model.int_carrier)
        elif isinstance(ty, Arrow):
            values = self._function_carrier(ty.dom, ty.cod)
        elif isinstance(ty, App) and isinstance(ty.fn, Const) and ty.fn.name == "array":
            values = self._function_carrier(ty.args[0], ty.args[1])
        else:
            stored = self.model.carrier(key)
            if stored is None:
                raise EvalError(f"quantifier over type {key!r} with no carrier in model")
            values = [term_to_value(self.problem, t) for t in stored]
        self._carriers[key] = values
        return values

    def _function_carrier(self, dom: Term, cod: Term) -> list:
        keys = self.carrier_of(dom)
        vals = self.carrier_of(cod)
        out = [VArr(())] if not keys else []
        if keys:
            combos = [[]]
            for _ in keys:
                combos = [c + [v] for c in combos for v in vals]
            out = [VArr(tuple(zip(keys, c))) for c in combos]
        return out

    # -- evaluation -------------------------------------------------------

    def eval(self, t: Term, env: dict | None = None, assumed: frozenset = frozenset()):
        return self._eval(t, env or {}, assumed)

    def _tick(self):
        self.fuel -= 1
        if self.fuel <= 0:
            raise FuelExhausted("evaluation fuel exhausted")

    def _eval(self, t: Term, env: dict, assumed: frozenset):
        self._tick()
        match t:
            case Builtin("true"):
                return True
            case Builtin("false"):
                return False
            case IntLit(v):
                return v
            case Unknown():
                return UNDEF
            case Var(name):
                if name not in env:
                    raise EvalError(f"unbound variable {name!r}")
                return env[name]
            case Const(name, targs):
                return self._symbol(name, (), env, assumed, targs)
            case App(fn, args):
                return self._eval_app(fn, args, env, assumed)
            case Lam(v, _, body):
                captured = tuple(sorted(env.items(), key=lambda kv: kv[0]))
                return VClosure(v, body, captured)
            case And(a, b):
                return self._kleene_and(self._eval(a, env, assumed),
                                        lambda: self._eval(b, env, assumed))
            case Or(a, b):
                return self._kleene_or(self._eval(a, env, assumed),
                                       lambda: self._eval(b, env, assumed))
            case Implies(a, b):
                av = self._eval(a, env, assumed)
                if av is False:
                    return True
                bv = self._eval(b, env, assumed)
                if bv is True:
                    return True
                if av is UNDEF or bv is UNDEF:
                    return UNDEF
                return bool(bv) if av else True
            case Not(a):
                av = self._eval(a, env, assumed)
                return UNDEF if av is UNDEF else not av
            case Eq(a, b):
                av = self._eval(a, env, assumed)
                if av is UNDEF:
                    return UNDEF
                bv = self._eval(b, env, assumed)
                if bv is UNDEF:
                    return UNDEF
                return self._values_equal(av, bv)
            case IntOp(op, a, b):
                av = self._eval(a, env, assumed)
                if av is UNDEF:
                    return UNDEF
                bv = self._eval(b, env, assumed)
                if bv is UNDEF:
                    return UNDEF
                if not isinstance(av, int) or not isinstance(bv, int) \
                        or isinstance(av, bool) or isinstance(bv, bool):
                    raise EvalError(f"integer operator {op} on non-integers")
                if op == "<=":
                    return av <= bv
                if op == "+":
                    return av + bv
                if op == "-":
                    return av - bv
                if op == "*":
                    return av * bv
                raise EvalError(f"unknown integer operator {op}")
            case Ite(c, a, b):
                cv = self._eval(c, env, assumed)
                if cv is UNDEF:
                    return UNDEF
                return self._eval(a if cv else b, env, assumed)
            case Forall(v, ty, body):
                return self._quantifier(v, ty, body, env, assumed, is_forall=True)
            case Exists(v, ty, body):
                return self._quantifier(v, ty, body, env, assumed, is_forall=False)
            case Asserting(body, guard):
                gv = self._eval(guard, env, assumed)
                if gv is not True:
                    return UNDEF
                return self._eval(body, env, assumed)
            case Match(scrut, branches):
                sv = self._eval(scrut, env, assumed)
                if sv is UNDEF:
                    return UNDEF
                if not isinstance(sv, VCtor):
                    raise EvalError(f"match on non-constructor value {sv!r}")
                for b in branches:
                    if b.ctor == sv.name:
                        env2 = dict(env)
                        env2.update(zip(b.vars, sv.args))
                        return self._eval(b.rhs, env2, assumed)
                return UNDEF
        raise EvalError(f"cannot evaluate term {t!r}")

    def _kleene_and(self, av, bf):
        if av is False:
            return False
        bv = bf()
        if bv is False:
            return False
        if av is UNDEF or bv is UNDEF:
            return UNDEF
        return True

    def _kleene_or(self, av, bf):
        if av is True:
            return True
        bv = bf()
        if bv is True:
            return True
        if av is UNDEF or bv is UNDEF:
            return UNDEF
        return False

    def _values_equal(self, a, b) -> bool:
        if isinstance(a, VCtor) and isinstance(b, VCtor):
            return a.name == b.name and len(a.args) == len(b.args) and all(
                self._values_equal(x, y) for x, y in zip(a.args, b.args))
        if isinstance(a, VArr) and isinstance(b, VArr):
            if len(a.entries) != len(b.entries):
                return False
            bmap = list(b.entries)
            for k, v in a.entries:
                for k2, v2 in bmap:
                    if self._values_equal(k, k2):
                        if not self._values_equal(v, v2):
                            return False
                        break
                else:
                    return False
            return True
        if isinstance(a, VClosure) and isinstance(b, VArr):
            return self._closure_matches(a, b)
        if isinstance(a, VArr) and isinstance(b, VClosure):
            return self._closure_matches(b, a)
        if isinstance(a, VClosure) or isinstance(b, VClosure):
            raise EvalError("equality between function closures is not supported")
        return a == b

    def _closure_matches(self, clo: VClosure, arr: VArr) -> bool:
        """Extensional comparison over the array's key set."""
        for k, v in arr.entries:
            r = self._apply_value(clo, k, frozenset())
            if r is UNDEF or not self._values_equal(r, v):
                return False
        return True

    def _quantifier(self, v, ty, body, env, assumed, is_forall: bool):
        if ty is None:
            raise EvalError(f"quantified variable {v!r} lacks a type annotation")
        if ty == TYPE:
            raise EvalError("cannot evaluate a quantifier over all types")
        if not is_forall:
            r = self._exists_destructure(v, ty, body, env, assumed)
            if r is not _NO_DESTRUCTURE:
                return r
        saw_undef = False
        for value in self.carrier_of(ty):
            env2 = dict(env)
            env2[v] = value
            r = self._eval(body, env2, assumed)
            if r is UNDEF:
                saw_undef = True
            elif is_forall and r is False:
                return False
            elif not is_forall and r is True:
                return True
        if saw_undef:
            return UNDEF
        return is_forall

    def _exists_destructure(self, v, ty, body, env, assumed):
        """Bind an existential chain through equality conjuncts of the shape
        value = ctor(vars): the witness is forced, no carrier scan needed."""
        chain = [(v, ty)]
        while isinstance(body, Exists):
            chain.append((body.var, body.var_ty))
            body = body.body
        conjuncts = _flatten_and(body)
        unbound = {name for name, _ in chain}
        bindings: dict = {}
        progress = True
        while progress and unbound:
            progress = False
            for c in conjuncts:
                if not isinstance(c, Eq):
                    continue
                for pat, other in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
                    if not _is_value_pattern(self.problem, pat, unbound):
                        continue
                    if free_vars(other) & unbound:
                        continue
                    try:
                        value = self._eval(other, {**env, **bindings}, assumed)
                    except EvalError:
                        continue
                    if value is UNDEF:
                        continue
                    ok = self._match_value_pattern(pat, value, bindings, unbound,
                                                   env, assumed)
                    if ok is False:
                        return False
                    if ok:
                        progress = True
        if unbound:
            return _NO_DESTRUCTURE
        env2 = {**env, **bindings}
        inner = body
        # rebuild the stripped body (conjuncts unchanged) and evaluate
        return self._eval(inner, env2, assumed)

    def _match_value_pattern(self, pat, value, bindings, unbound, env, assumed):
        """Returns True on new bindings, False on definite mismatch, None if
        the pattern cannot be processed."""
        match pat:
            case Var(name) if name in unbound:
                bindings[name] = value
                unbound.discard(name)
                return True
            case App(Const(cname, _), args):
                info = self.problem.symbols.get(cname)
                if info is None or info.kind != "ctor":
                    return None
                if not isinstance(value, VCtor) or value.name != cname \
                        or len(value.args) != len(args):
                    return False
                out = True
                for sub, sv in zip(args, value.args):
                    r = self._match_value_pattern(sub, sv, bindings, unbound,
                                                  env, assumed)
                    if r is False:
                        return False
                    out = out and (r is True)
                return out
            case _:
                try:
                    pv = self._eval(pat, {**env, **bindings}, assumed)
                except EvalError:
                    return None
                if pv is UNDEF:
                    return None
                return None if self._values_equal(pv, value) else False

    def _eval_app(self, fn: Term, args: tuple, env: dict, assumed: frozenset):
        if isinstance(fn, Const):
            argvals = []
            for a in args:
                av = self._eval(a, env, assumed)
                if av is UNDEF:
                    return UNDEF
                argvals.append(av)
            return self._symbol(fn.name, tuple(argvals), env, assumed, fn.targs)
        fv = self._eval(fn, env, assumed)
        if fv is UNDEF:
            return UNDEF
        for a in args:
            av = self._eval(a, env, assumed)
            if av is UNDEF:
                return UNDEF
            fv = self._apply_value(fv, av, assumed)
            if fv is UNDEF:
                return UNDEF
        return fv

    def _apply_value(self, fv, arg, assumed: frozenset):
        match fv:
            case VClosure(v, body, captured):
                env = dict(captured)
                env[v] = arg
                return self._eval(body, env, assumed)
            case VArr():
                return fv.lookup(arg)
            case VPartial(name, kind, arity, got, targs):
                got = got + (arg,)
                if len(got) < arity:
                    return VPartial(name, kind, arity, got, targs)
                if kind == "ctor":
                    return VCtor(name, got)
                return self._symbol(name, got, {}, assumed, targs)
        raise EvalError(f"cannot apply non-function value {fv!r}")

    def _symbol_arity(self, name: str) -> int:
        info = self.problem.symbols[name]
        return len(strip_arrows(strip_pis(info.ty)[1])[0])

    def _symbol(self, name: str, argvals: tuple, env: dict, assumed: frozenset,
                targs: tuple = ()):
        if name == "select":
            if len(argvals) != 2:
                return VPartial("select", "sym", 2, argvals)
            arr, key = argvals
            if isinstance(arr, (VClosure, VPartial)):
                return self._apply_value(arr, key, assumed)
            if not isinstance(arr, VArr):
                raise EvalError("select applied to a non-array value")
            return arr.lookup(key)
        if name in self.problem.selectors:
            return self._selector(name, argvals)
        if name.startswith("$"):
            base, _, idx = name[1:].rpartition("_")
            return VDom(base, int(idx))
        info = self.problem.symbols.get(name)
        if info is None:
            raise EvalError(f"unbound symbol {name!r}")
        if info.kind == "ctor":
            arity = self._symbol_arity(name)
            if len(argvals) < arity:
                return VPartial(name, "ctor", arity, argvals, targs) if argvals or arity \
                    else VCtor(name)
            return VCtor(name, argvals)

        arity = self._symbol_arity(name)
        if len(argvals) < arity and (name in self._tables or info.kind in ("rec", "pred",
                                                                           "copred")):
            return VPartial(name, "sym", arity, argvals, targs)

        # model interpretation wins over the definitional one
        if name in self._tables:
            table = self._tables[name]
            if argvals in table:
                return table[argvals]
            return UNDEF
        cv = self.model.constant(name)
        if cv is not None and not argvals:
            return term_to_value(self.problem, cv)

        if info.kind == "rec":
            return self._eval_rec(name, argvals, assumed, targs)
        if info.kind in ("pred", "copred"):
            return self._prove(name, argvals, assumed, targs)
        if cv is None and info.kind == "val":
            raise EvalError(f"model assigns no value to symbol {name!r}")
        raise EvalError(f"cannot evaluate symbol {name!r}")

    def _selector(self, name: str, argvals: tuple):
        role, ctor, index = self.problem.selectors[name]
        if len(argvals) != 1:
            return VPartial(name, "sym", 1, argvals)
        (v,) = argvals
        if not isinstance(v, VCtor):
            raise EvalError(f"selector {name!r} applied to non-constructor value")
        if role == "disc":
            return v.name == ctor
        if v.name != ctor:
            return UNDEF
        return v.args[index]

    def _type_instantiation(self, name: str, targs: tuple):
        from .terms import strip_pis, substitute as _subst

        info = self.problem.symbols[name]
        binders = strip_pis(info.ty)[0]
        if not binders or not targs:
            return lambda t: t
        mapping = {v: ta for (v, _), ta in zip(binders, targs)}
        return lambda t: _subst(t, mapping)

    def _eval_rec(self, name: str, argvals: tuple, assumed: frozenset,
                  targs: tuple = ()):
        inst = self._type_instantiation(name, targs)
        _, d = self.problem.rec_defs()[name]
        for eq in d.equations:
            eq = inst(eq)
            binders, body = strip_foralls(eq)
            if not isinstance(body, Eq):
                raise EvalError(f"equation of {name!r} is not an equality")
            lhs, rhs = body.lhs, body.rhs
            if isinstance(lhs, App) and isinstance(lhs.fn, Const) and lhs.fn.name == name:
                pats = lhs.args
            elif isinstance(lhs, Const) and lhs.name == name:
                pats = ()
            else:
                raise EvalError(f"equation of {name!r} does not define it")
            if len(pats) != len(argvals):
                continue
            bindings: dict = {}
            if self._match_patterns(pats, argvals, bindings):
                bound = set(bindings)
                for v, ty in binders:
                    if v not in bound:
                        raise EvalError(
                            f"equation variable {v!r} of {name!r} not fixed by patterns")
                return self._eval(rhs, bindings, assumed)
        return UNDEF

    def _match_patterns(self, pats, vals, bindings: dict) -> bool:
        for p, v in zip(pats, vals):
            if not self._match_pattern(p, v, bindings):
                return False
        return True

    def _match_pattern(self, pat: Term, val, bindings: dict) -> bool:
        match pat:
            case Var(name):
                if name in bindings:
                    return bindings[name] == val
                bindings[name] = val
                return True
            case IntLit(n):
                return val == n
            case Builtin("true"):
                return val is True
            case Builtin("false"):
                return val is False
            case Const(name, _):
                info = self.problem.symbols.get(name)
                if info is not None and info.kind == "ctor":
                    return isinstance(val, VCtor) and val.name == name and not val.args
                raise EvalError(f"non-constructor pattern {name!r}")
            case App(Const(name, _), args):
                info = self.problem.symbols.get(name)
                if info is not None and info.kind == "ctor":
                    if not (isinstance(val, VCtor) and val.name == name
                            and len(val.args) == len(args)):
                        return False
                    return self._match_patterns(args, val.args, bindings)
                raise EvalError(f"non-constructor pattern head {name!r}")
        raise EvalError(f"unsupported pattern {pat!r}")

    def _prove(self, name: str, argvals: tuple, assumed: frozenset,
               targs: tuple = ()):
        """Derivation search: least fixpoint for pred, greatest for copred."""
        self._tick()
        inst = self._type_instantiation(name, targs)
        block, d = self.problem.pred_defs()[name]
        key = (name, argvals)
        if key in assumed:
            return block.co
        assumed = assumed | {key}
        saw_undef = False
        for clause in d.clauses:
            r = self._try_clause(name, d, inst(clause), argvals, assumed)
            if r is True:
                return True
            if r is UNDEF:
                saw_undef = True
        return UNDEF if saw_undef else False

    def _try_clause(self, name: str, d: PredOne, clause: Term, argvals: tuple,
                    assumed: frozenset):
        binders, body = strip_foralls(clause)
        premises = []
        while isinstance(body, Implies):
            premises.append(body.lhs)
            body = body.rhs
        if isinstance(body, App) and isinstance(body.fn, Const) and body.fn.name == name:
            pats = body.args
        elif isinstance(body, Const) and body.name == name:
            pats = ()
        else:
            raise EvalError(f"clause of {name!r} does not conclude with it")
        if len(pats) != len(argvals):
            return False
        bindings: dict = {}
        if not self._match_patterns(pats, argvals, bindings):
            return False
        free = [(v, ty) for v, ty in binders if v not in bindings]
        return self._clause_premises(premises, free, bindings, assumed)

    def _clause_premises(self, premises, free, bindings, assumed):
        if free:
            (v, ty), rest = free[0], free[1:]
            if ty is None:
                raise EvalError(f"clause variable {v!r} lacks a type annotation")
            saw_undef = False
            for value in self.carrier_of(ty):
                b2 = dict(bindings)
                b2[v] = value
                r = self._clause_premises(premises, rest, b2, assumed)
                if r is True:
                    return True
                if r is UNDEF:
                    saw_undef = True
            return UNDEF if saw_undef else False
        result = True
        for prem in premises:
            r = self._eval(prem, bindings, assumed)
            if r is False:
                return False
            if r is UNDEF:
                result = UNDEF
        return result


def evaluate(problem: Problem, model: Model | None, t: Term,
             env: dict | None = None, fuel: int = 200_000):
    """One-shot evaluation; returns a value or UNDEF."""
    return Evaluator(problem, model, fuel=fuel).eval(t, env)


def holds(problem: Problem, model: Model | None, t: Term,
          env: dict | None = None, fuel: int = 200_000) -> bool:
    """True iff t definitely evaluates to true."""
    try:
        return evaluate(problem, model, t, env, fuel) is True
    except FuelExhausted:
        return False
