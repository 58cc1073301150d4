"""Dependent-frontend encoding into the core language.

Dependent (co)datatypes are erased to plain (co)datatypes plus an invariant
predicate relating erased values to their term indices; type classes become
single-constructor record datatypes with one predicate per class axiom;
binders over dependently-typed variables pick up invariant hypotheses
(universals), conjuncts (existentials), or asserting guards (lambdas).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EncodeError
from .problems import (
    AxiomStmt,
    ClassDef,
    CtorDecl,
    DataDef,
    DepDataDef,
    GoalStmt,
    InstanceDef,
    PredDef,
    PredOne,
    Problem,
    RecDef,
    RecOne,
    Statement,
    ValDecl,
)
from .terms import (
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
    Lam,
    Match,
    MatchBranch,
    NameSupply,
    Pi,
    Term,
    Var,
    app,
    arrows,
    conj,
    foralls,
    free_vars,
    map_subterms,
    strip_arrows,
    strip_pis,
    subterms,
)


@dataclass(frozen=True)
class ErasedDatatype:
    """Erasure of one dependent (co)datatype."""

    plain: DataDef
    inv: PredDef


@dataclass(frozen=True)
class ErasedClass:
    """Encoding of one type class."""

    record: DataDef
    projections: tuple[RecDef, ...]
    axiom_preds: tuple[PredDef, ...]


@dataclass(frozen=True)
class _DepInfo:
    name: str
    plain_name: str
    inv_name: str
    term_arity: int
    type_arity: int


class Registry:
    """Encoded dependent datatypes and classes, by name."""

    def __init__(self):
        self.depdata: dict[str, _DepInfo] = {}
        self.classes: dict[str, ClassDef] = {}
        self.class_axiom_preds: dict[str, tuple[str, ...]] = {}
        self.class_ctor: dict[str, str] = {}
        # constrained function -> the class of each dictionary argument
        self.constrained: dict[str, list[str]] = {}
        # class -> concrete dictionary terms from declared instances
        self.instances: dict[str, list[Term]] = {}

    def dep_of_type(self, ty: Term) -> tuple[_DepInfo, tuple[Term, ...]] | None:
        """If ty is a fully applied dependent datatype, return (info, args)."""
        if isinstance(ty, App) and isinstance(ty.fn, Const):
            info = self.depdata.get(ty.fn.name)
            if info is not None:
                if len(ty.args) != info.term_arity + info.type_arity:
                    raise EncodeError(
                        f"partially applied dependent type {ty.fn.name!r}", ty.span)
                return info, ty.args
        if isinstance(ty, Const) and ty.name in self.depdata:
            info = self.depdata[ty.name]
            if info.term_arity + info.type_arity != 0:
                raise EncodeError(
                    f"partially applied dependent type {ty.name!r}", ty.span)
            return info, ()
        return None


def plain_name(name: str) -> str:
    return name + "'"


def inv_name(name: str) -> str:
    return "inv_" + name


def erase_type(ty: Term, reg: Registry) -> Term:
    """Remove term arguments from dependent types; Pi over terms becomes ->."""
    match ty:
        case Builtin() | Var() | Const():
            dep = reg.dep_of_type(ty)
            return ty if dep is None else Const(dep[0].plain_name)
        case App(fn, args):
            dep = reg.dep_of_type(ty)
            if dep is not None:
                info, all_args = dep
                ty_args = tuple(erase_type(a, reg) for a in all_args[info.term_arity:])
                head: Term = Const(info.plain_name)
                return App(head, ty_args) if ty_args else head
            return App(erase_type(fn, reg), tuple(erase_type(a, reg) for a in args),
                       span=ty.span)
        case Arrow(d, c):
            return Arrow(erase_type(d, reg), erase_type(c, reg), span=ty.span)
        case Pi(v, vt, body):
            if vt == TYPE:
                return Pi(v, TYPE, erase_type(body, reg), span=ty.span)
            body2 = erase_type(body, reg)
            if v in free_vars(body2):
                raise EncodeError(
                    f"dependency on {v!r} survives erasure; definitions interleaving "
                    "type and term parameters in more intricate ways are unsupported",
                    ty.span)
            return Arrow(erase_type(vt, reg), body2, span=ty.span)
        case Implies(a, b):
            # class constraint in a type: becomes an ordinary dictionary argument
            return Arrow(erase_type(a, reg), erase_type(b, reg), span=ty.span)
    raise EncodeError(f"unsupported type form {ty!r}", getattr(ty, "span", None))


def encode_datatype(d: DepDataDef, reg: Registry) -> ErasedDatatype:
    """Erase a dependent (co)datatype and build its invariant predicate."""
    info = _DepInfo(d.name, plain_name(d.name), inv_name(d.name),
                    len(d.term_params), len(d.type_params))
    reg.depdata[d.name] = info

    plain_ctors = []
    clauses = []
    tp_vars = tuple(Var(p) for p in d.type_params)
    plain_head: Term = Const(info.plain_name)
    if tp_vars:
        plain_head = App(plain_head, tp_vars)
    for c in d.ctors:
        binder_tys = {tv.name: tv.ty for tv in c.binders}
        arg_tys = [erase_type(binder_tys[a], reg) for a in c.args]
        plain_ctors.append(CtorDecl(c.name, tuple(arg_tys)))

        hyps = []
        if d.term_params:
            for a in c.args:
                dep = reg.dep_of_type(binder_tys[a])
                if dep is not None:
                    arg_info, args = dep
                    idx = args[:arg_info.term_arity]
                    hyps.append(app(Const(arg_info.inv_name), tuple(idx) + (Var(a),)))
        concl = app(Const(info.inv_name),
                    tuple(c.ret_indices) + (app(Const(c.name), tuple(Var(a)
                                                                     for a in c.args)),))
        clause = concl
        for h in reversed(hyps):
            clause = Implies(h, clause)
        clause = foralls([(tv.name, erase_type(tv.ty, reg)) for tv in c.binders], clause)
        clauses.append(clause)

    plain = DataDef(info.plain_name, tuple(d.type_params), tuple(plain_ctors),
                    codata=d.codata, origin="depfront")
    inv_ty = arrows([tv.ty for tv in d.term_params], Arrow(plain_head, Builtin("prop")))
    for p in reversed(d.type_params):
        inv_ty = Pi(p, TYPE, inv_ty)
    inv = PredDef((PredOne(info.inv_name, inv_ty, tuple(clauses)),),
                  co=d.codata, origin="depfront")
    return ErasedDatatype(plain, inv)


def encode_binders(t: Term, reg: Registry) -> Term:
    """Rewrite dependently-typed binders; guards of a lambda chain conjoin."""
    match t:
        case Lam():
            binders = []
            guards = []
            while isinstance(t, Lam):
                vt = t.var_ty
                if vt is not None:
                    dep = reg.dep_of_type(vt)
                    if dep is not None:
                        info, args = dep
                        idx = args[:info.term_arity]
                        guards.append(app(Const(info.inv_name),
                                          tuple(idx) + (Var(t.var),)))
                    vt = erase_type(vt, reg)
                binders.append((t.var, vt))
                t = t.body
            body = encode_binders(t, reg)
            if guards:
                body = Asserting(body, conj(guards))
            out = body
            for v, vt in reversed(binders):
                out = Lam(v, vt, out)
            return out
        case Forall(v, vt, body) | Exists(v, vt, body):
            body2 = encode_binders(body, reg)
            if vt is None:
                return type(t)(v, vt, body2, span=t.span)
            dep = reg.dep_of_type(vt)
            if dep is None:
                return type(t)(v, erase_type(vt, reg), body2, span=t.span)
            info, args = dep
            idx = args[:info.term_arity]
            inv_app = app(Const(info.inv_name), tuple(idx) + (Var(v),))
            wrapped = Implies(inv_app, body2) if isinstance(t, Forall) \
                else And(inv_app, body2)
            return type(t)(v, erase_type(vt, reg), wrapped, span=t.span)
        case Pi() | Arrow():
            return erase_type(t, reg)
        case App(Const("eq"), args) if "eq" not in reg.classes:
            if len(args) != 2:
                raise EncodeError("propositional equality must be fully applied", t.span)
            return Eq(encode_binders(args[0], reg), encode_binders(args[1], reg),
                      span=t.span)
        case _:
            return map_subterms(t, lambda c: encode_binders(c, reg))


def _replace_consts(t: Term, mapping: dict[str, Term]) -> Term:
    if isinstance(t, Const) and t.name in mapping and not t.targs:
        return mapping[t.name]
    return map_subterms(t, lambda c: _replace_consts(c, mapping))


def inst_ctor_name(class_name: str) -> str:
    return "inst_" + class_name


def encode_class(c: ClassDef, reg: Registry) -> ErasedClass:
    """Record datatype + per-axiom predicates + field projections."""
    reg.classes[c.name] = c
    a = c.type_param
    ctor = inst_ctor_name(c.name)
    reg.class_ctor[c.name] = ctor
    record = DataDef(c.name, (a,),
                     (CtorDecl(ctor, tuple(erase_type(t, reg) for _, t in c.data_fields)),),
                     origin="depfront")
    class_ty = App(Const(c.name), (Var(a),))

    field_names = [n for n, _ in c.data_fields]
    projections = []
    for i, (fname, fty) in enumerate(c.data_fields):
        extra = strip_arrows(fty)[0]
        extra_vars = [f"x{j}" for j in range(len(extra))]
        proj_ty = Pi(a, TYPE, Arrow(class_ty, erase_type(fty, reg)))
        pat_vars = [f"{n}1" for n in field_names]
        sel = Var(pat_vars[i])
        rhs: Term = app(sel, tuple(Var(x) for x in extra_vars))
        body = Match(Var("d"), (MatchBranch(ctor, tuple(pat_vars), rhs),))
        lhs = app(Const(fname), (Var("d"),) + tuple(Var(x) for x in extra_vars))
        eqn = foralls([("d", class_ty)] + [(x, xt) for x, xt in zip(extra_vars, extra)],
                      Eq(lhs, body))
        projections.append(RecDef((RecOne(fname, proj_ty, (eqn,)),), origin="depfront"))

    axiom_preds = []
    pred_names = []
    field_vars = {n: Var(n) for n in field_names}
    inst_applied = app(Const(ctor), tuple(Var(n) for n in field_names))
    for axname, formula in c.axiom_fields:
        pname = f"{axname}_{c.name}"
        pred_names.append(pname)
        hyp = _replace_consts(formula, field_vars)
        clause = foralls([(n, erase_type(t, reg)) for (n, t) in c.data_fields],
                         Implies(hyp, App(Const(pname), (inst_applied,))))
        pty = Pi(a, TYPE, Arrow(class_ty, Builtin("prop")))
        axiom_preds.append(PredDef((PredOne(pname, pty, (clause,)),), origin="depfront"))
    reg.class_axiom_preds[c.name] = tuple(pred_names)
    return ErasedClass(record, tuple(projections), tuple(axiom_preds))


def _constraints_of(ty: Term) -> tuple[list[Term], Term]:
    """Split pi-prefixed constraints (C a => ...) off a type scheme."""
    binders, mono = strip_pis(ty)
    constraints = []
    while isinstance(mono, Implies):
        constraints.append(mono.lhs)
        mono = mono.rhs
    out = mono
    for c in reversed(constraints):
        out = Arrow(c, out)
    for v, vt in reversed(binders):
        out = Pi(v, vt, out)
    return constraints, out


def encode_class_fun(r: RecDef, reg: Registry, supply: NameSupply) -> RecDef:
    """Turn class constraints into dictionary arguments and guard the bodies
    with the class axiom predicates applied to those dictionaries."""
    new_defs = []
    for d in r.defs:
        constraints, new_ty = _constraints_of(d.ty)
        if not constraints:
            new_defs.append(d)
            continue
        dicts = []
        for cstr in constraints:
            if not (isinstance(cstr, App) and isinstance(cstr.fn, Const)
                    and cstr.fn.name in reg.classes):
                raise EncodeError(
                    f"unresolved class constraint in {d.name!r} "
                    "(instances must be resolved by the frontend)", r.span)
            dicts.append((supply.fresh("dict"), cstr.fn.name, cstr))
        reg.constrained[d.name] = [cname for _, cname, _ in dicts]
        new_eqs = tuple(_encode_constrained_equation(d.name, eqn, dicts, reg)
                        for eqn in d.equations)
        new_defs.append(RecOne(d.name, new_ty, new_eqs))
    return RecDef(tuple(new_defs), origin=r.origin, span=r.span)


def _encode_constrained_equation(fname: str, eqn: Term, dicts, reg: Registry) -> Term:
    from .terms import strip_foralls

    binders, body = strip_foralls(eqn)
    if not isinstance(body, Eq):
        raise EncodeError(f"equation of {fname!r} is not an equality")
    lhs, rhs = body.lhs, body.rhs
    dict_vars = tuple(Var(dv) for dv, _, _ in dicts)
    if isinstance(lhs, App) and isinstance(lhs.fn, Const) and lhs.fn.name == fname:
        lhs2: Term = App(lhs.fn, dict_vars + lhs.args)
    elif isinstance(lhs, Const) and lhs.name == fname:
        lhs2 = App(lhs, dict_vars)
    else:
        raise EncodeError(f"equation of {fname!r} does not define it")

    field_of_class = {}
    for dv, cname, _ in dicts:
        for fld, _ in reg.classes[cname].data_fields:
            field_of_class[fld] = dv
    # calls to functions constrained over the same classes reuse our dicts
    dict_for_class = {cname: dv for dv, cname, _ in dicts}

    def dicts_for(nm: str) -> tuple[Term, ...] | None:
        classes = reg.constrained.get(nm)
        if classes is None:
            return None
        out = []
        for cname in classes:
            if cname not in dict_for_class:
                return None
            out.append(Var(dict_for_class[cname]))
        return tuple(out)

    def add_dict(t: Term) -> Term:
        match t:
            case Const(nm, ()) if nm in field_of_class:
                return App(t, (Var(field_of_class[nm]),))
            case App(Const(nm, ()) as head, args) if nm in field_of_class:
                return App(head, (Var(field_of_class[nm]),)
                           + tuple(add_dict(x) for x in args))
            case Const(nm, ()) if nm == fname or nm in reg.constrained:
                needed = tuple(Var(dv) for dv, _, _ in dicts) if nm == fname \
                    else dicts_for(nm)
                if needed is None:
                    raise EncodeError(
                        f"cannot resolve class dictionaries for call of {nm!r}")
                return App(t, needed)
            case App(Const(nm, ()) as head, args) if nm == fname \
                    or nm in reg.constrained:
                needed = tuple(Var(dv) for dv, _, _ in dicts) if nm == fname \
                    else dicts_for(nm)
                if needed is None:
                    raise EncodeError(
                        f"cannot resolve class dictionaries for call of {nm!r}")
                return App(head, needed + tuple(add_dict(x) for x in args))
            case _:
                return map_subterms(t, add_dict)

    guards = []
    for dv, cname, _ in dicts:
        for pname in reg.class_axiom_preds[cname]:
            guards.append(App(Const(pname), (Var(dv),)))
    rhs2 = add_dict(rhs)
    if guards:
        rhs2 = Asserting(rhs2, conj(guards))
    hdr = [(dv, cstr) for dv, _, cstr in dicts]
    return foralls(hdr + binders, Eq(lhs2, rhs2))


def encode_instance(inst: InstanceDef, mode: str, reg: Registry) -> list[Statement]:
    """mode="erase" drops the instance; "retain" emits one axiom per class
    axiom predicate on the concrete dictionary, enabling later simplification."""
    if mode not in ("erase", "retain"):
        raise EncodeError(f"unknown instance mode {mode!r}")
    c = reg.classes.get(inst.class_name)
    if c is None:
        raise EncodeError(f"instance of unknown class {inst.class_name!r}", inst.span)
    assigned = dict(inst.assignments)
    values = []
    for fname, _ in c.data_fields:
        if fname not in assigned:
            raise EncodeError(
                f"instance of {inst.class_name!r} misses data field {fname!r}",
                inst.span)
        values.append(encode_binders(assigned[fname], reg))
    dictionary = app(Const(reg.class_ctor[c.name]), tuple(values))
    reg.instances.setdefault(c.name, []).append(dictionary)
    if mode == "erase":
        return []
    out: list[Statement] = []
    for pname in reg.class_axiom_preds[c.name]:
        out.append(AxiomStmt(App(Const(pname), (dictionary,)), origin="depfront"))
    return out


def insert_dicts(t: Term, reg: Registry, skip: frozenset[str] = frozenset()) -> Term:
    """Apply declared instances at call sites of constrained functions: when
    exactly one instance of the class is declared, its dictionary is passed."""

    def resolve(cname: str) -> Term:
        insts = reg.instances.get(cname, [])
        if len(insts) != 1:
            raise EncodeError(
                f"cannot resolve a {cname!r} dictionary "
                f"({len(insts)} instances declared); type classes must be "
                "explicitly resolved")
        return insts[0]

    def go(t: Term) -> Term:
        match t:
            case Const(nm, ()) if nm in reg.constrained and nm not in skip:
                return App(t, tuple(resolve(c) for c in reg.constrained[nm]))
            case App(Const(nm, ()) as head, args) if nm in reg.constrained \
                    and nm not in skip:
                dicts = tuple(resolve(c) for c in reg.constrained[nm])
                return App(head, dicts + tuple(go(a) for a in args))
            case _:
                return map_subterms(t, go)

    return go(t)


def _encode_rec(stmt: RecDef, reg: Registry, supply: NameSupply) -> RecDef:
    stmt = encode_class_fun(stmt, reg, supply)
    new_defs = []
    for d in stmt.defs:
        eqs = tuple(encode_binders(e, reg) for e in d.equations)
        if d.name not in reg.constrained:
            # constrained bodies already thread their dictionary variables
            eqs = tuple(insert_dicts(e, reg) for e in eqs)
        new_defs.append(RecOne(d.name, erase_type(d.ty, reg), eqs))
    return RecDef(tuple(new_defs), origin=stmt.origin, span=stmt.span)


def _encode_pred(stmt: PredDef, reg: Registry) -> PredDef:
    return PredDef(tuple(
        PredOne(d.name, erase_type(d.ty, reg),
                tuple(encode_binders(c, reg) for c in d.clauses))
        for d in stmt.defs), co=stmt.co, origin=stmt.origin, span=stmt.span)


def _encode_val(stmt: ValDecl, reg: Registry) -> list[Statement]:
    """A declaration val v : tau t* u* is the universal binder rule applied at
    the problem level: re-declare at the erased type and add axiom inv t* v."""
    dep = reg.dep_of_type(strip_pis(stmt.ty)[1]) if not isinstance(stmt.ty, Pi) \
        else None
    if not isinstance(stmt.ty, (App,)) or dep is None:
        return [ValDecl(stmt.name, erase_type(stmt.ty, reg) if stmt.ty != TYPE
                        else stmt.ty, origin=stmt.origin, span=stmt.span)]
    info, args = dep
    idx = args[:info.term_arity]
    new_ty = erase_type(stmt.ty, reg)
    inv_app = app(Const(info.inv_name), tuple(idx) + (Const(stmt.name),))
    return [ValDecl(stmt.name, new_ty, origin=stmt.origin, span=stmt.span),
            AxiomStmt(inv_app, origin="depfront")]


def _goal_mentions_instance_type(problem: Problem, inst: InstanceDef) -> bool:
    goal = problem.goal().formula
    heads = {s.name for s in subterms(inst.ty) if isinstance(s, Const)}
    if not heads:
        return False
    for sub in subterms(goal):
        if isinstance(sub, Const) and sub.name in heads:
            return True
        for ety in (getattr(sub, "var_ty", None),):
            if ety is not None:
                for leaf in subterms(ety):
                    if isinstance(leaf, Const) and leaf.name in heads:
                        return True
    return False


def encode_problem(problem: Problem, instance_mode: str | None = None) -> Problem:
    """Encode all dependent statements; the result is a core-only problem.

    ``instance_mode`` forces erase/retain for every instance; by default an
    instance is retained when its type occurs in the goal, erased otherwise.
    """
    reg = Registry()
    supply = NameSupply(problem.symbols.keys())
    out: list[Statement] = []
    for stmt in problem.statements:
        match stmt:
            case DepDataDef():
                erased = encode_datatype(stmt, reg)
                out.append(erased.plain)
                out.append(erased.inv)
            case ClassDef():
                ec = encode_class(stmt, reg)
                out.append(ec.record)
                out.extend(ec.projections)
                out.extend(ec.axiom_preds)
            case InstanceDef():
                mode = instance_mode
                if mode is None:
                    mode = "retain" if _goal_mentions_instance_type(problem, stmt) \
                        else "erase"
                out.extend(encode_instance(stmt, mode, reg))
            case RecDef():
                out.append(_encode_rec(stmt, reg, supply))
            case PredDef():
                out.append(_encode_pred(stmt, reg))
            case ValDecl():
                out.extend(_encode_val(stmt, reg))
            case AxiomStmt(formula):
                out.append(AxiomStmt(insert_dicts(encode_binders(formula, reg), reg),
                                     origin=stmt.origin, span=stmt.span))
            case GoalStmt(formula):
                out.append(GoalStmt(insert_dicts(encode_binders(formula, reg), reg),
                                    origin=stmt.origin, span=stmt.span))
            case DataDef():
                out.append(DataDef(stmt.name, stmt.params, tuple(
                    CtorDecl(c.name, tuple(erase_type(t, reg) for t in c.arg_types))
                    for c in stmt.ctors), codata=stmt.codata,
                    origin=stmt.origin, span=stmt.span))
            case _:
                raise EncodeError(f"cannot encode statement {stmt!r}")
    return Problem(out)
