"""Process syntax, canonical forms, knowledge extraction and the step relations.

Processes are immutable trees.  Canonicalization identifies processes up to
the structural laws: parallel/choice reordering, unit removal, scope
minimization, term normalization inside prefixes, and a stable renaming of
bound atoms, so structural congruence on the supported fragment becomes
syntactic equality of canonical forms.
"""

from __future__ import annotations

from typing import Optional

from .errors import (
    LimitExceeded,
    NotFinite,
    NonValueLabelTerm,
    UnboundCall,
)
from .terms import (
    App,
    Name,
    RewriteTheory,
    Term,
    Var,
    depth,
    eq_mod_e,
    is_destructor_free,
    is_ground,
    names as term_names,
    normalize,
    rename_names,
    sub,
    substitute as term_substitute,
    term_str,
    variables as term_variables,
)
from . import knowledge as _knowledge


class ExplorationConfig:
    """Bounds for state exploration and attacker message enumeration."""

    __slots__ = ("attacker_depth", "fresh_budget", "max_states", "max_depth",
                 "max_messages")

    def __init__(self, attacker_depth=2, fresh_budget=1, max_states=100000,
                 max_depth=10000, max_messages=100000):
        for v in (attacker_depth, fresh_budget, max_states, max_depth,
                  max_messages):
            if v < 1:
                raise ValueError("exploration limits must be positive")
        self.attacker_depth = attacker_depth
        self.fresh_budget = fresh_budget
        self.max_states = max_states
        self.max_depth = max_depth
        self.max_messages = max_messages

    def replace(self, **kw):
        vals = {s: getattr(self, s) for s in self.__slots__}
        vals.update(kw)
        return ExplorationConfig(**vals)

    def __repr__(self):
        inner = ", ".join(f"{s}={getattr(self, s)}" for s in self.__slots__)
        return f"ExplorationConfig({inner})"


# --- actions and processes ---------------------------------------------------


class Action:
    __slots__ = ()


class Input(Action):
    __slots__ = ("chan", "var", "_hash")

    def __init__(self, chan, var):
        self.chan = chan
        self.var = var
        self._hash = hash(("in", chan, var))

    def __eq__(self, o):
        return self is o or (
            type(o) is Input and self.chan == o.chan and self.var == o.var)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.chan}?({self.var})"


class Output(Action):
    __slots__ = ("chan", "term", "_hash")

    def __init__(self, chan, term):
        self.chan = chan
        self.term = term
        self._hash = hash(("out", chan, term))

    def __eq__(self, o):
        return self is o or (
            type(o) is Output and self.chan == o.chan and self.term == o.term)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.chan}!({term_str(self.term)})"


class AttackerOutput(Action):
    __slots__ = ("chan", "_hash")

    def __init__(self, chan):
        self.chan = chan
        self._hash = hash(("attout", chan))

    def __eq__(self, o):
        return self is o or (type(o) is AttackerOutput and self.chan == o.chan)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.chan}!(*)"


class Test(Action):
    __slots__ = ("left", "right", "_hash")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self._hash = hash(("test", left, right))

    def __eq__(self, o):
        return self is o or (
            type(o) is Test and self.left == o.left and self.right == o.right)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"[{term_str(self.left)} = {term_str(self.right)}]"


class Process:
    __slots__ = ()


class Nil(Process):
    __slots__ = ("_hash",)

    def __init__(self):
        self._hash = hash("nil")

    def __eq__(self, o):
        return type(o) is Nil

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "0"


NIL = Nil()


class Par(Process):
    __slots__ = ("parts", "_hash")

    def __init__(self, parts):
        self.parts = tuple(parts)
        self._hash = hash(("par", self.parts))

    def __eq__(self, o):
        return self is o or (
            type(o) is Par and self._hash == o._hash and self.parts == o.parts)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "(" + " | ".join(map(repr, self.parts)) + ")"


class Restrict(Process):
    __slots__ = ("name", "body", "_hash")

    def __init__(self, name, body):
        self.name = name
        self.body = body
        self._hash = hash(("new", name, body))

    def __eq__(self, o):
        return self is o or (
            type(o) is Restrict and self._hash == o._hash
            and self.name == o.name and self.body == o.body)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"new {self.name} in {self.body!r}"


class Prefix(Process):
    __slots__ = ("action", "cont", "_hash")

    def __init__(self, action, cont):
        self.action = action
        self.cont = cont
        self._hash = hash(("pre", action, cont))

    def __eq__(self, o):
        return self is o or (
            type(o) is Prefix and self._hash == o._hash
            and self.action == o.action and self.cont == o.cont)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.action!r}.{self.cont!r}"


class Sum(Process):
    __slots__ = ("branches", "_hash")

    def __init__(self, branches):
        self.branches = tuple(branches)
        self._hash = hash(("sum", self.branches))

    def __eq__(self, o):
        return self is o or (
            type(o) is Sum and self._hash == o._hash
            and self.branches == o.branches)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "(" + " + ".join(map(repr, self.branches)) + ")"


class Let(Process):
    __slots__ = ("var", "term", "body", "_hash")

    def __init__(self, var, term, body):
        self.var = var
        self.term = term
        self.body = body
        self._hash = hash(("let", var, term, body))

    def __eq__(self, o):
        return self is o or (
            type(o) is Let and self._hash == o._hash and self.var == o.var
            and self.term == o.term and self.body == o.body)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"let {self.var} = {term_str(self.term)} in {self.body!r}"


class Call(Process):
    __slots__ = ("name", "args", "_hash")

    def __init__(self, name, args=()):
        self.name = name
        self.args = tuple(args)
        self._hash = hash(("call", name, self.args))

    def __eq__(self, o):
        return self is o or (
            type(o) is Call and self._hash == o._hash
            and self.name == o.name and self.args == o.args)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if not self.args:
            return self.name
        return self.name + "(" + ", ".join(map(term_str, self.args)) + ")"


# --- transition labels --------------------------------------------------------


class TransitionLabel:
    __slots__ = ()


class Tau(TransitionLabel):
    __slots__ = ("_hash",)

    def __init__(self):
        self._hash = hash("tau")

    def __eq__(self, o):
        return type(o) is Tau

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "tau"


class OutLabel(TransitionLabel):
    __slots__ = ("chan", "term", "extruded", "_hash")

    def __init__(self, chan, term, extruded=frozenset()):
        self.chan = chan
        self.term = term
        self.extruded = frozenset(extruded)
        self._hash = hash(("lout", chan, term, self.extruded))

    def __eq__(self, o):
        return self is o or (
            type(o) is OutLabel and self.chan == o.chan and self.term == o.term
            and self.extruded == o.extruded)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        nu = ("new " + ",".join(sorted(self.extruded)) + ". ") if self.extruded else ""
        return f"{nu}{self.chan}!({term_str(self.term)})"


class InLabel(TransitionLabel):
    __slots__ = ("chan", "term", "_hash")

    def __init__(self, chan, term):
        self.chan = chan
        self.term = term
        self._hash = hash(("lin", chan, term))

    def __eq__(self, o):
        return self is o or (
            type(o) is InLabel and self.chan == o.chan and self.term == o.term)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.chan}?({term_str(self.term)})"


class LabelPattern:
    """What kind of transition a formula modality is asking for."""

    __slots__ = ("kind", "chan", "term", "_hash")

    def __init__(self, kind, chan=None, term=None):
        if kind not in ("tau", "out", "in"):
            raise ValueError(f"bad label pattern kind {kind!r}")
        self.kind = kind
        self.chan = chan
        self.term = term
        self._hash = hash(("pat", kind, chan, term))

    @property
    def barb(self):
        return self.kind != "tau" and self.term is None

    def __eq__(self, o):
        return self is o or (
            type(o) is LabelPattern and self.kind == o.kind
            and self.chan == o.chan and self.term == o.term)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.kind == "tau":
            return "<tau>"
        mark = "!" if self.kind == "out" else "?"
        t = f"({term_str(self.term)})" if self.term is not None else ""
        return f"<{self.chan}{mark}{t}>"


# --- free atoms ---------------------------------------------------------------


def definition_free_names(defs: dict) -> dict:
    """Free names of each definition body, closed under mutual recursion."""
    fn = {nm: frozenset() for nm in defs}
    changed = True
    while changed:
        changed = False
        for nm, (_params, body) in defs.items():
            got = _fn(body, fn)
            if got != fn[nm]:
                fn[nm] = got
                changed = True
    return fn


def _fn(p: Process, def_fn: dict, memo: Optional[dict] = None) -> frozenset:
    if memo is not None:
        got = memo.get(p)
        if got is not None:
            return got
    if isinstance(p, Nil):
        out = frozenset()
    elif isinstance(p, Par):
        out = frozenset()
        for q in p.parts:
            out |= _fn(q, def_fn, memo)
    elif isinstance(p, Sum):
        out = frozenset()
        for q in p.branches:
            out |= _fn(q, def_fn, memo)
    elif isinstance(p, Restrict):
        out = _fn(p.body, def_fn, memo) - {p.name}
    elif isinstance(p, Prefix):
        a = p.action
        out = _fn(p.cont, def_fn, memo)
        if isinstance(a, Input):
            out |= {a.chan}
        elif isinstance(a, Output):
            out = out | {a.chan} | term_names(a.term)
        elif isinstance(a, AttackerOutput):
            out |= {a.chan}
        else:
            out = out | term_names(a.left) | term_names(a.right)
    elif isinstance(p, Let):
        out = term_names(p.term) | _fn(p.body, def_fn, memo)
    elif isinstance(p, Call):
        out = def_fn.get(p.name, frozenset())
        for a in p.args:
            out |= term_names(a)
    else:
        raise TypeError(p)
    if memo is not None:
        memo[p] = out
    return out


def free_names(p: Process, defs: Optional[dict] = None) -> frozenset:
    return _fn(p, definition_free_names(defs or {}))


def free_vars(p: Process, defs: Optional[dict] = None) -> frozenset:
    defs = defs or {}
    if isinstance(p, Nil):
        return frozenset()
    if isinstance(p, Par):
        out = frozenset()
        for q in p.parts:
            out |= free_vars(q, defs)
        return out
    if isinstance(p, Sum):
        out = frozenset()
        for q in p.branches:
            out |= free_vars(q, defs)
        return out
    if isinstance(p, Restrict):
        return free_vars(p.body, defs)
    if isinstance(p, Prefix):
        a = p.action
        if isinstance(a, Input):
            return free_vars(p.cont, defs) - {a.var}
        out = free_vars(p.cont, defs)
        if isinstance(a, Output):
            out |= term_variables(a.term)
        elif isinstance(a, Test):
            out |= term_variables(a.left) | term_variables(a.right)
        return out
    if isinstance(p, Let):
        return term_variables(p.term) | (free_vars(p.body, defs) - {p.var})
    if isinstance(p, Call):
        out = frozenset()
        for a in p.args:
            out |= term_variables(a)
        params_body = defs.get(p.name)
        if params_body is not None:
            params, body = params_body
            out |= free_vars(body, defs) - frozenset(params)
        return out
    raise TypeError(p)


# --- substitution -------------------------------------------------------------

_fresh_counter = [0]


def fresh_atom(prefix="~a"):
    _fresh_counter[0] += 1
    return f"{prefix}{_fresh_counter[0]}"


def _subst_action(a: Action, x: str, t: Term) -> Action:
    if isinstance(a, Output):
        return Output(a.chan, term_substitute(a.term, x, t))
    if isinstance(a, Test):
        return Test(term_substitute(a.left, x, t),
                    term_substitute(a.right, x, t))
    return a


def substitute_process(p: Process, x: str, t: Term) -> Process:
    """Replace the free variable x by t, renaming binders to avoid capture."""
    t_names = term_names(t)
    t_vars = term_variables(t)

    def go(q):
        if isinstance(q, Nil):
            return q
        if isinstance(q, Par):
            return Par(tuple(go(r) for r in q.parts))
        if isinstance(q, Sum):
            return Sum(tuple(go(r) for r in q.branches))
        if isinstance(q, Restrict):
            if q.name in t_names:
                new = fresh_atom("~r")
                return Restrict(new, go(rename_process_name(q.body, q.name, new)))
            return Restrict(q.name, go(q.body))
        if isinstance(q, Prefix):
            a = q.action
            if isinstance(a, Input):
                if a.var == x:
                    return q
                if a.var in t_vars:
                    new = fresh_atom("~v")
                    body = substitute_process(q.cont, a.var, Var(new))
                    return Prefix(Input(a.chan, new), go(body))
                return Prefix(a, go(q.cont))
            return Prefix(_subst_action(a, x, t), go(q.cont))
        if isinstance(q, Let):
            term2 = term_substitute(q.term, x, t)
            if q.var == x:
                return Let(q.var, term2, q.body)
            if q.var in t_vars:
                new = fresh_atom("~v")
                body = substitute_process(q.body, q.var, Var(new))
                return Let(new, term2, go(body))
            return Let(q.var, term2, go(q.body))
        if isinstance(q, Call):
            return Call(q.name, tuple(term_substitute(a, x, t) for a in q.args))
        raise TypeError(q)

    return go(p)


def rename_process_name(p: Process, old: str, new: str) -> Process:
    """Rename the free name old to new (new assumed globally fresh)."""
    ren = {old: new}

    def rn(t):
        return rename_names(t, ren)

    def go(q):
        if isinstance(q, Nil):
            return q
        if isinstance(q, Par):
            return Par(tuple(go(r) for r in q.parts))
        if isinstance(q, Sum):
            return Sum(tuple(go(r) for r in q.branches))
        if isinstance(q, Restrict):
            if q.name == old:
                return q
            return Restrict(q.name, go(q.body))
        if isinstance(q, Prefix):
            a = q.action
            if isinstance(a, Input):
                a2 = Input(new if a.chan == old else a.chan, a.var)
            elif isinstance(a, Output):
                a2 = Output(new if a.chan == old else a.chan, rn(a.term))
            elif isinstance(a, AttackerOutput):
                a2 = AttackerOutput(new if a.chan == old else a.chan)
            else:
                a2 = Test(rn(a.left), rn(a.right))
            return Prefix(a2, go(q.cont))
        if isinstance(q, Let):
            return Let(q.var, rn(q.term), go(q.body))
        if isinstance(q, Call):
            return Call(q.name, tuple(rn(a) for a in q.args))
        raise TypeError(q)

    return go(p)


def unfold_call(p: Call, defs: dict) -> Process:
    entry = defs.get(p.name)
    if entry is None:
        raise UnboundCall(f"undefined process '{p.name}'")
    params, body = entry
    if len(params) != len(p.args):
        raise UnboundCall(
            f"'{p.name}' takes {len(params)} arguments, got {len(p.args)}")
    for param, arg in zip(params, p.args):
        body = substitute_process(body, param, arg)
    return body


# --- canonical form -----------------------------------------------------------

_UNFOLD_BUDGET = 512


def canonical_form(p: Process, th: RewriteTheory,
                   defs: Optional[dict] = None,
                   _fn_memo: Optional[dict] = None) -> Process:
    """Normal form under the structural laws; equal forms mean congruent.

    Terms are normalized, units dropped, parallel and choice flattened and
    sorted by an alpha-invariant key, restrictions pushed inward as far as
    they go, definition calls at spatial positions unfolded, and bound
    atoms renamed to a stable scheme.
    """
    defs = defs or {}
    def_fn = definition_free_names(defs)
    budget = [_UNFOLD_BUDGET]
    memo = {} if _fn_memo is None else _fn_memo
    q = _simplify(p, th, defs, def_fn, budget, True, memo)
    q = _order(q, th)
    return _rename_pass(q)


def _simplify(p, th, defs, def_fn, budget, spine, fnm):
    if isinstance(p, Nil):
        return NIL
    if isinstance(p, Par):
        parts = []
        for q in p.parts:
            q = _simplify(q, th, defs, def_fn, budget, spine, fnm)
            if isinstance(q, Nil):
                continue
            if isinstance(q, Par):
                parts.extend(q.parts)
            else:
                parts.append(q)
        if not parts:
            return NIL
        if len(parts) == 1:
            return parts[0]
        return Par(tuple(parts))
    if isinstance(p, Restrict):
        body = _simplify(p.body, th, defs, def_fn, budget, spine, fnm)
        return _push_restrict(p.name, body, def_fn, fnm)
    if isinstance(p, Sum):
        branches = []
        for q in p.branches:
            q = _simplify(q, th, defs, def_fn, budget, False, fnm)
            if isinstance(q, Sum):
                branches.extend(q.branches)
            else:
                branches.append(q)
        if len(branches) == 1:
            return branches[0]
        return Sum(tuple(branches))
    if isinstance(p, Prefix):
        a = p.action
        if isinstance(a, Output):
            a = Output(a.chan, normalize(a.term, th))
        elif isinstance(a, Test):
            a = Test(normalize(a.left, th), normalize(a.right, th))
        return Prefix(a, _simplify(p.cont, th, defs, def_fn, budget, False,
                                   fnm))
    if isinstance(p, Let):
        return Let(p.var, normalize(p.term, th),
                   _simplify(p.body, th, defs, def_fn, budget, False, fnm))
    if isinstance(p, Call):
        if not spine:
            if p.name not in defs:
                raise UnboundCall(f"undefined process '{p.name}'")
            params = defs[p.name][0]
            if len(params) != len(p.args):
                raise UnboundCall(
                    f"'{p.name}' takes {len(params)} arguments, "
                    f"got {len(p.args)}")
            return Call(p.name, tuple(normalize(a, th) for a in p.args))
        budget[0] -= 1
        if budget[0] < 0:
            raise NotFinite(
                f"unguarded recursion while unfolding '{p.name}'")
        return _simplify(unfold_call(p, defs), th, defs, def_fn, budget,
                         True, fnm)
    raise TypeError(p)


def _push_restrict(n, body, def_fn, fnm):
    if isinstance(body, Nil):
        return NIL
    if n not in _fn(body, def_fn, fnm):
        return body
    if isinstance(body, Par):
        ins, outs = [], []
        for q in body.parts:
            (ins if n in _fn(q, def_fn, fnm) else outs).append(q)
        if outs:
            inner = ins[0] if len(ins) == 1 else Par(tuple(ins))
            outs.append(_push_restrict(n, inner, def_fn, fnm))
            if len(outs) == 1:
                return outs[0]
            return Par(tuple(outs))
        return Restrict(n, body)
    if isinstance(body, Restrict):
        return Restrict(n, body)
    return Restrict(n, body)


def _term_key(t, nenv, venv):
    if isinstance(t, Name):
        i = nenv.get(t.id)
        return ("bn", i, "") if i is not None else ("fn", -1, t.id)
    if isinstance(t, Var):
        i = venv.get(t.id)
        return ("bv", i, "") if i is not None else ("fv", -1, t.id)
    return ("ap", -1, t.sym.name) + tuple(_term_key(a, nenv, venv) for a in t.args)


def _action_key(a, nenv, venv):
    if isinstance(a, Input):
        return ("in", a.chan if a.chan not in nenv else f"\x00{nenv[a.chan]}")
    if isinstance(a, Output):
        return ("out", a.chan if a.chan not in nenv else f"\x00{nenv[a.chan]}",
                _term_key(a.term, nenv, venv))
    if isinstance(a, AttackerOutput):
        return ("att", a.chan if a.chan not in nenv else f"\x00{nenv[a.chan]}")
    return ("test", _term_key(a.left, nenv, venv),
            _term_key(a.right, nenv, venv))


def _key(p, nenv, venv):
    """Alpha-invariant structural key; bound atoms keyed by binder index."""
    if isinstance(p, Nil):
        return ("0",)
    if isinstance(p, Par):
        return ("par",) + tuple(sorted(_key(q, nenv, venv) for q in p.parts))
    if isinstance(p, Sum):
        return ("sum",) + tuple(sorted(_key(q, nenv, venv) for q in p.branches))
    if isinstance(p, Restrict):
        nenv2 = dict(nenv)
        nenv2[p.name] = len(nenv2) + len(venv)
        return ("new", _key(p.body, nenv2, venv))
    if isinstance(p, Prefix):
        a = p.action
        if isinstance(a, Input):
            venv2 = dict(venv)
            venv2[a.var] = len(nenv) + len(venv2)
            return ("pre", _action_key(a, nenv, venv),
                    _key(p.cont, nenv, venv2))
        return ("pre", _action_key(a, nenv, venv), _key(p.cont, nenv, venv))
    if isinstance(p, Let):
        venv2 = dict(venv)
        venv2[p.var] = len(nenv) + len(venv2)
        return ("let", _term_key(p.term, nenv, venv),
                _key(p.body, nenv, venv2))
    if isinstance(p, Call):
        return ("call", p.name) + tuple(
            _term_key(a, nenv, venv) for a in p.args)
    raise TypeError(p)


def _order(p, th, nenv=None, venv=None):
    """Sort parallel components, choice branches, test sides and binder runs."""
    nenv = nenv or {}
    venv = venv or {}
    if isinstance(p, Nil):
        return p
    if isinstance(p, Par):
        parts = [_order(q, th, nenv, venv) for q in p.parts]
        parts.sort(key=lambda q: _key(q, nenv, venv))
        return Par(tuple(parts))
    if isinstance(p, Sum):
        branches = [_order(q, th, nenv, venv) for q in p.branches]
        branches.sort(key=lambda q: _key(q, nenv, venv))
        return Sum(tuple(branches))
    if isinstance(p, Restrict):
        run = []
        body = p
        while isinstance(body, Restrict):
            run.append(body.name)
            body = body.body
        mark = dict(nenv)
        base = len(nenv) + len(venv)
        for nm in run:
            mark[nm] = base  # placeholder: run binders indistinguishable
        body = _order(body, th, mark, venv)
        first_use = _first_uses(body, set(run))
        run.sort(key=lambda nm: (first_use.get(nm, len(first_use) + 1), nm))
        out = body
        for nm in reversed(run):
            out = Restrict(nm, out)
        return out
    if isinstance(p, Prefix):
        a = p.action
        if isinstance(a, Test):
            lk = _term_key(a.left, nenv, venv)
            rk = _term_key(a.right, nenv, venv)
            if rk < lk:
                a = Test(a.right, a.left)
        if isinstance(a, Input):
            venv2 = dict(venv)
            venv2[a.var] = len(nenv) + len(venv2)
            return Prefix(a, _order(p.cont, th, nenv, venv2))
        return Prefix(a, _order(p.cont, th, nenv, venv))
    if isinstance(p, Let):
        venv2 = dict(venv)
        venv2[p.var] = len(nenv) + len(venv2)
        return Let(p.var, p.term, _order(p.body, th, nenv, venv2))
    if isinstance(p, Call):
        return p
    raise TypeError(p)


def _first_uses(p, wanted):
    """Position of the first occurrence of each wanted name in print order."""
    pos = {}
    counter = [0]

    def tick(nm):
        if nm in wanted and nm not in pos:
            pos[nm] = counter[0]
        counter[0] += 1

    def term(t):
        if isinstance(t, Name):
            tick(t.id)
        elif isinstance(t, App):
            counter[0] += 1
            for a in t.args:
                term(a)
        else:
            counter[0] += 1

    def go(q):
        counter[0] += 1
        if isinstance(q, Par):
            for r in q.parts:
                go(r)
        elif isinstance(q, Sum):
            for r in q.branches:
                go(r)
        elif isinstance(q, Restrict):
            go(q.body)
        elif isinstance(q, Prefix):
            a = q.action
            if isinstance(a, (Input, Output, AttackerOutput)):
                tick(a.chan)
            if isinstance(a, Output):
                term(a.term)
            elif isinstance(a, Test):
                term(a.left)
                term(a.right)
            go(q.cont)
        elif isinstance(q, Let):
            term(q.term)
            go(q.body)
        elif isinstance(q, Call):
            for a in q.args:
                term(a)

    go(p)
    return pos


def _rename_pass(p):
    counter = [0, 0]

    # reserved prefix '#': cannot collide with parsed identifiers
    def next_name():
        counter[0] += 1
        return f"#n{counter[0]}"

    def next_var():
        counter[1] += 1
        return f"#x{counter[1]}"

    def rterm(t, nmap, vmap):
        if isinstance(t, Name):
            got = nmap.get(t.id)
            return Name(got) if got else t
        if isinstance(t, Var):
            got = vmap.get(t.id)
            return Var(got) if got else t
        return App(t.sym, tuple(rterm(a, nmap, vmap) for a in t.args))

    def go(q, nmap, vmap):
        if isinstance(q, Nil):
            return q
        if isinstance(q, Par):
            return Par(tuple(go(r, nmap, vmap) for r in q.parts))
        if isinstance(q, Sum):
            return Sum(tuple(go(r, nmap, vmap) for r in q.branches))
        if isinstance(q, Restrict):
            new = next_name()
            nmap2 = dict(nmap)
            nmap2[q.name] = new
            return Restrict(new, go(q.body, nmap2, vmap))
        if isinstance(q, Prefix):
            a = q.action
            if isinstance(a, Input):
                new = next_var()
                vmap2 = dict(vmap)
                vmap2[a.var] = new
                a2 = Input(nmap.get(a.chan, a.chan), new)
                return Prefix(a2, go(q.cont, nmap, vmap2))
            if isinstance(a, Output):
                a2 = Output(nmap.get(a.chan, a.chan), rterm(a.term, nmap, vmap))
            elif isinstance(a, AttackerOutput):
                a2 = AttackerOutput(nmap.get(a.chan, a.chan))
            else:
                a2 = Test(rterm(a.left, nmap, vmap), rterm(a.right, nmap, vmap))
            return Prefix(a2, go(q.cont, nmap, vmap))
        if isinstance(q, Let):
            new = next_var()
            vmap2 = dict(vmap)
            vmap2[q.var] = new
            return Let(new, rterm(q.term, nmap, vmap),
                       go(q.body, nmap, vmap2))
        if isinstance(q, Call):
            return Call(q.name, tuple(rterm(a, nmap, vmap) for a in q.args))
        raise TypeError(q)

    return go(p, {}, {})


# --- relevant terms and ground terms -------------------------------------------


def _collect_terms(p, th, defs, hide_restricted, visited):
    def subn(t):
        return sub(normalize(t, th))

    if isinstance(p, Nil):
        return frozenset()
    if isinstance(p, (Par, Sum)):
        parts = p.parts if isinstance(p, Par) else p.branches
        out = frozenset()
        for q in parts:
            out |= _collect_terms(q, th, defs, hide_restricted, visited)
        return out
    if isinstance(p, Restrict):
        inner = _collect_terms(p.body, th, defs, hide_restricted, visited)
        if hide_restricted:
            return frozenset(t for t in inner if p.name not in term_names(t))
        return inner
    if isinstance(p, Prefix):
        a = p.action
        out = _collect_terms(p.cont, th, defs, hide_restricted, visited)
        if isinstance(a, Output):
            out |= subn(a.term)
        elif isinstance(a, Test):
            out |= subn(a.left) | subn(a.right)
        return out
    if isinstance(p, Let):
        body = substitute_process(p.body, p.var, p.term)
        return _collect_terms(body, th, defs, hide_restricted, visited) | subn(p.term)
    if isinstance(p, Call):
        out = frozenset()
        for a in p.args:
            out |= subn(a)
        if p.name not in visited:
            body = unfold_call(p, defs or {})
            out |= _collect_terms(body, th, defs, hide_restricted,
                                  visited | {p.name})
        return out
    raise TypeError(p)


def extract_knowledge(p: Process, th: RewriteTheory,
                      defs: Optional[dict] = None) -> frozenset:
    """Relevant value terms of the process; restricted names hide their terms."""
    return _collect_terms(p, th, defs or {}, True, frozenset())


def ground_terms(p: Process, th: RewriteTheory,
                 defs: Optional[dict] = None) -> frozenset:
    """Value pieces anywhere in the process, keeping restricted-name terms."""
    return _collect_terms(p, th, defs or {}, False, frozenset())


# --- attacker message enumeration ----------------------------------------------


def enumerate_messages(seeds: frozenset, cfg: ExplorationConfig,
                       th: RewriteTheory):
    """Bounded-depth closure of the seeds plus a budget of fresh names.

    Returns (messages, fresh_names); messages are normal values sorted by
    (depth, structure) and deduplicated modulo the equations.
    """
    fresh = tuple(f"~f{i + 1}" for i in range(cfg.fresh_budget))
    kb = _knowledge.approximate(
        frozenset(seeds) | {Name(f) for f in fresh}, th)
    bound = cfg.attacker_depth
    pool = {t for t in kb.basis if depth(t) <= bound}
    ctors = [s for s in th.symbols.values() if not s.is_destructor]
    frontier = set(pool)
    while frontier:
        new = set()
        grouped = sorted(pool, key=depth)
        for sym in ctors:
            if sym.arity == 0:
                t = App(sym, ())
                if t not in pool:
                    new.add(t)
                continue
            if sym.arity == 1:
                for a in grouped:
                    if depth(a) + 1 <= bound:
                        t = App(sym, (a,))
                        if t not in pool:
                            new.add(t)
            elif sym.arity == 2:
                for a in grouped:
                    if depth(a) + 1 > bound:
                        break
                    for b in grouped:
                        if max(depth(a), depth(b)) + 1 > bound:
                            break
                        t = App(sym, (a, b))
                        if t not in pool:
                            new.add(t)
            else:
                new |= _apply_wide(sym, grouped, bound, pool)
            if len(pool) + len(new) > cfg.max_messages:
                raise LimitExceeded(
                    f"attacker message enumeration exceeded "
                    f"{cfg.max_messages} candidates")
        pool |= new
        frontier = new
    msgs = sorted(pool, key=lambda t: (depth(t), _knowledge._term_order_key(t)))
    return msgs, fresh


def _apply_wide(sym, grouped, bound, pool):
    out = set()

    def build(args):
        if len(args) == sym.arity:
            t = App(sym, tuple(args))
            if t not in pool:
                out.add(t)
            return
        for a in grouped:
            if depth(a) + 1 > bound:
                break
            build(args + [a])

    build([])
    return out


# --- flat spine view ------------------------------------------------------------


def _flat(p):
    """Spine binders and parallel components of a canonical process."""
    binders, comps = [], []

    def go(q):
        if isinstance(q, Nil):
            return
        if isinstance(q, Par):
            for r in q.parts:
                go(r)
        elif isinstance(q, Restrict):
            binders.append(q.name)
            go(q.body)
        else:
            comps.append(q)

    go(p)
    return binders, comps


def _branches(comp):
    """The guarded alternatives of a component, as (action, continuation)."""
    if isinstance(comp, Prefix):
        return ((comp.action, comp.cont),)
    if isinstance(comp, Sum):
        out = []
        for b in comp.branches:
            if isinstance(b, Prefix):
                out.append((b.action, b.cont))
        return tuple(out)
    return ()


def _rebuild(binders, comps, th, defs, fn_memo=None):
    body = NIL if not comps else (
        comps[0] if len(comps) == 1 else Par(tuple(comps)))
    for nm in reversed(binders):
        body = Restrict(nm, body)
    return canonical_form(body, th, defs, _fn_memo=fn_memo)


def _is_value_term(t, th):
    tn = normalize(t, th)
    return is_ground(tn) and is_destructor_free(tn), tn


# --- reduction and labelled transitions ----------------------------------------


class Explorer:
    """Shared caches for stepping one system: canonical forms, successor
    sets, knowledge extraction and attacker enumerations."""

    def __init__(self, cfg: ExplorationConfig, th: RewriteTheory,
                 defs: Optional[dict] = None):
        self.cfg = cfg
        self.th = th
        self.defs = defs or {}
        self._succ = {}
        self._know = {}
        self._gt = {}
        self._msgs = {}
        self._canon = {}
        self._fn_memo = {}

    def canonical(self, p):
        got = self._canon.get(p)
        if got is None:
            got = canonical_form(p, self.th, self.defs,
                                 _fn_memo=self._fn_memo)
            self._canon[p] = got
            self._canon[got] = got
        return got

    def knowledge(self, p):
        got = self._know.get(p)
        if got is None:
            got = extract_knowledge(p, self.th, self.defs)
            self._know[p] = got
        return got

    def gt(self, p):
        got = self._gt.get(p)
        if got is None:
            got = ground_terms(p, self.th, self.defs)
            self._gt[p] = got
        return got

    def messages(self, seeds):
        key = frozenset(seeds)
        got = self._msgs.get(key)
        if got is None:
            got = enumerate_messages(key, self.cfg, self.th)
            self._msgs[key] = got
        return got

    def successors(self, p):
        """One-step reducts of a canonical process, canonicalized."""
        got = self._succ.get(p)
        if got is None:
            got = self._compute_successors(p)
            self._succ[p] = got
        return got

    def _compute_successors(self, p):
        th, defs = self.th, self.defs
        binders, comps = _flat(p)
        out = set()

        def rebuild(extra_binders, new_comps):
            q = _rebuild(binders + list(extra_binders), new_comps, th, defs,
                         self._fn_memo)
            self._canon[q] = q
            out.add(q)

        inputs = []
        outputs = []
        attacker_outs = []
        for i, comp in enumerate(comps):
            if isinstance(comp, Let):
                ok, tn = _is_value_term(comp.term, th)
                if ok:
                    fired = substitute_process(comp.body, comp.var, tn)
                    rebuild((), comps[:i] + [fired] + comps[i + 1:])
                continue
            for act, cont in _branches(comp):
                if isinstance(act, Test):
                    lok, ln = _is_value_term(act.left, th)
                    rok, rn = _is_value_term(act.right, th)
                    if lok and rok and ln == rn:
                        rebuild((), comps[:i] + [cont] + comps[i + 1:])
                elif isinstance(act, Input):
                    inputs.append((i, act, cont))
                elif isinstance(act, Output):
                    outputs.append((i, act, cont))
                else:
                    attacker_outs.append((i, act, cont))

        for oi, oact, ocont in outputs:
            ok, tn = _is_value_term(oact.term, th)
            if not ok:
                continue
            for ii, iact, icont in inputs:
                if ii == oi or iact.chan != oact.chan:
                    continue
                received = substitute_process(icont, iact.var, tn)
                new_comps = list(comps)
                new_comps[oi] = ocont
                new_comps[ii] = received
                rebuild((), new_comps)

        for ai, aact, acont in attacker_outs:
            peers = [x for x in inputs if x[0] != ai and x[1].chan == aact.chan]
            if not peers:
                continue
            msgs, fresh = self.messages(self.gt(acont))
            for msg in msgs:
                used = [f for f in fresh if f in term_names(msg)]
                for ii, iact, icont in peers:
                    received = substitute_process(icont, iact.var, msg)
                    new_comps = list(comps)
                    new_comps[ai] = acont
                    new_comps[ii] = received
                    rebuild(used, new_comps)

        return frozenset(out)

    # -- labelled transitions --

    def transitions(self, p, pattern):
        p = self.canonical(p)
        if pattern.kind == "tau":
            return {(Tau(), q) for q in self.successors(p)}
        binders, comps = _flat(p)
        bset = set(binders)
        out = set()
        if pattern.kind == "out":
            for i, comp in enumerate(comps):
                for act, cont in _branches(comp):
                    if isinstance(act, Output) and act.chan == pattern.chan:
                        if act.chan in bset:
                            continue
                        ok, tn = _is_value_term(act.term, self.th)
                        if not ok:
                            continue
                        if pattern.term is not None and not eq_mod_e(
                                tn, pattern.term, self.th):
                            continue
                        extruded = term_names(tn) & bset
                        rest = [b for b in binders if b not in extruded]
                        target = _rebuild(
                            rest, comps[:i] + [cont] + comps[i + 1:],
                            self.th, self.defs, self._fn_memo)
                        out.add((OutLabel(act.chan, tn, extruded), target))
                    elif isinstance(act, AttackerOutput) \
                            and act.chan == pattern.chan:
                        if act.chan in bset:
                            continue
                        msgs, fresh = self.messages(self.gt(cont))
                        for msg in msgs:
                            if pattern.term is not None and not eq_mod_e(
                                    msg, pattern.term, self.th):
                                continue
                            extruded = (term_names(msg) & bset) | {
                                f for f in fresh if f in term_names(msg)}
                            rest = [b for b in binders if b not in extruded]
                            target = _rebuild(
                                rest, comps[:i] + [cont] + comps[i + 1:],
                                self.th, self.defs, self._fn_memo)
                            out.add((OutLabel(act.chan, msg, extruded), target))
            return out
        # inputs: only concrete instantiation produces targets
        if pattern.term is None:
            raise NonValueLabelTerm(
                "input transitions need a concrete received term")
        tn = normalize(pattern.term, self.th)
        if not (is_ground(tn) and is_destructor_free(tn)):
            raise NonValueLabelTerm(
                f"received term {term_str(pattern.term)} is not a value")
        for i, comp in enumerate(comps):
            for act, cont in _branches(comp):
                if isinstance(act, Input) and act.chan == pattern.chan:
                    if act.chan in bset:
                        continue
                    received = substitute_process(cont, act.var, tn)
                    target = _rebuild(
                        binders, comps[:i] + [received] + comps[i + 1:],
                        self.th, self.defs, self._fn_memo)
                    out.add((InLabel(act.chan, tn), target))
        return out

    def has_barb(self, p, chan, polarity):
        """Is some prefix on the (unrestricted) channel immediately enabled?"""
        binders, comps = _flat(self.canonical(p))
        if chan in set(binders):
            return False
        for comp in comps:
            for act, _cont in _branches(comp):
                if polarity == "in":
                    if isinstance(act, Input) and act.chan == chan:
                        return True
                elif isinstance(act, AttackerOutput) and act.chan == chan:
                    return True
                elif isinstance(act, Output) and act.chan == chan:
                    ok, _ = _is_value_term(act.term, self.th)
                    if ok:
                        return True
        return False

    def iter_bfs(self, p):
        """Stream (state, steps_from_root) in breadth-first order; the
        final yield is (None, complete_flag)."""
        cfg = self.cfg
        root = self.canonical(p)
        states = [root]
        index = {root: 0}
        depth_of = [0]
        complete = True
        i = 0
        yield root, 0
        while i < len(states):
            state = states[i]
            if depth_of[i] >= cfg.max_depth:
                complete = False
                i += 1
                continue
            try:
                nexts = self.successors(state)
            except LimitExceeded:
                complete = False
                i += 1
                continue
            for q in sorted(nexts, key=lambda s: _key(s, {}, {})):
                if q in index:
                    continue
                if len(states) >= cfg.max_states:
                    complete = False
                    continue
                index[q] = len(states)
                states.append(q)
                depth_of.append(depth_of[i] + 1)
                yield q, depth_of[-1]
            i += 1
        yield None, complete

    def graph(self, p):
        """Breadth-first tau-reachability over canonical forms."""
        cfg = self.cfg
        root = self.canonical(p)
        states = [root]
        index = {root: 0}
        succ = []
        parents = [-1]
        depth_of = [0]
        complete = True
        i = 0
        while i < len(states):
            state = states[i]
            if depth_of[i] >= cfg.max_depth:
                complete = False
                succ.append(())
                i += 1
                continue
            try:
                nexts = self.successors(state)
            except LimitExceeded:
                complete = False
                succ.append(())
                i += 1
                continue
            row = []
            for q in sorted(nexts, key=lambda s: _key(s, {}, {})):
                j = index.get(q)
                if j is None:
                    if len(states) >= cfg.max_states:
                        complete = False
                        continue
                    j = len(states)
                    index[q] = j
                    states.append(q)
                    parents.append(i)
                    depth_of.append(depth_of[i] + 1)
                row.append(j)
            succ.append(tuple(row))
            i += 1
        return StateGraph(states, index, tuple(succ), parents, complete)


class StateGraph:
    """Tau-reachable canonical states with parent links for witness paths."""

    __slots__ = ("states", "index", "succ", "parents", "complete")

    def __init__(self, states, index, succ, parents, complete):
        self.states = states
        self.index = index
        self.succ = succ
        self.parents = parents
        self.complete = complete

    def __len__(self):
        return len(self.states)

    def path_to(self, i):
        out = []
        while i != -1:
            out.append(i)
            i = self.parents[i]
        return list(reversed(out))


def reductions(p: Process, cfg: ExplorationConfig, th: RewriteTheory,
               defs: Optional[dict] = None) -> frozenset:
    """All one-step reducts of p, as canonical forms."""
    ex = Explorer(cfg, th, defs)
    return ex.successors(ex.canonical(p))


def transitions(p: Process, pattern: LabelPattern, cfg: ExplorationConfig,
                th: RewriteTheory, defs: Optional[dict] = None):
    """Matching one-step labelled transitions from p."""
    return Explorer(cfg, th, defs).transitions(p, pattern)


def reachable(p: Process, cfg: ExplorationConfig, th: RewriteTheory,
              defs: Optional[dict] = None) -> StateGraph:
    """The graph of canonical forms reachable by internal steps."""
    return Explorer(cfg, th, defs).graph(p)


# --- surface-syntax printing ----------------------------------------------------


def process_str(p: Process) -> str:
    """Parseable surface syntax for a process."""
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Par):
        return " | ".join(_pstr_atom(q) for q in p.parts)
    if isinstance(p, Restrict):
        run = []
        body = p
        while isinstance(body, Restrict):
            run.append(body.name)
            body = body.body
        return f"new {', '.join(run)} in ({process_str(body)})"
    if isinstance(p, Sum):
        return "select { " + " ; ".join(process_str(b) for b in p.branches) + " }"
    if isinstance(p, Prefix):
        a = p.action
        if isinstance(a, Input):
            head = f"{a.chan}?({a.var})"
        elif isinstance(a, Output):
            head = f"{a.chan}!({term_str(a.term)})"
        elif isinstance(a, AttackerOutput):
            head = f"{a.chan}!(*)"
        else:
            head = f"[{term_str(a.left)} = {term_str(a.right)}]"
        if isinstance(p.cont, Nil):
            return head
        return f"{head}.{_pstr_atom(p.cont)}"
    if isinstance(p, Let):
        return f"let {p.var} = {term_str(p.term)} in ({process_str(p.body)})"
    if isinstance(p, Call):
        if not p.args:
            return p.name
        return p.name + "(" + ", ".join(term_str(a) for a in p.args) + ")"
    raise TypeError(p)


def _pstr_atom(p):
    s = process_str(p)
    if isinstance(p, (Par, Let, Restrict)):
        return "(" + s + ")"
    return s
