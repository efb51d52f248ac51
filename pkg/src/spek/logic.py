"""Formulas and the model-checking algorithm.

Verdicts are three-valued: satisfied, not satisfied, or inconclusive when a
truncated exploration could still change the answer.  Checking works on
canonical forms throughout, so structurally congruent processes receive
identical verdicts.
"""

from __future__ import annotations

from typing import Optional

from .calculus import (
    NIL,
    Explorer,
    ExplorationConfig,
    LabelPattern,
    Nil,
    Par,
    Process,
    Restrict,
    free_names,
    process_str,
    _flat as _flat_view,
)
from .errors import CheckError, LimitExceeded, UnresolvedInputInstance
from .knowledge import KnowledgeFormula, derives_formula
from .terms import Name, Term, term_str
from .terms import names as term_names

SAT = "satisfied"
UNSAT = "not_satisfied"
INCONCLUSIVE = "inconclusive"


class Formula:
    __slots__ = ()

    def __hash__(self):
        return self._hash

    def __eq__(self, o):
        return self is o or (type(o) is type(self) and self._fields() == o._fields())

    def _fields(self):
        return tuple(getattr(self, s) for s in self.__slots__ if s != "_hash")


class FTrue(Formula):
    __slots__ = ("_hash",)

    def __init__(self):
        self._hash = hash("f.true")


class FFalse(Formula):
    __slots__ = ("_hash",)

    def __init__(self):
        self._hash = hash("f.false")


class FNot(Formula):
    __slots__ = ("body", "_hash")

    def __init__(self, body):
        self.body = body
        self._hash = hash(("f.not", body))


class FAnd(Formula):
    __slots__ = ("left", "right", "_hash")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self._hash = hash(("f.and", left, right))


class FOr(Formula):
    __slots__ = ("left", "right", "_hash")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self._hash = hash(("f.or", left, right))


class FImplies(Formula):
    __slots__ = ("left", "right", "_hash")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self._hash = hash(("f.imp", left, right))


class FVoid(Formula):
    __slots__ = ("_hash",)

    def __init__(self):
        self._hash = hash("f.void")


class FCompose(Formula):
    __slots__ = ("left", "right", "_hash")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self._hash = hash(("f.par", left, right))


class FHidden(Formula):
    __slots__ = ("var", "body", "_hash")

    def __init__(self, var, body):
        self.var = var
        self.body = body
        self._hash = hash(("f.hidden", var, body))


class FSecret(Formula):
    __slots__ = ("var", "body", "_hash")

    def __init__(self, var, body):
        self.var = var
        self.body = body
        self._hash = hash(("f.secret", var, body))


class FAct(Formula):
    __slots__ = ("pattern", "body", "_hash")

    def __init__(self, pattern, body):
        self.pattern = pattern
        self.body = body
        self._hash = hash(("f.act", pattern, body))


class FAlways(Formula):
    __slots__ = ("body", "_hash")

    def __init__(self, body):
        self.body = body
        self._hash = hash(("f.always", body))


class FEventually(Formula):
    __slots__ = ("body", "_hash")

    def __init__(self, body):
        self.body = body
        self._hash = hash(("f.event", body))


class FFreeName(Formula):
    __slots__ = ("name", "_hash")

    def __init__(self, name):
        self.name = name
        self._hash = hash(("f.fn", name))


class FKnows(Formula):
    __slots__ = ("phi", "_hash")

    def __init__(self, phi: KnowledgeFormula):
        self.phi = phi
        self._hash = hash(("f.knows", phi))


class FCount(Formula):
    __slots__ = ("n", "_hash")

    def __init__(self, n):
        self.n = n
        self._hash = hash(("f.count", n))


class FPropRef(Formula):
    """A named property reference, resolved before checking."""

    __slots__ = ("name", "_hash")

    def __init__(self, name):
        self.name = name
        self._hash = hash(("f.ref", name))


class CheckResult:
    __slots__ = ("verdict", "witness", "complete")

    def __init__(self, verdict, witness=None, complete=True):
        self.verdict = verdict
        self.witness = witness
        self.complete = complete

    def __repr__(self):
        return f"CheckResult({self.verdict}, complete={self.complete})"


_COUNT_CACHE = {}


def expand_count(n: int) -> Formula:
    """Exactly-n-components predicate over parallel structure."""
    if n < 1:
        raise ValueError("counting predicates start at 1; use the void formula")
    got = _COUNT_CACHE.get(n)
    if got is not None:
        return got
    nonvoid = FNot(FVoid())
    overcrowded = nonvoid
    for _ in range(n):
        overcrowded = FCompose(overcrowded, nonvoid)
    parts = [FNot(FVoid())]
    for j in range(1, n):
        parts.append(FNot(expand_count(j)))
    parts.append(FNot(overcrowded))
    out = parts[0]
    for p in parts[1:]:
        out = FAnd(out, p)
    _COUNT_CACHE[n] = out
    return out


# --- substitution of a quantified atom ----------------------------------------


def _replace_in_term(t: Term, atom: str, repl: Term) -> Term:
    if isinstance(t, Name):
        return repl if t.id == atom else t
    if not hasattr(t, "args"):
        return t
    from .terms import App
    new = tuple(_replace_in_term(a, atom, repl) for a in t.args)
    return t if new == t.args else App(t.sym, new)


def _replace_in_kformula(phi, atom, repl):
    from .knowledge import Conj, TermAtom, Top
    if isinstance(phi, Top):
        return phi
    if isinstance(phi, TermAtom):
        return TermAtom(_replace_in_term(phi.term, atom, repl))
    return Conj(_replace_in_kformula(phi.left, atom, repl),
                _replace_in_kformula(phi.right, atom, repl))


def formula_substitute(a: Formula, atom: str, repl: Term) -> Formula:
    """Replace the quantified atom by a term inside the formula body."""
    if isinstance(a, (FTrue, FFalse, FVoid, FCount, FPropRef)):
        return a
    if isinstance(a, FNot):
        return FNot(formula_substitute(a.body, atom, repl))
    if isinstance(a, (FAnd, FOr, FImplies, FCompose)):
        return type(a)(formula_substitute(a.left, atom, repl),
                       formula_substitute(a.right, atom, repl))
    if isinstance(a, (FHidden, FSecret)):
        if a.var == atom:
            return a
        return type(a)(a.var, formula_substitute(a.body, atom, repl))
    if isinstance(a, FAct):
        pat = a.pattern
        chan = pat.chan
        if chan == atom:
            if not isinstance(repl, Name):
                raise CheckError(
                    f"cannot use compound term {term_str(repl)} as a channel")
            chan = repl.id
        term = pat.term
        if term is not None:
            term = _replace_in_term(term, atom, repl)
        return FAct(LabelPattern(pat.kind, chan, term),
                    formula_substitute(a.body, atom, repl))
    if isinstance(a, (FAlways, FEventually)):
        return type(a)(formula_substitute(a.body, atom, repl))
    if isinstance(a, FFreeName):
        if a.name == atom:
            if not isinstance(repl, Name):
                raise CheckError(
                    f"cannot use compound term {term_str(repl)} "
                    "as a free-name predicate")
            return FFreeName(repl.id)
        return a
    if isinstance(a, FKnows):
        return FKnows(_replace_in_kformula(a.phi, atom, repl))
    raise TypeError(a)


def formula_atoms(a: Formula) -> frozenset:
    """Every name mentioned anywhere in the formula."""
    if isinstance(a, (FTrue, FFalse, FVoid, FCount)):
        return frozenset()
    if isinstance(a, FPropRef):
        return frozenset()
    if isinstance(a, FNot):
        return formula_atoms(a.body)
    if isinstance(a, (FAnd, FOr, FImplies, FCompose)):
        return formula_atoms(a.left) | formula_atoms(a.right)
    if isinstance(a, (FHidden, FSecret)):
        return formula_atoms(a.body) | {a.var}
    if isinstance(a, FAct):
        out = formula_atoms(a.body)
        if a.pattern.chan:
            out |= {a.pattern.chan}
        if a.pattern.term is not None:
            out |= term_names(a.pattern.term)
        return out
    if isinstance(a, (FAlways, FEventually)):
        return formula_atoms(a.body)
    if isinstance(a, FFreeName):
        return frozenset((a.name,))
    if isinstance(a, FKnows):
        from .knowledge import formula_terms
        out = frozenset()
        for t in formula_terms(a.phi):
            out |= term_names(t)
        return out
    raise TypeError(a)


# --- three-valued helpers -------------------------------------------------------


def _vnot(v):
    if v == SAT:
        return UNSAT
    if v == UNSAT:
        return SAT
    return INCONCLUSIVE


# --- checking -------------------------------------------------------------------


class CheckSession:
    """One checking run: shared exploration caches and a verdict memo."""

    def __init__(self, cfg: ExplorationConfig, th, defs=None,
                 want_proofs=False):
        self.ex = Explorer(cfg, th, defs)
        self.cfg = cfg
        self.th = th
        self.defs = defs or {}
        self.memo = {}
        self.truncated = False
        self.want_proofs = want_proofs
        self.proofs = []
        self._hidden_counter = 0

    # canonical state in, (verdict, witness) out
    def check(self, p: Process, a: Formula):
        key = (p, a)
        got = self.memo.get(key)
        if got is not None:
            return got
        self.memo[key] = (INCONCLUSIVE, None)  # cycle guard for odd inputs
        got = self._eval(p, a)
        self.memo[key] = got
        return got

    def _eval(self, p, a):
        if isinstance(a, FTrue):
            return SAT, None
        if isinstance(a, FFalse):
            return UNSAT, None
        if isinstance(a, FNot):
            v, _w = self.check(p, a.body)
            return _vnot(v), None
        if isinstance(a, FAnd):
            lv, lw = self.check(p, a.left)
            if lv == UNSAT:
                return UNSAT, None
            rv, rw = self.check(p, a.right)
            if rv == UNSAT:
                return UNSAT, None
            if INCONCLUSIVE in (lv, rv):
                return INCONCLUSIVE, None
            return SAT, _join(lw, rw)
        if isinstance(a, FOr):
            lv, lw = self.check(p, a.left)
            if lv == SAT:
                return SAT, lw
            rv, rw = self.check(p, a.right)
            if rv == SAT:
                return SAT, rw
            if INCONCLUSIVE in (lv, rv):
                return INCONCLUSIVE, None
            return UNSAT, None
        if isinstance(a, FImplies):
            return self._eval(p, FOr(FNot(a.left), a.right))
        if isinstance(a, FVoid):
            return (SAT if isinstance(p, Nil) else UNSAT), None
        if isinstance(a, FCount):
            return self.check(p, expand_count(a.n))
        if isinstance(a, FCompose):
            return self._eval_compose(p, a)
        if isinstance(a, FHidden):
            return self._eval_hidden(p, a)
        if isinstance(a, FSecret):
            return self._eval_secret(p, a)
        if isinstance(a, FAct):
            return self._eval_act(p, a)
        if isinstance(a, (FAlways, FEventually)):
            return self._eval_temporal(p, a)
        if isinstance(a, FFreeName):
            present = a.name in free_names(p, self.defs)
            return (SAT if present else UNSAT), None
        if isinstance(a, FKnows):
            return self._eval_knows(p, a)
        if isinstance(a, FPropRef):
            raise CheckError(f"unresolved property reference '{a.name}'")
        raise TypeError(a)

    # -- spatial ------------------------------------------------------------
    #
    # Composition splits the parallel soup underneath the spine
    # restrictions; each group is re-wrapped with the binders it mentions
    # (a binder both groups mention is duplicated, treating the restricted
    # name as a shared fresh constant).  Full and empty splits reassemble
    # the original process exactly.

    def _wrap_group(self, binders, comps):
        if not comps:
            return NIL
        used = frozenset()
        for c in comps:
            used |= free_names(c, self.defs)
        kept = [b for b in binders if b in used]
        body = comps[0] if len(comps) == 1 else Par(tuple(comps))
        for b in reversed(kept):
            body = Restrict(b, body)
        return self.ex.canonical(body)

    def splits(self, p):
        binders, comps = _flat_view(p)
        k = len(comps)
        seen = set()
        for mask in range(1 << k):
            left = [comps[i] for i in range(k) if mask >> i & 1]
            right = [comps[i] for i in range(k) if not mask >> i & 1]
            pair = (self._wrap_group(binders, left),
                    self._wrap_group(binders, right))
            if pair not in seen:
                seen.add(pair)
                yield pair

    def _eval_compose(self, p, a):
        saw_unknown = False
        for q, r in self.splits(p):
            lv, lw = self.check(q, a.left)
            if lv == UNSAT:
                continue
            rv, rw = self.check(r, a.right)
            if lv == SAT and rv == SAT:
                w = [f"split: {process_str(q)}  /  {process_str(r)}"]
                return SAT, _join(w, _join(lw, rw))
            if UNSAT not in (lv, rv):
                saw_unknown = True
        return (INCONCLUSIVE if saw_unknown else UNSAT), None

    def _liftable_binders(self, p):
        """Restrictions that can float to the top of the canonical form."""
        out = []

        def go(q, rebuild):
            if isinstance(q, Restrict):
                out.append((q.name, rebuild(q.body)))
                go(q.body, lambda b, nm=q.name: rebuild(Restrict(nm, b)))
            elif isinstance(q, Par):
                for i, r in enumerate(q.parts):
                    def wrap(b, i=i, parts=q.parts, rebuild=rebuild):
                        kept = parts[:i] + (b,) + parts[i + 1:]
                        kept = tuple(x for x in kept if not isinstance(x, Nil))
                        if not kept:
                            return NIL
                        if len(kept) == 1:
                            return kept[0]
                        return Par(kept)
                    go(r, wrap)

        go(p, lambda b: b)
        return out

    def _eval_hidden(self, p, a):
        saw_unknown = False
        for nm, stripped in self._liftable_binders(p):
            body = formula_substitute(a.body, a.var, Name(nm))
            v, w = self.check(self.ex.canonical(stripped), body)
            if v == SAT:
                return SAT, _join([f"hidden {a.var} := {nm}"], w)
            if v == INCONCLUSIVE:
                saw_unknown = True
        # vacuous fresh name: P == (new n)P for unused n
        self._hidden_counter += 1
        fresh = f"~h{self._hidden_counter}"
        body = formula_substitute(a.body, a.var, Name(fresh))
        v, w = self.check(p, body)
        if v == SAT:
            return SAT, _join([f"hidden {a.var} := fresh {fresh}"], w)
        if v == INCONCLUSIVE:
            saw_unknown = True
        return (INCONCLUSIVE if saw_unknown else UNSAT), None

    def _eval_secret(self, p, a):
        saw_unknown = False
        for nm, stripped in self._liftable_binders(p):
            qp = self.ex.canonical(stripped)
            candidates = [t for t in self.ex.knowledge(qp)
                          if nm in term_names(t)]
            for t in sorted(candidates, key=term_str):
                body = formula_substitute(a.body, a.var, t)
                v, w = self.check(qp, body)
                if v == SAT:
                    return SAT, _join(
                        [f"secret {a.var} := {term_str(t)}"], w)
                if v == INCONCLUSIVE:
                    saw_unknown = True
        return (INCONCLUSIVE if saw_unknown else UNSAT), None

    # -- dynamic ------------------------------------------------------------

    def _eval_act(self, p, a):
        pat = a.pattern
        if pat.kind == "in" and pat.term is None:
            if not isinstance(a.body, FTrue):
                raise UnresolvedInputInstance(
                    f"bare input modality <{pat.chan}?> cannot guard a "
                    "non-trivial formula; give the received term")
            ok = self.ex.has_barb(p, pat.chan, "in")
            return (SAT if ok else UNSAT), None
        if pat.kind == "out" and pat.term is None and isinstance(a.body, FTrue):
            ok = self.ex.has_barb(p, pat.chan, "out")
            return (SAT if ok else UNSAT), None
        try:
            steps = self.ex.transitions(p, pat)
        except LimitExceeded:
            self.truncated = True
            return INCONCLUSIVE, None
        saw_unknown = False
        for label, q in sorted(steps, key=lambda s: repr(s[0])):
            v, w = self.check(q, a.body)
            if v == SAT:
                return SAT, _join([f"action {label!r}"], w)
            if v == INCONCLUSIVE:
                saw_unknown = True
        return (INCONCLUSIVE if saw_unknown else UNSAT), None

    def _eval_temporal(self, p, a):
        always = isinstance(a, FAlways)
        saw_unknown = False
        complete = True
        for state, info in self.ex.iter_bfs(p):
            if state is None:
                complete = info
                break
            v, w = self.check(state, a.body)
            if always and v == UNSAT:
                return UNSAT, [f"counterexample after {info} steps: "
                               f"{process_str(state)}"]
            if not always and v == SAT:
                return SAT, _join([f"reached in {info} steps: "
                                   f"{process_str(state)}"], w)
            if v == INCONCLUSIVE:
                saw_unknown = True
        if not complete:
            self.truncated = True
        if saw_unknown or not complete:
            return INCONCLUSIVE, None
        return (SAT if always else UNSAT), None

    def _eval_knows(self, p, a):
        seeds = self.ex.knowledge(p)
        ok = derives_formula(seeds, a.phi, self.th)
        if ok and self.want_proofs and len(self.proofs) < 8:
            from .knowledge import prove
            self.proofs.append((p, a.phi, prove(seeds, a.phi, self.th)))
        return (SAT if ok else UNSAT), None


def _join(w1, w2):
    if w1 and w2:
        return list(w1) + list(w2)
    return list(w1) if w1 else (list(w2) if w2 else None)


def check(p: Process, a: Formula, cfg: ExplorationConfig, th,
          defs: Optional[dict] = None, session: Optional[CheckSession] = None
          ) -> CheckResult:
    """Decide whether the process satisfies the formula under the bounds."""
    session = session or CheckSession(cfg, th, defs)
    root = session.ex.canonical(p)
    verdict, witness = session.check(root, a)
    return CheckResult(verdict, witness, not session.truncated)


def satisfying_splits(p: Process, a: Formula, b: Formula,
                      cfg: ExplorationConfig, th,
                      defs: Optional[dict] = None) -> set:
    """All two-group splits of the parallel components satisfying a and b."""
    session = CheckSession(cfg, th, defs)
    root = session.ex.canonical(p)
    out = set()
    for q, r in session.splits(root):
        if session.check(q, a)[0] == SAT and session.check(r, b)[0] == SAT:
            out.add((q, r))
    return out
