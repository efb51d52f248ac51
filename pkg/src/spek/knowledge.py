"""Deciding what a set of messages lets an agent derive.

The infinite closure of a term set under constructor application and
rule-enabled destruction is represented by a finite saturated basis: every
derivable value is a constructor combination of basis elements.  Saturation
also records provenance so that a positive answer can be certified by a
sequent-calculus proof tree and checked independently.
"""

from __future__ import annotations

from typing import Iterable

from .errors import NonValueGoal, NotDerivable
from .terms import (
    App,
    Name,
    RewriteTheory,
    Term,
    Var,
    is_destructor_free,
    is_ground,
    match,
    normalize,
    sub,
    substitute_map,
    term_str,
)


class KnowledgeFormula:
    __slots__ = ()


class Top(KnowledgeFormula):
    __slots__ = ("_hash",)

    def __init__(self):
        self._hash = hash("ktop")

    def __eq__(self, other):
        return type(other) is Top

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "true"


class TermAtom(KnowledgeFormula):
    __slots__ = ("term", "_hash")

    def __init__(self, term: Term):
        self.term = term
        self._hash = hash(("katom", term))

    def __eq__(self, other):
        return self is other or (type(other) is TermAtom and self.term == other.term)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return term_str(self.term)


class Conj(KnowledgeFormula):
    __slots__ = ("left", "right", "_hash")

    def __init__(self, left: KnowledgeFormula, right: KnowledgeFormula):
        self.left = left
        self.right = right
        self._hash = hash(("kconj", left, right))

    def __eq__(self, other):
        return self is other or (
            type(other) is Conj
            and self.left == other.left
            and self.right == other.right
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"({self.left!r} and {self.right!r})"


def formula_terms(phi: KnowledgeFormula) -> frozenset:
    """The finite set of term leaves a knowledge formula denotes."""
    if isinstance(phi, Top):
        return frozenset()
    if isinstance(phi, TermAtom):
        return frozenset((phi.term,))
    return formula_terms(phi.left) | formula_terms(phi.right)


class SaturationStep:
    """One destruction step: rule applied under sigma produced term."""

    __slots__ = ("term", "rule", "sigma")

    def __init__(self, term, rule, sigma):
        self.term = term
        self.rule = rule
        self.sigma = sigma

    def redex_args(self):
        return tuple(substitute_map(p, self.sigma) for p in self.rule.lhs.args)

    def __repr__(self):
        return f"{self.rule!r} => {term_str(self.term)}"


class KnowledgeBasis:
    """Saturated finite basis for the derivability closure of the seeds."""

    __slots__ = ("seeds", "basis", "theory", "steps")

    def __init__(self, seeds, basis, theory, steps):
        self.seeds = seeds
        self.basis = basis
        self.theory = theory
        self.steps = steps

    def __repr__(self):
        return "KnowledgeBasis({%s})" % ", ".join(
            sorted(term_str(t) for t in self.basis)
        )


def _constructible(t: Term, basis: frozenset, memo: dict) -> bool:
    # t is a constructor combination of basis elements
    hit = memo.get(t)
    if hit is not None:
        return hit
    if t in basis:
        memo[t] = True
        return True
    if isinstance(t, App) and not t.sym.is_destructor:
        result = all(_constructible(a, basis, memo) for a in t.args)
    else:
        result = False
    memo[t] = result
    return result


def _match_pattern(p: Term, basis_list, basis_set, sigma, memo):
    """All ways the attacker can supply an argument shaped like p.

    Either an existing basis element matches p syntactically, or p has a
    constructor head and each piece is supplied recursively.  Bound
    variables must name something the attacker can already build.
    """
    if isinstance(p, Var):
        bound = sigma.get(p.id)
        if bound is not None:
            if _constructible(bound, basis_set, memo):
                yield sigma
            return
        for b in basis_list:
            s2 = dict(sigma)
            s2[p.id] = b
            yield s2
        return
    if isinstance(p, Name):
        if p in basis_set:
            yield sigma
        return
    for b in basis_list:
        s2 = match(p, b, dict(sigma))
        if s2 is not None:
            yield s2
    if not p.sym.is_destructor:
        yield from _match_args(p.args, basis_list, basis_set, sigma, memo)


def _match_args(patterns, basis_list, basis_set, sigma, memo):
    # structured patterns first so repeated variables get pinned by matching
    order = sorted(range(len(patterns)), key=lambda i: isinstance(patterns[i], Var))
    def go(i, s):
        if i == len(order):
            yield s
            return
        for s2 in _match_pattern(patterns[order[i]], basis_list, basis_set, s, memo):
            yield from go(i + 1, s2)
    yield from go(0, sigma)


def approximate(S: Iterable[Term], th: RewriteTheory) -> KnowledgeBasis:
    """Saturate the value pieces of S under every rule of the theory.

    New terms are the results of destruction steps whose arguments the
    attacker can assemble from the current basis; results that are already
    plain constructor combinations are not recorded.  Each addition is a
    subterm of an existing basis element, so saturation terminates.
    """
    seed_terms = frozenset(S)
    cached = th._sat_cache.get(seed_terms)
    if cached is not None:
        return cached

    seeds = frozenset().union(
        *(sub(normalize(t, th)) for t in seed_terms)
    ) if seed_terms else frozenset()
    basis = set(seeds)
    steps = []
    constants = tuple(
        App(s, ()) for s in th.symbols.values()
        if s.arity == 0 and not s.is_destructor
    )
    changed = True
    while changed:
        changed = False
        # constants cost nothing to build, so bare variables may use them
        basis_list = sorted(basis, key=_term_order_key) + [
            c for c in constants if c not in basis
        ]
        basis_set = frozenset(basis)
        memo = {}
        for rule in th.rules:
            seen_sigma = set()
            for sigma in _match_args(
                rule.lhs.args, basis_list, basis_set, {}, memo
            ):
                key = tuple(sorted(sigma.items()))
                if key in seen_sigma:
                    continue
                seen_sigma.add(key)
                out = normalize(substitute_map(rule.rhs, sigma), th)
                if not _constructible(out, basis_set, memo):
                    basis.add(out)
                    steps.append(SaturationStep(out, rule, dict(sigma)))
                    changed = True
        # recompute matches against the grown basis on the next sweep

    kb = KnowledgeBasis(seeds, frozenset(basis), th, tuple(steps))
    th._sat_cache[seed_terms] = kb
    return kb


def _term_order_key(t: Term):
    if isinstance(t, App):
        return ("app", t.sym.name, tuple(_term_order_key(a) for a in t.args))
    if isinstance(t, Name):
        return ("name", t.id, ())
    return ("var", t.id, ())


def _goal_value(t: Term, th: RewriteTheory) -> Term:
    g = normalize(t, th)
    if not is_ground(g):
        raise NonValueGoal(f"goal {term_str(t)} contains variables")
    if not is_destructor_free(g):
        raise NonValueGoal(
            f"goal {term_str(t)} is stuck: normal form {term_str(g)} "
            "still contains a destructor"
        )
    return g


def derivable(S: Iterable[Term], t: Term, th: RewriteTheory) -> bool:
    """Can the goal value be derived from S under the theory?"""
    g = _goal_value(t, th)
    kb = approximate(S, th)
    return _constructible(g, kb.basis, {})


def derives_formula(S: Iterable[Term], phi: KnowledgeFormula, th: RewriteTheory) -> bool:
    if isinstance(phi, Top):
        return True
    if isinstance(phi, TermAtom):
        return derivable(S, phi.term, th)
    return derives_formula(S, phi.left, th) and derives_formula(S, phi.right, th)


# --- proof certificates ------------------------------------------------------

ID = "Id"
CONJ_L = "ConjL"
CONJ_R = "ConjR"
FUN_RIGHT = "FunRight"
ATT_LEFT = "AttLeft"
DESTR_LEFT = "DestrLeft"
CUT = "Cut"


class ProofTree:
    """A node of a sequent proof; gamma is a set of knowledge formulas."""

    __slots__ = ("rule", "gamma", "goal", "premises")

    def __init__(self, rule, gamma, goal, premises=()):
        self.rule = rule
        self.gamma = frozenset(gamma)
        self.goal = goal
        self.premises = tuple(premises)

    def sequent_str(self):
        left = ", ".join(sorted(repr(f) for f in self.gamma))
        return f"{left} |- {self.goal!r}"

    def pretty(self, indent=0):
        lines = ["  " * indent + f"[{self.rule}] {self.sequent_str()}"]
        for p in self.premises:
            lines.append(p.pretty(indent + 1))
        return "\n".join(lines)

    def __repr__(self):
        return f"ProofTree({self.rule}, {self.sequent_str()})"


def _gamma_terms(gamma) -> frozenset:
    return frozenset(f.term for f in gamma if isinstance(f, TermAtom))


def _composites_for(t: Term, avail: set, acc: list):
    # bottom-up build order for a constructor combination over avail
    if t in avail:
        return
    for a in t.args:
        _composites_for(a, avail, acc)
    if t not in acc:
        acc.append(t)
        avail.add(t)


def _leaves_of(t: Term, avail: frozenset, out: set):
    if t in avail:
        out.add(t)
        return
    for a in t.args:
        _leaves_of(a, avail, out)


def _prove_goal(gamma, phi) -> ProofTree:
    if isinstance(phi, Top):
        return ProofTree(CONJ_R, gamma, phi, ())
    if isinstance(phi, Conj):
        return ProofTree(
            CONJ_R,
            gamma,
            phi,
            (_prove_goal(gamma, phi.left), _prove_goal(gamma, phi.right)),
        )
    t = phi.term
    if phi in gamma:
        return ProofTree(ID, gamma, phi, ())
    return ProofTree(
        FUN_RIGHT,
        gamma,
        phi,
        tuple(_prove_goal(gamma, TermAtom(a)) for a in t.args),
    )


def _prove_step(gamma, step) -> ProofTree:
    """Chain building the redex on the left, firing the rule, closing by Id."""
    goal = TermAtom(step.term)
    avail = set(_gamma_terms(gamma))
    additions = []
    for arg in step.redex_args():
        stage = []
        _composites_for(arg, avail, stage)
        additions.extend((ATT_LEFT, c) for c in stage)
    redex = App(step.rule.lhs.sym, step.redex_args())
    additions.append((ATT_LEFT, redex))
    additions.append((DESTR_LEFT, step.term))

    def chain(g, i):
        if i == len(additions):
            return ProofTree(ID, g, goal, ())
        rule_name, t = additions[i]
        prem = chain(g | {TermAtom(t)}, i + 1)
        return ProofTree(rule_name, g, goal, (prem,))

    return chain(frozenset(gamma), 0)


def prove(S: Iterable[Term], phi: KnowledgeFormula, th: RewriteTheory) -> ProofTree:
    """Build a checkable proof that S derives phi, or raise NotDerivable.

    The saturation steps that feed the goal become cut formulas, each
    justified by an AttLeft/DestrLeft chain; the goal itself is decomposed
    by conjunction and constructor introduction down to Id leaves.
    """
    goal_terms = [_goal_value(t, th) for t in formula_terms(phi)]
    kb = approximate(S, th)
    memo = {}
    for g in goal_terms:
        if not _constructible(g, kb.basis, memo):
            raise NotDerivable(f"cannot derive {term_str(g)}")
    phi = _normalize_formula(phi, th)

    step_index = {s.term: i for i, s in enumerate(kb.steps)}
    needed = set()

    def want(t, limit):
        avail = frozenset(kb.seeds) | {
            s.term for s in kb.steps[:limit]
        }
        leaves = set()
        _leaves_of(t, avail, leaves)
        for leaf in leaves:
            j = step_index.get(leaf)
            if j is not None and j < limit and j not in needed:
                needed.add(j)
                for arg in kb.steps[j].redex_args():
                    want(arg, j)

    for g in goal_terms:
        want(g, len(kb.steps))
    order = sorted(needed)

    def build(i, gamma):
        if i == len(order):
            return _prove_goal(gamma, phi)
        step = kb.steps[order[i]]
        left = _prove_step(gamma, step)
        right = build(i + 1, gamma | {TermAtom(step.term)})
        return ProofTree(CUT, gamma, phi, (left, right))

    gamma0 = frozenset(TermAtom(t) for t in kb.seeds)
    return build(0, gamma0)


def _normalize_formula(phi, th):
    if isinstance(phi, Top):
        return phi
    if isinstance(phi, TermAtom):
        return TermAtom(normalize(phi.term, th))
    return Conj(_normalize_formula(phi.left, th), _normalize_formula(phi.right, th))


def check_proof(p: ProofTree, th: RewriteTheory) -> bool:
    """Validate every node as a correct rule instance; never raises."""
    try:
        _check_node(p, th)
        return True
    except _BadProof:
        return False
    except Exception:
        return False


class _BadProof(Exception):
    pass


def _require(cond):
    if not cond:
        raise _BadProof()


def _check_node(node: ProofTree, th: RewriteTheory):
    for prem in node.premises:
        _check_node(prem, th)
    gamma, goal = node.gamma, node.goal
    rule = node.rule

    if rule == ID:
        _require(not node.premises and goal in gamma)
    elif rule == CONJ_R:
        if isinstance(goal, Top):
            _require(not node.premises)
        else:
            _require(isinstance(goal, Conj) and len(node.premises) == 2)
            a, b = node.premises
            _require(a.gamma == gamma and b.gamma == gamma)
            _require(a.goal == goal.left and b.goal == goal.right)
    elif rule == CONJ_L:
        _require(len(node.premises) == 1)
        prem = node.premises[0]
        _require(prem.goal == goal)
        ok = False
        for f in gamma:
            if isinstance(f, Conj):
                parts = {f.left, f.right}
                if prem.gamma in (gamma | parts, (gamma - {f}) | parts):
                    ok = True
                    break
        _require(ok)
    elif rule == FUN_RIGHT:
        _require(isinstance(goal, TermAtom))
        t = goal.term
        _require(isinstance(t, App) and not t.sym.is_destructor)
        _require(len(node.premises) == len(t.args))
        for prem, arg in zip(node.premises, t.args):
            _require(prem.gamma == gamma)
            _require(prem.goal == TermAtom(arg))
    elif rule == ATT_LEFT:
        _require(len(node.premises) == 1)
        prem = node.premises[0]
        _require(prem.goal == goal)
        new = prem.gamma - gamma
        gterms = _gamma_terms(gamma)
        if new:
            _require(len(new) == 1)
            (f,) = tuple(new)
            _require(isinstance(f, TermAtom) and isinstance(f.term, App))
            _require(all(a in gterms for a in f.term.args))
            _require(prem.gamma == gamma | {f})
        else:
            _require(prem.gamma == gamma)
            _require(
                any(
                    isinstance(f, TermAtom)
                    and isinstance(f.term, App)
                    and all(a in gterms for a in f.term.args)
                    for f in gamma
                )
            )
    elif rule == DESTR_LEFT:
        _require(len(node.premises) == 1)
        prem = node.premises[0]
        _require(prem.goal == goal)
        ok = False
        for f in gamma:
            if not (isinstance(f, TermAtom) and isinstance(f.term, App)):
                continue
            for rw in th.rules_by_head.get(f.term.sym.name, ()):
                s = match(rw.lhs, f.term)
                if s is None:
                    continue
                out = TermAtom(substitute_map(rw.rhs, s))
                if prem.gamma in (gamma | {out}, (gamma - {f}) | {out}, gamma):
                    if prem.gamma == gamma and out not in gamma:
                        continue
                    ok = True
                    break
            if ok:
                break
        _require(ok)
    elif rule == CUT:
        _require(len(node.premises) == 2)
        left, right = node.premises
        _require(left.gamma == gamma)
        _require(right.goal == goal)
        a = left.goal
        _require(right.gamma in (gamma | {a}, gamma))
        if right.gamma == gamma:
            _require(a in gamma)
    else:
        raise _BadProof()
