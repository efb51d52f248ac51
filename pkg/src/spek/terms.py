"""Term algebra over a declared signature with oriented, shrinking rewrite rules.

Every rule's right side is a proper subterm of its left side, so innermost
rewriting terminates and equality modulo the equations reduces to comparing
normal forms.  Symbols are classified from the rules: a symbol heading some
left side is a destructor, everything else is a constructor.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .errors import (
    AmbiguousSymbol,
    ArityMismatch,
    NotSubtermConvergent,
    UnknownSymbol,
)

CONSTRUCTOR = "constructor"
DESTRUCTOR = "destructor"


class FunctionSymbol:
    """A named symbol with a fixed arity and an inferred kind."""

    __slots__ = ("name", "arity", "kind", "_hash")

    def __init__(self, name: str, arity: int, kind: str = CONSTRUCTOR):
        self.name = name
        self.arity = arity
        self.kind = kind
        self._hash = hash((name, arity, kind))

    @property
    def is_destructor(self) -> bool:
        return self.kind == DESTRUCTOR

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, FunctionSymbol)
            and self._hash == other._hash
            and self.name == other.name
            and self.arity == other.arity
            and self.kind == other.kind
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.name}/{self.arity}"


class Term:
    __slots__ = ()


class Name(Term):
    __slots__ = ("id", "_hash")

    def __init__(self, id: str):
        self.id = id
        self._hash = hash(("n", id))

    def __eq__(self, other):
        return self is other or (type(other) is Name and self.id == other.id)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return self.id


class Var(Term):
    __slots__ = ("id", "_hash")

    def __init__(self, id: str):
        self.id = id
        self._hash = hash(("v", id))

    def __eq__(self, other):
        return self is other or (type(other) is Var and self.id == other.id)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "?" + self.id


class App(Term):
    __slots__ = ("sym", "args", "_hash")

    def __init__(self, sym: FunctionSymbol, args: Iterable[Term]):
        args = tuple(args)
        if len(args) != sym.arity:
            raise ArityMismatch(
                f"{sym.name} expects {sym.arity} arguments, got {len(args)}"
            )
        self.sym = sym
        self.args = args
        self._hash = hash((sym._hash, args))

    def __eq__(self, other):
        if self is other:
            return True
        return (
            type(other) is App
            and self._hash == other._hash
            and self.sym == other.sym
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return term_str(self)


def term_str(t: Term) -> str:
    """Surface-syntax rendering; names and variables print alike."""
    if isinstance(t, App):
        return t.sym.name + "(" + ", ".join(term_str(a) for a in t.args) + ")"
    return t.id


def depth(t: Term) -> int:
    """Nodes on the longest root-to-leaf path; every leaf has depth 1."""
    if isinstance(t, App):
        return 1 + max((depth(a) for a in t.args), default=0)
    return 1


def names(t: Term) -> frozenset:
    if isinstance(t, Name):
        return frozenset((t.id,))
    if isinstance(t, Var):
        return frozenset()
    out = frozenset()
    for a in t.args:
        out |= names(a)
    return out


def variables(t: Term) -> frozenset:
    if isinstance(t, Var):
        return frozenset((t.id,))
    if isinstance(t, Name):
        return frozenset()
    out = frozenset()
    for a in t.args:
        out |= variables(a)
    return out


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Name):
        return True
    return all(is_ground(a) for a in t.args)


def is_destructor_free(t: Term) -> bool:
    if isinstance(t, App):
        if t.sym.is_destructor:
            return False
        return all(is_destructor_free(a) for a in t.args)
    return True


def is_value(t: Term) -> bool:
    """Ground and destructor-free."""
    if isinstance(t, Var):
        return False
    if isinstance(t, Name):
        return True
    if t.sym.is_destructor:
        return False
    return all(is_value(a) for a in t.args)


def subterms(t: Term) -> set:
    out = {t}
    if isinstance(t, App):
        for a in t.args:
            out |= subterms(a)
    return out


def _tainted(t: Term) -> bool:
    # a variable or a destructor application occurs somewhere in t
    if isinstance(t, Var):
        return True
    if isinstance(t, Name):
        return False
    return t.sym.is_destructor or any(_tainted(a) for a in t.args)


def sub(t: Term) -> frozenset:
    """Relevant subterms: the clean value pieces syntactically present in t."""
    if isinstance(t, Name):
        return frozenset((t,))
    if isinstance(t, Var):
        return frozenset()
    if t.sym.is_destructor or any(_tainted(a) for a in t.args):
        out = frozenset()
        for a in t.args:
            out |= sub(a)
        return out
    return frozenset((t,))


def remove_name_terms(terms: Iterable[Term], n: str) -> frozenset:
    """Drop every term in which the name n occurs."""
    return frozenset(t for t in terms if n not in names(t))


def substitute(t: Term, x: str, s: Term) -> Term:
    """Replace every occurrence of the variable x in t by s."""
    if isinstance(t, Var):
        return s if t.id == x else t
    if isinstance(t, Name):
        return t
    new_args = tuple(substitute(a, x, s) for a in t.args)
    return t if new_args == t.args else App(t.sym, new_args)


def substitute_map(t: Term, mapping: dict) -> Term:
    if isinstance(t, Var):
        return mapping.get(t.id, t)
    if isinstance(t, Name):
        return t
    new_args = tuple(substitute_map(a, mapping) for a in t.args)
    return t if new_args == t.args else App(t.sym, new_args)


def rename_names(t: Term, mapping: dict) -> Term:
    if isinstance(t, Name):
        new = mapping.get(t.id)
        return Name(new) if new is not None else t
    if isinstance(t, Var):
        return t
    new_args = tuple(rename_names(a, mapping) for a in t.args)
    return t if new_args == t.args else App(t.sym, new_args)


def match(pattern: Term, t: Term, subst: Optional[dict] = None) -> Optional[dict]:
    """First-order matching; repeated pattern variables must agree."""
    subst = {} if subst is None else subst
    stack = [(pattern, t)]
    while stack:
        p, u = stack.pop()
        if isinstance(p, Var):
            bound = subst.get(p.id)
            if bound is None:
                subst[p.id] = u
            elif bound != u:
                return None
        elif isinstance(p, Name):
            if p != u:
                return None
        else:
            if not (isinstance(u, App) and u.sym == p.sym):
                return None
            stack.extend(zip(p.args, u.args))
    return subst


class RewriteRule:
    __slots__ = ("lhs", "rhs")

    def __init__(self, lhs: Term, rhs: Term):
        self.lhs = lhs
        self.rhs = rhs

    def __repr__(self):
        return f"{term_str(self.lhs)} -> {term_str(self.rhs)}"


class RewriteTheory:
    """Validated signature and rules; construct via validate_theory."""

    def __init__(self, symbols: dict, rules: tuple):
        self.symbols = symbols
        self.rules = rules
        by_head = {}
        for r in rules:
            by_head.setdefault(r.lhs.sym.name, []).append(r)
        self.rules_by_head = {k: tuple(v) for k, v in by_head.items()}
        self.max_lhs_depth = max((depth(r.lhs) for r in rules), default=0)
        self._nf_cache = {}
        self._sat_cache = {}

    def symbol(self, name: str) -> FunctionSymbol:
        try:
            return self.symbols[name]
        except KeyError:
            raise UnknownSymbol(f"undeclared function symbol '{name}'") from None

    def app(self, name: str, *args: Term) -> App:
        return App(self.symbol(name), args)

    def constructors(self):
        return [s for s in self.symbols.values() if not s.is_destructor]

    def __repr__(self):
        return f"RewriteTheory({sorted(self.symbols)}, {len(self.rules)} rules)"


def _scan_arities(t: Term, declared: dict, where: str):
    if isinstance(t, App):
        got = declared.get(t.sym.name)
        if got is None:
            raise UnknownSymbol(f"{where}: undeclared symbol '{t.sym.name}'")
        if got != t.sym.arity or got != len(t.args):
            raise ArityMismatch(
                f"{where}: {t.sym.name} declared with arity {got}"
            )
        for a in t.args:
            _scan_arities(a, declared, where)


def _rebuild(t: Term, table: dict) -> Term:
    if isinstance(t, App):
        return App(table[t.sym.name], tuple(_rebuild(a, table) for a in t.args))
    return t


def validate_theory(symbols, rules) -> RewriteTheory:
    """Classify symbols from rule heads and check the shrinking-rule shape.

    symbols: iterable of FunctionSymbol or (name, arity) pairs.
    rules: iterable of RewriteRule or (lhs, rhs) pairs built over the symbols.
    """
    declared = {}
    for s in symbols:
        if isinstance(s, FunctionSymbol):
            nm, ar = s.name, s.arity
        else:
            nm, ar = s
        if nm in declared:
            raise AmbiguousSymbol(f"symbol '{nm}' declared twice")
        declared[nm] = ar

    pairs = []
    for r in rules:
        lhs, rhs = (r.lhs, r.rhs) if isinstance(r, RewriteRule) else r
        pairs.append((lhs, rhs))

    heads = set()
    for lhs, rhs in pairs:
        if not isinstance(lhs, App):
            raise NotSubtermConvergent(
                "rule left side must be a function application"
            )
        _scan_arities(lhs, declared, "rule left side")
        _scan_arities(rhs, declared, "rule right side")
        if rhs not in subterms(lhs) or rhs == lhs:
            raise NotSubtermConvergent(
                f"right side of {term_str(lhs)} -> {term_str(rhs)} "
                "is not a proper subterm of the left side"
            )
        heads.add(lhs.sym.name)

    for lhs, rhs in pairs:
        for arg in lhs.args:
            for st in subterms(arg):
                if isinstance(st, App) and st.sym.name in heads:
                    raise AmbiguousSymbol(
                        f"'{st.sym.name}' heads a rule but also occurs as "
                        "plain structure inside a rule"
                    )

    table = {
        nm: FunctionSymbol(nm, ar, DESTRUCTOR if nm in heads else CONSTRUCTOR)
        for nm, ar in declared.items()
    }
    fixed = tuple(
        RewriteRule(_rebuild(lhs, table), _rebuild(rhs, table))
        for lhs, rhs in pairs
    )
    return RewriteTheory(table, fixed)


def normalize(t: Term, th: RewriteTheory) -> Term:
    """Unique normal form under the theory's rules (innermost strategy)."""
    if not isinstance(t, App):
        return t
    cache = th._nf_cache
    hit = cache.get(t)
    if hit is not None:
        return hit
    args = tuple(normalize(a, th) for a in t.args)
    u = t if args == t.args else App(t.sym, args)
    result = u
    for rule in th.rules_by_head.get(u.sym.name, ()):
        s = match(rule.lhs, u)
        if s is not None:
            result = normalize(substitute_map(rule.rhs, s), th)
            break
    cache[t] = result
    cache[result] = result
    return result


def eq_mod_e(t: Term, s: Term, th: RewriteTheory) -> bool:
    """Equality modulo the equations: identical normal forms."""
    return normalize(t, th) == normalize(s, th)


_DEFAULT_DECLS = (
    ("enc", 2),
    ("dec", 2),
    ("enc_as", 2),
    ("dec_as", 2),
    ("pk", 1),
    ("pair", 2),
    ("fst", 1),
    ("snd", 1),
    ("host", 1),
    ("getpk", 1),
    ("h", 1),
    ("pred", 1),
    ("empty", 0),
)


def default_theory() -> RewriteTheory:
    """Symmetric/asymmetric encryption, pairing, host lookup, hash, pred.

    pred models arithmetic decrement opaquely; empty is the placeholder
    constant used for an attacker memory with nothing in it.
    """
    x, y = Var("x"), Var("y")
    syms = {nm: FunctionSymbol(nm, ar) for nm, ar in _DEFAULT_DECLS}

    def a(nm, *args):
        return App(syms[nm], args)

    rules = (
        (a("dec", a("enc", x, y), y), x),
        (a("dec_as", a("enc_as", x, a("pk", y)), y), x),
        (a("fst", a("pair", x, y)), x),
        (a("snd", a("pair", x, y)), y),
        (a("getpk", a("host", x)), x),
    )
    return validate_theory(_DEFAULT_DECLS, rules)
