"""Script language: parsing, printing, and the check driver.

A script is a sequence of ';'-terminated statements: optional parameter
settings and theory declarations first, then process and property
definitions, then checks.  Identifiers are ASCII words; // starts a line
comment.
"""

from __future__ import annotations

from typing import Optional

from . import logic as L
from .attacker import AttackerSpec, generate_attacker
from .calculus import (
    AttackerOutput,
    Call,
    ExplorationConfig,
    Input,
    LabelPattern,
    Let,
    NIL,
    Output,
    Par,
    Prefix,
    Restrict,
    Sum,
    Test,
    process_str,
)
from .errors import ParseError, ResolutionError, SpekError
from .knowledge import Conj, TermAtom, Top
from .terms import (
    App,
    Name,
    Var,
    default_theory,
    term_str,
    validate_theory,
)

KEYWORDS = {
    "parameter", "defsig", "defeq", "defproc", "defprop", "check",
    "new", "let", "in", "select", "not", "and", "or", "true", "false",
    "knows", "hidden", "secret", "eventually", "always", "tau",
}

PARAMETERS = ("attacker_depth", "fresh_budget", "max_states", "max_depth",
              "max_messages")

_SYMBOLS = ("|=", "=>", ";", "=", "(", ")", "{", "}", "[", "]", ".", ",",
            "|", "!", "?", "*", "<", ">", "@", "/", "+")


class _Token:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind, value, line, col):
        self.kind = kind
        self.value = value
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}:{self.value!r}"


def _lex(text):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "kw" if word in KEYWORDS else "ident"
            tokens.append(_Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(_Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class CheckItem:
    __slots__ = ("process", "process_text", "formula", "prop_name")

    def __init__(self, process, process_text, formula, prop_name):
        self.process = process
        self.process_text = process_text
        self.formula = formula
        self.prop_name = prop_name


class Script:
    __slots__ = ("parameters", "theory", "defs", "props", "checks",
                 "attacker_requests")

    def __init__(self, parameters, theory, defs, props, checks,
                 attacker_requests):
        self.parameters = parameters
        self.theory = theory
        self.defs = defs
        self.props = props
        self.checks = checks
        self.attacker_requests = attacker_requests


ATTACKER_KEYWORD = "Attacker"


def attacker_def_name(proc_name: str) -> str:
    # parentheses keep the generated entry out of the user namespace
    return f"Attacker({proc_name})"


class _Parser:
    def __init__(self, text):
        self.tokens = _lex(text)
        self.pos = 0
        self.parameters = {}
        self.sig_decls = []
        self.eq_decls = []
        self.theory = None
        self.defs = {}
        self.props = {}
        self.checks = []
        self.attacker_requests = set()

    # -- token plumbing --

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def fail(self, message, expected=None):
        t = self.peek()
        raise ParseError(message, t.line, t.col, expected)

    def expect(self, kind, value=None):
        t = self.peek()
        if t.kind != kind or (value is not None and t.value != value):
            self.fail(f"got {t.value!r}", {value or kind})
        return self.next()

    def at(self, kind, value=None):
        t = self.peek()
        return t.kind == kind and (value is None or t.value == value)

    # -- script --

    def parse(self):
        while not self.at("eof"):
            self.statement()
        if self.theory is None:
            self.build_theory()
        self.resolve()
        return Script(self.parameters, self.theory, self.defs, self.props,
                      self.checks, self.attacker_requests)

    def statement(self):
        t = self.peek()
        if t.kind != "kw":
            self.fail(f"got {t.value!r}",
                      {"parameter", "defsig", "defeq", "defproc", "defprop",
                       "check"})
        if t.value in ("defsig", "defeq"):
            if self.theory is not None:
                self.fail("theory declarations must precede definitions")
        elif t.value in ("defproc", "defprop", "check"):
            if self.theory is None:
                self.build_theory()
        if t.value == "parameter":
            self.next()
            name = self.expect("ident").value
            if name not in PARAMETERS:
                self.fail(f"unknown parameter '{name}'", set(PARAMETERS))
            self.expect("sym", "=")
            value = int(self.expect("int").value)
            self.parameters[name] = value
        elif t.value == "defsig":
            self.next()
            name = self.expect("ident").value
            self.expect("sym", "/")
            arity = int(self.expect("int").value)
            self.sig_decls.append((name, arity))
        elif t.value == "defeq":
            self.next()
            lhs = self.rule_term()
            self.expect("sym", "=")
            rhs = self.rule_term()
            self.eq_decls.append((lhs, rhs))
        elif t.value == "defproc":
            self.next()
            name = self.expect("ident").value
            if name in self.defs:
                self.fail(f"process '{name}' defined twice")
            params = []
            if self.at("sym", "("):
                self.next()
                if not self.at("sym", ")"):
                    params.append(self.expect("ident").value)
                    while self.at("sym", ","):
                        self.next()
                        params.append(self.expect("ident").value)
                self.expect("sym", ")")
            self.expect("sym", "=")
            body = self.proc(frozenset(params))
            self.expect("sym", ";")
            self.defs[name] = (tuple(params), body)
            return
        elif t.value == "defprop":
            self.next()
            name = self.expect("ident").value
            if name in self.props:
                self.fail(f"property '{name}' defined twice")
            self.expect("sym", "=")
            self.props[name] = self.formula()
            self.expect("sym", ";")
            return
        elif t.value == "check":
            self.next()
            start = self.pos
            proc = self.proc(frozenset())
            text = self.render_span(start, self.pos)
            self.expect("sym", "|=")
            prop_name = None
            if self.at("ident") and self.tokens[self.pos + 1].kind == "sym" \
                    and self.tokens[self.pos + 1].value == ";":
                prop_name = self.next().value
                formula = L.FPropRef(prop_name)
            else:
                formula = self.formula()
            self.expect("sym", ";")
            self.checks.append(CheckItem(proc, text, formula, prop_name))
            return
        else:
            self.fail(f"unexpected keyword '{t.value}'")
        self.expect("sym", ";")

    def render_span(self, start, end):
        parts = []
        prev = None
        for t in self.tokens[start:end]:
            if prev is not None and _needs_space(prev, t):
                parts.append(" ")
            parts.append(t.value)
            prev = t
        return "".join(parts)

    # -- theory --

    def build_theory(self):
        if not self.sig_decls and not self.eq_decls:
            self.theory = default_theory()
            return
        declared = dict(self.sig_decls)
        for lhs, rhs in self.eq_decls:
            for t in (lhs, rhs):
                for nm, ar in _app_arities(t).items():
                    if nm in declared:
                        if declared[nm] != ar:
                            self.fail(f"symbol '{nm}' used with arity {ar} "
                                      f"but declared /{declared[nm]}")
                    else:
                        declared[nm] = ar
        try:
            self.theory = validate_theory(
                tuple(declared.items()),
                tuple(self.eq_decls),
            )
        except SpekError as e:
            raise ParseError(str(e), 1, 1) from e

    def rule_term(self):
        """Terms in equations: every identifier is a rule variable."""
        t = self.expect("ident")
        if self.at("sym", "("):
            self.next()
            args = []
            if not self.at("sym", ")"):
                args.append(self.rule_term())
                while self.at("sym", ","):
                    self.next()
                    args.append(self.rule_term())
            self.expect("sym", ")")
            from .terms import FunctionSymbol
            return App(FunctionSymbol(t.value, len(args)), tuple(args))
        return Var(t.value)

    # -- terms in processes and formulas --

    def term(self, bound_vars):
        t = self.expect("ident")
        if self.at("sym", "("):
            self.next()
            args = []
            if not self.at("sym", ")"):
                args.append(self.term(bound_vars))
                while self.at("sym", ","):
                    self.next()
                    args.append(self.term(bound_vars))
            self.expect("sym", ")")
            try:
                return self.theory.app(t.value, *args)
            except SpekError as e:
                raise ResolutionError(
                    f"line {t.line}: {e}") from e
        if t.value in bound_vars:
            return Var(t.value)
        return Name(t.value)

    # -- processes --

    def proc(self, bound_vars):
        parts = [self.seqproc(bound_vars)]
        while self.at("sym", "|"):
            self.next()
            parts.append(self.seqproc(bound_vars))
        if len(parts) == 1:
            return parts[0]
        return Par(tuple(parts))

    def cont(self, bound_vars):
        if self.at("sym", "."):
            self.next()
            return self.seqproc(bound_vars)
        return NIL

    def seqproc(self, bound_vars):
        t = self.peek()
        if t.kind == "int" and t.value == "0":
            self.next()
            return NIL
        if self.at("sym", "("):
            self.next()
            p = self.proc(bound_vars)
            self.expect("sym", ")")
            return p
        if self.at("kw", "new"):
            self.next()
            names = [self.expect("ident").value]
            while self.at("sym", ","):
                self.next()
                names.append(self.expect("ident").value)
            self.expect("kw", "in")
            body = self.seqproc(bound_vars)
            for nm in reversed(names):
                body = Restrict(nm, body)
            return body
        if self.at("kw", "let"):
            self.next()
            var = self.expect("ident").value
            self.expect("sym", "=")
            term = self.term(bound_vars)
            self.expect("kw", "in")
            body = self.seqproc(bound_vars | {var})
            return Let(var, term, body)
        if self.at("kw", "select"):
            self.next()
            self.expect("sym", "{")
            branches = [self.select_branch(bound_vars)]
            while self.at("sym", ";"):
                self.next()
                branches.append(self.select_branch(bound_vars))
            self.expect("sym", "}")
            if len(branches) == 1:
                return branches[0]
            return Sum(tuple(branches))
        if self.at("sym", "["):
            return self.test_prefix(bound_vars)
        if t.kind == "ident":
            name = self.next().value
            if self.at("sym", "!"):
                self.next()
                self.expect("sym", "(")
                if self.at("sym", "*"):
                    self.next()
                    self.expect("sym", ")")
                    return Prefix(AttackerOutput(name), self.cont(bound_vars))
                terms = [self.term(bound_vars)]
                while self.at("sym", ","):
                    self.next()
                    terms.append(self.term(bound_vars))
                self.expect("sym", ")")
                return Prefix(Output(name, self.pair_up(terms, t)),
                              self.cont(bound_vars))
            if self.at("sym", "?"):
                self.next()
                self.expect("sym", "(")
                var = self.expect("ident").value
                self.expect("sym", ")")
                return Prefix(Input(name, var),
                              self.cont(bound_vars | {var}))
            if self.at("sym", "("):
                self.next()
                args = []
                if not self.at("sym", ")"):
                    args.append(self.term(bound_vars))
                    while self.at("sym", ","):
                        self.next()
                        args.append(self.term(bound_vars))
                self.expect("sym", ")")
                if name == ATTACKER_KEYWORD:
                    if len(args) != 1 or not isinstance(args[0], (Name, Var)):
                        self.fail("Attacker(...) takes one process name")
                    target = args[0].id
                    self.attacker_requests.add(target)
                    return Call(attacker_def_name(target), ())
                return Call(name, tuple(args))
            return Call(name, ())
        self.fail(f"got {t.value!r}",
                  {"0", "(", "new", "let", "select", "[", "identifier"})

    def pair_up(self, terms, tok):
        if len(terms) == 1:
            return terms[0]
        try:
            pair = self.theory.symbol("pair")
        except SpekError:
            raise ResolutionError(
                f"line {tok.line}: multi-term outputs need pair/2 "
                "in the theory") from None
        out = terms[-1]
        for t in reversed(terms[:-1]):
            out = App(pair, (t, out))
        return out

    def test_prefix(self, bound_vars):
        self.expect("sym", "[")
        left = self.term(bound_vars)
        self.expect("sym", "=")
        right = self.term(bound_vars)
        self.expect("sym", "]")
        return Prefix(Test(left, right), self.cont(bound_vars))

    def select_branch(self, bound_vars):
        if not self.at("sym", "["):
            self.fail("select branches are test-guarded", {"["})
        return self.test_prefix(bound_vars)

    # -- formulas --

    def formula(self):
        return self.f_implies()

    def f_implies(self):
        left = self.f_orand()
        if self.at("sym", "=>"):
            self.next()
            return L.FImplies(left, self.f_implies())
        return left

    def f_orand(self):
        out = self.f_compose()
        while self.at("kw", "and") or self.at("kw", "or"):
            op = self.next().value
            rhs = self.f_compose()
            out = L.FAnd(out, rhs) if op == "and" else L.FOr(out, rhs)
        return out

    def f_compose(self):
        out = self.f_not()
        while self.at("sym", "|"):
            self.next()
            out = L.FCompose(out, self.f_not())
        return out

    def f_not(self):
        if self.at("kw", "not"):
            self.next()
            return L.FNot(self.f_not())
        return self.f_munit()

    def f_munit(self):
        if self.at("sym", "<"):
            self.next()
            if self.at("kw", "tau"):
                self.next()
                self.expect("sym", ">")
                return L.FAct(LabelPattern("tau"), self.f_munit())
            chan = self.expect("ident").value
            if self.at("sym", "!"):
                kind = "out"
            elif self.at("sym", "?"):
                kind = "in"
            else:
                self.fail("modality needs ! or ?", {"!", "?"})
            self.next()
            term = None
            if self.at("sym", "("):
                self.next()
                term = self.term(frozenset())
                self.expect("sym", ")")
            self.expect("sym", ">")
            return L.FAct(LabelPattern(kind, chan, term), self.f_munit())
        if self.at("kw", "eventually"):
            self.next()
            return L.FEventually(self.f_munit())
        if self.at("kw", "always"):
            self.next()
            return L.FAlways(self.f_munit())
        if self.at("kw", "hidden") or self.at("kw", "secret"):
            kw = self.next().value
            var = self.expect("ident").value
            self.expect("sym", ".")
            body = self.f_munit()
            return L.FHidden(var, body) if kw == "hidden" \
                else L.FSecret(var, body)
        return self.f_primary()

    def f_primary(self):
        t = self.peek()
        if self.at("kw", "true"):
            self.next()
            return L.FTrue()
        if self.at("kw", "false"):
            self.next()
            return L.FFalse()
        if t.kind == "int":
            self.next()
            n = int(t.value)
            return L.FVoid() if n == 0 else L.FCount(n)
        if self.at("sym", "@"):
            self.next()
            return L.FFreeName(self.expect("ident").value)
        if self.at("kw", "knows"):
            self.next()
            terms = [self.term(frozenset())]
            while self.at("sym", ","):
                self.next()
                terms.append(self.term(frozenset()))
            phi = TermAtom(terms[-1])
            for x in reversed(terms[:-1]):
                phi = Conj(TermAtom(x), phi)
            return L.FKnows(phi)
        if self.at("sym", "("):
            self.next()
            f = self.formula()
            self.expect("sym", ")")
            return f
        if t.kind == "ident":
            self.next()
            return L.FPropRef(t.value)
        self.fail(f"got {t.value!r}",
                  {"true", "false", "0", "integer", "@", "knows", "(",
                   "identifier", "<", "not"})

    # -- resolution --

    def resolve(self):
        for target in sorted(self.attacker_requests):
            entry = self.defs.get(target)
            if entry is None:
                raise ResolutionError(
                    f"Attacker({target}): no such process definition")
            if entry[0]:
                raise ResolutionError(
                    f"Attacker({target}): target must take no parameters")
        for name, (_params, body) in self.defs.items():
            self._check_calls(body, f"defproc {name}")
        for item in self.checks:
            self._check_calls(item.process, "check")
            self._check_props(item.formula, "check", ())
        for name, f in self.props.items():
            self._check_props(f, f"defprop {name}", ())

    def _check_calls(self, p, where):
        if isinstance(p, Par):
            for q in p.parts:
                self._check_calls(q, where)
        elif isinstance(p, Sum):
            for q in p.branches:
                self._check_calls(q, where)
        elif isinstance(p, Restrict):
            self._check_calls(p.body, where)
        elif isinstance(p, Prefix):
            self._check_calls(p.cont, where)
        elif isinstance(p, Let):
            self._check_calls(p.body, where)
        elif isinstance(p, Call):
            if p.name.startswith(f"{ATTACKER_KEYWORD}("):
                return
            entry = self.defs.get(p.name)
            if entry is None:
                raise ResolutionError(f"{where}: unknown process '{p.name}'")
            if len(entry[0]) != len(p.args):
                raise ResolutionError(
                    f"{where}: '{p.name}' takes {len(entry[0])} arguments, "
                    f"got {len(p.args)}")

    def _check_props(self, f, where, seen):
        if isinstance(f, L.FPropRef):
            if f.name in seen:
                raise ResolutionError(
                    f"{where}: circular property reference '{f.name}'")
            body = self.props.get(f.name)
            if body is None:
                raise ResolutionError(
                    f"{where}: unknown property '{f.name}'")
            self._check_props(body, where, seen + (f.name,))
        elif isinstance(f, (L.FNot, L.FAlways, L.FEventually)):
            self._check_props(f.body, where, seen)
        elif isinstance(f, (L.FAnd, L.FOr, L.FImplies, L.FCompose)):
            self._check_props(f.left, where, seen)
            self._check_props(f.right, where, seen)
        elif isinstance(f, (L.FHidden, L.FSecret, L.FAct)):
            self._check_props(f.body, where, seen)


def _needs_space(prev, tok):
    wordy = ("ident", "kw", "int")
    if prev.kind in wordy and tok.kind in wordy:
        return True
    if prev.kind in wordy and tok.value in ("=",):
        return True
    if prev.value in ("=", ",", "]") and tok.kind in wordy:
        return True
    return False


def parse_script(text: str) -> Script:
    """Parse a script; raises ParseError or ResolutionError."""
    return _Parser(text).parse()


# --- formula printing -----------------------------------------------------------


def formula_str(f: L.Formula, level: int = 0) -> str:
    """Parseable rendering; re-parsing yields a structurally equal formula."""
    s, lvl = _fstr(f)
    if lvl < level:
        return "(" + s + ")"
    return s


def _fstr(f):
    if isinstance(f, L.FTrue):
        return "true", 5
    if isinstance(f, L.FFalse):
        return "false", 5
    if isinstance(f, L.FVoid):
        return "0", 5
    if isinstance(f, L.FCount):
        return str(f.n), 5
    if isinstance(f, L.FFreeName):
        return "@" + f.name, 5
    if isinstance(f, L.FPropRef):
        return f.name, 5
    if isinstance(f, L.FKnows):
        return "knows " + ", ".join(
            term_str(t) for t in _kflat(f.phi)), 4
    if isinstance(f, L.FNot):
        return "not " + formula_str(f.body, 3), 3
    if isinstance(f, L.FCompose):
        return formula_str(f.left, 2) + " | " + formula_str(f.right, 3), 2
    if isinstance(f, (L.FAnd, L.FOr)):
        op = " and " if isinstance(f, L.FAnd) else " or "
        return formula_str(f.left, 1) + op + formula_str(f.right, 2), 1
    if isinstance(f, L.FImplies):
        return formula_str(f.left, 1) + " => " + formula_str(f.right, 0), 0
    if isinstance(f, L.FAlways):
        return "always " + formula_str(f.body, 4), 4
    if isinstance(f, L.FEventually):
        return "eventually " + formula_str(f.body, 4), 4
    if isinstance(f, L.FHidden):
        return f"hidden {f.var} . " + formula_str(f.body, 4), 4
    if isinstance(f, L.FSecret):
        return f"secret {f.var} . " + formula_str(f.body, 4), 4
    if isinstance(f, L.FAct):
        pat = f.pattern
        if pat.kind == "tau":
            head = "<tau>"
        else:
            mark = "!" if pat.kind == "out" else "?"
            inner = f"({term_str(pat.term)})" if pat.term is not None else ""
            head = f"<{pat.chan}{mark}{inner}>"
        return head + " " + formula_str(f.body, 4), 4
    raise TypeError(f)


def _kflat(phi):
    if isinstance(phi, Top):
        return []
    if isinstance(phi, TermAtom):
        return [phi.term]
    return _kflat(phi.left) + _kflat(phi.right)


def script_str(script: Script) -> str:
    """Print a script in the surface syntax."""
    lines = []
    for name in PARAMETERS:
        if name in script.parameters:
            lines.append(f"parameter {name} = {script.parameters[name]};")
    for name, (params, body) in script.defs.items():
        if name.startswith(f"{ATTACKER_KEYWORD}("):
            continue
        head = name + (f"({', '.join(params)})" if params else "")
        lines.append(f"defproc {head} = {process_str(body)};")
    for name, f in script.props.items():
        lines.append(f"defprop {name} = {formula_str(f)};")
    for item in script.checks:
        prop = item.prop_name if item.prop_name else formula_str(item.formula)
        lines.append(f"check {process_str(item.process)} |= {prop};")
    return "\n".join(lines) + "\n"


def _app_arities(t, acc=None):
    acc = {} if acc is None else acc
    if isinstance(t, App):
        acc[t.sym.name] = t.sym.arity
        for a in t.args:
            _app_arities(a, acc)
    return acc


# --- running --------------------------------------------------------------------


def build_config(script: Script, overrides: Optional[dict] = None
                 ) -> ExplorationConfig:
    """Defaults, overridden by script parameters, overridden by flags."""
    values = {}
    values.update(script.parameters)
    for key, v in (overrides or {}).items():
        if v is not None:
            values[key] = v
    return ExplorationConfig(**values)


def resolve_formula(f: L.Formula, props: dict) -> L.Formula:
    """Inline every property reference."""
    if isinstance(f, L.FPropRef):
        body = props.get(f.name)
        if body is None:
            raise ResolutionError(f"unknown property '{f.name}'")
        return resolve_formula(body, props)
    if isinstance(f, L.FNot):
        return L.FNot(resolve_formula(f.body, props))
    if isinstance(f, (L.FAnd, L.FOr, L.FImplies, L.FCompose)):
        return type(f)(resolve_formula(f.left, props),
                       resolve_formula(f.right, props))
    if isinstance(f, (L.FHidden, L.FSecret)):
        return type(f)(f.var, resolve_formula(f.body, props))
    if isinstance(f, L.FAct):
        return L.FAct(f.pattern, resolve_formula(f.body, props))
    if isinstance(f, (L.FAlways, L.FEventually)):
        return type(f)(resolve_formula(f.body, props))
    return f


def prepare_defs(script: Script, cfg: ExplorationConfig,
                 spec: Optional[AttackerSpec] = None) -> dict:
    """Definition table with generated adversaries filled in."""
    spec = spec or AttackerSpec()
    defs = dict(script.defs)
    for target in sorted(script.attacker_requests):
        att = generate_attacker(Call(target, ()), spec, script.theory,
                                defs, cfg)
        defs[attacker_def_name(target)] = ((), att)
    return defs


def run(script: Script, overrides: Optional[dict] = None, trace=False,
        proof=False):
    """Execute every check; returns (results, report_text, exit_code)."""
    cfg = build_config(script, overrides)
    defs = prepare_defs(script, cfg)
    results = []
    lines = []
    any_unsat = any_inconclusive = False
    for item in script.checks:
        formula = resolve_formula(item.formula, script.props)
        prop_text = item.prop_name if item.prop_name \
            else formula_str(item.formula)
        session = L.CheckSession(cfg, script.theory, defs, want_proofs=proof)
        result = L.check(item.process, formula, cfg, script.theory, defs,
                         session=session)
        results.append((item, result))
        if result.verdict == L.SAT:
            lines.append(
                f"* Process {item.process_text} satisfies the formula "
                f"{prop_text} *")
        elif result.verdict == L.UNSAT:
            any_unsat = True
            lines.append(
                f"* Process {item.process_text} does not satisfy the formula "
                f"{prop_text} *")
        else:
            any_inconclusive = True
            lines.append(
                f"* Verdict inconclusive for {item.process_text} |= "
                f"{prop_text} (state limit reached) *")
        if trace and result.witness:
            for step in result.witness:
                lines.append(f"    {step}")
        if proof:
            for _state, phi, tree in session.proofs:
                lines.append(f"    knowledge certificate for "
                             f"{', '.join(term_str(t) for t in _kflat(phi))}:")
                for ln in tree.pretty(3).split("\n"):
                    lines.append(ln)
    report = "\n".join(lines)
    if report:
        report += "\n"
    exit_code = 1 if any_unsat else (2 if any_inconclusive else 0)
    return results, report, exit_code
