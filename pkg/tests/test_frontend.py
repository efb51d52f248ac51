import pathlib
import random

import pytest

from spek import cli
from spek import logic as L
from spek.calculus import Call, NIL, Par, Prefix, Sum, process_str
from spek.errors import ParseError, ResolutionError
from spek.frontend import (
    attacker_def_name,
    build_config,
    formula_str,
    parse_script,
    run,
    script_str,
)
from spek.knowledge import Conj, TermAtom
from spek.terms import App, Name, default_theory

GOLDENS = pathlib.Path(__file__).parent / "goldens"


def golden(name):
    return (GOLDENS / name).read_text()


def scripts_equal(s1, s2):
    assert s1.parameters == s2.parameters
    assert set(s1.defs) == set(s2.defs)
    for nm in s1.defs:
        assert s1.defs[nm] == s2.defs[nm], nm
    assert set(s1.props) == set(s2.props)
    for nm in s1.props:
        assert s1.props[nm] == s2.props[nm], nm
    assert len(s1.checks) == len(s2.checks)
    for c1, c2 in zip(s1.checks, s2.checks):
        assert c1.process == c2.process
        assert c1.formula == c2.formula
        assert c1.prop_name == c2.prop_name
    return True


class TestParsing:
    def test_keyserver_structure(self):
        s = parse_script(golden("keyserver.spek"))
        assert set(s.defs) == {"S", "P", "Q", "Sys", "World"}
        assert s.attacker_requests == {"Sys"}
        world = s.defs["World"][1]
        assert isinstance(world, Par)
        assert Call(attacker_def_name("Sys"), ()) in world.parts
        assert set(s.props) == {"pqK"}
        assert len(s.checks) == 1
        assert s.checks[0].prop_name == "pqK"

    def test_marker_prop_is_barb_modality(self):
        s = parse_script("defprop end = <end!> true;")
        f = s.props["end"]
        assert isinstance(f, L.FAct)
        assert f.pattern.kind == "out"
        assert f.pattern.chan == "end"
        assert f.pattern.term is None
        assert isinstance(f.body, L.FTrue)

    def test_unknown_process_in_check(self):
        with pytest.raises(ResolutionError):
            parse_script("defprop p = true;\ncheck X |= p;")

    def test_unknown_prop_in_check(self):
        with pytest.raises(ResolutionError):
            parse_script("defproc X = 0;\ncheck X |= nope;")

    def test_select_desugars_to_guarded_choice(self):
        s = parse_script(
            "defproc D = select { [a = b].c!(a) ; [a = a].c!(b) };")
        body = s.defs["D"][1]
        assert isinstance(body, Sum)
        assert len(body.branches) == 2

    def test_multi_term_output_nests_pairs(self):
        s = parse_script("defproc D = s!(a, b, c);")
        term = s.defs["D"][1].action.term
        th = default_theory()
        want = th.app("pair", Name("a"), th.app("pair", Name("b"), Name("c")))
        assert term == want

    def test_parameter_lines(self):
        s = parse_script("parameter attacker_depth = 3;\ndefproc D = 0;")
        assert s.parameters == {"attacker_depth": 3}

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ParseError):
            parse_script("parameter speed = 9;")

    def test_parse_error_carries_location(self):
        with pytest.raises(ParseError) as exc:
            parse_script("defproc D = ;")
        assert "line 1" in str(exc.value)

    def test_custom_theory_declarations(self):
        s = parse_script(
            "defsig wrap/1;\n"
            "defeq unwrap(wrap(x)) = x;\n"
            "defproc D = c!(wrap(a));\n")
        th = s.theory
        assert th.symbol("unwrap").is_destructor
        assert not th.symbol("wrap").is_destructor

    def test_theory_after_defproc_rejected(self):
        with pytest.raises(ParseError):
            parse_script("defproc D = 0;\ndefsig f/1;")

    def test_undeclared_symbol_in_process(self):
        with pytest.raises(ResolutionError):
            parse_script("defsig wrap/1;\ndefproc D = c!(mystery(a));")

    def test_attacker_target_must_be_nullary(self):
        with pytest.raises(ResolutionError):
            parse_script("defproc S(x) = c!(x);\ndefproc W = Attacker(S);")

    def test_formula_precedence(self):
        s = parse_script("defprop p = not 0 and not 0 | not 0;")
        f = s.props["p"]
        # '|' binds tighter than 'and'
        assert isinstance(f, L.FAnd)
        assert isinstance(f.right, L.FCompose)

    def test_knows_comma_list(self):
        s = parse_script("defprop p = knows a, b;")
        f = s.props["p"]
        assert isinstance(f.phi, Conj)
        assert f.phi.left == TermAtom(Name("a"))
        assert f.phi.right == TermAtom(Name("b"))


class TestRoundTrip:
    def test_goldens(self):
        for name in ("keyserver.spek", "correspondence_ok.spek",
                     "correspondence_broken.spek", "sharedkey.spek"):
            s1 = parse_script(golden(name))
            s2 = parse_script(script_str(s1))
            assert scripts_equal(s1, s2), name

    def test_formula_printer_precedence_examples(self):
        cases = [
            "not (0 | not 0)",
            "knows a, b and not 0",
            "eventually (knows v | knows v | not knows v)",
            "always (end => begin)",
            "not eventually hidden k . (2 | (@mem and knows k))",
            "<c!(enc(a, b))> <c?> true",
            "secret x . knows x or 3",
            "<tau> true => 1",
        ]
        src = "defproc World = 0;\ndefprop begin = true;\ndefprop end " \
              "= true;\ndefprop v = true;\n"
        src += "\n".join(f"defprop p{i} = {c};" for i, c in enumerate(cases))
        s1 = parse_script(src)
        s2 = parse_script(script_str(s1))
        assert scripts_equal(s1, s2)


class TestRun:
    def test_report_lines_and_exit_codes(self):
        src = (
            "defproc Good = c!(a);\n"
            "defprop p = <c!> true;\n"
            "check Good |= p;\n"
        )
        _, report, code = run(parse_script(src))
        assert report == "* Process Good satisfies the formula p *\n"
        assert code == 0

    def test_negative_verdict(self):
        src = (
            "defproc Bad = 0;\n"
            "defprop p = <c!> true;\n"
            "check Bad |= p;\n"
        )
        _, report, code = run(parse_script(src))
        assert report == "* Process Bad does not satisfy the formula p *\n"
        assert code == 1

    def test_inconclusive_verdict(self):
        src = (
            "defproc Slow = [a = a].[b = b].[m = m].0;\n"
            "check Slow |= always true;\n"
        )
        _, report, code = run(parse_script(src), {"max_states": 1})
        assert "Verdict inconclusive" in report
        assert "(state limit reached)" in report
        assert code == 2

    def test_empty_script(self):
        _, report, code = run(parse_script(""))
        assert report == ""
        assert code == 0

    def test_reports_deterministic(self):
        src = golden("sharedkey.spek")
        r1 = run(parse_script(src))[1]
        r2 = run(parse_script(src))[1]
        assert r1 == r2

    def test_flag_overrides_script_parameter(self):
        script = parse_script(
            "parameter attacker_depth = 3;\ndefproc D = 0;")
        assert build_config(script).attacker_depth == 3
        assert build_config(script, {"attacker_depth": 5}).attacker_depth == 5
        assert build_config(script, {"attacker_depth": None}).attacker_depth \
            == 3

    def test_depth_flag_flips_knowledge_verdict(self):
        # the secret only leaks if the adversary may send a depth-3 term
        src = (
            "defproc Leak = c?(x).[dec(x, k) = h(n)].ok!(s);\n"
            "defproc Evil = c!(*).0;\n"
            "defproc Feed = d!(k).d!(h(n));\n"
            "defproc Give = d?(u).d?(w).0;\n"
            "defproc World = Leak | (Evil | e!(pair(k, h(n))));\n"
            "defprop reach = eventually <ok!> true;\n"
            "check World |= reach;\n"
        )
        # adversary knowledge comes from its continuation's terms
        src = src.replace("defproc Evil = c!(*).0;\n",
                          "defproc Evil = c!(*).e!(pair(k, h(n)));\n")
        src = src.replace(" | (Evil | e!(pair(k, h(n))))", " | Evil")
        script = parse_script(src)
        _, _, code_shallow = run(script, {"attacker_depth": 2})
        _, _, code_deep = run(script, {"attacker_depth": 3})
        assert code_shallow == 1
        assert code_deep == 0

    def test_trace_flag_appends_witness(self):
        src = (
            "defproc D = [a = a].c!(m);\n"
            "check D |= eventually <c!> true;\n"
        )
        _, report, _ = run(parse_script(src), trace=True)
        assert "reached in" in report

    def test_proof_flag_appends_certificate(self):
        src = (
            "defproc D = c!(k);\n"
            "check D |= knows k;\n"
        )
        _, report, _ = run(parse_script(src), proof=True)
        assert "knowledge certificate" in report
        assert "[Id]" in report


class TestCli:
    def test_check_exit_codes(self, tmp_path, capsys):
        f = tmp_path / "ok.spek"
        f.write_text("defproc D = c!(a);\ncheck D |= <c!> true;\n")
        assert cli.main(["check", str(f)]) == 0
        out = capsys.readouterr().out
        assert "satisfies the formula" in out

    def test_error_exit_code(self, tmp_path, capsys):
        f = tmp_path / "bad.spek"
        f.write_text("defproc D = ;\n")
        assert cli.main(["check", str(f)]) == 3
        assert "error:" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert cli.main(["check", "/nonexistent.spek"]) == 3

    def test_print_attacker(self, tmp_path, capsys):
        f = tmp_path / "p.spek"
        f.write_text(
            "defproc Sys = c!(a) | c?(x).d!(x);\n"
            "defproc W = Sys | Attacker(Sys);\n"
            "check W |= true;\n")
        assert cli.main(["check", str(f), "--print-attacker", "Sys"]) == 0
        out = capsys.readouterr().out.strip()
        assert out == "c?(x1).c!(*).mem!(x1)"


class TestFuzzRoundTrip:
    def _gen_script(self, rng):
        th = default_theory()
        chans = ["c", "d", "e"]
        atoms = ["a", "b", "n"]

        def term(depth, scope):
            pool = atoms + sorted(scope)
            if depth <= 0 or rng.random() < 0.5:
                return rng.choice(pool)
            sym = rng.choice(["enc", "pair", "h", "pk"])
            arity = th.symbol(sym).arity
            return f"{sym}({', '.join(term(depth - 1, scope) for _ in range(arity))})"

        def proc(depth, scope, idx=[0]):
            roll = rng.random()
            if depth <= 0 or roll < 0.2:
                return "0"
            if roll < 0.45:
                return f"{rng.choice(chans)}!({term(2, scope)})" + \
                    ("." + proc(depth - 1, scope) if rng.random() < 0.7 else "")
            if roll < 0.6:
                idx[0] += 1
                v = f"z{idx[0]}"
                return f"{rng.choice(chans)}?({v})." + \
                    proc(depth - 1, scope | {v})
            if roll < 0.7:
                idx[0] += 1
                v = f"w{idx[0]}"
                return f"let {v} = {term(2, scope)} in " + \
                    proc(depth - 1, scope | {v})
            if roll < 0.8:
                return f"new priv in ({proc(depth - 1, scope)})"
            if roll < 0.9:
                b1 = f"[{term(1, scope)} = {term(1, scope)}]." \
                     f"{proc(depth - 1, scope)}"
                b2 = f"[{term(1, scope)} = {term(1, scope)}]." \
                     f"{proc(depth - 1, scope)}"
                return "select { " + b1 + " ; " + b2 + " }"
            return f"({proc(depth - 1, scope)} | {proc(depth - 1, scope)})"

        def formula(depth):
            roll = rng.random()
            if depth <= 0 or roll < 0.3:
                return rng.choice([
                    "true", "false", "0", "2", f"@{rng.choice(chans)}",
                    f"knows {term(1, set())}",
                    f"knows {term(1, set())}, {term(1, set())}",
                ])
            if roll < 0.45:
                return f"not {formula(depth - 1)}"
            if roll < 0.6:
                op = rng.choice(["and", "or", "=>", "|"])
                return f"({formula(depth - 1)} {op} {formula(depth - 1)})"
            if roll < 0.75:
                mod = rng.choice(["eventually", "always"])
                return f"{mod} ({formula(depth - 1)})"
            if roll < 0.85:
                q = rng.choice(["hidden", "secret"])
                return f"{q} qx . ({formula(depth - 1)})"
            mark = rng.choice(["!", "?"])
            inner = f"({term(1, set())})" if mark == "!" and rng.random() < 0.5 \
                else ""
            return f"<{rng.choice(chans)}{mark}{inner}> ({formula(depth - 1)})"

        lines = []
        nprocs = rng.randint(1, 3)
        for i in range(nprocs):
            lines.append(f"defproc G{i} = {proc(3, set())};")
        nprops = rng.randint(1, 2)
        for i in range(nprops):
            lines.append(f"defprop q{i} = {formula(2)};")
        lines.append(f"check G0 |= q0;")
        if rng.random() < 0.5:
            lines.append(f"check G{nprocs - 1} |= {formula(2)};")
        return "\n".join(lines)

    def test_fuzzed_scripts_round_trip(self):
        rng = random.Random(1234)
        for _ in range(120):
            src = self._gen_script(rng)
            s1 = parse_script(src)
            s2 = parse_script(script_str(s1))
            assert scripts_equal(s1, s2), src
