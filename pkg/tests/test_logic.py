import itertools
import random

import pytest

from spek.calculus import (
    ExplorationConfig,
    Input,
    LabelPattern,
    Let,
    NIL,
    Output,
    Par,
    Prefix,
    Restrict,
    Test as EqTest,
    canonical_form,
)
from spek.errors import UnresolvedInputInstance
from spek.knowledge import TermAtom
from spek.logic import (
    INCONCLUSIVE,
    SAT,
    UNSAT,
    CheckSession,
    FAct,
    FAlways,
    FAnd,
    FCompose,
    FCount,
    FEventually,
    FFreeName,
    FHidden,
    FKnows,
    FNot,
    FOr,
    FSecret,
    FTrue,
    FVoid,
    check,
    expand_count,
    satisfying_splits,
)
from spek.terms import Name, Var, default_theory

TH = default_theory()
CFG = ExplorationConfig(attacker_depth=2, max_messages=5000)
m, k, a, b = Name("m"), Name("k"), Name("a"), Name("b")


def enc(s, t):
    return TH.app("enc", s, t)


def out(chan, term, cont=NIL):
    return Prefix(Output(chan, term), cont)


def verdict(p, f, cfg=CFG):
    return check(p, f, cfg, TH).verdict


class TestBasicClauses:
    def test_void(self):
        assert verdict(NIL, FVoid()) == SAT
        assert verdict(out("c", m), FVoid()) == UNSAT

    def test_boolean(self):
        assert verdict(NIL, FNot(FVoid())) == UNSAT
        assert verdict(NIL, FAnd(FTrue(), FVoid())) == SAT
        assert verdict(NIL, FOr(FNot(FTrue()), FVoid())) == SAT

    def test_free_name(self):
        assert verdict(out("c", m), FFreeName("c")) == SAT
        assert verdict(out("c", m), FFreeName("zz")) == UNSAT
        assert verdict(Restrict("s", out("c", Name("s"))),
                       FFreeName("s")) == UNSAT

    def test_knows(self):
        p = out("c", enc(m, k), out("c", k))
        assert verdict(p, FKnows(TermAtom(m))) == SAT
        q = out("c", enc(m, k))
        assert verdict(q, FKnows(TermAtom(m))) == UNSAT

    def test_act_output(self):
        p = out("c", m, out("d", m))
        f = FAct(LabelPattern("out", "c"), FAct(LabelPattern("out", "d"),
                                                FTrue()))
        assert verdict(p, f) == SAT
        assert verdict(p, FAct(LabelPattern("out", "zz"), FTrue())) == UNSAT

    def test_act_input_with_term(self):
        p = Prefix(Input("c", "x"), out("d", Var("x")))
        f = FAct(LabelPattern("in", "c", m),
                 FAct(LabelPattern("out", "d", m), FTrue()))
        assert verdict(p, f) == SAT

    def test_bare_input_barb(self):
        p = Prefix(Input("c", "x"), NIL)
        assert verdict(p, FAct(LabelPattern("in", "c"), FTrue())) == SAT
        with pytest.raises(UnresolvedInputInstance):
            verdict(p, FAct(LabelPattern("in", "c"), FVoid()))

    def test_tau_modality(self):
        p = Prefix(EqTest(m, m), out("c", m))
        assert verdict(p, FAct(LabelPattern("tau"),
                               FAct(LabelPattern("out", "c"), FTrue()))) == SAT

    def test_temporal(self):
        p = Prefix(EqTest(m, m), Prefix(EqTest(k, k), out("done", m)))
        assert verdict(p, FEventually(FAct(LabelPattern("out", "done"),
                                           FTrue()))) == SAT
        assert verdict(p, FAlways(FNot(FVoid()))) == SAT

    def test_hidden(self):
        p = Restrict("s", out("c", Name("s")))
        f = FHidden("x", FKnows(TermAtom(Name("x"))))
        assert verdict(p, f) == SAT

    def test_hidden_vacuous_fresh(self):
        assert verdict(NIL, FHidden("x", FTrue())) == SAT

    def test_secret(self):
        p = Restrict("s", out("c", enc(m, Name("s"))))
        f = FSecret("x", FKnows(TermAtom(Name("x"))))
        assert verdict(p, f) == SAT
        assert verdict(out("c", m), f) == UNSAT


class TestCompose:
    def test_split_by_tags(self):
        q = out("a", m)
        r = out("b", k)
        got = satisfying_splits(Par((q, r)), FFreeName("a"), FFreeName("b"),
                                CFG, TH)
        assert len(got) == 1
        (left, right) = next(iter(got))
        assert "a" in str(left) and "b" in str(right)

    def test_full_split_with_true(self):
        p = out("a", m)
        got = satisfying_splits(p, FTrue(), FVoid(), CFG, TH)
        assert (canonical_form(p, TH), NIL) in got

    def test_nil_has_no_double_nonvoid_split(self):
        got = satisfying_splits(NIL, FNot(FVoid()), FNot(FVoid()), CFG, TH)
        assert got == set()

    def test_symmetry(self):
        p = Par((out("a", m), out("b", k)))
        f1 = FCompose(FFreeName("a"), FFreeName("b"))
        f2 = FCompose(FFreeName("b"), FFreeName("a"))
        assert verdict(p, f1) == verdict(p, f2) == SAT

    def test_whole_knows_what_a_part_knows(self):
        p = Par((out("c", k), Prefix(Input("d", "x"), NIL)))
        part_knows = FCompose(FKnows(TermAtom(k)), FTrue())
        assert verdict(p, part_knows) == SAT
        assert verdict(p, FKnows(TermAtom(k))) == SAT

    def test_split_through_shared_restriction(self):
        # both sides mention the bound name: splitting still sees two parts
        body = Par((out("c", Name("s")), out("d", Name("s"))))
        p = Restrict("s", body)
        f = FCompose(FFreeName("c"), FFreeName("d"))
        assert verdict(p, f) == SAT


class TestCount:
    def test_expand_count_shapes(self):
        one = expand_count(1)
        assert isinstance(one, FAnd)
        assert verdict(out("a", m), FCount(1)) == SAT
        with pytest.raises(ValueError):
            expand_count(0)

    def test_count_soundness_small(self):
        comps = [out(ch, m) for ch in ("a", "b", "c", "d")]
        for n in range(1, 5):
            p = canonical_form(Par(tuple(comps[:n])), TH) if n > 1 \
                else comps[0]
            for j in range(1, 6):
                want = SAT if j == n else UNSAT
                assert verdict(p, FCount(j)) == want, (n, j)


class TestThreeValued:
    def test_always_inconclusive_on_truncation(self):
        cfg = ExplorationConfig(max_states=1)
        p = Prefix(EqTest(m, m), out("c", m))
        got = check(p, FAlways(FNot(FVoid())), cfg, TH)
        assert got.verdict == INCONCLUSIVE
        assert not got.complete

    def test_eventually_sat_despite_truncation(self):
        cfg = ExplorationConfig(max_states=1)
        p = Prefix(EqTest(m, m), out("c", m))
        got = check(p, FEventually(FNot(FVoid())), cfg, TH)
        assert got.verdict == SAT

    def test_eventually_inconclusive_when_no_witness_found(self):
        cfg = ExplorationConfig(max_states=1)
        p = Prefix(EqTest(m, m), out("c", m))
        got = check(p, FEventually(FVoid()), cfg, TH)
        assert got.verdict == INCONCLUSIVE


class TestLaws:
    def _random_proc(self, rng, depth=2):
        roll = rng.random()
        if depth <= 0 or roll < 0.25:
            return NIL if rng.random() < 0.3 else out(
                rng.choice("abcd"), rng.choice((m, k, enc(m, k))))
        if roll < 0.45:
            return Prefix(EqTest(rng.choice((m, k)), rng.choice((m, k))),
                          self._random_proc(rng, depth - 1))
        if roll < 0.6:
            return Restrict(rng.choice("st"),
                            self._random_proc(rng, depth - 1))
        if roll < 0.8:
            return Par((self._random_proc(rng, depth - 1),
                        self._random_proc(rng, depth - 1)))
        return Prefix(Input(rng.choice("abcd"), "z"),
                      self._random_proc(rng, depth - 1))

    def _random_formula(self, rng, depth=2):
        roll = rng.random()
        if depth <= 0 or roll < 0.3:
            return rng.choice((
                FTrue(), FVoid(), FNot(FVoid()), FFreeName(rng.choice("abcd")),
                FKnows(TermAtom(rng.choice((m, k)))), FCount(rng.randint(1, 3)),
            ))
        if roll < 0.5:
            return FNot(self._random_formula(rng, depth - 1))
        if roll < 0.7:
            return FAnd(self._random_formula(rng, depth - 1),
                        self._random_formula(rng, depth - 1))
        if roll < 0.85:
            return FCompose(self._random_formula(rng, depth - 1),
                            self._random_formula(rng, depth - 1))
        return FAct(LabelPattern("out", rng.choice("abcd")), FTrue())

    def test_box_diamond_duality(self):
        rng = random.Random(31)
        for _ in range(120):
            p = self._random_proc(rng)
            f = self._random_formula(rng)
            v1 = verdict(p, FAlways(f))
            v2 = verdict(p, FNot(FEventually(FNot(f))))
            assert v1 == v2

    def test_compose_symmetry(self):
        rng = random.Random(32)
        for _ in range(120):
            p = self._random_proc(rng)
            f1 = self._random_formula(rng, 1)
            f2 = self._random_formula(rng, 1)
            assert verdict(p, FCompose(f1, f2)) == verdict(p, FCompose(f2, f1))

    def test_congruence_invariance(self):
        rng = random.Random(33)
        for _ in range(60):
            parts = [self._random_proc(rng, 1) for _ in range(3)]
            f = self._random_formula(rng)
            verdicts = set()
            for perm in itertools.permutations(parts):
                verdicts.add(verdict(Par(tuple(perm)), f))
            assert len(verdicts) == 1

    def test_unit_law(self):
        rng = random.Random(34)
        for _ in range(60):
            p = self._random_proc(rng)
            f = self._random_formula(rng)
            assert verdict(p, f) == verdict(Par((p, NIL)), f)
