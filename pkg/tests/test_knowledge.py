import random

import pytest

from oracle import oracle_derivable, random_instance
from spek.errors import NonValueGoal, NotDerivable
from spek.knowledge import (
    ATT_LEFT,
    CUT,
    DESTR_LEFT,
    FUN_RIGHT,
    ID,
    Conj,
    ProofTree,
    TermAtom,
    Top,
    approximate,
    check_proof,
    derivable,
    derives_formula,
    prove,
)
from spek.terms import Name, Var, default_theory

TH = default_theory()
m, k = Name("m"), Name("k")


def enc(s, t):
    return TH.app("enc", s, t)


class TestApproximate:
    def test_opens_ciphertext_with_key(self):
        kb = approximate({enc(m, k), k}, TH)
        assert {enc(m, k), k, m} <= kb.basis

    def test_empty_seeds(self):
        assert approximate(frozenset(), TH).basis == frozenset()

    def test_ciphertext_alone_stays_closed(self):
        kb = approximate({enc(m, k)}, TH)
        assert kb.basis == frozenset((enc(m, k),))

    def test_saturation_is_a_fixpoint(self):
        kb = approximate({enc(m, k), k}, TH)
        again = approximate(kb.basis, TH)
        assert again.basis == kb.basis

    def test_pair_key_recovered(self):
        key = TH.app("pair", Name("a"), Name("b"))
        kb = approximate({enc(m, key), Name("a"), Name("b")}, TH)
        assert m in kb.basis


class TestDerivable:
    def test_decrypt(self):
        assert derivable({enc(m, k), k}, m, TH)

    def test_construct(self):
        assert derivable({m, k}, enc(m, k), TH)

    def test_no_key_no_plaintext(self):
        assert not derivable({enc(m, k)}, m, TH)

    def test_seeds_are_derivable(self):
        rng = random.Random(5)
        for _ in range(40):
            th, S, _ = random_instance(rng)
            for t in S:
                assert derivable(S, t, th)

    def test_monotonic_in_seeds(self):
        rng = random.Random(6)
        for _ in range(60):
            th, S, goal = random_instance(rng)
            if derivable(S, goal, th):
                bigger = S | {Name("zz")}
                assert derivable(bigger, goal, th)

    def test_stuck_goal_rejected(self):
        with pytest.raises(NonValueGoal):
            derivable({m}, TH.app("dec", enc(m, k), Name("wrong")), TH)

    def test_variable_goal_rejected(self):
        with pytest.raises(NonValueGoal):
            derivable({m}, Var("x"), TH)

    def test_normalizing_goal_accepted(self):
        assert derivable({m, k}, TH.app("dec", enc(m, k), k), TH)


class TestDerivesFormula:
    def test_top(self):
        assert derives_formula(frozenset(), Top(), TH)

    def test_conj_same_atom(self):
        phi = Conj(TermAtom(k), TermAtom(k))
        assert derives_formula({k}, phi, TH)

    def test_conj_mixed(self):
        phi = Conj(TermAtom(m), TermAtom(enc(m, k)))
        assert derives_formula({enc(m, k), k}, phi, TH)
        assert not derives_formula({enc(m, k)}, phi, TH)


class TestProve:
    def test_decrypt_certificate_shape(self):
        tree = prove({enc(m, k), k}, TermAtom(m), TH)
        assert tree.goal == TermAtom(m)
        assert tree.gamma == frozenset((TermAtom(enc(m, k)), TermAtom(k)))
        rules = set()

        def walk(node):
            rules.add(node.rule)
            for q in node.premises:
                walk(q)

        walk(tree)
        assert {ATT_LEFT, DESTR_LEFT, ID} <= rules
        assert check_proof(tree, TH)

    def test_hypothesis_is_an_identity_leaf(self):
        tree = prove({k}, TermAtom(k), TH)
        assert tree.rule == ID
        assert not tree.premises

    def test_construction_uses_fun_right(self):
        tree = prove({m, k}, TermAtom(enc(m, k)), TH)
        assert tree.rule == FUN_RIGHT
        assert all(p.rule == ID for p in tree.premises)
        assert check_proof(tree, TH)

    def test_conjunction_goal(self):
        phi = Conj(TermAtom(m), TermAtom(k))
        tree = prove({enc(m, k), k}, phi, TH)
        assert check_proof(tree, TH)

    def test_top_goal(self):
        tree = prove({k}, Top(), TH)
        assert check_proof(tree, TH)

    def test_underivable_raises(self):
        with pytest.raises(NotDerivable):
            prove({enc(m, k)}, TermAtom(m), TH)


class TestCheckProof:
    def test_bad_identity_leaf(self):
        bad = ProofTree(ID, frozenset((TermAtom(k),)), TermAtom(m), ())
        assert not check_proof(bad, TH)

    def test_mismatched_sequent(self):
        good = prove({enc(m, k), k}, TermAtom(m), TH)
        bad = ProofTree(good.rule, good.gamma | {TermAtom(Name("junk"))},
                        good.goal, good.premises)
        # the premise chain no longer matches the enlarged context
        assert not check_proof(bad, TH)

    def test_rule_relabel_rejected(self):
        good = prove({m, k}, TermAtom(enc(m, k)), TH)
        bad = ProofTree(CUT, good.gamma, good.goal, good.premises)
        assert not check_proof(bad, TH)

    def test_dropped_premise_rejected(self):
        good = prove({m, k}, TermAtom(enc(m, k)), TH)
        bad = ProofTree(good.rule, good.gamma, good.goal, good.premises[:1])
        assert not check_proof(bad, TH)


class TestOracleAgreement:
    def test_engine_matches_bounded_closure(self):
        rng = random.Random(100)
        for _ in range(150):
            th, S, goal = random_instance(rng)
            assert derivable(S, goal, th) == oracle_derivable(S, goal, th)
