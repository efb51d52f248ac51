"""Automatic construction of the network adversary for finite protocols.

The generated adversary mirrors the protocol's own message exchanges: every
internal synchronization on the protocol channel becomes an interception
(an input that stores the message) followed by an injection (an attacker
output), and the run ends by publishing everything stored on a memory
channel.
"""

from __future__ import annotations

from typing import Optional

from .calculus import (
    AttackerOutput,
    Explorer,
    ExplorationConfig,
    Input,
    Let,
    NIL,
    Output,
    Prefix,
    Process,
    Test,
    _branches,
    _flat,
    _is_value_term,
    _rebuild,
    extract_knowledge,
    free_names,
    substitute_process,
)
from .errors import NonDeterministicProtocol, NotFinite
from .knowledge import KnowledgeBasis, approximate
from .terms import App, RewriteTheory, Term, Var


class AttackerSpec:
    """Channel layout for a generated adversary."""

    __slots__ = ("channel", "memory_channel", "fresh_prefix")

    def __init__(self, channel="c", memory_channel="mem", fresh_prefix="x"):
        self.channel = channel
        self.memory_channel = memory_channel
        self.fresh_prefix = fresh_prefix

    def __repr__(self):
        return (f"AttackerSpec(channel={self.channel!r}, "
                f"memory_channel={self.memory_channel!r})")


def _protocol_steps(ex: Explorer, chan: str, state: Process):
    """Successors split into silent steps and channel synchronizations."""
    th, defs = ex.th, ex.defs
    binders, comps = _flat(state)
    silent = set()
    syncs = set()

    def rebuild(new_comps):
        return _rebuild(list(binders), new_comps, th, defs)

    inputs, outputs = [], []
    for i, comp in enumerate(comps):
        if isinstance(comp, Let):
            ok, tn = _is_value_term(comp.term, th)
            if ok:
                fired = substitute_process(comp.body, comp.var, tn)
                silent.add(rebuild(comps[:i] + [fired] + comps[i + 1:]))
            continue
        for act, cont in _branches(comp):
            if isinstance(act, Test):
                lok, ln = _is_value_term(act.left, th)
                rok, rn = _is_value_term(act.right, th)
                if lok and rok and ln == rn:
                    silent.add(rebuild(comps[:i] + [cont] + comps[i + 1:]))
            elif isinstance(act, Input):
                inputs.append((i, act, cont))
            elif isinstance(act, Output):
                outputs.append((i, act, cont))
            elif isinstance(act, AttackerOutput):
                raise NonDeterministicProtocol(
                    "protocol already contains attacker outputs on "
                    f"'{act.chan}'; cannot mirror it")

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
            target = rebuild(new_comps)
            (syncs if oact.chan == chan else silent).add(target)

    return silent, syncs


def _sync_trace_length(ex, chan, state, stack, memo, fuel):
    if fuel <= 0:
        raise NotFinite("exploration depth exhausted before the protocol "
                        "terminated")
    got = memo.get(state)
    if got is not None:
        return got
    if state in stack:
        raise NotFinite("the protocol loops; only finite protocols have "
                        "generated adversaries")
    stack.add(state)
    silent, syncs = _protocol_steps(ex, chan, state)
    best = 0
    for q in silent:
        best = max(best, _sync_trace_length(ex, chan, q, stack, memo, fuel - 1))
    for q in syncs:
        best = max(best,
                   1 + _sync_trace_length(ex, chan, q, stack, memo, fuel - 1))
    stack.discard(state)
    memo[state] = best
    return best


def _memory_term(variables, th: RewriteTheory) -> Term:
    if not variables:
        return App(th.symbol("empty"), ())
    out = Var(variables[-1])
    for v in reversed(variables[:-1]):
        out = App(th.symbol("pair"), (Var(v), out))
    return out


def generate_attacker(p: Process, spec: AttackerSpec, th: RewriteTheory,
                      defs: Optional[dict] = None,
                      cfg: Optional[ExplorationConfig] = None) -> Process:
    """Mirror a finite protocol: one interception plus one injection per
    message exchanged on the protocol channel, then publish the memory."""
    defs = defs or {}
    cfg = cfg or ExplorationConfig()
    ex = Explorer(cfg, th, defs)
    root = ex.canonical(p)
    n = _sync_trace_length(ex, spec.channel, root, set(), {}, cfg.max_depth)

    taken = free_names(p, defs) | set(defs)
    for _nm, (params, _body) in defs.items():
        taken |= set(params)
    variables = []
    i = 1
    while len(variables) < n:
        cand = f"{spec.fresh_prefix}{i}"
        if cand not in taken:
            variables.append(cand)
        i += 1

    body = Prefix(Output(spec.memory_channel, _memory_term(variables, th)), NIL)
    for v in reversed(variables):
        body = Prefix(Input(spec.channel, v),
                      Prefix(AttackerOutput(spec.channel), body))
    return body


def k_basis(p: Process, th: RewriteTheory,
            defs: Optional[dict] = None) -> KnowledgeBasis:
    """Finite basis of everything the process can derive."""
    return approximate(extract_knowledge(p, th, defs), th)
