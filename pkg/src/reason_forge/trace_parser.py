"""Turn free-form solution text into a predicted reasoning graph.

The solution grammar keys on "Define <role> as <var>" steps.  Everything
after the first " as " is the step body: comma/period-separated clauses,
each possibly an `=`-chain.  A chain whose first segment is a bare
identifier assigns it; other chains are loose computations.  Values live in
the linear family a*x + b so reverse-mode equation solving parses exactly;
once some step pins x to a number, all symbolic values collapse.

The parser is total: arbitrary text yields zero or more steps plus
warnings, never an exception.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

from .linear import InexactDivision, LinearValue, NonLinearExpression
from .util import norm_role

_DEFINE = "Define "
_AS = " as "
_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_NUMBER = re.compile(r"\d+")
_ANSWER_SPAN = re.compile(r"\[answer\](.*?)\[/answer\]", re.DOTALL)
_INT = re.compile(r"-?\d+")
_UNKNOWN_MARK = re.compile(r"\(\s*unknown\s*\)")


@dataclass
class ParsedStep:
    role: str
    var_name: str
    dependencies: set[str]
    value: LinearValue | None
    raw_text: str
    assignments: dict[str, LinearValue] = field(default_factory=dict)
    declares_unknown: bool = False


@dataclass(frozen=True)
class PredictedNode:
    role: str  # normalized phrase, the node's identity
    display_role: str
    parents: frozenset[str]  # normalized role phrases
    value: int | None
    step_index: int


@dataclass
class ParsedTrace:
    steps: list[ParsedStep]
    nodes: dict[str, PredictedNode]
    final_answer: int | None
    warnings: list[str]
    unknown_var: str | None = None
    resolved_unknown: int | None = None


# --- expression scanning -------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    kind: str  # NUM IDENT OP LPAR RPAR UNK
    text: str
    pos: int


_OPS = {"+": "+", "-": "-", "−": "-", "*": "*", "×": "*", "/": "/", "÷": "/"}


def _lex(s: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(s)
    while i < n:
        c = s[i]
        if c.isspace() or c in "${}":
            i += 1
            continue
        if c == "\\":  # drop latex control words wholesale
            i += 1
            while i < n and s[i].isalpha():
                i += 1
            continue
        if c.isdigit():
            m = _NUMBER.match(s, i)
            assert m is not None
            toks.append(_Tok("NUM", m.group(), i))
            i = m.end()
            continue
        if c.isalpha():
            m = _IDENT.match(s, i)
            assert m is not None
            toks.append(_Tok("IDENT", m.group(), i))
            i = m.end()
            continue
        if c in _OPS:
            toks.append(_Tok("OP", _OPS[c], i))
            i += 1
            continue
        if c == "(":
            toks.append(_Tok("LPAR", c, i))
            i += 1
            continue
        if c == ")":
            toks.append(_Tok("RPAR", c, i))
            i += 1
            continue
        toks.append(_Tok("UNK", c, i))
        i += 1
    return toks


class _EvalError(Exception):
    pass


class _Eval:
    """Recursive-descent evaluation of one `=`-free segment."""

    def __init__(self, toks: list[_Tok], names: "Mapping[str, LinearValue | None]"):
        self.toks = toks
        self.names = names
        self.i = 0
        self.paren_values: list[LinearValue] = []
        self.nonlinear = False

    def _peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _adjacent(self, prev_end: int) -> bool:
        t = self._peek()
        return t is not None and t.pos == prev_end

    def expr(self) -> LinearValue:
        v = self.term()
        while (t := self._peek()) and t.kind == "OP" and t.text in "+-":
            self.i += 1
            rhs = self.term()
            v = v.add(rhs) if t.text == "+" else v.sub(rhs)
        return v

    def term(self) -> LinearValue:
        v = self.factor()
        while True:
            t = self._peek()
            if t and t.kind == "OP" and t.text in "*/":
                self.i += 1
                rhs = self.factor()
                v = self._mul(v, rhs) if t.text == "*" else self._div(v, rhs)
                continue
            prev = self.toks[self.i - 1]
            if (
                prev.kind == "NUM"
                and t is not None
                and t.kind in ("IDENT", "LPAR")
                and t.pos == prev.pos + len(prev.text)
            ):
                # tight juxtaposition: 2x, 3(y + 1)
                v = self._mul(v, self.factor())
                continue
            return v

    def _mul(self, a: LinearValue, b: LinearValue) -> LinearValue:
        try:
            return a.mul(b)
        except NonLinearExpression:
            self.nonlinear = True
            raise _EvalError("nonlinear product")

    def _div(self, a: LinearValue, b: LinearValue) -> LinearValue:
        try:
            return a.div(b)
        except (InexactDivision, ZeroDivisionError):
            raise _EvalError("inexact division")
        except NonLinearExpression:
            self.nonlinear = True
            raise _EvalError("nonlinear quotient")

    def factor(self) -> LinearValue:
        t = self._peek()
        if t is None:
            raise _EvalError("unexpected end")
        if t.kind == "OP" and t.text == "-":
            self.i += 1
            return LinearValue(0, 0).sub(self.factor())
        return self.primary()

    def primary(self) -> LinearValue:
        t = self._peek()
        if t is None:
            raise _EvalError("unexpected end")
        if t.kind == "NUM":
            self.i += 1
            return LinearValue.of(int(t.text))
        if t.kind == "IDENT":
            self.i += 1
            if t.text in self.names:
                v = self.names[t.text]
                if v is None:
                    raise _EvalError(f"{t.text} has no value")
                return v
            if t.text == "x":
                return LinearValue.unknown()
            raise _EvalError(f"unknown name {t.text}")
        if t.kind == "LPAR":
            self.i += 1
            start = self.i
            v = self.expr()
            t2 = self._peek()
            if t2 is None or t2.kind != "RPAR":
                raise _EvalError("unbalanced parenthesis")
            if self.i - start >= 2 and v.coeff != 0:
                # compound symbolic sub-expression; a later unique match
                # against an earlier variable recovers an unnamed reference
                self.paren_values.append(v)
            self.i += 1
            return v
        raise _EvalError(f"unexpected token {t.text!r}")


def _eval_segment(
    seg: str, names: Mapping[str, LinearValue | None]
) -> tuple[LinearValue | None, list[LinearValue], bool]:
    """Value of one segment, its compound paren values, nonlinearity flag."""
    toks = _lex(seg)
    if not toks:
        return None, [], False
    ev = _Eval(toks, names)
    try:
        v = ev.expr()
    except _EvalError:
        return None, ev.paren_values, ev.nonlinear
    if ev.i != len(toks):
        return None, ev.paren_values, ev.nonlinear
    return v, ev.paren_values, ev.nonlinear


def _chain_target(seg: str) -> str | None:
    """Assignment head: a bare identifier, possibly after prose words.

    "y", "so y", "Since k" all name a target; "2x + 18" does not.
    """
    toks = _lex(seg)
    if toks and all(t.kind == "IDENT" for t in toks):
        return toks[-1].text
    return None


# --- step parsing --------------------------------------------------------


def segment(solution: str) -> list[str]:
    """Split text into maximal chunks starting at each "Define " keyword."""
    starts = [m.start() for m in re.finditer(re.escape(_DEFINE), solution)]
    return [
        solution[a:b].strip()
        for a, b in zip(starts, starts[1:] + [len(solution)])
    ]


def parse_step(
    text: str,
    env: Mapping[str, LinearValue | None],
    unknown: str | None = None,
) -> tuple[ParsedStep, list[str]]:
    """Parse one Define step against the variables defined so far."""
    warnings: list[str] = []
    rest = text[len(_DEFINE) :] if text.startswith(_DEFINE) else text
    role, sep, body = rest.partition(_AS)
    if not sep:
        role, body = rest, ""
        warnings.append("step without ' as ': treating whole text as role")
    role = role.strip()
    m = _IDENT.match(body.lstrip())
    var = m.group() if m else "_unnamed"
    if m is None:
        warnings.append(f"step {role!r} does not name a variable")

    declares_unknown = bool(_UNKNOWN_MARK.search(body))
    locals_: dict[str, LinearValue] = {}
    assignments: dict[str, LinearValue] = {}
    own_value: LinearValue | None = None
    chain_value: LinearValue | None = None
    paren_values: list[LinearValue] = []

    def names() -> dict[str, LinearValue | None]:
        merged: dict[str, LinearValue | None] = dict(env)
        merged.update(locals_)
        if declares_unknown or var == "x":
            merged[var] = LinearValue.unknown()
        return merged

    dep_names: set[str] = set()
    for clause in re.split(r"[,;.:]", body):
        segs = clause.split("=")
        if len(segs) < 2:
            continue
        target = _chain_target(segs[0])
        eval_segs = segs[1:] if target is not None else segs
        best: LinearValue | None = None
        for k, sgl in enumerate(eval_segs):
            v, parens, nonlinear = _eval_segment(sgl, names())
            if nonlinear:
                warnings.append(f"nonlinear expression in step {role!r}")
            if v is not None:
                best = v
            if target is not None and (k < len(eval_segs) - 1 or len(eval_segs) == 1):
                # operand segments only; the last segment of a longer chain
                # restates the value and must not contribute references
                paren_values.extend(parens)
                dep_names.update(
                    t.text for t in _lex(sgl) if t.kind == "IDENT"
                )
        if best is None:
            continue
        if target is None:
            chain_value = best
        elif target == var:
            own_value = best
            assignments[target] = best
        elif target in env:
            if target != unknown:
                warnings.append(
                    f"reassignment of {target} inside step {role!r} ignored"
                )
            locals_[target] = best
            assignments[target] = best
        else:
            locals_[target] = best
            assignments[target] = best

    if declares_unknown:
        value: LinearValue | None = LinearValue.unknown()
    elif own_value is not None:
        value = own_value
    elif chain_value is not None:
        value = chain_value
    else:
        nums = _NUMBER.findall(body)
        value = LinearValue.of(int(nums[-1])) if nums else None

    deps = {t for t in dep_names if t in env and t != var}
    for pv in paren_values:
        matches = [k for k, v in env.items() if v == pv and k != var]
        if len(matches) == 1:
            deps.add(matches[0])

    step = ParsedStep(
        role=role,
        var_name=var,
        dependencies=deps,
        value=value,
        raw_text=text,
        assignments=assignments,
        declares_unknown=declares_unknown,
    )
    return step, warnings


def parse_trace(solution: str, answer: str | None = None) -> ParsedTrace:
    """Parse a whole solution into steps, a role-keyed graph, and the answer."""
    warnings: list[str] = []
    env: dict[str, LinearValue | None] = {}
    steps: list[ParsedStep] = []
    unknown_var: str | None = None
    resolved: int | None = None

    var_role: dict[str, str] = {}
    parent_roles: list[frozenset[str]] = []
    for text in segment(solution):
        pin = unknown_var if unknown_var is not None else "x"
        step, ws = parse_step(text, env, unknown=pin)
        warnings.extend(ws)
        steps.append(step)
        if step.declares_unknown and unknown_var is None:
            unknown_var = step.var_name
            pin = unknown_var
        got = step.assignments.get(pin)
        if got is not None and got.coeff == 0 and step.var_name != pin:
            resolved = got.const
        # bind parents before this step's own name can shadow an earlier one
        parent_roles.append(
            frozenset(var_role[d] for d in step.dependencies if d in var_role)
        )
        env[step.var_name] = step.value
        var_role[step.var_name] = norm_role(step.role)

    if resolved is not None:
        for step in steps:
            if step.value is not None and step.value.coeff != 0:
                step.value = LinearValue.of(step.value.resolve(resolved))

    nodes: dict[str, PredictedNode] = {}
    for idx, step in enumerate(steps):
        key = norm_role(step.role)
        if key in nodes:
            warnings.append(f"role redefined, keeping last: {step.role!r}")
        if step.value is None:
            value = None
        elif step.value.coeff == 0:
            value = step.value.const
        else:
            value = None  # never pinned; stays incomparable
        nodes[key] = PredictedNode(
            role=key,
            display_role=step.role,
            parents=parent_roles[idx],
            value=value,
            step_index=idx,
        )

    if answer is not None:
        final = _extract_answer(answer)
    else:
        final = _extract_answer(solution)
    return ParsedTrace(
        steps=steps,
        nodes=nodes,
        final_answer=final,
        warnings=warnings,
        unknown_var=unknown_var,
        resolved_unknown=resolved,
    )


def _extract_answer(text: str) -> int | None:
    span = _ANSWER_SPAN.search(text)
    hay = span.group(1) if span else text
    hits = _INT.findall(hay)
    if span is not None and hits:
        return int(hits[0])
    return int(hits[-1]) if hits else None
