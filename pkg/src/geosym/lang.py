"""Parser and printer for the parenthesized domain/problem language (.htn files).

Forms:
    (operator NAME (PARAMS) :pre (...) :add (...) :del (...) [:gtp TASK])
    (method NAME (TASK ARGS) :pre (...) :body ((T1 ...) (T2 ...)))
    (problem :objects ((b1 book) ...) [:consts ((cost 5))] :init (...) :tasks (...))

Variables are ``?x``; an evaluable literal is ``(? pred args)``; universals are
``(forall (?b book) (not (...)))``; numeric comparators ``(>= e e)`` / ``(< e e)``
and arithmetic ``(+ - *)`` are built in.
"""

from __future__ import annotations

from dataclasses import dataclass

from .symbolic import (
    Comparison,
    DomainError,
    Forall,
    Formula,
    HtnDomain,
    HtnProblem,
    Literal,
    Method,
    Operator,
    State,
    TypedObjects,
    _expr_str,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


@dataclass
class _Sym:
    text: str
    line: int
    col: int

    def __repr__(self) -> str:
        return self.text


def _tokenize(text: str):
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield (ch, line, col)
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < len(text) and text[i] not in " \t\r\n();":
                i += 1
                col += 1
            yield (_Sym(text[start:i], line, start_col), line, start_col)


def _read_all(text: str):
    """Read every top-level s-expression, keeping source positions on atoms."""
    stack: list[list] = []
    top: list = []
    last = (1, 1)
    for tok, line, col in _tokenize(text):
        last = (line, col)
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            done = stack.pop()
            (stack[-1] if stack else top).append(done)
        else:
            if not stack:
                raise ParseError(f"atom {tok.text!r} outside any form", line, col)
            stack[-1].append(tok)
    if stack:
        raise ParseError("unclosed '('", *last)
    return top


def _pos(node) -> tuple[int, int]:
    while isinstance(node, list):
        if not node:
            return (0, 0)
        node = node[0]
    return (node.line, node.col)


def _sym(node, what: str) -> str:
    if not isinstance(node, _Sym):
        raise ParseError(f"expected {what}, got a list", *_pos(node))
    return node.text


def _parse_expr(node):
    """Argument expression: symbol, or (+|-|* a b)."""
    if isinstance(node, _Sym):
        return node.text
    if (
        isinstance(node, list)
        and len(node) == 3
        and isinstance(node[0], _Sym)
        and node[0].text in ("+", "-", "*")
    ):
        return (node[0].text, _parse_expr(node[1]), _parse_expr(node[2]))
    raise ParseError("expected term or arithmetic expression", *_pos(node))


def _parse_condition(node):
    if not isinstance(node, list) or not node:
        raise ParseError("expected a condition form", *_pos(node))
    head = node[0]
    if isinstance(head, _Sym):
        if head.text == "not":
            if len(node) != 2:
                raise ParseError("(not ...) takes one condition", head.line, head.col)
            inner = _parse_condition(node[1])
            if not isinstance(inner, Literal):
                raise ParseError("(not ...) applies to literals", head.line, head.col)
            return inner.negate()
        if head.text == "forall":
            if len(node) < 3 or not isinstance(node[1], list) or len(node[1]) != 2:
                raise ParseError(
                    "(forall (?var type) cond...) malformed", head.line, head.col
                )
            var = _sym(node[1][0], "variable")
            vartype = _sym(node[1][1], "type")
            body = tuple(_parse_condition(c) for c in node[2:])
            return Forall(var, vartype, body)
        if head.text in (">=", "<"):
            if len(node) != 3:
                raise ParseError(f"({head.text} a b) malformed", head.line, head.col)
            return Comparison(head.text, _parse_expr(node[1]), _parse_expr(node[2]))
        if head.text == "?":
            if len(node) < 2:
                raise ParseError("(? pred args...) malformed", head.line, head.col)
            pred = _sym(node[1], "predicate name")
            args = tuple(_parse_expr(a) for a in node[2:])
            return Literal(pred, args, evaluable=True)
        pred = head.text
        args = tuple(_parse_expr(a) for a in node[1:])
        return Literal(pred, args)
    raise ParseError("condition must start with a symbol", *_pos(node))


def _parse_formula(node) -> Formula:
    if not isinstance(node, list):
        raise ParseError("expected a parenthesized conjunction", *_pos(node))
    return tuple(_parse_condition(c) for c in node)


def _parse_literal_list(node) -> tuple[Literal, ...]:
    out = []
    for item in node:
        lit = _parse_condition(item)
        if not isinstance(lit, Literal):
            raise ParseError("effect lists contain literals only", *_pos(item))
        out.append(lit)
    return tuple(out)


def _keyword_sections(items, line, col) -> dict[str, object]:
    sections: dict[str, object] = {}
    i = 0
    while i < len(items):
        key = items[i]
        if not isinstance(key, _Sym) or not key.text.startswith(":"):
            raise ParseError(f"expected :keyword, got {key!r}", *_pos(key))
        if i + 1 >= len(items):
            raise ParseError(f"{key.text} missing its value", key.line, key.col)
        if key.text in sections:
            raise ParseError(f"duplicate {key.text}", key.line, key.col)
        sections[key.text] = items[i + 1]
        i += 2
    return sections


def _parse_operator(form) -> Operator:
    line, col = _pos(form)
    if len(form) < 3 or not isinstance(form[2], list):
        raise ParseError("(operator NAME (params) ...) malformed", line, col)
    name = _sym(form[1], "operator name")
    params = tuple(_sym(p, "parameter") for p in form[2])
    sections = _keyword_sections(form[3:], line, col)
    pre = _parse_formula(sections.get(":pre", []))
    adds = _parse_literal_list(sections.get(":add", []))
    dels = _parse_literal_list(sections.get(":del", []))
    gtp = None
    if ":gtp" in sections:
        gtp = _sym(sections[":gtp"], "task name")
    unknown = set(sections) - {":pre", ":add", ":del", ":gtp"}
    if unknown:
        raise ParseError(f"unknown operator keys {sorted(unknown)}", line, col)
    return Operator(name, params, pre, adds, dels, gtp)


def _parse_task_instance(node) -> tuple[str, tuple]:
    if not isinstance(node, list) or not node:
        raise ParseError("task instance must be (NAME args...)", *_pos(node))
    name = _sym(node[0], "task name")
    return (name, tuple(_parse_expr(a) for a in node[1:]))


def _parse_method(form, rank: int) -> Method:
    line, col = _pos(form)
    if len(form) < 3 or not isinstance(form[2], list) or not form[2]:
        raise ParseError("(method NAME (TASK args) ...) malformed", line, col)
    name = _sym(form[1], "method name")
    task = _sym(form[2][0], "task name")
    task_args = tuple(_sym(a, "task argument") for a in form[2][1:])
    sections = _keyword_sections(form[3:], line, col)
    pre = _parse_formula(sections.get(":pre", []))
    body_node = sections.get(":body", [])
    body = tuple(_parse_task_instance(t) for t in body_node)
    unknown = set(sections) - {":pre", ":body"}
    if unknown:
        raise ParseError(f"unknown method keys {sorted(unknown)}", line, col)
    return Method(name, task, task_args, pre, body, rank)


def parse_domain(text: str) -> HtnDomain:
    """Parse a domain file; validation errors name the offending symbol."""
    operators: list[Operator] = []
    methods: list[Method] = []
    for form in _read_all(text):
        if not form or not isinstance(form[0], _Sym):
            raise ParseError("expected (operator ...) or (method ...)", *_pos(form))
        kind = form[0].text
        if kind == "operator":
            operators.append(_parse_operator(form))
        elif kind == "method":
            methods.append(_parse_method(form, rank=len(methods)))
        else:
            raise ParseError(f"unknown top-level form {kind!r}", *_pos(form))
    domain = HtnDomain(tuple(operators), tuple(methods))
    try:
        domain.validate()
    except DomainError as exc:
        raise ParseError(str(exc), 0, 0) from exc
    return domain


def parse_problem(text: str) -> HtnProblem:
    forms = _read_all(text)
    if len(forms) != 1 or not forms[0] or _sym(forms[0][0], "form") != "problem":
        raise ParseError("expected a single (problem ...) form", 1, 1)
    form = forms[0]
    sections = _keyword_sections(form[1:], *_pos(form))
    unknown = set(sections) - {":objects", ":init", ":tasks", ":consts"}
    if unknown:
        raise ParseError(f"unknown problem keys {sorted(unknown)}", *_pos(form))

    by_type: dict[str, list[str]] = {}
    for pair in sections.get(":objects", []):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError("object declarations are (name type)", *_pos(pair))
        name = _sym(pair[0], "object name")
        typename = _sym(pair[1], "type name")
        by_type.setdefault(typename, []).append(name)
    objects = TypedObjects({t: tuple(sorted(ns)) for t, ns in by_type.items()})

    consts: dict[str, int] = {}
    for pair in sections.get(":consts", []):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError("constant declarations are (name value)", *_pos(pair))
        cname = _sym(pair[0], "constant name")
        try:
            consts[cname] = int(_sym(pair[1], "integer"))
        except ValueError:
            raise ParseError(f"constant {cname} needs an integer value", *_pos(pair))

    init_lits = []
    for item in sections.get(":init", []):
        lit = _parse_condition(item)
        if not isinstance(lit, Literal) or not lit.positive or lit.evaluable:
            raise ParseError("init facts are positive ordinary literals", *_pos(item))
        init_lits.append(lit)
    tasks = tuple(_parse_task_instance(t) for t in sections.get(":tasks", []))
    try:
        init = State(init_lits)
    except DomainError as exc:
        raise ParseError(str(exc), 0, 0) from exc
    return HtnProblem(tasks, init, objects, consts)


# ---------------------------------------------------------------------------
# Printing (round-trip partner of the parser)


def _print_formula(formula: Formula) -> str:
    return "(" + " ".join(str(c) for c in formula) + ")"


def print_operator(op: Operator) -> str:
    parts = [
        f"(operator {op.name} ({' '.join(op.params)})",
        f"  :pre {_print_formula(op.precondition)}",
        f"  :add ({' '.join(str(l) for l in op.adds)})",
        f"  :del ({' '.join(str(l) for l in op.deletes)})",
    ]
    if op.gtp_task:
        parts.append(f"  :gtp {op.gtp_task}")
    return "\n".join(parts) + ")"


def print_method(m: Method) -> str:
    body = " ".join(
        "(" + " ".join([t] + [_expr_str(a) for a in args]) + ")" for t, args in m.body
    )
    return (
        f"(method {m.name} ({' '.join((m.task,) + m.task_args)})\n"
        f"  :pre {_print_formula(m.precondition)}\n"
        f"  :body ({body}))"
    )


def print_domain(domain: HtnDomain) -> str:
    chunks = [print_method(m) for m in domain.methods]
    chunks += [print_operator(o) for o in domain.operators]
    return "\n\n".join(chunks) + "\n"


def print_problem(problem: HtnProblem) -> str:
    objs = " ".join(
        f"({name} {typename})"
        for typename in sorted(problem.objects.by_type)
        for name in problem.objects.by_type[typename]
    )
    consts = " ".join(f"({k} {v})" for k, v in sorted(problem.consts.items()))
    init = " ".join(sorted(str(l) for l in problem.init.literals))
    tasks = " ".join(
        "(" + " ".join([t] + list(args)) + ")" for t, args in problem.tasks
    )
    out = [f"(problem", f"  :objects ({objs})"]
    if consts:
        out.append(f"  :consts ({consts})")
    out.append(f"  :init ({init})")
    out.append(f"  :tasks ({tasks}))")
    return "\n".join(out) + "\n"
