"""Bipartite property graph over drugs and side effects.

The graph holds Drug and SideEffect nodes joined by directed
MAY_CAUSE_SIDE_EFFECT edges, plus a parser and evaluator for the small
Cypher subset the query pipeline emits:

    MATCH (s)-[r:EDGE_LABEL]->(t)
    WHERE s.name = 'x' AND t.name = 'y'
    RETURN s, r, t

Node patterns may carry inline labels and property maps,
``(d:Drug {name: 'metformin'})``, which desugar into WHERE equality
predicates. Anything beyond a single-hop MATCH with conjunctive equality
predicates is rejected with a position-carrying syntax error, never
silently ignored. The edge label matches case-insensitively because the
sources it comes from spell it several ways.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import CypherSyntaxError, UnknownProperty
from .kb import KnowledgeBase

EDGE_LABEL = "MAY_CAUSE_SIDE_EFFECT"
DRUG_LABEL = "Drug"
SE_LABEL = "SideEffect"

_NODE_LABELS = {DRUG_LABEL.lower(): DRUG_LABEL, SE_LABEL.lower(): SE_LABEL}
_KEYWORDS = {"MATCH", "WHERE", "AND", "RETURN"}


@dataclass(frozen=True)
class Node:
    node_id: str
    label: str
    properties: dict[str, str]

    @property
    def name(self) -> str:
        return self.properties["name"]


@dataclass(frozen=True)
class Edge:
    source_id: str
    label: str
    target_id: str


@dataclass(frozen=True)
class PropertyGraph:
    nodes: dict[str, Node]
    out_edges: dict[str, tuple[Edge, ...]]
    name_index: dict[tuple[str, str], str]

    def node_by_name(self, label: str, name: str) -> Node | None:
        node_id = self.name_index.get((label, name))
        return self.nodes[node_id] if node_id is not None else None

    def edges(self) -> Iterator[Edge]:
        """All edges ordered by (source name, target name)."""
        for source_id in sorted(
            self.out_edges, key=lambda n: self.nodes[n].name
        ):
            yield from self.out_edges[source_id]

    def edge_count(self) -> int:
        return sum(len(v) for v in self.out_edges.values())

    def has_edge(self, drug_name: str, se_name: str) -> bool:
        source = self.name_index.get((DRUG_LABEL, drug_name))
        if source is None:
            return False
        target = self.name_index.get((SE_LABEL, se_name))
        return target is not None and any(
            e.target_id == target for e in self.out_edges.get(source, ())
        )


def build_graph(kb: KnowledgeBase) -> PropertyGraph:
    """Project the knowledge base onto the bipartite graph."""
    nodes: dict[str, Node] = {}
    name_index: dict[tuple[str, str], str] = {}
    for drug in kb.drugs.values():
        node_id = f"drug:{drug.drug_id}"
        nodes[node_id] = Node(node_id, DRUG_LABEL, {"name": drug.name})
        name_index[(DRUG_LABEL, drug.name)] = node_id
    for term in kb.terms.values():
        node_id = f"se:{term.term_id}"
        props = {"name": term.name}
        if term.soc_class is not None:
            props["soc_class"] = term.soc_class
        nodes[node_id] = Node(node_id, SE_LABEL, props)
        name_index[(SE_LABEL, term.name)] = node_id

    out_edges: dict[str, tuple[Edge, ...]] = {}
    for drug_id, term_ids in kb.adjacency.items():
        source = f"drug:{drug_id}"
        out_edges[source] = tuple(
            Edge(source, EDGE_LABEL, f"se:{t}") for t in term_ids
        )
    return PropertyGraph(nodes=nodes, out_edges=out_edges, name_index=name_index)


# --- Cypher subset ----------------------------------------------------------


@dataclass(frozen=True)
class CypherQuery:
    source_var: str
    edge_var: str
    target_var: str
    edge_label: str
    where_clauses: tuple[tuple[str, str, str], ...]  # (var, property, literal)
    return_vars: tuple[str, ...]

    def canonical(self) -> tuple:
        """Identity modulo variable naming, for AST-equivalence checks."""
        role = {self.source_var: "s", self.edge_var: "r", self.target_var: "t"}
        return (
            self.edge_label.upper(),
            tuple(sorted((role[v], p, lit) for v, p, lit in self.where_clauses)),
            tuple(role[v] for v in self.return_vars),
        )


@dataclass
class _Token:
    kind: str  # ident | string | punct | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
            continue
        if ch == "'":
            j = i + 1
            out = []
            while j < n:
                if text[j] == "\\":
                    if j + 1 >= n:
                        raise CypherSyntaxError(j, "escape sequence")
                    out.append(text[j + 1])
                    j += 2
                    continue
                if text[j] == "'":
                    break
                out.append(text[j])
                j += 1
            else:
                raise CypherSyntaxError(i, "closing quote")
            if j >= n:
                raise CypherSyntaxError(i, "closing quote")
            tokens.append(_Token("string", "".join(out), i))
            i = j + 1
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == ">":
            tokens.append(_Token("punct", "->", i))
            i += 2
            continue
        if ch in "()[]{}-,:.=":
            tokens.append(_Token("punct", ch, i))
            i += 1
            continue
        raise CypherSyntaxError(i, f"unexpected character {ch!r}")
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self, kind: str, text: str | None = None) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != kind or (text is not None and tok.text != text):
            raise CypherSyntaxError(tok.pos, text or kind)
        self.pos += 1
        return tok

    def keyword(self, word: str) -> None:
        tok = self.take("ident")
        if tok.text.upper() != word:
            raise CypherSyntaxError(tok.pos, word)

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.text.upper() == word

    def ident(self, what: str) -> str:
        tok = self.take("ident")
        if tok.text.upper() in _KEYWORDS:
            raise CypherSyntaxError(tok.pos, what)
        return tok.text


def parse_cypher(text: str) -> CypherQuery:
    """Parse one single-hop MATCH..WHERE..RETURN query.

    Raises CypherSyntaxError(position, expected) on anything outside the
    subset: multi-hop patterns, OR, non-equality predicates, RETURN
    expressions, undeclared variables.
    """
    if not text or not text.strip():
        raise CypherSyntaxError(0, "MATCH clause")
    p = _Parser(text)
    p.keyword("MATCH")

    src_var, src_where = _node_pattern(p, DRUG_LABEL)
    p.take("punct", "-")
    p.take("punct", "[")
    edge_var = p.ident("edge variable")
    p.take("punct", ":")
    label_tok = p.take("ident")
    if label_tok.text.upper() != EDGE_LABEL:
        raise CypherSyntaxError(label_tok.pos, f"edge label {EDGE_LABEL}")
    p.take("punct", "]")
    p.take("punct", "->")
    tgt_var, tgt_where = _node_pattern(p, SE_LABEL)

    declared = {src_var, edge_var, tgt_var}
    if len(declared) != 3:
        raise CypherSyntaxError(0, "distinct pattern variables")

    where: list[tuple[str, str, str]] = []
    where.extend((src_var, prop, lit) for _, prop, lit in src_where)
    where.extend((tgt_var, prop, lit) for _, prop, lit in tgt_where)

    if p.at_keyword("WHERE"):
        p.keyword("WHERE")
        while True:
            tok = p.peek()
            var = p.ident("variable")
            if var not in declared:
                raise CypherSyntaxError(tok.pos, "declared variable")
            p.take("punct", ".")
            prop = p.ident("property name")
            p.take("punct", "=")
            lit = p.take("string")
            where.append((var, prop, lit.text))
            if p.at_keyword("AND"):
                p.keyword("AND")
                continue
            break

    p.keyword("RETURN")
    returns = []
    while True:
        tok = p.peek()
        var = p.ident("return variable")
        if var not in declared:
            raise CypherSyntaxError(tok.pos, "declared variable")
        returns.append(var)
        if p.peek().kind == "punct" and p.peek().text == ",":
            p.take("punct", ",")
            continue
        break

    end = p.peek()
    if end.kind != "end":
        raise CypherSyntaxError(end.pos, "end of query")

    return CypherQuery(
        source_var=src_var,
        edge_var=edge_var,
        target_var=tgt_var,
        edge_label=EDGE_LABEL,
        where_clauses=tuple(where),
        return_vars=tuple(returns),
    )


def _node_pattern(
    p: _Parser, expected_label: str
) -> tuple[str, list[tuple[None, str, str]]]:
    """Parse ``(var)``, ``(var:Label)`` or ``(var:Label {k: 'v', ...})``.

    Inline property maps desugar into (None, property, literal) clauses;
    the caller substitutes the variable. A wrong-position node label (a
    SideEffect label on the edge source, or vice versa) is a structural
    error: the store only holds Drug->SideEffect edges.
    """
    p.take("punct", "(")
    var = p.ident("node variable")
    clauses: list[tuple[None, str, str]] = []
    if p.peek().kind == "punct" and p.peek().text == ":":
        p.take("punct", ":")
        tok = p.take("ident")
        label = _NODE_LABELS.get(tok.text.lower())
        if label is None:
            raise CypherSyntaxError(tok.pos, f"node label Drug or {SE_LABEL}")
        if label != expected_label:
            raise CypherSyntaxError(tok.pos, f"node label {expected_label}")
    if p.peek().kind == "punct" and p.peek().text == "{":
        p.take("punct", "{")
        while True:
            prop = p.ident("property name")
            p.take("punct", ":")
            lit = p.take("string")
            clauses.append((None, prop, lit.text))
            if p.peek().kind == "punct" and p.peek().text == ",":
                p.take("punct", ",")
                continue
            break
        p.take("punct", "}")
    p.take("punct", ")")
    return var, clauses


def execute_cypher(
    graph: PropertyGraph, query: CypherQuery
) -> list[dict[str, Node | Edge]]:
    """All (source, edge, target) triples satisfying the query predicates.

    Rows bind the query's return variables and come back ordered by
    (source name, target name). Predicates on properties nothing carries
    raise UnknownProperty rather than silently matching nothing.
    """
    src_preds: dict[str, str] = {}
    tgt_preds: dict[str, str] = {}
    for var, prop, lit in query.where_clauses:
        if var == query.edge_var:
            raise UnknownProperty(f"edges carry no property {prop!r}")
        bucket = src_preds if var == query.source_var else tgt_preds
        if prop in bucket and bucket[prop] != lit:
            return []
        bucket[prop] = lit

    for prop in list(src_preds) + list(tgt_preds):
        if not any(prop in node.properties for node in graph.nodes.values()):
            raise UnknownProperty(f"no node carries property {prop!r}")

    # Narrow by name index when an equality on name is present.
    if "name" in src_preds:
        source_id = graph.name_index.get((DRUG_LABEL, src_preds["name"]))
        candidates = [source_id] if source_id is not None else []
    else:
        candidates = sorted(graph.out_edges, key=lambda n: graph.nodes[n].name)

    rows: list[dict[str, Node | Edge]] = []
    for source_id in candidates:
        source = graph.nodes[source_id]
        if not _matches(source, src_preds):
            continue
        for edge in graph.out_edges.get(source_id, ()):
            target = graph.nodes[edge.target_id]
            if not _matches(target, tgt_preds):
                continue
            binding = {
                query.source_var: source,
                query.edge_var: edge,
                query.target_var: target,
            }
            rows.append({v: binding[v] for v in query.return_vars})

    def row_key(row: dict) -> tuple[str, str]:
        src = row.get(query.source_var)
        tgt = row.get(query.target_var)
        return (
            src.name if isinstance(src, Node) else "",
            tgt.name if isinstance(tgt, Node) else "",
        )

    rows.sort(key=row_key)
    return rows


def _matches(node: Node, preds: dict[str, str]) -> bool:
    return all(node.properties.get(k) == v for k, v in preds.items())


def escape_literal(name: str) -> str:
    return name.replace("\\", "\\\\").replace("'", "\\'")


def build_cypher_for_pair(drug_name: str, se_name: str) -> str:
    """The query text the pipeline runs for one (drug, side effect) pair."""
    return (
        "\n"
        "    MATCH (s)-[r:May_Cause_Side_Effect]->(t)\n"
        f"    WHERE s.name = '{escape_literal(drug_name)}' "
        f"AND t.name = '{escape_literal(se_name)}'\n"
        "    RETURN s, r, t\n"
        "    "
    )


# --- exports -----------------------------------------------------------------


def write_graph_jsonl(graph: PropertyGraph, path: str | Path) -> None:
    """Edge list as JSON Lines of name-projected triples."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for edge in graph.edges():
            fh.write(
                json.dumps(
                    {
                        "source": graph.nodes[edge.source_id].name,
                        "label": edge.label,
                        "target": graph.nodes[edge.target_id].name,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def write_cypher_script(graph: PropertyGraph, path: str | Path) -> None:
    """CREATE statements for loading into an external graph database."""
    lines: list[str] = []
    for node in sorted(graph.nodes.values(), key=lambda n: (n.label, n.name)):
        props = ", ".join(
            f"{k}: '{escape_literal(v)}'" for k, v in sorted(node.properties.items())
        )
        lines.append(f"CREATE (:{node.label} {{{props}}});")
    for edge in graph.edges():
        src = escape_literal(graph.nodes[edge.source_id].name)
        tgt = escape_literal(graph.nodes[edge.target_id].name)
        lines.append(
            f"MATCH (d:{DRUG_LABEL} {{name: '{src}'}}), "
            f"(s:{SE_LABEL} {{name: '{tgt}'}}) "
            f"CREATE (d)-[:{EDGE_LABEL}]->(s);"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
