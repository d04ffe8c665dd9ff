"""
Textual models: definitions, networks, knowledge sequences and queries.

The concrete syntax avoids unicode: `sleep.P` for σ.P, `out(t).P` for a
broadcast, `in(x).P timeout Q` for a receive with timeout, `choice { tau.P
| tau.Q } timeout R` for internal choice, `if t = u then P else Q` for a
match and `let x = rule(t, ..) in P else Q` for a deduction. Identifiers in
terms are variables when bound by a parameter, an input or a `let`, chain
keys when they look like `kc_3`, and atoms otherwise.

Parsing yields a SourceModel whose networks carry the definitions they
reach; `emit` prints the canonical form, and parsing that text gives back
an equal model.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from .errors import DslSyntaxError, ResolutionError, StructuralError
from .messages import (
    BOT,
    CHAIN_KEY,
    App,
    Atom,
    ChainKey,
    Term,
    Var,
    get_rule,
    number,
    serialize,
)
from .syntax import (
    NIL,
    Bang,
    Call,
    Deduce,
    Match,
    Network,
    Nil,
    Node,
    Process,
    ProcessDef,
    RcvTimeout,
    Sleep,
    SumTimeout,
    calls_in,
)
from .protocols import build
from .tgndc import KnowledgeSequence

logger = logging.getLogger(__name__)

GRAMMAR = r"""
start: _item*

_item: definition | network | phi | param | use | use_protocol | query

definition: "def" NAME "(" [names] ")" "=" proc
names: NAME ("," NAME)*

?proc: "nil"                                              -> nil
     | "out" "(" term ")" "." proc                        -> bang
     | "in" "(" NAME ")" "." proc "timeout" proc          -> receive
     | "choice" "{" branch ("|" branch)* "}" "timeout" proc -> choice
     | "sleep" "." proc                                   -> sleep
     | "if" term "=" term "then" proc "else" proc         -> match
     | "let" NAME "=" NAME "(" terms ")" "in" proc "else" proc -> deduce
     | NAME "(" [terms] ")"                               -> call
     | "(" proc ")"

branch: "tau" "." proc
terms: term ("," term)*

?term: NAME "(" terms ")"                                 -> app
     | NAME                                               -> name
     | INT                                                -> num

network: "network" NAME "{" node* "}"
node: "node" NAME "[" proc "]" "nbr" "{" [names] "}"

phi: "phi" NAME [RECORDED] "{" slot* "}"
slot: "slot" INT "{" [terms] "}"

param: "param" NAME "=" INT
use: "use" STRING
use_protocol: "use" "protocol" STRING ["variant" STRING] "as" NAME ["with" bindings]
bindings: binding ("," binding)*
binding: NAME "=" (INT | NAME)

query: "check" "tgndc" part+ "phi" NAME limits           -> tgndc_query
     | "check" "sim" NAME "spec" NAME limits             -> sim_query
     | "check" "explore" NAME limits                     -> explore_query
     | "check" "attack" STRING limits                    -> attack_query
part: "part" NAME "spec" NAME "observe" "{" [names] "}" "attackers" "{" [names] "}"
limits: ["bound" INT] ["depth" INT] ["candidates" INT]

RECORDED: "recorded"
NAME: /[A-Za-z_][A-Za-z0-9_]*/
COMMENT: /#[^\n]*/

%import common.INT
%import common.ESCAPED_STRING -> STRING
%import common.WS
%ignore WS
%ignore COMMENT
"""

_PARSER = Lark(
    GRAMMAR,
    parser="lalr",
    start=["start", "term"],
    propagate_positions=True,
    maybe_placeholders=True,
)


# =============================================================================
# Model
# =============================================================================

@dataclass(frozen=True)
class QueryPart:
    system: str
    spec: str
    observe: Tuple[str, ...] = ()
    attackers: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Query:
    """A check requested by a source file; `line` is kept for diagnostics only."""
    kind: str
    subject: str = ""
    spec: str = ""
    parts: Tuple[QueryPart, ...] = ()
    phi: str = ""
    bound: Optional[int] = None
    depth: Optional[int] = None
    candidates: Optional[int] = None
    line: int = field(default=0, compare=False)


@dataclass
class SourceModel:
    defs: Dict[str, ProcessDef] = field(default_factory=dict)
    networks: Dict[str, Network] = field(default_factory=dict)
    phis: Dict[str, KnowledgeSequence] = field(default_factory=dict)
    queries: List[Query] = field(default_factory=list)
    params: Dict[str, int] = field(default_factory=dict)
    locations: Dict[str, int] = field(default_factory=dict, compare=False)

    def network(self, name: str) -> Network:
        if name not in self.networks:
            raise ResolutionError(f"unknown network {name}")
        return self.networks[name]

    def knowledge(self, name: str) -> KnowledgeSequence:
        if name not in self.phis:
            raise ResolutionError(f"unknown knowledge sequence {name}")
        return self.phis[name]


# =============================================================================
# Parse tree to raw items
# =============================================================================

@v_args(inline=True)
class _Build(Transformer):
    """Turns the parse tree into processes with every term identifier as a Var."""

    def nil(self):
        return NIL

    def bang(self, payload, cont):
        return Bang(payload, cont)

    def receive(self, binder, body, timeout):
        return RcvTimeout(str(binder), body, timeout)

    def choice(self, *items):
        return SumTimeout(tuple(items[:-1]), items[-1])

    def branch(self, proc):
        return proc

    def sleep(self, cont):
        return Sleep(cont)

    def match(self, left, right, then, else_):
        return Match(left, right, then, else_)

    def deduce(self, binder, rule, premises, then, else_):
        definition = get_rule(str(rule))
        if len(premises) != definition.arity:
            raise StructuralError(f"rule {rule} takes {definition.arity} premise(s), got {len(premises)}")
        return Deduce(tuple(premises), str(rule), str(binder), then, else_)

    def call(self, name, args):
        return Call(str(name), tuple(args or ()))

    def terms(self, *items):
        return list(items)

    def names(self, *items):
        return tuple(str(item) for item in items)

    def app(self, ctor, args):
        return App(str(ctor), tuple(args))

    def name(self, token):
        return Var(str(token))

    def num(self, token):
        return number(int(token))

    @v_args(meta=True, inline=True)
    def definition(self, meta, name, params, body):
        return ("def", meta.line, str(name), params or (), body)

    @v_args(meta=True, inline=True)
    def network(self, meta, name, *nodes):
        return ("network", meta.line, str(name), nodes)

    def node(self, name, proc, neighbors):
        return (str(name), proc, neighbors or ())

    @v_args(meta=True, inline=True)
    def phi(self, meta, name, recorded, *slots):
        return ("phi", meta.line, str(name), "recorded" if recorded else "constant", slots)

    def slot(self, index, items):
        return (int(index), items or [])

    @v_args(meta=True, inline=True)
    def param(self, meta, name, value):
        return ("param", meta.line, str(name), int(value))

    @v_args(meta=True, inline=True)
    def use(self, meta, path):
        return ("use", meta.line, _unquote(path))

    @v_args(meta=True, inline=True)
    def use_protocol(self, meta, protocol, variant, alias, bindings):
        return ("protocol", meta.line, _unquote(protocol), _unquote(variant) if variant else None,
                str(alias), bindings or ())

    def bindings(self, *items):
        return tuple(items)

    def binding(self, name, value):
        return (str(name), str(value))

    def limits(self, bound, depth, candidates):
        return tuple(None if value is None else int(value) for value in (bound, depth, candidates))

    def part(self, system, spec, observe, attackers):
        return QueryPart(str(system), str(spec), observe or (), attackers or ())

    @v_args(meta=True, inline=True)
    def tgndc_query(self, meta, *items):
        *parts, phi, (bound, depth, candidates) = items
        return ("query", meta.line, Query("tgndc", parts=tuple(parts), phi=str(phi), bound=bound,
                                          depth=depth, candidates=candidates, line=meta.line))

    @v_args(meta=True, inline=True)
    def sim_query(self, meta, subject, spec, limits):
        bound, depth, candidates = limits
        return ("query", meta.line, Query("sim", str(subject), str(spec), bound=bound, line=meta.line))

    @v_args(meta=True, inline=True)
    def explore_query(self, meta, subject, limits):
        return ("query", meta.line, Query("explore", str(subject), bound=limits[0], line=meta.line))

    @v_args(meta=True, inline=True)
    def attack_query(self, meta, subject, limits):
        return ("query", meta.line, Query("attack", _unquote(subject), bound=limits[0], line=meta.line))

    def start(self, *items):
        return list(items)


def _unquote(token) -> str:
    return str(token)[1:-1]


def _parse_tree(text: str, start: str = "start"):
    try:
        tree = _PARSER.parse(text, start=start)
        return _Build().transform(tree)
    except VisitError as exc:
        raise exc.orig_exc
    except UnexpectedInput as exc:
        raise DslSyntaxError(_describe(exc), exc.line, exc.column)


def _describe(exc: UnexpectedInput) -> str:
    if isinstance(exc, UnexpectedToken):
        if exc.token.type == "$END":
            return "unexpected end of input"
        return f"unexpected {exc.token.value!r}"
    if isinstance(exc, UnexpectedCharacters):
        return f"unexpected character {exc.char!r}"
    if isinstance(exc, UnexpectedEOF):
        return "unexpected end of input"
    return "syntax error"


# =============================================================================
# Scoping
# =============================================================================

def constant(name: str) -> Term:
    """The constant an unbound identifier denotes."""
    if name == BOT.name:
        return BOT
    found = CHAIN_KEY.match(name)
    if found:
        return ChainKey(found.group(1), int(found.group(2)))
    return Atom(name)


def _close_term(term: Term, bound: FrozenSet[str]) -> Term:
    if isinstance(term, Var):
        return term if term.name in bound else constant(term.name)
    if isinstance(term, App):
        return App(term.ctor, tuple(_close_term(arg, bound) for arg in term.args))
    return term


def _close(proc: Process, bound: FrozenSet[str]) -> Process:
    if isinstance(proc, Bang):
        return Bang(_close_term(proc.payload, bound), _close(proc.cont, bound))
    if isinstance(proc, RcvTimeout):
        return RcvTimeout(proc.binder, _close(proc.body, bound | {proc.binder}), _close(proc.timeout, bound))
    if isinstance(proc, SumTimeout):
        return SumTimeout(tuple(_close(b, bound) for b in proc.branches), _close(proc.timeout, bound))
    if isinstance(proc, Sleep):
        return Sleep(_close(proc.cont, bound))
    if isinstance(proc, Match):
        return Match(_close_term(proc.left, bound), _close_term(proc.right, bound),
                     _close(proc.then, bound), _close(proc.else_, bound))
    if isinstance(proc, Deduce):
        return Deduce(tuple(_close_term(t, bound) for t in proc.premises), proc.rule, proc.binder,
                      _close(proc.then, bound | {proc.binder}), _close(proc.else_, bound))
    if isinstance(proc, Call):
        return Call(proc.name, tuple(_close_term(t, bound) for t in proc.args))
    return proc


def _check_calls(proc: Process, defs: Mapping[str, ProcessDef], where: str) -> None:
    for found in calls_in(proc):
        definition = defs.get(found.name)
        if definition is None:
            raise ResolutionError(f"{where}: undefined process {found.name}")
        if len(definition.params) != len(found.args):
            raise StructuralError(
                f"{where}: {found.name} takes {len(definition.params)} argument(s), got {len(found.args)}"
            )


def reachable_defs(m: Network, defs: Optional[Mapping[str, ProcessDef]] = None) -> Dict[str, ProcessDef]:
    """Definitions reachable from the node processes, in name order."""
    table = m.defs if defs is None else defs
    seen: Set[str] = set()
    pending = [call.name for node in m.nodes for call in calls_in(node.proc)]
    while pending:
        name = pending.pop()
        if name in seen or name not in table:
            continue
        seen.add(name)
        pending.extend(call.name for call in calls_in(table[name].body))
    return {name: table[name] for name in sorted(seen)}


def trimmed(m: Network) -> Network:
    """The network with only the definitions its nodes reach."""
    return Network(m.nodes, reachable_defs(m))


# =============================================================================
# Parsing and resolution
# =============================================================================

def parse_term(text: str) -> Term:
    """
    Parse a closed term such as `pair(req,pair(m,n0))`.

    Raises:
        DslSyntaxError: if the text is not a term.
    """
    return _close_term(_parse_tree(text, "term"), frozenset())


def parse(text: str, base_dir: Optional[Path] = None) -> SourceModel:
    """
    Parse and resolve a source text.

    Args:
        text: Source in the modelling language.
        base_dir: Directory `use "file"` paths are relative to.

    Returns:
        The resolved model.

    Raises:
        DslSyntaxError: on a syntax error, with line and column.
        ResolutionError: on an undefined name or a duplicate declaration.
        StructuralError: on an arity mismatch.
    """
    return _Resolver(base_dir or Path.cwd()).resolve(text, ())


def load(path: Path) -> SourceModel:
    """Parse a source file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ResolutionError(f"cannot read {path}: {exc.strerror}")
    return _Resolver(path.parent).resolve(text, (path.resolve(),))


class _Resolver:
    def __init__(self, base_dir: Path):
        self.base_dir = base_dir
        self.model = SourceModel()
        self.raw_networks: List[Tuple[int, str, tuple]] = []
        self.imported: Dict[str, Network] = {}

    def resolve(self, text: str, stack: Tuple[Path, ...]) -> SourceModel:
        self._collect(text, stack)
        model = self.model
        for name, definition in model.defs.items():
            _check_calls(definition.body, model.defs, f"definition {name}")
        for line, name, nodes in self.raw_networks:
            model.networks[name] = self._network(name, nodes, line)
        for name, m in self.imported.items():
            model.networks[name] = m
        for query in model.queries:
            self._check_query(query)
        logger.debug("resolved %d definitions, %d networks, %d queries",
                     len(model.defs), len(model.networks), len(model.queries))
        return model

    def _collect(self, text: str, stack: Tuple[Path, ...]) -> None:
        for item in _parse_tree(text):
            kind, line = item[0], item[1]
            if kind == "def":
                _, _, name, params, body = item
                self._declare(name, line, "definition")
                if len(set(params)) != len(params):
                    raise StructuralError(f"line {line}: repeated parameter in {name}")
                self.model.defs[name] = ProcessDef(name, tuple(params), _close(body, frozenset(params)))
            elif kind == "network":
                self._declare(item[2], line, "network")
                self.raw_networks.append((line, item[2], item[3]))
            elif kind == "phi":
                _, _, name, extension, slots = item
                self._declare(name, line, "knowledge sequence")
                self.model.phis[name] = _knowledge(name, extension, slots, line)
            elif kind == "param":
                self._declare(item[2], line, "parameter")
                self.model.params[item[2]] = item[3]
            elif kind == "use":
                self._include(item[2], line, stack)
            elif kind == "protocol":
                self._use_protocol(*item[1:])
            else:
                self.model.queries.append(item[2])

    def _declare(self, name: str, line: int, what: str) -> None:
        key = f"{what}:{name}"
        if key in self.model.locations:
            raise ResolutionError(
                f"line {line}: {what} {name} already declared on line {self.model.locations[key]}"
            )
        self.model.locations[key] = line

    def _include(self, relative: str, line: int, stack: Tuple[Path, ...]) -> None:
        path = (self.base_dir / relative).resolve()
        if path in stack:
            raise ResolutionError(f"line {line}: circular use of {relative}")
        try:
            text = path.read_text()
        except OSError as exc:
            raise ResolutionError(f"line {line}: cannot read {relative}: {exc.strerror}")
        outer = self.base_dir
        self.base_dir = path.parent
        try:
            self._collect(text, stack + (path,))
        finally:
            self.base_dir = outer

    def _use_protocol(self, line: int, protocol: str, variant: Optional[str], alias: str, bindings) -> None:
        params = {}
        for key, value in bindings:
            if value.isdigit():
                params[key] = int(value)
            elif value in self.model.params:
                params[key] = self.model.params[value]
            else:
                raise ResolutionError(f"line {line}: unknown parameter {value}")
        instance = build(protocol, variant, **params)
        for key, m in instance.networks.items():
            name = f"{alias}_{key}"
            self._declare(name, line, "network")
            for def_name, definition in reachable_defs(m).items():
                existing = self.model.defs.get(def_name)
                if existing is not None and existing != definition:
                    raise ResolutionError(f"line {line}: {alias} redefines {def_name}")
                self.model.defs[def_name] = definition
            self.imported[name] = trimmed(m)
        name = f"{alias}_knowledge"
        self._declare(name, line, "knowledge sequence")
        self.model.phis[name] = instance.knowledge

    def _network(self, name: str, nodes, line: int) -> Network:
        built = []
        for node_name, proc, neighbors in nodes:
            closed = _close(proc, frozenset())
            _check_calls(closed, self.model.defs, f"network {name}, node {node_name}")
            built.append(Node(node_name, closed, frozenset(neighbors)))
        names = [n.name for n in built]
        if len(set(names)) != len(names):
            raise StructuralError(f"line {line}: network {name} repeats a node name")
        return trimmed(Network(tuple(built), self.model.defs))

    def _check_query(self, query: Query) -> None:
        where = f"line {query.line}"
        referenced = [query.subject, query.spec] if query.kind in ("sim", "explore") else []
        for part in query.parts:
            referenced.extend([part.system, part.spec])
        for name in referenced:
            if name and name not in self.model.networks:
                raise ResolutionError(f"{where}: unknown network {name}")
        if query.phi and query.phi not in self.model.phis:
            raise ResolutionError(f"{where}: unknown knowledge sequence {query.phi}")


def _knowledge(name: str, extension: str, slots, line: int) -> KnowledgeSequence:
    indices = [index for index, _ in slots]
    if indices != list(range(len(indices))):
        raise StructuralError(f"line {line}: slots of {name} must be numbered 0, 1, ... in order")
    deltas = [[_close_term(term, frozenset()) for term in items] for _, items in slots]
    if not deltas:
        deltas = [[]]
    return KnowledgeSequence.from_deltas(deltas, extension)


# =============================================================================
# Emission
# =============================================================================

def emit_term(term: Term) -> str:
    return serialize(term)


def _args(terms: Sequence[Term]) -> str:
    return ", ".join(emit_term(t) for t in terms)


def emit_process(proc: Process, depth: int = 0) -> str:
    """Canonical text of a process; nested continuations are indented."""
    pad = "  " * depth
    if isinstance(proc, Nil):
        return "nil"
    if isinstance(proc, Bang):
        return f"out({emit_term(proc.payload)}).{emit_process(proc.cont, depth)}"
    if isinstance(proc, Sleep):
        return f"sleep.{emit_process(proc.cont, depth)}"
    if isinstance(proc, Call):
        return f"{proc.name}({_args(proc.args)})"
    if isinstance(proc, RcvTimeout):
        return (f"in({proc.binder}).{emit_process(proc.body, depth + 1)}\n"
                f"{pad}timeout {emit_process(proc.timeout, depth)}")
    if isinstance(proc, SumTimeout):
        branches = f"\n{pad}  | ".join(f"tau.{emit_process(b, depth + 2)}" for b in proc.branches)
        return f"choice {{\n{pad}    {branches}\n{pad}}} timeout {emit_process(proc.timeout, depth)}"
    if isinstance(proc, Match):
        return (f"if {emit_term(proc.left)} = {emit_term(proc.right)} then\n"
                f"{pad}  {emit_process(proc.then, depth + 1)}\n"
                f"{pad}else {emit_process(proc.else_, depth)}")
    if isinstance(proc, Deduce):
        return (f"let {proc.binder} = {proc.rule}({_args(proc.premises)}) in\n"
                f"{pad}  {emit_process(proc.then, depth + 1)}\n"
                f"{pad}else {emit_process(proc.else_, depth)}")
    raise StructuralError(f"cannot emit {type(proc).__name__}")


def _names(names) -> str:
    return "{" + ", ".join(sorted(names)) + "}"


def _emit_query(query: Query) -> str:
    limits = []
    for keyword, value in (("bound", query.bound), ("depth", query.depth), ("candidates", query.candidates)):
        if value is not None:
            limits.append(f"{keyword} {value}")
    tail = (" " + " ".join(limits)) if limits else ""
    if query.kind == "tgndc":
        lines = ["check tgndc"]
        for part in query.parts:
            lines.append(f"  part {part.system} spec {part.spec} "
                         f"observe {_names(part.observe)} attackers {{{', '.join(part.attackers)}}}")
        lines.append(f"  phi {query.phi}{tail}")
        return "\n".join(lines)
    if query.kind == "sim":
        return f"check sim {query.subject} spec {query.spec}{tail}"
    if query.kind == "attack":
        return f'check attack "{query.subject}"{tail}'
    return f"check explore {query.subject}{tail}"


def emit(model: SourceModel) -> str:
    """
    Canonical source text.

    Definitions come from the model and from every network's own table; the
    output starts with parameters, then definitions in name order, networks,
    knowledge sequences and queries in model order.

    Raises:
        StructuralError: if two tables define one name differently.
    """
    defs = dict(model.defs)
    for m in model.networks.values():
        for name, definition in reachable_defs(m).items():
            if name in defs and defs[name] != definition:
                raise StructuralError(f"conflicting definitions for {name}")
            defs[name] = definition
    blocks = [f"param {name} = {value}" for name, value in model.params.items()]
    for name in sorted(defs):
        definition = defs[name]
        blocks.append(f"def {name}({', '.join(definition.params)}) =\n  {emit_process(definition.body, 1)}")
    for name, m in model.networks.items():
        lines = [f"network {name} {{"]
        for node in m.nodes:
            lines.append(f"  node {node.name} [ {emit_process(node.proc, 2)} ] nbr {_names(node.neighbors)}")
        lines.append("}")
        blocks.append("\n".join(lines))
    for name, phi in model.phis.items():
        header = f"phi {name} recorded {{" if phi.extension == "recorded" else f"phi {name} {{"
        lines = [header]
        for index, delta in enumerate(phi.deltas()):
            lines.append(f"  slot {index} {{ {', '.join(emit_term(t) for t in delta)} }}")
        lines.append("}")
        blocks.append("\n".join(lines))
    blocks.extend(_emit_query(query) for query in model.queries)
    return "\n\n".join(blocks) + "\n"


def instance_model(instance) -> SourceModel:
    """
    A protocol instance as a source model: its networks, its knowledge
    sequence and, when it has parts, the compositional query over them.
    """
    model = SourceModel()
    for name, m in instance.networks.items():
        model.networks[name] = trimmed(m)
    model.phis["knowledge"] = instance.knowledge
    if instance.parts:
        parts = tuple(
            QueryPart(part.name, f"{part.name}_spec", tuple(sorted(part.observed)), part.attackers)
            for part in instance.parts
        )
        model.queries.append(Query("tgndc", parts=parts, phi="knowledge"))
    return model


def instance_source(instance) -> str:
    return emit(instance_model(instance))
