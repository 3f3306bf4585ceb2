"""CSV ingestion, informant-report aggregation and graph serialization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .graph import Graph
from .model import NodeData


class DataError(ValueError):
    """Input data that cannot be turned into a valid network or attribute table."""


@dataclass
class IngestedNetwork:
    graph: Graph
    labels: list
    n_duplicates: int = 0

    def index(self) -> dict:
        return {lab: k for k, lab in enumerate(self.labels)}


def _read_csv(path, **kw) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, **kw)
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc


def _label_map(edge_labels: Sequence[str], labels: Optional[Sequence], n: Optional[int]) -> list:
    if labels is not None:
        labels = [str(v) for v in labels]
        if len(set(labels)) != len(labels):
            raise DataError("declared vertex labels are not unique")
        known = set(labels)
        dangling = sorted({v for v in edge_labels if v not in known})
        if dangling:
            raise DataError(f"edge list references undeclared vertices: {dangling[:10]}")
        if n is not None and n != len(labels):
            raise DataError(f"declared n={n} but {len(labels)} labels")
        return labels
    seen = list(dict.fromkeys(edge_labels))
    if n is None:
        return seen
    ints = all(v.lstrip("-").isdigit() for v in seen)
    if ints:
        bad = [v for v in seen if not 0 <= int(v) < n]
        if bad:
            raise DataError(f"vertex ids {bad[:10]} outside 0..{n - 1}")
        return [str(k) for k in range(n)]
    if len(seen) > n:
        raise DataError(f"edge list names {len(seen)} vertices but n={n}")
    # unnamed isolates fill the remaining slots
    return seen + [f"v{k}" for k in range(len(seen), n)]


def ingest_network(path, fmt: str = "edge_list_csv", directed: bool = False, n: Optional[int] = None,
                   labels: Optional[Sequence] = None) -> IngestedNetwork:
    """Read a graph from an edge-list or adjacency CSV.

    Edge lists need a header with ``from`` and ``to`` columns (further
    columns are ignored). Vertex labels come from ``labels`` when given,
    otherwise from order of first appearance; integer ids ``0..n-1`` are
    taken literally when ``n`` is declared. Duplicate rows (including
    reversed pairs for undirected graphs) are dropped with a warning.
    """
    if fmt == "adjacency_csv":
        return _ingest_adjacency(path, directed, labels)
    if fmt != "edge_list_csv":
        raise ValueError(f"unknown network format {fmt!r}")
    df = _read_csv(path)
    cols = [c.strip().lower() for c in df.columns]
    if "from" not in cols or "to" not in cols:
        raise DataError(f"{path}: edge list needs 'from' and 'to' columns, got {list(df.columns)}")
    src = df.iloc[:, cols.index("from")].str.strip().tolist()
    dst = df.iloc[:, cols.index("to")].str.strip().tolist()
    lab = _label_map(src + dst, labels, n)
    index = {v: k for k, v in enumerate(lab)}
    adj = np.zeros((len(lab), len(lab)), dtype=np.uint8)
    dup = 0
    for a, b in zip(src, dst):
        i, j = index[a], index[b]
        if i == j:
            raise DataError(f"self-loop on vertex {a!r}")
        if adj[i, j]:
            dup += 1
            continue
        adj[i, j] = 1
        if not directed:
            adj[j, i] = 1
    if dup:
        warnings.warn(f"{path}: dropped {dup} duplicate edge rows", stacklevel=2)
    return IngestedNetwork(Graph(adj, directed), lab, dup)


def _ingest_adjacency(path, directed: bool, labels) -> IngestedNetwork:
    df = _read_csv(path)
    header = [c.strip() for c in df.columns]
    if df.shape[1] == df.shape[0] + 1:
        # leading label column
        row_labels = df.iloc[:, 0].str.strip().tolist()
        header = header[1:]
        df = df.iloc[:, 1:]
        if row_labels != header:
            raise DataError(f"{path}: row labels do not match the header")
    if df.shape[0] != df.shape[1]:
        raise DataError(f"{path}: adjacency matrix is {df.shape[0]}x{df.shape[1]}, not square")
    try:
        a = df.apply(lambda c: pd.to_numeric(c.str.strip())).to_numpy()
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric adjacency entry ({exc})") from exc
    if not np.isin(a, (0, 1)).all():
        raise DataError(f"{path}: adjacency entries must be 0 or 1")
    if np.any(np.diag(a)):
        raise DataError(f"{path}: nonzero diagonal")
    if not directed and not np.array_equal(a, a.T):
        bad = int(np.triu(a != a.T).sum())
        raise DataError(f"{path}: {bad} asymmetric entries in an undirected adjacency matrix")
    if labels is not None and [str(v) for v in labels] != header:
        raise DataError(f"{path}: header labels differ from the declared labels")
    return IngestedNetwork(Graph(a.astype(np.uint8), directed), header)


def write_edge_list(net: IngestedNetwork, path) -> None:
    g, lab = net.graph, net.labels
    rows = [(lab[e.sender], lab[e.receiver]) for e in g.edges()]
    pd.DataFrame(rows, columns=["from", "to"]).to_csv(path, index=False)


def write_adjacency(net: IngestedNetwork, path) -> None:
    pd.DataFrame(net.graph.copy_adj(), columns=net.labels).to_csv(path, index=False)


# informant reports -------------------------------------------------------

@dataclass
class InformantReports:
    """Directed tie claims: ``claims[j, k]`` is j's report about the j-k tie (-1 = missing)."""

    claims: np.ndarray
    labels: list

    def __post_init__(self):
        self.claims = np.asarray(self.claims, dtype=np.int8)
        n = len(self.labels)
        if self.claims.shape != (n, n):
            raise DataError("claims matrix must be n x n")
        if not np.isin(self.claims, (-1, 0, 1)).all():
            raise DataError("claims must be 0, 1 or -1 (missing)")
        if np.any(np.diag(self.claims) == 1):
            raise DataError("self-claims are not allowed")

    @classmethod
    def from_frame(cls, df: pd.DataFrame, labels: Optional[Sequence] = None) -> "InformantReports":
        cols = [c.strip().lower() for c in df.columns]
        for c in ("reporter", "alter", "claim"):
            if c not in cols:
                raise DataError(f"reports need a {c!r} column")
        rep = df.iloc[:, cols.index("reporter")].astype(str).str.strip()
        alt = df.iloc[:, cols.index("alter")].astype(str).str.strip()
        try:
            claim = pd.to_numeric(df.iloc[:, cols.index("claim")]).to_numpy()
        except ValueError as exc:
            raise DataError(f"non-numeric claim ({exc})") from exc
        lab = [str(v) for v in labels] if labels is not None else list(dict.fromkeys(list(rep) + list(alt)))
        index = {v: k for k, v in enumerate(lab)}
        unknown = sorted(set(rep) - index.keys())
        if unknown:
            raise DataError(f"reporters not in the vertex set: {unknown[:10]}")
        unknown = sorted(set(alt) - index.keys())
        if unknown:
            raise DataError(f"alters not in the vertex set: {unknown[:10]}")
        C = np.full((len(lab), len(lab)), -1, dtype=np.int8)
        np.fill_diagonal(C, 0)
        for a, b, c in zip(rep, alt, claim):
            if a == b:
                raise DataError(f"self-claim by {a!r}")
            if c not in (0, 1):
                raise DataError(f"claim must be 0 or 1, got {c}")
            C[index[a], index[b]] = int(c)
        return cls(C, lab)


def read_reports(path, labels: Optional[Sequence] = None) -> InformantReports:
    return InformantReports.from_frame(_read_csv(path), labels)


@dataclass
class LASResult:
    graph: Graph
    labels: list
    missing: pd.DataFrame

    @property
    def n_missing(self) -> int:
        return len(self.missing)


def las_aggregate(reports: InformantReports, rule: str = "intersection") -> LASResult:
    """Combine the two reports on each dyad into an undirected graph.

    ``intersection`` keeps a tie only when both ends claim it, ``union``
    when either does. Missing reports count as no claim and are listed in
    ``missing``.
    """
    if rule not in ("intersection", "union"):
        raise ValueError(f"unknown LAS rule {rule!r}")
    C = reports.claims
    present = C == 1
    both = present & present.T if rule == "intersection" else present | present.T
    adj = both.astype(np.uint8)
    np.fill_diagonal(adj, 0)
    n = len(reports.labels)
    iu, ju = np.triu_indices(n, 1)
    miss = (C[iu, ju] == -1) | (C[ju, iu] == -1)
    rows = [{"vertex1": reports.labels[i], "vertex2": reports.labels[j],
             "missing_from": ",".join(reports.labels[v] for v, w in ((i, j), (j, i)) if C[v, w] == -1)}
            for i, j in zip(iu[miss], ju[miss])]
    return LASResult(Graph(adj), list(reports.labels),
                     pd.DataFrame(rows, columns=["vertex1", "vertex2", "missing_from"]))


# attributes ---------------------------------------------------------------

def _declared_type(col: str, types: Optional[dict]) -> tuple[str, Optional[str]]:
    if ":" in col:
        name, kind = col.rsplit(":", 1)
        return name.strip(), kind.strip().lower()
    return col.strip(), (types or {}).get(col.strip())


def ingest_attributes(path, labels: Optional[Sequence] = None, types: Optional[dict] = None,
                      label_column: str = "label") -> tuple[NodeData, list]:
    """Read per-vertex attributes keyed by a label column.

    Column types come from ``types`` (``{"age": "numeric"}``), a
    ``name:numeric`` / ``name:categorical`` header suffix, or are inferred
    (numeric when every value parses as a number). Rows are reordered to
    ``labels`` when given.
    """
    df = _read_csv(path)
    if label_column not in [c.strip() for c in df.columns]:
        raise DataError(f"{path}: missing {label_column!r} column")
    df.columns = [c.strip() for c in df.columns]
    keys = df[label_column].str.strip()
    if keys.duplicated().any():
        raise DataError(f"{path}: duplicate vertex labels")
    df = df.set_index(keys).drop(columns=label_column)
    if labels is not None:
        labels = [str(v) for v in labels]
        missing = [v for v in labels if v not in df.index]
        if missing:
            raise DataError(f"{path}: no attribute row for vertices {missing[:10]}")
        df = df.loc[labels]
    cat, num = {}, {}
    for col in df.columns:
        name, kind = _declared_type(col, types)
        values = df[col].str.strip()
        if kind in ("numeric", "num"):
            parsed = pd.to_numeric(values, errors="coerce")
            if parsed.isna().any():
                bad = values[parsed.isna()].tolist()[:5]
                raise DataError(f"{path}: non-numeric values in numeric column {name!r}: {bad}")
            num[name] = parsed.to_numpy(float)
        elif kind in ("categorical", "cat"):
            cat[name] = values.to_numpy()
        elif kind is None:
            parsed = pd.to_numeric(values, errors="coerce")
            if parsed.isna().any() or len(values) == 0:
                cat[name] = values.to_numpy()
            else:
                num[name] = parsed.to_numpy(float)
        else:
            raise DataError(f"unknown column type {kind!r} for {name!r}")
    for name, v in cat.items():
        if len(set(v)) == 1:
            warnings.warn(f"categorical attribute {name!r} has a single level; "
                          "nodematch on it equals the edge count", stacklevel=2)
    return NodeData(cat, num), list(df.index)


def ingest_covariate(path, labels: Sequence) -> np.ndarray:
    """Square dyadic covariate CSV (header row of labels, optional label column)."""
    df = _read_csv(path)
    labels = [str(v) for v in labels]
    header = [c.strip() for c in df.columns]
    if df.shape[1] == df.shape[0] + 1:
        row_labels = df.iloc[:, 0].str.strip().tolist()
        header, df = header[1:], df.iloc[:, 1:]
        if row_labels != header:
            raise DataError(f"{path}: row labels do not match the header")
    if df.shape[0] != df.shape[1]:
        raise DataError(f"{path}: covariate matrix is not square")
    try:
        mat = df.apply(lambda c: pd.to_numeric(c.str.strip())).to_numpy(float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric covariate entry ({exc})") from exc
    if sorted(header) != sorted(labels):
        raise DataError(f"{path}: covariate labels do not match the network's vertices")
    order = [header.index(v) for v in labels]
    return mat[np.ix_(order, order)]
