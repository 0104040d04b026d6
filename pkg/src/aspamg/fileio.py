"""Matrix Market and coordinate files, solver configuration, and reports."""
import csv
import io
import json
from dataclasses import dataclass, fields

import numpy as np
import scipy.sparse as sp

from aspamg.hierarchy import HierarchyConfig
from aspamg.prolongation import DplsConfig
from aspamg.smoother import SmootherConfig
from aspamg.sparse import is_symmetric
from aspamg.testspace import SrqcgConfig

__all__ = [
    "MatrixMarketError",
    "MalformedHeaderError",
    "UnsupportedFieldError",
    "IndexOutOfBoundsError",
    "MalformedEntryError",
    "CoordinateFileError",
    "ConfigError",
    "read_matrix_market",
    "write_matrix_market",
    "read_coordinates",
    "write_coordinates",
    "SolverConfig",
    "parse_config",
    "load_config",
    "format_config",
    "REPORT_SCHEMA",
    "format_table",
    "write_csv",
]


class MatrixMarketError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MalformedHeaderError(MatrixMarketError):
    pass


class UnsupportedFieldError(MatrixMarketError):
    pass


class IndexOutOfBoundsError(MatrixMarketError):
    pass


class MalformedEntryError(MatrixMarketError):
    pass


class CoordinateFileError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def read_matrix_market(path):
    """Read a real coordinate Matrix Market file into full-storage CSR.

    Symmetric files are expanded to both triangles; indices become 0-based.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MalformedHeaderError("empty file", 1)
    head = lines[0].split()
    if len(head) != 5 or head[0] != "%%MatrixMarket":
        raise MalformedHeaderError(f"bad banner {lines[0]!r}", 1)
    obj, fmt, field, symm = (h.lower() for h in head[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MalformedHeaderError(f"only 'matrix coordinate' is supported, got {obj} {fmt}", 1)
    if field != "real":
        raise UnsupportedFieldError(f"field {field!r} is not real", 1)
    if symm not in ("general", "symmetric"):
        raise MalformedHeaderError(f"unsupported symmetry {symm!r}", 1)
    lineno = 1
    size = None
    while lineno < len(lines):
        text = lines[lineno].strip()
        lineno += 1
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise MalformedHeaderError(f"bad size line {text!r}", lineno) from None
        if len(size) != 3 or min(size) < 0:
            raise MalformedHeaderError(f"bad size line {text!r}", lineno)
        break
    if size is None:
        raise MalformedHeaderError("missing size line", lineno)
    nrows, ncols, nnz = size
    rows = np.empty(nnz, dtype=np.intp)
    cols = np.empty(nnz, dtype=np.intp)
    vals = np.empty(nnz)
    k = 0
    while lineno < len(lines):
        text = lines[lineno].strip()
        lineno += 1
        if not text or text.startswith("%"):
            continue
        if k >= nnz:
            raise MalformedEntryError(f"more than {nnz} entries", lineno)
        parts = text.split()
        if len(parts) != 3:
            raise MalformedEntryError(f"expected 'i j value', got {text!r}", lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MalformedEntryError(f"cannot parse {text!r}", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise IndexOutOfBoundsError(f"index ({i}, {j}) outside {nrows}x{ncols}", lineno)
        rows[k], cols[k], vals[k] = i - 1, j - 1, v
        k += 1
    if k != nnz:
        raise MalformedEntryError(f"expected {nnz} entries, found {k}", lineno)
    if symm == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    A = sp.csr_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    A.sum_duplicates()
    A.sort_indices()
    return A


def write_matrix_market(path, A, symmetric=None):
    """Write ``A`` in coordinate real format; symmetric matrices store the lower triangle."""
    A = sp.coo_matrix(A)
    if symmetric is None:
        symmetric = A.shape[0] == A.shape[1] and is_symmetric(A.tocsr())
    if symmetric:
        keep = A.row >= A.col
        r, c, v = A.row[keep], A.col[keep], A.data[keep]
    else:
        r, c, v = A.row, A.col, A.data
    order = np.lexsort((r, c))
    kind = "symmetric" if symmetric else "general"
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {len(v)}\n")
        for i, j, x in zip(r[order], c[order], v[order]):
            fh.write(f"{i + 1} {j + 1} {float(x)!r}\n")


def read_coordinates(path, n_nodes=None):
    """Whitespace-separated ``x y z`` lines, one node per line."""
    pts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 3:
                raise CoordinateFileError(f"line {lineno}: expected 3 values, got {len(parts)}")
            try:
                pts.append([float(p) for p in parts])
            except ValueError:
                raise CoordinateFileError(f"line {lineno}: cannot parse {text!r}") from None
    X = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    if n_nodes is not None and X.shape[0] != n_nodes:
        raise CoordinateFileError(f"expected {n_nodes} nodes, found {X.shape[0]}")
    return X


def write_coordinates(path, X):
    with open(path, "w") as fh:
        for x, y, z in np.asarray(X, dtype=np.float64):
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")


@dataclass
class SolverConfig:
    """Flat solver configuration using the parameter names of the method.

    ``None`` values (written ``auto``) are derived: refinement passes reuse
    ``rho_g`` and ``eps_g``; ``rho_bar`` is twice the lower-triangle density.
    """

    k_g: int = 4
    rho_g: int = 4
    eps_g: float = 1e-3
    n_tv: int = 10
    n_rq: int = 10
    theta: int = 5
    n_max: int = 5
    kappa_p: float = 50.0
    d_p: int = 2
    eps_p: float = 1e-2
    omega_bar: float = 0.95
    rho_bar: float = None
    k_i: int = 2
    rho_i: int = None
    eps_i: float = None
    k_ritz: int = 1
    rq_tol: float = 1e-2
    nu1: int = 1
    nu2: int = 1
    max_levels: int = 10
    min_coarse_size: int = 100
    rel_tol: float = 1e-8
    max_it: int = 1000
    seed: int = 1234

    def hierarchy_config(self):
        try:
            return HierarchyConfig(
                max_levels=self.max_levels,
                min_coarse_size=self.min_coarse_size,
                nu1=self.nu1,
                nu2=self.nu2,
                theta=self.theta,
                smoother=SmootherConfig(
                    k0=self.k_g,
                    rho0=self.rho_g,
                    eps0=self.eps_g,
                    ki=self.k_i,
                    rhoi=self.rho_g if self.rho_i is None else self.rho_i,
                    epsi=self.eps_g if self.eps_i is None else self.eps_i,
                    omega_bar=self.omega_bar,
                    rho_bar=self.rho_bar,
                    lanczos_seed=self.seed,
                ),
                srqcg=SrqcgConfig(
                    n_tv=self.n_tv,
                    k_max=self.n_rq,
                    k_ritz=self.k_ritz,
                    residual_tol=self.rq_tol,
                    seed=self.seed,
                ),
                dpls=DplsConfig(d_p=self.d_p, eps_p=self.eps_p, kappa_p=self.kappa_p,
                                n_max=self.n_max),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


_TYPES = {f.name: f.type for f in fields(SolverConfig)}


def _convert(key, text):
    kind = _TYPES[key]
    if text.lower() in ("auto", "none"):
        return None
    try:
        if kind is int:
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None


def parse_config(text, base=None):
    """Parse ``key = value`` lines over ``base`` (defaults when omitted)."""
    values = (base or SolverConfig()).as_dict()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, value)
    return SolverConfig(**values)


def set_option(cfg, key, value):
    """Return a copy of ``cfg`` with one option overridden from text."""
    if key not in _TYPES:
        raise ConfigError(f"unknown key {key!r}")
    values = cfg.as_dict()
    values[key] = _convert(key, str(value))
    return SolverConfig(**values)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg):
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in cfg.as_dict().items())


_NUM = {"type": "number"}
REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "problem", "n", "nnz", "config", "seed", "threads", "levels", "level_sizes",
        "C_gd", "C_op", "C_fs", "n_it", "converged", "residual_history",
        "true_residual", "timings",
    ],
    "properties": {
        "problem": {"type": "string"},
        "n": {"type": "integer", "minimum": 0},
        "nnz": {"type": "integer", "minimum": 0},
        "config": {"type": "object"},
        "seed": {"type": "integer"},
        "threads": {"type": "integer", "minimum": 1},
        "levels": {"type": "integer", "minimum": 1},
        "level_sizes": {"type": "array", "items": {"type": "integer"}},
        "C_gd": _NUM,
        "C_op": _NUM,
        "C_fs": _NUM,
        "n_it": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
        "residual_history": {"type": "array", "items": _NUM},
        "true_residual": _NUM,
        "timings": {
            "type": "object",
            "required": ["T_ts", "T_cs", "T_sm", "T_pl", "T_rap", "T_p", "T_s", "T_t"],
            "additionalProperties": _NUM,
        },
    },
}

TABLE_COLUMNS = ("C_gd", "C_op", "C_fs", "n_it", "T_ts", "T_cs", "T_sm", "T_pl", "T_rap",
                 "T_p", "T_s", "T_t")


def _row_values(report):
    out = []
    for col in TABLE_COLUMNS:
        v = report["timings"][col] if col.startswith("T_") else report[col]
        out.append(str(v) if isinstance(v, int) else f"{v:.2f}")
    return out


def format_table(reports, params=()):
    """Aligned text table, one row per report, optional leading parameter columns."""
    header = list(params) + list(TABLE_COLUMNS)
    rows = [[_fmt(r["config"][p]) for p in params] + _row_values(r) for r in reports]
    widths = [max(len(h), *(len(row[c]) for row in rows)) for c, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rows)
    return "\n".join(lines)


def write_csv(path_or_buffer, reports, params=()):
    header = list(params) + list(TABLE_COLUMNS)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for r in reports:
        w.writerow([r["config"][p] for p in params]
                   + [r["timings"][c] if c.startswith("T_") else r[c] for c in TABLE_COLUMNS])
    text = buf.getvalue()
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(text)
    else:
        with open(path_or_buffer, "w", newline="") as fh:
            fh.write(text)
    return text


def dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
