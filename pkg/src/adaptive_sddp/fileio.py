"""Instance files, run logs and config documents.

Instance format ``mslp-v1`` is whitespace-separated text; ``#`` starts a
comment running to the end of the line::

    mslp-v1
    horizon <T>
    stage <t> vars <n> rows <m>
      cost <n numbers>
      A <matrix m n>
      realizations <K>
      realization <k> probability <p>
        B <matrix m n_prev>
        b <m numbers>
      ...
    end
    ...
    eof

A matrix is either ``dense <rows> <cols>`` followed by ``rows * cols`` numbers
in row-major order, or ``sparse <rows> <cols> <nnz>`` followed by ``nnz``
triples ``i j value`` (0-based). Numbers are written with ``repr`` so every
float survives a round trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .hydro import HydroConfig, hydro_config_dict
from .lattice import ScenarioLattice, SolverConfig, make_lattice, make_stage
from .progress import LOG_COLUMNS, IterationRecord, ProgressLog

FORMAT_VERSION = "mslp-v1"
CONFIG_ENV = "ADAPTIVE_SDDP_CONFIG"
SPARSE_DENSITY = 0.25

PathLike = Union[str, os.PathLike]


class InstanceParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, offset: int):
        super().__init__(f"line {line}, column {column} (offset {offset}): {message}")
        self.line = line
        self.column = column
        self.offset = offset


class VersionError(InstanceParseError):
    pass


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ writing


def _num(x: float) -> str:
    return repr(float(x))


def _matrix_lines(name: str, M: np.ndarray, indent: str) -> List[str]:
    m, n = M.shape
    nz = np.argwhere(M != 0)
    if M.size and len(nz) <= SPARSE_DENSITY * M.size:
        out = [f"{indent}{name} sparse {m} {n} {len(nz)}"]
        out += [f"{indent}  {i} {j} {_num(M[i, j])}" for i, j in nz]
        return out
    out = [f"{indent}{name} dense {m} {n}"]
    out += [indent + "  " + " ".join(_num(v) for v in row) for row in M if n]
    return out


def format_instance(lattice: ScenarioLattice) -> str:
    lines = [FORMAT_VERSION, f"horizon {lattice.horizon}"]
    for st in lattice.stages:
        lines.append(f"stage {st.stage_index} vars {st.n_vars} rows {st.n_rows}")
        lines.append("  cost " + " ".join(_num(v) for v in st.cost_c))
        lines += _matrix_lines("A", st.recourse_A, "  ")
        lines.append(f"  realizations {st.n_realizations}")
        for r in st.realizations:
            lines.append(f"  realization {r.index} probability {_num(r.probability)}")
            lines += _matrix_lines("B", r.tech_B, "    ")
            lines.append("    b " + " ".join(_num(v) for v in r.rhs_b))
        lines.append("end")
    lines.append("eof")
    return "\n".join(lines) + "\n"


def write_instance(lattice: ScenarioLattice, path: PathLike) -> None:
    Path(path).write_text(format_instance(lattice), encoding="utf-8")


# ------------------------------------------------------------------ reading


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: List[Tuple[str, int, int, int]] = []
        offset = 0
        for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
            body = line.split("#", 1)[0]
            col = 0
            for word in body.split():
                col = body.index(word, col)
                self.items.append((word, lineno, col + 1, offset + col))
                col += len(word)
            offset += len(line)
        self.pos = 0
        self.end = (text.count("\n") + 1, 1, len(text))

    def error(self, message: str, cls=InstanceParseError) -> InstanceParseError:
        if self.pos < len(self.items):
            _, line, col, off = self.items[self.pos]
        else:
            line, col, off = self.end
            message = f"unexpected end of file: {message}"
        return cls(message, line, col, off)

    def next(self, what: str) -> str:
        if self.pos >= len(self.items):
            raise self.error(f"expected {what}")
        tok = self.items[self.pos][0]
        self.pos += 1
        return tok

    def expect(self, word: str) -> None:
        if self.pos < len(self.items) and self.items[self.pos][0] == word:
            self.pos += 1
            return
        found = self.items[self.pos][0] if self.pos < len(self.items) else None
        raise self.error(f"expected {word!r}, found {found!r}")

    def integer(self, what: str, low: int = 0) -> int:
        tok = self.next(what)
        try:
            v = int(tok)
        except ValueError:
            self.pos -= 1
            raise self.error(f"expected integer {what}, found {tok!r}") from None
        if v < low:
            self.pos -= 1
            raise self.error(f"{what} must be >= {low}")
        return v

    def number(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            self.pos -= 1
            raise self.error(f"expected number {what}, found {tok!r}") from None

    def numbers(self, count: int, what: str) -> np.ndarray:
        return np.array([self.number(what) for _ in range(count)], dtype=float)

    def matrix(self, name: str, rows: int, cols: int) -> np.ndarray:
        self.expect(name)
        kind = self.next(f"matrix kind for {name}")
        if kind not in ("dense", "sparse"):
            self.pos -= 1
            raise self.error(f"matrix kind must be dense or sparse, found {kind!r}")
        m = self.integer(f"{name} rows")
        n = self.integer(f"{name} columns")
        if (m, n) != (rows, cols):
            self.pos -= 1
            raise self.error(f"{name} is {m}x{n}, expected {rows}x{cols}")
        if kind == "dense":
            return self.numbers(m * n, f"{name} entry").reshape(m, n)
        M = np.zeros((m, n))
        for _ in range(self.integer(f"{name} nonzero count")):
            i = self.integer(f"{name} row index")
            j = self.integer(f"{name} column index")
            if i >= m or j >= n:
                self.pos -= 1
                raise self.error(f"index ({i}, {j}) outside {name}")
            M[i, j] = self.number(f"{name} entry")
        return M


def parse_instance(text: str) -> ScenarioLattice:
    tk = _Tokens(text)
    if not tk.items:
        raise tk.error("empty instance file")
    if tk.items[0][0] != FORMAT_VERSION:
        raise tk.error(f"unsupported format header {tk.items[0][0]!r}; expected {FORMAT_VERSION!r}", VersionError)
    tk.pos = 1
    tk.expect("horizon")
    T = tk.integer("horizon", low=2)
    stages = []
    n_prev = 0
    for t in range(1, T + 1):
        tk.expect("stage")
        idx = tk.integer("stage index", low=1)
        if idx != t:
            tk.pos -= 1
            raise tk.error(f"stage {idx} out of order; expected {t}")
        tk.expect("vars")
        n = tk.integer("variable count", low=1)
        tk.expect("rows")
        m = tk.integer("row count")
        tk.expect("cost")
        c = tk.numbers(n, "cost entry")
        A = tk.matrix("A", m, n)
        tk.expect("realizations")
        K = tk.integer("realization count", low=1)
        techs, rhss, probs = [], [], []
        for k in range(K):
            tk.expect("realization")
            if tk.integer("realization index") != k:
                tk.pos -= 1
                raise tk.error(f"realization index out of order; expected {k}")
            tk.expect("probability")
            probs.append(tk.number("probability"))
            techs.append(tk.matrix("B", m, n_prev))
            tk.expect("b")
            rhss.append(tk.numbers(m, "rhs entry"))
        tk.expect("end")
        stages.append(make_stage(t, c, A, techs, rhss, probs))
        n_prev = n
    tk.expect("eof")
    if tk.pos != len(tk.items):
        raise tk.error("trailing content after eof")
    return make_lattice(stages)


def read_instance(path: PathLike) -> ScenarioLattice:
    return parse_instance(Path(path).read_text(encoding="utf-8"))


def lattices_equal(a: ScenarioLattice, b: ScenarioLattice) -> bool:
    """Structural equality with exact number comparison."""
    if a.horizon != b.horizon:
        return False
    for sa, sb in zip(a.stages, b.stages):
        if sa.stage_index != sb.stage_index or sa.n_realizations != sb.n_realizations:
            return False
        if not (np.array_equal(sa.cost_c, sb.cost_c) and np.array_equal(sa.recourse_A, sb.recourse_A)):
            return False
        for ra, rb in zip(sa.realizations, sb.realizations):
            if ra.probability != rb.probability or ra.tech_B.shape != rb.tech_B.shape:
                return False
            if not (np.array_equal(ra.tech_B, rb.tech_B) and np.array_equal(ra.rhs_b, rb.rhs_b)):
                return False
    return True


# ------------------------------------------------------------------ logs


def log_paths(path: PathLike) -> Dict[str, Path]:
    """The table file plus its ``.summary.json`` and ``.cuts.json`` companions."""
    p = Path(path)
    stem = p.with_suffix("") if p.suffix else p
    return {
        "table": p,
        "summary": stem.with_name(stem.name + ".summary.json"),
        "cuts": stem.with_name(stem.name + ".cuts.json"),
    }


def _cell(rec: IterationRecord, col: str) -> Any:
    v = getattr(rec, col)
    if col == "partition_sizes":
        return ";".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return v


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def cut_records(engine) -> List[Dict[str, Any]]:
    out = []
    for t in range(2, engine.T + 1):
        for c in engine.pools[t].cuts:
            out.append(
                {
                    "stage": c.stage,
                    "kind": c.kind.value,
                    "birth_iteration": c.birth_iteration,
                    "partition_version": c.partition_version,
                    "alpha": float(c.alpha),
                    "beta": [float(v) for v in c.beta],
                }
            )
    return out


def write_log(log: ProgressLog, path: PathLike, delimiter: str = ",") -> Dict[str, Path]:
    """Write the per-iteration table, the summary and (when the engine is attached) the cut pools."""
    paths = log_paths(path)
    paths["table"].parent.mkdir(parents=True, exist_ok=True)
    with open(paths["table"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for rec in log.records:
            w.writerow([_cell(rec, c) for c in LOG_COLUMNS])
    paths["summary"].write_text(json.dumps(_json_safe(log.summary()), indent=2, sort_keys=True) + "\n")
    engine = getattr(log, "engine", None)
    if engine is not None:
        paths["cuts"].write_text(json.dumps(cut_records(engine), indent=1) + "\n")
    else:
        paths.pop("cuts")
    return paths


def read_log_table(path: PathLike, delimiter: str = ",") -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh, delimiter=delimiter))


# ------------------------------------------------------------------ config


def _from_dict(cls, data: Dict[str, Any], section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {section} keys: {', '.join(sorted(unknown))}")
    clean = {k: (float(v) if isinstance(v, str) and v in ("inf", "-inf") else v) for k, v in data.items()}
    return cls(**clean)


def parse_config(doc: Dict[str, Any]) -> Dict[str, Any]:
    """Split a config document into ``solver``, ``variant``, ``stage_classes`` and ``hydro`` entries.

    Every section is optional; missing ones fall back to defaults.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    extra = set(doc) - {"solver", "variant", "hydro"}
    if extra:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(extra))}")
    solver = _from_dict(SolverConfig, doc.get("solver", {}), "solver")
    problems = solver.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    hydro = _from_dict(HydroConfig, doc.get("hydro", {}), "hydro")
    problems = hydro.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    variant = doc.get("variant", {})
    if isinstance(variant, str):
        variant = {"name": variant}
    classes = variant.get("stage_classes")
    return {
        "solver": solver,
        "variant": variant.get("name"),
        "stage_classes": {int(k): v for k, v in classes.items()} if classes else None,
        "hydro": hydro,
    }


def resolve_config_path(path: Optional[PathLike]) -> Optional[Path]:
    """The environment variable, when set, replaces the config path given on the command line."""
    env = os.environ.get(CONFIG_ENV)
    if env:
        return Path(env)
    return Path(path) if path else None


def load_config(path: Optional[PathLike]) -> Dict[str, Any]:
    resolved = resolve_config_path(path)
    if resolved is None:
        return parse_config({})
    try:
        doc = json.loads(Path(resolved).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{resolved}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(doc)


def config_document(solver: SolverConfig, variant: Optional[str] = None, hydro: Optional[HydroConfig] = None) -> Dict:
    doc: Dict[str, Any] = {"solver": _json_safe(asdict(solver))}
    if variant:
        doc["variant"] = {"name": variant}
    if hydro is not None:
        doc["hydro"] = hydro_config_dict(hydro)
    return doc
