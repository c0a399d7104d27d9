"""Candidate-selection MCP server: random exploration and Bayesian optimization.

Works on a finite candidate table (CSV, last column `objective`, empty cells
unmeasured). BO fits an exact Gaussian process with a squared-exponential
kernel to the measured rows and proposes the unmeasured row that maximizes
one Thompson-sampling draw from the posterior. Inputs are z-scored with the
full-table statistics; observations are z-scored per fit; the lengthscale is
the median pairwise distance between measured inputs (1.0 until two distinct
points exist). Everything is deterministic given (table, seed, history).

Run standalone:
    python3 -m mcplab.decision --transport stdio|http [--port N] [--candidates FILE]
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from mcplab.protocol.tooltypes import (
    ContentBlock,
    PropertySpec,
    ToolCallResult,
    ToolDescriptor,
)
from mcplab.serverkit import McpServer, run_server_cli
from mcplab.simlab import format_number

# Starts at the smallest value float64 Cholesky tolerates and escalates
# tenfold on failure, so the posterior mean interpolates the observations
# even when clustered proposals make the kernel matrix nearly singular.
GP_JITTER = 1e-15


def generate_grid_csv(step: int = 5, names: tuple[str, ...] = ("red", "yellow", "blue")) -> str:
    """All non-negative compositions in the given step that sum to 100."""
    if step <= 0 or 100 % step != 0:
        raise ValueError("step must be a positive divisor of 100")
    if len(names) != 3:
        raise ValueError("grid generation covers exactly 3 parameters")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(list(names) + ["objective"])
    for first in range(0, 101, step):
        for second in range(0, 101 - first, step):
            writer.writerow([first, second, 100 - first - second, ""])
    return out.getvalue()


class TableError(ValueError):
    pass


@dataclass
class CandidatesTable:
    parameter_names: list[str]
    x: np.ndarray  # shape (n, d)
    objectives: list[float | None]

    @classmethod
    def from_csv(cls, text: str) -> "CandidatesTable":
        rows = [r for r in csv.reader(text.splitlines()) if any(c.strip() for c in r)]
        if not rows:
            raise TableError("empty candidate table")
        header = [c.strip() for c in rows[0]]
        if len(header) < 2:
            raise TableError("need at least one parameter column plus 'objective'")
        if header[-1].lower() != "objective":
            raise TableError(f"last column must be named 'objective', got {header[-1]!r}")
        names = header[:-1]
        if any(not n for n in names) or len(set(names)) != len(names):
            raise TableError("parameter names must be non-empty and unique")
        data, objectives = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise TableError(
                    f"line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            values = []
            for name, cell in zip(names, row):
                try:
                    value = float(cell)
                except ValueError:
                    raise TableError(f"line {lineno}: {name}={cell!r} is not a number") from None
                if not math.isfinite(value):
                    raise TableError(f"line {lineno}: {name} must be finite")
                values.append(value)
            cell = row[-1].strip()
            if cell == "":
                objectives.append(None)
            else:
                try:
                    obj = float(cell)
                except ValueError:
                    raise TableError(f"line {lineno}: objective {cell!r} is not a number") from None
                if not math.isfinite(obj):
                    raise TableError(f"line {lineno}: objective must be finite")
                objectives.append(obj)
            data.append(values)
        if not data:
            raise TableError("candidate table has a header but no rows")
        return cls(names, np.asarray(data, dtype=float), objectives)

    @property
    def size(self) -> int:
        return len(self.objectives)

    def measured_indices(self) -> list[int]:
        return [i for i, o in enumerate(self.objectives) if o is not None]

    def unmeasured_indices(self) -> list[int]:
        return [i for i, o in enumerate(self.objectives) if o is None]

    def row_text(self, index: int) -> str:
        pairs = [
            f"{name}={format_number(v)}"
            for name, v in zip(self.parameter_names, self.x[index])
        ]
        return ", ".join(pairs)


# -- Gaussian process -------------------------------------------------------


def _zscore_columns(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    return (x - mean) / std


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sum(diff * diff, axis=2)


def _median_lengthscale(zm: np.ndarray) -> float:
    n = zm.shape[0]
    if n < 2:
        return 1.0
    d2 = _sq_dists(zm, zm)
    upper = d2[np.triu_indices(n, k=1)]
    ell = float(np.median(np.sqrt(upper)))
    return ell if ell > 0.0 else 1.0


def gp_posterior(
    x_all: np.ndarray,
    measured: list[int],
    y: list[float],
    query: list[int],
    jitter: float = GP_JITTER,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and covariance at `query` rows given observations at
    `measured` rows. Unit signal variance on z-scored observations."""
    if len(measured) != len(y) or not measured:
        raise ValueError("need matching, non-empty measured rows and values")
    z = _zscore_columns(np.asarray(x_all, dtype=float))
    zm, zq = z[measured], z[query]
    y_arr = np.asarray(y, dtype=float)
    y_mean = float(y_arr.mean())
    y_std = float(y_arr.std())
    if y_std == 0.0:
        y_std = 1.0
    yz = (y_arr - y_mean) / y_std

    ell = _median_lengthscale(zm)
    k_mm = np.exp(-_sq_dists(zm, zm) / (2.0 * ell * ell))
    k_qm = np.exp(-_sq_dists(zq, zm) / (2.0 * ell * ell))
    k_qq = np.exp(-_sq_dists(zq, zq) / (2.0 * ell * ell))

    eye = np.eye(len(measured))
    for _ in range(8):
        try:
            chol = np.linalg.cholesky(k_mm + jitter * eye)
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
    else:
        raise ValueError("kernel matrix is not decomposable")
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, yz))
    mean_z = k_qm @ alpha
    v = np.linalg.solve(chol, k_qm.T)
    cov_z = k_qq - v.T @ v
    cov_z = 0.5 * (cov_z + cov_z.T)
    return mean_z * y_std + y_mean, cov_z * y_std * y_std


def thompson_proposal(table: CandidatesTable, rng: np.random.Generator) -> int:
    measured = table.measured_indices()
    query = table.unmeasured_indices()
    if not measured:
        raise ValueError("no observations yet; measure at least one candidate first")
    if not query:
        raise ValueError("no unmeasured candidates left")
    y = [table.objectives[i] for i in measured]
    mean, cov = gp_posterior(table.x, measured, y, query)
    eps = 1e-9
    for _ in range(8):
        try:
            chol = np.linalg.cholesky(cov + eps * np.eye(len(query)))
            break
        except np.linalg.LinAlgError:
            eps *= 10.0
    else:
        raise ValueError("posterior covariance is not decomposable")
    draw = mean + chol @ rng.standard_normal(len(query))
    return query[int(np.argmax(draw))]


def random_proposal(table: CandidatesTable, rng: np.random.Generator) -> int:
    query = table.unmeasured_indices()
    if not query:
        raise ValueError("no unmeasured candidates left")
    return query[int(rng.integers(len(query)))]


# -- experiment state -------------------------------------------------------


@dataclass
class CycleRecord:
    cycle: int
    row: int
    values: tuple[float, ...]
    objective: float
    best: float


@dataclass
class Experiment:
    table: CandidatesTable | None = None
    pending: int | None = None
    history: list[CycleRecord] = field(default_factory=list)

    def load(self, text: str) -> str:
        table = CandidatesTable.from_csv(text)
        self.table = table
        self.pending = None
        self.history.clear()
        measured = len(table.measured_indices())
        return (
            f"{table.size} candidates, {len(table.parameter_names)} parameters, "
            f"{measured} measured"
        )

    def _require_table(self) -> CandidatesTable:
        if self.table is None:
            raise ValueError("no candidate table loaded")
        return self.table

    def select(self, method: str, seed: int = 0) -> str:
        table = self._require_table()
        # Seeding with (seed, measured count) keeps reruns reproducible while
        # decorrelating successive cycles.
        rng = np.random.default_rng([int(seed), len(table.measured_indices())])
        method = method.strip().lower()
        if method == "random":
            row = random_proposal(table, rng)
        elif method == "bo":
            row = thompson_proposal(table, rng)
        else:
            raise ValueError(f"unknown method {method!r}; use 'random' or 'bo'")
        self.pending = row
        return f"row {row}: {table.row_text(row)}"

    def selected_values(self, name: str | None = None) -> str:
        table = self._require_table()
        if self.pending is None:
            raise ValueError("no selection pending")
        if name is None or name == "":
            return table.row_text(self.pending)
        if name not in table.parameter_names:
            raise ValueError(
                f"unknown parameter {name!r}; have {', '.join(table.parameter_names)}"
            )
        value = table.x[self.pending][table.parameter_names.index(name)]
        return f"{name} = {format_number(float(value))}"

    def update(self, objective: float) -> str:
        table = self._require_table()
        if self.pending is None:
            raise ValueError("no selection to update; call selection first")
        if not math.isfinite(objective):
            raise ValueError("objective must be finite")
        row = self.pending
        table.objectives[row] = float(objective)
        self.pending = None
        measured = table.measured_indices()
        best = max(table.objectives[i] for i in measured)
        self.history.append(
            CycleRecord(
                cycle=len(self.history) + 1,
                row=row,
                values=tuple(float(v) for v in table.x[row]),
                objective=float(objective),
                best=float(best),
            )
        )
        return (
            f"recorded {format_number(float(objective))} for row {row}; "
            f"measured {len(measured)}/{table.size}; best {format_number(float(best))}"
        )

    def history_csv(self) -> str:
        table = self._require_table()
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["cycle", "row"] + table.parameter_names + ["objective", "best"])
        for rec in self.history:
            writer.writerow(
                [rec.cycle, rec.row]
                + [format_number(v) for v in rec.values]
                + [format_number(rec.objective), format_number(rec.best)]
            )
        return out.getvalue()

    def history_plot_png(self) -> bytes:
        # Matplotlib import kept local: costs ~1s and most sessions never plot.
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        self._require_table()
        cycles = [rec.cycle for rec in self.history]
        fig, ax = plt.subplots(figsize=(5, 3.2), dpi=110)
        ax.plot(cycles, [rec.objective for rec in self.history], "o", label="cycle", alpha=0.6)
        ax.plot(cycles, [rec.best for rec in self.history], "-", label="best so far")
        ax.set_xlabel("cycle")
        ax.set_ylabel("objective")
        ax.legend(loc="lower right")
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="png")
        plt.close(fig)
        return buf.getvalue()


# -- MCP surface -------------------------------------------------------------


def build_decision_server(experiment: Experiment | None = None, name: str = "decision") -> McpServer:
    experiment = experiment if experiment is not None else Experiment()
    server = McpServer(name)

    def wrap(fn):
        def handler(args: dict) -> ToolCallResult:
            try:
                return fn(args)
            except (ValueError, np.linalg.LinAlgError) as exc:
                return ToolCallResult.error(str(exc))

        return handler

    def gen_grid(args):
        step = int(args.get("step", 5))
        return ToolCallResult.text(generate_grid_csv(step))

    def load_candidates(args):
        return ToolCallResult.text(experiment.load(args["csv"]))

    def selection(args):
        return ToolCallResult.text(
            experiment.select(args["method"], int(args.get("seed", 0)))
        )

    def get_selected_values(args):
        return ToolCallResult.text(experiment.selected_values(args.get("name")))

    def update(args):
        return ToolCallResult.text(experiment.update(args["objective"]))

    def history(args):
        return ToolCallResult.text(experiment.history_csv())

    def history_plot(args):
        png = experiment.history_plot_png()
        return ToolCallResult(
            content=[
                ContentBlock.text_block(f"{len(experiment.history)} cycles"),
                ContentBlock.image_block(png, "image/png"),
            ]
        )

    server.register_tool(
        ToolDescriptor(
            "gen_grid",
            "CSV of all 3-part compositions in the given step summing to 100, objective column empty.",
            [PropertySpec("step", "integer", "grid step in percent, divides 100 (default 5)")],
        ),
        wrap(gen_grid),
    )
    server.register_tool(
        ToolDescriptor(
            "load_candidates",
            "Load a candidate table from CSV text; last column must be 'objective'.",
            [PropertySpec("csv", "string", "CSV text, header row required")],
            ["csv"],
        ),
        wrap(load_candidates),
    )
    server.register_tool(
        ToolDescriptor(
            "selection",
            "Propose the next candidate row to measure: method 'random' or 'bo'.",
            [
                PropertySpec("method", "string", "'random' or 'bo'"),
                PropertySpec("seed", "integer", "RNG seed (default 0)"),
            ],
            ["method"],
        ),
        wrap(selection),
    )
    server.register_tool(
        ToolDescriptor(
            "get_selected_values",
            "Values of the pending selection; pass name for a single 'name = value' line.",
            [PropertySpec("name", "string", "parameter name; omit for all values")],
        ),
        wrap(get_selected_values),
    )
    server.register_tool(
        ToolDescriptor(
            "update",
            "Record the measured objective for the pending selection.",
            [PropertySpec("objective", "number", "objective value; larger is better")],
            ["objective"],
        ),
        wrap(update),
    )
    server.register_tool(
        ToolDescriptor("history", "Measurement history as CSV: cycle, row, values, objective, best."),
        wrap(history),
    )
    server.register_tool(
        ToolDescriptor("history_plot", "PNG plot of objective and best-so-far by cycle."),
        wrap(history_plot),
    )
    return server


def main(argv: list[str] | None = None) -> int:
    def add_args(parser):
        parser.add_argument("--candidates", default=None, help="CSV file to preload")

    def build(args):
        experiment = Experiment()
        if args.candidates:
            with open(args.candidates, encoding="utf-8") as fh:
                experiment.load(fh.read())
        return build_decision_server(experiment)

    return run_server_cli(
        build, "Candidate-selection MCP server (random / Bayesian optimization).", add_args, argv
    )


if __name__ == "__main__":
    sys.exit(main())
