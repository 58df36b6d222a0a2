"""CSV writers and readers used by the command-line tools.

CSV is the only interchange format; every file written here can carry a
single leading comment line recording the invocation that produced it and
the hash of the active config, so a result always traces back to the exact
command that made it.  Floats are written with repr so a read-back is
bit-exact, except time columns which are fixed to six decimals.
"""

from __future__ import annotations

import numpy as np

from .core import ACTION_NAMES, STATE_NAMES, ConfigError, Trajectory
from .scenarios import Metrics, TrialHistory
from .training import LABEL_NAMES, Dataset

STATE_COLUMNS = ("t",) + STATE_NAMES
TRAJECTORY_COLUMNS = STATE_COLUMNS + ACTION_NAMES
DATASET_COLUMNS = STATE_NAMES + ("rpm_rate_cmd", "steer_rate_cmd") + LABEL_NAMES
LOSS_COLUMNS = ("epoch", "train_mse", "val_mse")
CYCLE_COLUMNS = (
    "cycle",
    "t_remaining",
    "H",
    "best_rpm_rate",
    "best_steer_rate",
    "best_cost",
    "feasible",
)
METRICS_COLUMNS = ("scenario", "controller", "metric", "mean", "std", "n")
TRIAL_COLUMNS = ("trial", "success", "censored", "metric", "index", "value")
GOAL_COLUMNS = tuple(f"goal_{name}" for name in STATE_NAMES)


class CsvFormatError(ConfigError):
    """A CSV file does not match its documented layout."""


def provenance(invocation: str, config_digest: str) -> str:
    """The comment line stamped at the top of every output file."""
    return f"# invocation: {invocation} | config: {config_digest}"


def _fmt(value: float) -> str:
    return repr(float(value))


def _fmt_t(value: float) -> str:
    return f"{float(value):.6f}"


def _write(path, columns, rows, comment: str | None) -> None:
    with open(path, "w", newline="") as fh:
        if comment is not None:
            fh.write(comment + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_state_csv(path, times, states, comment: str | None = None) -> None:
    """States sampled at arbitrary times, one row per sample."""
    times = np.asarray(times, dtype=float)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if times.shape[0] != states.shape[0]:
        raise ValueError(f"{times.shape[0]} times for {states.shape[0]} states")
    rows = (
        [_fmt_t(t)] + [_fmt(v) for v in row] for t, row in zip(times, states)
    )
    _write(path, STATE_COLUMNS, rows, comment)


def write_trajectory_csv(path, traj: Trajectory, comment: str | None = None) -> None:
    """A rollout with its applied actions.

    Row k carries the action applied over [t_k, t_k + dt); the terminal
    state row leaves the action cells empty because nothing was applied
    after it.
    """
    rows = []
    for k, state in enumerate(traj.states):
        t = traj.t0 + k * traj.dt
        cells = [_fmt_t(t)] + [_fmt(v) for v in state]
        if k < traj.actions.shape[0]:
            cells += [_fmt(v) for v in traj.actions[k]]
        else:
            cells += ["", ""]
        rows.append(cells)
    _write(path, TRAJECTORY_COLUMNS, rows, comment)


def write_trial_csv(
    path, history: TrialHistory, applied: np.ndarray, comment: str | None = None
) -> None:
    """A scenario trial as goal-vs-achieved pairs for plotting.

    Columns are the achieved state, the applied action, and the goal that
    was active during the cycle starting at that row's time.  The terminal
    row has no cycle after it, so its action and goal cells stay empty.
    """
    applied = np.asarray(applied, dtype=float)
    if applied.shape != history.actions.shape:
        raise ValueError(
            f"applied actions shape {applied.shape} does not match "
            f"recorded {history.actions.shape}"
        )
    rows = []
    for k in range(history.states.shape[0]):
        cells = [_fmt_t(history.times[k])] + [_fmt(v) for v in history.states[k]]
        if k < history.n_cycles:
            cells += [_fmt(v) for v in applied[k]]
            cells += [_fmt(v) for v in history.goals[k]]
        else:
            cells += [""] * (2 + len(STATE_NAMES))
        rows.append(cells)
    _write(path, TRAJECTORY_COLUMNS + GOAL_COLUMNS, rows, comment)


def write_dataset_csv(path, data: Dataset, comment: str | None = None) -> None:
    rows = (
        [_fmt(v) for v in row]
        for row in np.hstack([data.states, data.actions, data.labels])
    )
    _write(path, DATASET_COLUMNS, rows, comment)


def read_dataset_csv(path) -> Dataset:
    """Read a training dataset, validating the header and every cell.

    Leading comment lines are skipped.  Any deviation from the documented
    column layout raises CsvFormatError naming the file, line, and column.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    lineno = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.startswith("#"):
            break
    else:
        raise CsvFormatError(f"{path}:{lineno or 1}: no header line found")
    header = tuple(lines[lineno - 1].split(","))
    if header != DATASET_COLUMNS:
        for col, (found, wanted) in enumerate(zip(header, DATASET_COLUMNS)):
            if found != wanted:
                raise CsvFormatError(
                    f"{path}:{lineno}: column {col + 1} should be "
                    f"{wanted!r}, found {found!r}"
                )
        raise CsvFormatError(
            f"{path}:{lineno}: expected {len(DATASET_COLUMNS)} columns, "
            f"found {len(header)}"
        )
    values = []
    for row_no, line in enumerate(lines[lineno:], start=lineno + 1):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(DATASET_COLUMNS):
            raise CsvFormatError(
                f"{path}:{row_no}: expected {len(DATASET_COLUMNS)} cells, "
                f"found {len(cells)}"
            )
        row = []
        for name, cell in zip(DATASET_COLUMNS, cells):
            try:
                row.append(float(cell))
            except ValueError:
                raise CsvFormatError(
                    f"{path}:{row_no}: column {name!r}: "
                    f"could not parse {cell!r} as a number"
                ) from None
        values.append(row)
    if not values:
        raise CsvFormatError(f"{path}:{lineno}: no data rows")
    table = np.asarray(values, dtype=float)
    return Dataset(states=table[:, :8], actions=table[:, 8:10], labels=table[:, 10:])


def write_loss_csv(path, history, comment: str | None = None) -> None:
    """Training loss history rows of (epoch, train_mse, val_mse)."""
    rows = (
        [str(int(epoch)), _fmt(train), _fmt(val)] for epoch, train, val in history
    )
    _write(path, LOSS_COLUMNS, rows, comment)


def write_cycle_log_csv(
    path, results, t_total: float, period: float, comment: str | None = None
) -> None:
    """Per-cycle planner log from a control_loop run."""
    rows = []
    for k, result in enumerate(results):
        rows.append([
            str(k),
            _fmt_t(t_total - k * period),
            str(result.horizon),
            _fmt(result.best_action.rpm_rate),
            _fmt(result.best_action.steer_rate),
            _fmt(result.best_cost),
            str(int(result.feasible)),
        ])
    _write(path, CYCLE_COLUMNS, rows, comment)


def write_metrics_csv(path, metrics: Metrics, comment: str | None = None) -> None:
    """Aggregate scenario metrics, one row per pooled metric.

    success_rate and censored_trials rows follow the pooled metrics; their
    std cell is 0 and their n is the number of trials.
    """
    rows = []
    n_trials = len(metrics.trials)
    for name, (mean, std, n) in sorted(metrics.pooled().items()):
        rows.append([
            metrics.kind, metrics.controller, name, _fmt(mean), _fmt(std), str(n),
        ])
    rows.append([
        metrics.kind, metrics.controller, "success_rate",
        _fmt(metrics.success_rate()), _fmt(0.0), str(n_trials),
    ])
    rows.append([
        metrics.kind, metrics.controller, "censored_trials",
        _fmt(metrics.censored_count()), _fmt(0.0), str(n_trials),
    ])
    _write(path, METRICS_COLUMNS, rows, comment)


def write_trials_csv(path, metrics: Metrics, comment: str | None = None) -> None:
    """Per-trial metric values in long form, one row per recorded value."""
    rows = []
    for trial, result in enumerate(metrics.trials):
        for name in sorted(result.values):
            for index, value in enumerate(result.values[name]):
                rows.append([
                    str(trial),
                    str(int(result.success)),
                    str(int(result.censored)),
                    name,
                    str(index),
                    _fmt(value),
                ])
    _write(path, TRIAL_COLUMNS, rows, comment)


def write_compare_csv(path, rows, labels, comment: str | None = None) -> None:
    """The side-by-side comparison table produced by scenarios.compare."""
    columns = ["scenario", "metric"]
    for label in labels:
        columns += [f"{label}_mean", f"{label}_std", f"{label}_n"]
    out = []
    for row in rows:
        cells = [str(row["scenario"]), str(row["metric"])]
        for label in labels:
            cells += [
                _fmt(row[f"{label}_mean"]),
                _fmt(row[f"{label}_std"]),
                str(int(row[f"{label}_n"])),
            ]
        out.append(cells)
    _write(path, tuple(columns), out, comment)
