"""The shape-servoing loop: observe, select, execute, record.

A session owns one scenario run: the evolving grid, the fixed desired
image, the error history and the per-iteration records. Per-iteration
random streams are derived from the master seed and the iteration index,
so runs are reproducible bit for bit and an operator-driven run coincides
with an autonomous one that makes the same choices. Saved logs are
self-contained (they embed the scenario) and can be replayed and
verified.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import servo, strategies, vision
from ._kernels import BACKEND
from .learner import MlpModel
from .scenarios import Scenario, action_to_dict, scenario_from_dict, scenario_to_dict
from .sandfield import ActionRejected, render
from .servo import ServoDivergence, ToolState
from .strategies import (
    NoPushNeeded,
    NothingToTap,
    Push,
    ShapeReached,
    Tap,
    check_termination,
)
from .vision import ContourNotDetected, NoDifference

LOG_FORMAT = "sandshape-log"
LOG_VERSION = 1

CHOICES = ("auto", "tap", "push-max", "push-avg", "push-ann")


class SessionTerminated(RuntimeError):
    """A step was requested on a session that has already stopped."""


class _CountingRng:
    """Thin wrapper counting how many draws an iteration consumed."""

    def __init__(self, seed: int, iteration: int):
        seq = np.random.SeedSequence(entropy=seed, spawn_key=(iteration,))
        self._rng = np.random.Generator(np.random.PCG64(seq))
        self.draws = 0

    def integers(self, *args, **kwargs):
        self.draws += 1
        return self._rng.integers(*args, **kwargs)


@dataclass
class IterationRecord:
    k: int
    choice: str
    resolved: str | None
    action: dict | None
    e_before: float
    e_after: float
    reason: str | None = None
    roi: tuple | None = None
    contour_current: list | None = None
    contour_near: list | None = None
    rng_draws: int = 0
    wall_ms: float = 0.0  # runtime only; not serialized

    def to_doc(self) -> dict:
        return {
            "k": self.k,
            "choice": self.choice,
            "resolved": self.resolved,
            "action": self.action,
            "e_before": self.e_before,
            "e_after": self.e_after,
            "reason": self.reason,
            "roi": list(self.roi) if self.roi else None,
            "contour_current": self.contour_current,
            "contour_near": self.contour_near,
            "rng_draws": self.rng_draws,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "IterationRecord":
        return cls(
            k=doc["k"], choice=doc["choice"], resolved=doc["resolved"], action=doc["action"],
            e_before=doc["e_before"], e_after=doc["e_after"], reason=doc["reason"],
            roi=tuple(doc["roi"]) if doc["roi"] else None,
            contour_current=doc["contour_current"], contour_near=doc["contour_near"],
            rng_draws=doc["rng_draws"],
        )


@dataclass
class SessionLog:
    scenario: dict
    records: list[IterationRecord]
    terminated: bool
    reason: str | None
    final_error: float
    grid_sha256: str
    backend: str = BACKEND


class Session:
    """One scenario run. Mutating calls must be serialized by the caller."""

    def __init__(self, scenario: Scenario, model: MlpModel | None = None, auto_strategy: str = "max"):
        self.scenario = scenario
        self.model = model
        self.auto_strategy = auto_strategy
        self.grid = scenario.initial_grid()
        self.desired_img = scenario.desired_image()
        self.current_img = render(self.grid, scenario.render)
        self.errors: list[float] = [self._error()]
        self.records: list[IterationRecord] = []
        self.terminated = False
        self.reason: str | None = None
        home = scenario.servo.home_pixel
        hx, hy = scenario.servo.camera.unproject(*home)
        self.tool_state = ToolState(hx, hy, scenario.servo.z_base)

    # -- measurement ------------------------------------------------------

    def _error(self) -> float:
        return vision.mi_error(self.current_img, self.desired_img, self.scenario.bins)

    @property
    def k(self) -> int:
        return len(self.records)

    @property
    def current_error(self) -> float:
        return self.errors[-1]

    def _rng(self, iteration: int) -> _CountingRng:
        return _CountingRng(self.scenario.master_seed, iteration)

    # -- action construction ----------------------------------------------

    def _build_action(self, kind: str, rng) -> tuple:
        """Returns (action, roi, contour_current, contour_near)."""
        sc = self.scenario
        if kind == "tap":
            cur = vision.resample_to_tool(self.current_img, sc.tool)
            des = vision.resample_to_tool(self.desired_img, sc.tool)
            return strategies.select_tap(cur, des, sc.tool, rng), None, None, None
        target = strategies.local_target(
            self.current_img, self.desired_img, sc.stats, sc.n_points, rng,
            sand_threshold=sc.render.sand_cutoff, blob_threshold=sc.blob_threshold,
        )
        strategy = kind.removeprefix("push-")
        if strategy == "max":
            action = strategies.push_maximum(target, rng)
        elif strategy == "avg":
            action = strategies.push_average(target)
        elif strategy == "ann":
            if self.model is None:
                raise ValueError("ann strategy requires a trained model")
            action = strategies.push_learned(target, self.model, (sc.width, sc.height))
        else:
            raise ValueError(f"unknown push strategy {strategy!r}")
        return action, target.roi.as_tuple(), target.current.tolist(), target.near.tolist()

    def _execute(self, action) -> None:
        sc = self.scenario
        if isinstance(action, Push):
            plan = servo.plan_push(action, sc.servo, self.grid, sc.tool)
        else:
            plan = servo.plan_tap(action, sc.servo)
        self.tool_state, self.grid, _ = servo.execute(
            plan, self.tool_state, self.grid, sc.servo, sc.tool, sc.tap_level
        )
        self.current_img = render(self.grid, sc.render)

    def _resolve(self, choice: str, rng) -> str:
        if choice == "auto":
            sc = self.scenario
            kind = strategies.select_action_auto(
                self.current_img, self.desired_img, sc.alpha, sc.tool, sc.n_points,
                sand_threshold=sc.render.sand_cutoff, workspace=sc.workspace,
            )
            return "tap" if kind == "tap" else f"push-{self.auto_strategy}"
        if choice not in CHOICES:
            raise ValueError(f"unknown choice {choice!r}")
        return choice

    # -- the loop ----------------------------------------------------------

    def run_iteration(self, choice: str = "auto") -> IterationRecord | None:
        """One observe-select-execute-record cycle.

        Strategy failures (no contour after the ROI retries, nothing to
        tap, degenerate push) are recorded as no-op iterations. When the
        shape is already reached, no record is appended; the session just
        terminates. Returns the record, or None on shape-reached.
        """
        if self.terminated:
            raise SessionTerminated(self.reason or "terminated")
        k = len(self.records) + 1
        rng = self._rng(k)
        e_before = self.errors[-1]
        t0 = time.perf_counter()

        try:
            resolved = self._resolve(choice, rng)
        except ShapeReached:
            self.terminated, self.reason = True, "shape-reached"
            return None

        action = roi = cur_c = near_c = None
        reason = None
        try:
            action, roi, cur_c, near_c = self._build_action(resolved, rng)
        except NoDifference:
            self.terminated, self.reason = True, "shape-reached"
            return None
        except NothingToTap:
            reason = "nothing-to-tap"
        except ContourNotDetected:
            reason = "contour-not-detected"
        except NoPushNeeded:
            reason = "no-push-needed"

        if action is not None:
            try:
                self._execute(action)
            except (ActionRejected, ServoDivergence) as err:
                reason = f"execution-failed: {err}"
                action = None

        e_after = self._error() if action is not None else e_before
        self.errors.append(e_after)
        record = IterationRecord(
            k=k, choice=choice, resolved=resolved,
            action=action_to_dict(action) if action is not None else None,
            e_before=e_before, e_after=e_after, reason=reason,
            roi=roi, contour_current=cur_c, contour_near=near_c,
            rng_draws=rng.draws, wall_ms=(time.perf_counter() - t0) * 1e3,
        )
        self.records.append(record)

        verdict = check_termination(self.errors, self.scenario.termination)
        if verdict.stop:
            self.terminated, self.reason = True, verdict.reason
        return record

    def run_autonomous(self) -> SessionLog:
        while not self.terminated:
            self.run_iteration("auto")
        return self.to_log()

    def run_scripted(self, choices) -> SessionLog:
        """Drive with a fixed per-iteration choice sequence (operator mode)."""
        for choice in choices:
            if self.terminated:
                break
            self.run_iteration(choice)
        return self.to_log()

    def run_forced(self, choice: str) -> SessionLog:
        """Repeat one choice until a termination rule fires."""
        while not self.terminated:
            self.run_iteration(choice)
        return self.to_log()

    def terminate(self, reason: str = "operator"):
        self.terminated, self.reason = True, reason

    # -- previews and proposals ---------------------------------------------

    def preview(self, action) -> tuple[np.ndarray, float]:
        """What-if execution on forked state; the session is untouched."""
        sc = self.scenario
        if isinstance(action, Push):
            plan = servo.plan_push(action, sc.servo, self.grid, sc.tool)
        elif isinstance(action, Tap):
            plan = servo.plan_tap(action, sc.servo)
        else:
            raise ValueError(f"not an action: {action!r}")
        state = ToolState(self.tool_state.x, self.tool_state.y, self.tool_state.z)
        _, grid, _ = servo.execute(plan, state, self.grid.copy(), sc.servo, sc.tool, sc.tap_level)
        img = render(grid, sc.render)
        return img, vision.mi_error(img, self.desired_img, sc.bins)

    def propose_actions(self) -> dict[str, dict]:
        """Candidate action per strategy for the upcoming iteration.

        Uses the same seed derivation the next step will use, so a
        proposal matches what the step would do.
        """
        k = len(self.records) + 1
        out: dict[str, dict] = {}
        for kind in ("tap", "push-max", "push-avg", "push-ann"):
            if kind == "push-ann" and self.model is None:
                out[kind] = {"error": "model-not-loaded"}
                continue
            try:
                action, _, _, _ = self._build_action(kind, self._rng(k))
                out[kind] = action_to_dict(action)
            except (NoDifference, NothingToTap, ContourNotDetected, NoPushNeeded) as err:
                out[kind] = {"error": type(err).__name__}
        return out

    # -- persistence ---------------------------------------------------------

    def grid_digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.grid.heights).tobytes())
        h.update(str(self.grid.heights.shape).encode())
        return h.hexdigest()

    def to_log(self) -> SessionLog:
        return SessionLog(
            scenario=scenario_to_dict(self.scenario),
            records=list(self.records),
            terminated=self.terminated,
            reason=self.reason,
            final_error=self.errors[-1],
            grid_sha256=self.grid_digest(),
        )


def write_log(log: SessionLog, fh):
    fh.write(json.dumps({"format": LOG_FORMAT, "version": LOG_VERSION,
                         "scenario": log.scenario, "backend": log.backend}) + "\n")
    for rec in log.records:
        fh.write(json.dumps(rec.to_doc()) + "\n")
    fh.write(json.dumps({"final": {
        "terminated": log.terminated, "reason": log.reason,
        "final_error": log.final_error, "grid_sha256": log.grid_sha256,
        "iterations": len(log.records),
    }}) + "\n")


def save_log(log: SessionLog, path):
    with open(path, "w") as fh:
        write_log(log, fh)


def load_log(path) -> SessionLog:
    lines = Path(path).read_text().strip().splitlines()
    if not lines:
        raise ValueError("empty log file")
    header = json.loads(lines[0])
    if header.get("format") != LOG_FORMAT or header.get("version") != LOG_VERSION:
        raise ValueError("unrecognized log file")
    footer_doc = json.loads(lines[-1])
    if "final" not in footer_doc:
        raise ValueError("log file missing final line")
    final = footer_doc["final"]
    records = [IterationRecord.from_doc(json.loads(line)) for line in lines[1:-1]]
    if len(records) != final["iterations"]:
        raise ValueError("log file truncated: iteration count mismatch")
    return SessionLog(
        scenario=header["scenario"], records=records,
        terminated=final["terminated"], reason=final["reason"],
        final_error=final["final_error"], grid_sha256=final["grid_sha256"],
        backend=header.get("backend", "unknown"),
    )


def replay(log: SessionLog, model: MlpModel | None = None) -> str:
    """Re-execute a log and compare every record; returns a verdict string."""
    session = Session(scenario_from_dict(log.scenario), model=model)
    for rec in log.records:
        if session.terminated:
            return f"mismatch: engine terminated early at k={rec.k}"
        new = session.run_iteration(rec.choice)
        if new is None:
            return f"mismatch: shape reached at k={rec.k} during replay"
        if new.to_doc() != rec.to_doc():
            return f"mismatch: record k={rec.k} differs"
    if log.reason == "operator" and not session.terminated:
        session.terminate("operator")
    if session.errors[-1] != log.final_error:
        return "mismatch: final error differs"
    if session.grid_digest() != log.grid_sha256:
        return "mismatch: final grid digest differs"
    if session.reason != log.reason:
        return f"mismatch: termination reason {session.reason!r} != {log.reason!r}"
    return "match"


# ---------------------------------------------------------------------------
# benchmark runner


@dataclass
class BenchRun:
    scenario: str
    strategy: str
    seed: int
    errors: list[float]
    reason: str | None

    @property
    def initial_error(self) -> float:
        return self.errors[0]

    @property
    def final_error(self) -> float:
        return self.errors[-1]

    @property
    def iterations(self) -> int:
        return len(self.errors) - 1


@dataclass
class BenchReport:
    runs: list[BenchRun] = field(default_factory=list)

    def summary_rows(self) -> list[dict]:
        return [{
            "scenario": r.scenario, "strategy": r.strategy, "seed": r.seed,
            "initial_e": r.initial_error, "final_e": r.final_error,
            "iterations": r.iterations, "reason": r.reason,
        } for r in self.runs]


_STRATEGY_CHOICE = {"max": "push-max", "avg": "push-avg", "ann": "push-ann",
                    "tap": "tap", "auto": "auto"}


def bench(scenario_factories: dict, strategy_names, seeds, model: MlpModel | None = None) -> BenchReport:
    """Grid of runs: every scenario x strategy x seed, relaxed-rule driven."""
    report = BenchReport()
    for name, factory in scenario_factories.items():
        for strat in strategy_names:
            choice = _STRATEGY_CHOICE[strat]
            for seed in seeds:
                sc = factory() if callable(factory) else factory
                sc.master_seed = seed
                session = Session(sc, model=model)
                if choice == "auto":
                    session.run_autonomous()
                else:
                    session.run_forced(choice)
                report.runs.append(BenchRun(
                    scenario=name, strategy=strat, seed=seed,
                    errors=list(session.errors), reason=session.reason,
                ))
    return report


def write_bench_csv(report: BenchReport, path):
    """Per-iteration error curves: one row per (run, k)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "strategy", "seed", "k", "e_k"])
        for run in report.runs:
            for k, e in enumerate(run.errors):
                writer.writerow([run.scenario, run.strategy, run.seed, k, repr(e)])


def read_bench_csv(path) -> BenchReport:
    runs: dict[tuple, BenchRun] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["scenario"], row["strategy"], int(row["seed"]))
            run = runs.setdefault(key, BenchRun(*key, errors=[], reason=None))
            run.errors.append(float(row["e_k"]))
    return BenchReport(runs=list(runs.values()))
