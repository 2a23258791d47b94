"""Run traces: per-time-unit regret accounting and serialization.

A trace stores phase-level segments rather than raw rows (a matching play or
an exploitation stretch holds one joint profile for its whole length), but
expands losslessly to one CSV row per time unit. Cumulative regret is
sampled at power-of-two checkpoints so long-horizon growth can be read off
a handful of points.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

PHASE_EXPLORE = "explore"
PHASE_MATCH = "match"
PHASE_EXPLOIT = "exploit"


@dataclass
class Segment:
    t_start: int
    epoch: int
    phase: str
    length: int
    # joint profile for match/exploit segments; (length, players) matrix for explore
    actions: object
    # scalar per-unit regret, or per-unit vector for explore segments
    regret: object


class RunTrace:
    """Regret, phase and profile history of one simulated run."""

    def __init__(self, num_players, horizon, optimal_profile, j1):
        self.num_players = num_players
        self.horizon = horizon
        self.optimal_profile = tuple(optimal_profile)
        self.j1 = j1
        self.segments: list[Segment] = []
        self.epoch_records: list[dict] = []
        self.checkpoints: list[tuple[int, float]] = []
        self.total_regret = 0.0
        self.elapsed = 0
        self.truncated = None
        self.final_estimates = None
        self._next_checkpoint = 1

    # ── recording ─────────────────────────────────────────────────────

    def _advance(self, length, per_unit):
        """Advance time, accumulating regret and crossing checkpoints.

        ``per_unit`` is a scalar (constant within the segment) or a vector
        of per-unit increments; checkpoint values are exact either way.
        """
        t0, r0 = self.elapsed, self.total_regret
        if np.ndim(per_unit) == 0:
            total = float(per_unit) * length
            while self._next_checkpoint <= t0 + length:
                self.checkpoints.append(
                    (self._next_checkpoint, r0 + float(per_unit) * (self._next_checkpoint - t0))
                )
                self._next_checkpoint *= 2
        else:
            cums = np.cumsum(per_unit)
            total = float(cums[-1]) if length else 0.0
            while self._next_checkpoint <= t0 + length:
                self.checkpoints.append(
                    (self._next_checkpoint, r0 + float(cums[self._next_checkpoint - t0 - 1]))
                )
                self._next_checkpoint *= 2
        self.total_regret = r0 + total
        self.elapsed = t0 + length

    def add_exploration(self, epoch, actions, per_unit_regret):
        n = len(actions)
        if n == 0:
            return
        self.segments.append(
            Segment(self.elapsed, epoch, PHASE_EXPLORE, n, actions, per_unit_regret)
        )
        self._advance(n, per_unit_regret)

    def add_play(self, epoch, profile, length, regret_increment):
        self.segments.append(
            Segment(self.elapsed, epoch, PHASE_MATCH, length, tuple(profile), regret_increment)
        )
        self._advance(length, regret_increment)

    def add_exploit(self, epoch, profile, length, regret_increment):
        self.segments.append(
            Segment(self.elapsed, epoch, PHASE_EXPLOIT, length, tuple(profile), regret_increment)
        )
        self._advance(length, regret_increment)

    def record_epoch(self, epoch, exploit_profile, completed, f_counts, estimates):
        self.epoch_records.append(
            {
                "epoch": epoch,
                "exploit_profile": tuple(exploit_profile),
                "matched_optimal": tuple(exploit_profile) == self.optimal_profile,
                "completed": completed,
                "f_counts": [np.asarray(f).tolist() for f in f_counts],
                "estimates": [np.asarray(e).tolist() for e in estimates],
            }
        )

    def mark_truncated(self, epoch, phase):
        self.truncated = {"epoch": epoch, "phase": phase}

    def finish(self, final_estimates):
        self.final_estimates = final_estimates

    # ── queries ───────────────────────────────────────────────────────

    def checkpoint_regret(self):
        """Cumulative regret at power-of-two times, as {time: regret}."""
        return dict(self.checkpoints)

    def final_completed_epoch(self):
        """Record of the last epoch whose phases all ran to full length."""
        completed = [r for r in self.epoch_records if r["completed"]]
        return completed[-1] if completed else None

    def regret_by_phase(self):
        """Total regret attributed to each phase; sums to total_regret."""
        out = {PHASE_EXPLORE: 0.0, PHASE_MATCH: 0.0, PHASE_EXPLOIT: 0.0}
        for seg in self.segments:
            if np.ndim(seg.regret) == 0:
                out[seg.phase] += float(seg.regret) * seg.length
            else:
                out[seg.phase] += float(np.sum(seg.regret))
        return out

    def phase_boundaries(self):
        """One (epoch, phase, t_start, t_end) row per phase, segments merged."""
        out = []
        for seg in self.segments:
            if out and out[-1]["epoch"] == seg.epoch and out[-1]["phase"] == seg.phase:
                out[-1]["t_end"] = seg.t_start + seg.length
            else:
                out.append(
                    {
                        "epoch": seg.epoch,
                        "phase": seg.phase,
                        "t_start": seg.t_start,
                        "t_end": seg.t_start + seg.length,
                    }
                )
        return out

    # ── serialization ─────────────────────────────────────────────────

    def iter_rows(self):
        """Yield one (time, epoch, phase, actions..., regret) row per time unit."""
        for seg in self.segments:
            if seg.phase == PHASE_EXPLORE:
                for i in range(seg.length):
                    yield (
                        seg.t_start + i,
                        seg.epoch,
                        seg.phase,
                        *(int(a) for a in seg.actions[i]),
                        float(seg.regret[i]),
                    )
            else:
                row_tail = (*(int(a) for a in seg.actions), float(seg.regret))
                for i in range(seg.length):
                    yield (seg.t_start + i, seg.epoch, seg.phase, *row_tail)

    def csv_header(self):
        return ["time", "epoch", "phase"] + [
            f"action_{j}" for j in range(self.num_players)
        ] + ["regret"]

    def write_csv(self, fileobj):
        writer = csv.writer(fileobj, lineterminator="\n")
        writer.writerow(self.csv_header())
        for row in self.iter_rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def summary(self):
        """Machine-readable run summary (config echo and seed added by the caller)."""
        phase_regret = self.regret_by_phase()
        final = self.final_completed_epoch()
        return {
            "horizon": self.horizon,
            "elapsed": self.elapsed,
            "optimal_profile": list(self.optimal_profile),
            "j1": self.j1,
            "total_regret": self.total_regret,
            "regret_per_unit": self.total_regret / self.elapsed if self.elapsed else 0.0,
            "regret_checkpoints": [[t, r] for t, r in self.checkpoints],
            "regret_by_phase": phase_regret,
            "phase_boundaries": self.phase_boundaries(),
            "epochs": self.epoch_records,
            "final_completed_epoch": final["epoch"] if final else None,
            "final_exploit_profile": list(final["exploit_profile"]) if final else None,
            "final_matched_optimal": final["matched_optimal"] if final else None,
            "truncated": self.truncated,
            "final_estimates": [
                np.asarray(e).tolist() if e is not None else None
                for e in (self.final_estimates or [])
            ],
        }
