"""CSV writers for experiment and sweep results.

Floats are written with 17 significant digits so reruns are byte-identical
and values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .harness import RegretSeries, SweepResult


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _writer(path: Path):
    fh = path.open("w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def emit_outputs(series: RegretSeries, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "regret.csv", out / "summary.csv"]
        fh, w = _writer(written[0])
        with fh:
            w.writerow(["agent", "run", "batch", "cumulative_regret"])
            for agent in series.agents:
                data = series.series(agent)
                for run in range(data.shape[0]):
                    for b in range(data.shape[1]):
                        w.writerow([agent, run, b + 1, _fmt(data[run, b])])
        fh, w = _writer(written[1])
        with fh:
            w.writerow(["agent", "batch", "mean_cumulative_regret", "stderr"])
            for agent in series.agents:
                mean, err = series.mean(agent), series.stderr(agent)
                for b in range(series.batches):
                    w.writerow([agent, b + 1, _fmt(mean[b]), _fmt(err[b])])
        for rec in series.records:
            if rec.ground_truth is not None:
                gt_dir = out / "ground_truth"
                gt_dir.mkdir(exist_ok=True)
                path = gt_dir / f"run_{rec.run}.csv"
                fh, w = _writer(path)
                with fh:
                    w.writerow(["record", "page", "label", "value"])
                    for kind, page, label, value in rec.ground_truth:
                        w.writerow([kind, page, label, _fmt(value)])
                written.append(path)
            if rec.state is not None:
                st_dir = out / "state"
                st_dir.mkdir(exist_ok=True)
                path = st_dir / f"run_{rec.run}.json"
                path.write_text(json.dumps(rec.state, indent=1, sort_keys=True))
                written.append(path)
    except OSError as exc:
        raise OSError(f"cannot write results to {exc.filename or out}: {exc.strerror}") from exc
    return written


def emit_sweep(result: SweepResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    path = out / f"plot_{result.axis}.csv"
    try:
        out.mkdir(parents=True, exist_ok=True)
        fh, w = _writer(path)
        with fh:
            w.writerow(["agent", result.axis, "combinations", "mean_final_regret", "stderr"])
            for agent in result.agents:
                for v, n, m, e in zip(result.values, result.combinations,
                                      result.final_mean[agent], result.final_stderr[agent]):
                    w.writerow([agent, v, n, _fmt(m), _fmt(e)])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path
