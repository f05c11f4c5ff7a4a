"""
Run reports, the metrics stream and sweep tables.
"""

import json
import os
import threading
import time
import uuid
from typing import Dict, List, Optional, Sequence

SWEEP_COLUMNS = ["value", "overall_accuracy", "mean_class_accuracy", "learnable", "train_size", "error"]


class RunReporter:
    """Appends metrics records and formats human-readable summaries."""

    def __init__(self, out_dir: str, config_hash: str, run_id: Optional[str] = None):
        self.out_dir = out_dir
        self.config_hash = config_hash
        self.run_id = run_id or uuid.uuid4().hex[:12]
        self.started = time.time()
        self._lock = threading.Lock()

    @property
    def metrics_path(self) -> str:
        return os.path.join(self.out_dir, "metrics.jsonl")

    def record(
        self, step: int, metrics: Dict, seeds: Dict, config_hash: Optional[str] = None
    ) -> Dict:
        """
        Append one MetricsRecord line and return it.

        `config_hash` overrides the run-level hash for records of a derived
        config (resolved class names, sweep cells).
        """
        entry = {
            "run_id": self.run_id,
            "config_hash": config_hash or self.config_hash,
            "step": step,
            "metrics": metrics,
            "wall_clock": round(time.time() - self.started, 3),
            "seeds": seeds,
        }
        os.makedirs(self.out_dir, exist_ok=True)
        with self._lock, open(self.metrics_path, "a") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
        return entry

    def save_results(self, results, filename: str) -> str:
        """Save raw results to a JSON file under the output directory."""
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, filename)
        with open(path, "w") as f:
            json.dump(results, f, indent=2)
        return path


def read_metrics(path: str) -> List[Dict]:
    with open(path, "r") as f:
        return [json.loads(line) for line in f if line.strip()]


def _banner(title: str) -> List[str]:
    return ["=" * 80, title, "=" * 80, ""]


def _section(title: str) -> List[str]:
    return [title, "-" * 80]


def format_learnable(total: int, groups: Dict[str, int]) -> List[str]:
    lines = _section("LEARNABLE PARAMETERS")
    for group, count in groups.items():
        lines.append(f"  {group}: {count:,}")
    lines.append(f"  total: {total:,} ({total / 1e6:.2f} M)")
    lines.append("")
    return lines


def format_accuracy(metrics: Dict, class_names: Sequence[str]) -> List[str]:
    lines = _section("ACCURACY")
    lines.append(f"Overall Accuracy: {metrics['overall_accuracy']:.2%}")
    lines.append(f"Mean Class Accuracy: {metrics['mean_class_accuracy']:.2%}")
    lines.append("Per class:")
    for name, acc in zip(class_names, metrics["per_class_accuracy"]):
        lines.append(f"  {name}: " + ("n/a" if acc is None else f"{acc:.2%}"))
    lines.append("")
    return lines


def generate_report(title: str, summary: Dict, class_names: Sequence[str] = ()) -> str:
    """
    Formatted report for one command.

    Args:
        title: Banner title
        summary: May hold 'config_hash', 'learnable' ((total, groups)),
            'losses' (first, last), 'metrics', 'baselines' and 'checkpoint'

    Returns:
        Report text
    """
    lines = _banner(title)
    if "config_hash" in summary:
        lines.append(f"Config hash: {summary['config_hash']}")
        lines.append("")
    if "learnable" in summary:
        lines.extend(format_learnable(*summary["learnable"]))
    if "losses" in summary:
        first, last = summary["losses"]
        lines.extend(_section("TRAINING"))
        lines.append(f"Loss: {first:.4f} -> {last:.4f}")
        lines.append("")
    if "metrics" in summary:
        lines.extend(format_accuracy(summary["metrics"], class_names))
    if summary.get("baselines"):
        lines.extend(_section("MANUAL PROMPT BASELINES"))
        for name, acc in summary["baselines"].items():
            lines.append(f"  {name}: {acc:.2%}")
        lines.append("")
    if "checkpoint" in summary:
        lines.append(f"Checkpoint: {summary['checkpoint']}")
        lines.append("")
    lines.append("=" * 80)
    return "\n".join(lines)


def format_sweep_table(axis: str, rows: List[Dict]) -> str:
    """Whitespace-aligned table, one row per swept value."""
    header = [axis] + SWEEP_COLUMNS[1:]
    body = []
    for row in rows:
        cells = [str(row.get("value"))]
        for key in SWEEP_COLUMNS[1:]:
            value = row.get(key)
            cells.append(f"{value:.4f}" if isinstance(value, float) else ("-" if value is None else str(value)))
        body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = _banner(f"SWEEP: {axis}")
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("-" * 80)
    lines.extend("  ".join(c.ljust(w) for c, w in zip(cells, widths)) for cells in body)
    lines.append("=" * 80)
    return "\n".join(lines)


def format_interpretation(rows: List[Dict]) -> str:
    """Index, nearest word and distance per context vector."""
    lines = _banner("LEARNED CONTEXT INTERPRETATION")
    lines.append(f"{'index':<8}{'nearest word':<24}{'distance':>10}")
    lines.append("-" * 80)
    for row in rows:
        lines.append(f"{row['index']:<8}{row['word']:<24}{row['distance']:>10.4f}")
    lines.append("=" * 80)
    return "\n".join(lines)
