"""Model comparison tables with pairwise significance superscripts."""

import json
import logging
import string
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, List, Mapping, Optional, Sequence

import pandas as pd

from config.settings import FISHER_ITERATIONS, METRIC_KS, SIGNIFICANCE_LEVEL
from evaluation.metrics import MetricReport, metric_names
from evaluation.significance import fisher_randomization, is_significant

logger = logging.getLogger(__name__)

ANSWER_METRICS = ["EM", "F1"]


@dataclass
class ComparisonTable:
    """Mean metrics per model; ``wins[label][metric]`` lists the letters of models it beats significantly."""
    title: str
    metrics: List[str]
    values: pd.DataFrame
    letters: Dict[str, str]
    wins: Dict[str, Dict[str, List[str]]] = field(default_factory=dict)
    p_values: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=["metric", "a", "b", "p_value"]))

    @property
    def labels(self) -> List[str]:
        return list(self.values.index)

    def cell(self, label: str, metric: str) -> str:
        text = f"{100.0 * self.values.loc[label, metric]:.1f}"
        beaten = "".join(self.wins.get(label, {}).get(metric, []))
        return f"{text}^{beaten}" if beaten else text

    def to_dict(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "metrics": list(self.metrics),
            "rows": [
                {
                    "letter": self.letters[label],
                    "model": label,
                    "values": {m: float(self.values.loc[label, m]) for m in self.metrics},
                    "significantly_better_than": {m: list(self.wins.get(label, {}).get(m, [])) for m in self.metrics},
                }
                for label in self.labels
            ],
            "pairwise": [
                {"metric": r.metric, "a": r.a, "b": r.b, "p_value": float(r.p_value)}
                for r in self.p_values.itertuples(index=False)
            ],
        }

    def to_text(self) -> str:
        header = ["", "model"] + list(self.metrics)
        rows = [[f"({self.letters[l]})", l] + [self.cell(l, m) for m in self.metrics] for l in self.labels]
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]

        def line(cells):
            return "  ".join(
                c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))
            ).rstrip()

        return "\n".join([self.title, line(header)] + [line(r) for r in rows]) + "\n"


def _aligned_scores(reports: Mapping[str, MetricReport], metric: str) -> Dict[str, pd.Series]:
    series = {label: report.scores(metric) for label, report in reports.items()}
    reference = None
    for label, s in series.items():
        if reference is None:
            reference = (label, list(s.index))
        elif list(s.index) != reference[1]:
            raise ValueError(f"{label!r} and {reference[0]!r} were evaluated on different questions")
    return series


def compare_reports(
    reports: Mapping[str, MetricReport],
    metrics: Sequence[str],
    title: str = "",
    iterations: int = FISHER_ITERATIONS,
    seed: int = 0,
    level: float = SIGNIFICANCE_LEVEL,
) -> ComparisonTable:
    """Pairwise Fisher randomization tests on every metric; rows keep the order of ``reports``."""
    labels = list(reports)
    if len(labels) > len(string.ascii_lowercase):
        raise ValueError(f"at most {len(string.ascii_lowercase)} models can be compared")
    letters = dict(zip(labels, string.ascii_lowercase))
    for label, report in reports.items():
        missing = [m for m in metrics if m not in report.values]
        if missing:
            raise KeyError(f"report {label!r} lacks metric {missing[0]!r}")
    values = pd.DataFrame(
        [[reports[label].values[m] for m in metrics] for label in labels],
        index=labels, columns=list(metrics),
    )
    wins: Dict[str, Dict[str, List[str]]] = {label: {m: [] for m in metrics} for label in labels}
    tests = []
    for metric in metrics:
        scores = _aligned_scores(reports, metric)
        for a, b in combinations(labels, 2):
            p = fisher_randomization(scores[a].to_numpy(), scores[b].to_numpy(), iterations=iterations, seed=seed)
            tests.append({"metric": metric, "a": a, "b": b, "p_value": p})
            if is_significant(p, level) and values.loc[a, metric] != values.loc[b, metric]:
                winner, loser = (a, b) if values.loc[a, metric] > values.loc[b, metric] else (b, a)
                wins[winner][metric].append(letters[loser])
    for label in labels:
        for metric in metrics:
            wins[label][metric].sort()
    logger.info("Compared %d models on %d metrics (%d tests)", len(labels), len(metrics), len(tests))
    return ComparisonTable(
        title=title,
        metrics=list(metrics),
        values=values,
        letters=letters,
        wins=wins,
        p_values=pd.DataFrame(tests, columns=["metric", "a", "b", "p_value"]),
    )


def build_report(
    reports: Mapping[str, MetricReport],
    ks: Mapping[str, Any] = METRIC_KS,
    iterations: int = FISHER_ITERATIONS,
    seed: int = 0,
    level: float = SIGNIFICANCE_LEVEL,
    config_hash: str = "",
) -> Dict[str, Any]:
    """Retrieval table for every model, and the answer table when all reports carry EM and F1."""
    if not reports:
        raise ValueError("no reports to compare")
    retrieval = compare_reports(
        reports, metric_names(ks), "IR evaluation", iterations, seed, level,
    )
    answers: Optional[ComparisonTable] = None
    if all(all(m in r.values for m in ANSWER_METRICS) for r in reports.values()):
        answers = compare_reports(reports, ANSWER_METRICS, "Reading comprehension", iterations, seed, level)
    return {
        "config_hash": config_hash,
        "significance_level": level,
        "retrieval": retrieval,
        "answers": answers,
    }


def report_json(report: Dict[str, Any]) -> str:
    data = {
        "config_hash": report["config_hash"],
        "significance_level": report["significance_level"],
        "retrieval": report["retrieval"].to_dict(),
        "answers": report["answers"].to_dict() if report["answers"] is not None else None,
    }
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def report_text(report: Dict[str, Any]) -> str:
    parts = [report["retrieval"].to_text()]
    if report["answers"] is not None:
        parts.append(report["answers"].to_text())
    footer = (
        f"Superscripts: significantly better than the lettered rows "
        f"(Fisher randomization, p <= {report['significance_level']:g}).\n"
        f"config {report['config_hash']}\n"
    )
    return "\n".join(parts) + "\n" + footer
