"""Plotly chart builders for training curves and model comparisons."""

from pathlib import Path
from typing import Dict, Union

import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from config import COLORS
from trainer.stages import TrainLog
from .report import ComparisonTable

SERIES_COLORS = [COLORS["primary"], COLORS["eca"], COLORS["ilf"], COLORS["text_only"], COLORS["late"], COLORS["accent"]]


def _color(i: int) -> str:
    return SERIES_COLORS[i % len(SERIES_COLORS)]


def _style(fig: go.Figure, height: int) -> go.Figure:
    fig.update_layout(
        paper_bgcolor='rgba(0,0,0,0)',
        plot_bgcolor='rgba(0,0,0,0)',
        margin=dict(l=60, r=20, t=40, b=40),
        font=dict(color=COLORS["text"], family="Nunito"),
        height=height,
        legend=dict(
            orientation="h",
            yanchor="bottom",
            y=1.02,
            xanchor="right",
            x=1,
        ),
    )
    fig.update_xaxes(showgrid=True, gridcolor='rgba(136, 136, 136, 0.2)')
    fig.update_yaxes(showgrid=True, gridcolor='rgba(136, 136, 136, 0.2)')
    return fig


def log_frame(log: TrainLog) -> pd.DataFrame:
    frame = pd.DataFrame([r.to_record() for r in log.records])
    if "val_mrr" not in frame:
        frame["val_mrr"] = float("nan")
    return frame


def create_training_curves(logs: Dict[str, TrainLog], smoothing: int = 10) -> go.Figure:
    """Loss (rolling mean), learning rate and validation in-batch MRR against step."""
    fig = make_subplots(
        rows=3, cols=1, shared_xaxes=True, vertical_spacing=0.06,
        subplot_titles=("Training loss", "Learning rate", "Validation in-batch MRR"),
    )
    if not logs:
        fig.add_annotation(
            text="No training logs",
            xref="paper", yref="paper",
            x=0.5, y=0.5,
            showarrow=False,
            font=dict(color=COLORS["muted"], size=14),
        )
    for i, (label, log) in enumerate(logs.items()):
        df = log_frame(log)
        steps = df[df["step"] > 0]
        color = _color(i)
        fig.add_trace(go.Scatter(
            x=steps["step"],
            y=steps["loss"].rolling(max(smoothing, 1), min_periods=1).mean(),
            mode='lines',
            name=label,
            legendgroup=label,
            line=dict(color=color, width=2),
        ), row=1, col=1)
        fig.add_trace(go.Scatter(
            x=steps["step"],
            y=steps["lr"],
            mode='lines',
            name=label,
            legendgroup=label,
            showlegend=False,
            line=dict(color=color, width=1, dash="dot"),
        ), row=2, col=1)
        validations = df.dropna(subset=["val_mrr"])
        fig.add_trace(go.Scatter(
            x=validations["step"],
            y=validations["val_mrr"],
            mode='lines+markers',
            name=label,
            legendgroup=label,
            showlegend=False,
            line=dict(color=color, width=2),
            marker=dict(size=6),
            hovertemplate="step %{x}<br>MRR %{y:.3f}<extra></extra>",
        ), row=3, col=1)
    fig.update_xaxes(title="Step", row=3, col=1)
    return _style(fig, height=700)


def create_metric_bars(table: ComparisonTable) -> go.Figure:
    """Grouped bars, one group per metric and one bar per model; labels carry the superscripts."""
    fig = go.Figure()
    for i, label in enumerate(table.labels):
        values = [100.0 * table.values.loc[label, m] for m in table.metrics]
        fig.add_trace(go.Bar(
            x=table.metrics,
            y=values,
            name=f"({table.letters[label]}) {label}",
            marker=dict(color=_color(i)),
            text=[table.cell(label, m) for m in table.metrics],
            textposition='outside',
            textfont=dict(size=11),
        ))
    fig.update_layout(
        barmode="group",
        title=table.title,
        yaxis=dict(range=[0, 105], title=None),
        xaxis=dict(title=None),
    )
    return _style(fig, height=400)


def write_chart(fig: go.Figure, path: Union[str, Path], chart_id: str) -> Path:
    """Standalone HTML; a fixed div id keeps reruns byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    html = fig.to_html(include_plotlyjs="cdn", full_html=True, div_id=chart_id)
    path.write_text(html, encoding="utf-8")
    return path
