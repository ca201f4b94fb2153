# db/results_api.py
"""
Cross-report comparison: load several evaluation reports into one
DataFrame and render the model comparison table.
"""

from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd

from db.store import read_report

COLUMNS = ["model", "similarity", "accuracy", "records", "failed"]


def load_reports(paths: Sequence[str | Path]) -> pd.DataFrame:
    """
    One row per report, in the order given.

    Raises SchemaError for any report that does not match the schema.
    """
    rows = []
    for p in paths:
        rep = read_report(p)
        rows.append({
            "model": rep.model_name,
            "similarity": rep.mean_similarity,
            "accuracy": rep.mean_accuracy,
            "records": rep.manifest.records_total or len(rep.record_results),
            "failed": rep.manifest.records_failed,
        })
    return pd.DataFrame(rows, columns=COLUMNS)


def best_flags(df: pd.DataFrame) -> pd.DataFrame:
    """Adds best_similarity / best_accuracy columns (ties are all marked)."""
    out = df.copy()
    multi = len(out) > 1
    out["best_similarity"] = multi & (out["similarity"] == out["similarity"].max())
    out["best_accuracy"] = multi & (out["accuracy"] == out["accuracy"].max())
    return out


def render_table(df: pd.DataFrame) -> str:
    """Plain-text comparison table; the best score per column carries '*'."""
    flagged = best_flags(df)
    header = f"{'Model':<32} {'Similarity Score':>17} {'Accuracy Score':>15}"
    lines = [header, "-" * len(header)]
    for _, row in flagged.iterrows():
        sim = f"{row['similarity']:.4f}" + ("*" if row["best_similarity"] else " ")
        acc = f"{row['accuracy']:.4f}" + ("*" if row["best_accuracy"] else " ")
        lines.append(f"{row['model']:<32} {sim:>17} {acc:>15}")
    return "\n".join(lines) + "\n"


def comparison_rows(df: pd.DataFrame) -> List[Dict]:
    flagged = best_flags(df)
    return [
        {
            "model": row["model"],
            "similarity": float(row["similarity"]),
            "accuracy": float(row["accuracy"]),
            "best_similarity": bool(row["best_similarity"]),
            "best_accuracy": bool(row["best_accuracy"]),
        }
        for _, row in flagged.iterrows()
    ]


def plot_comparison(df: pd.DataFrame, out_path: str | Path) -> Path:
    """Grouped bar chart of both scores per model."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ax = df.set_index("model")[["similarity", "accuracy"]].plot.bar(rot=0, ylim=(0, 1))
    ax.set_ylabel("score")
    ax.set_title("Model comparison")
    fig = ax.get_figure()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
