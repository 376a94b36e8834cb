"""File output: CSV metrics, client summaries, similarity dump, config echo.

All reals print through one 9-significant-digit format so reruns under a
fixed seed are byte-identical; files use LF endings and UTF-8 regardless of
platform.  Wall-clock timing stays in memory and never reaches a file.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Sequence

import numpy as np

from .federation import ExperimentReport


def format_real(value: float) -> str:
    """Canonical 9-significant-digit rendering used by every CSV writer."""
    return f"{float(value):.9g}"


def _cell(value: object) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(float(value))
    return str(value)


def write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def write_table(path: str, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    """Plain CSV with the canonical cell formatting (no quoting needed here)."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(value) for value in row))
    write_text(path, "\n".join(lines) + "\n")


def write_report(report: ExperimentReport, out_dir: str) -> list[str]:
    """Write metrics.csv, clients.csv, phi.csv (when present), config.json.

    Returns the paths written.  phi.csv only exists for the similarity-based
    algorithm; the others carry no pairwise state worth dumping.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    metrics_path = os.path.join(out_dir, "metrics.csv")
    write_table(
        metrics_path,
        ("round", "algo", "mean_acc", "std_acc", "uploaded_params", "downloaded_params"),
        (
            (
                row.round_index,
                report.algorithm,
                row.mean_accuracy,
                row.std_accuracy,
                row.uploaded,
                row.downloaded,
            )
            for row in report.rounds
        ),
    )
    written.append(metrics_path)

    clients_path = os.path.join(out_dir, "clients.csv")
    write_table(
        clients_path,
        ("client", "final_acc", "train_size", "test_size", "labels_present"),
        (
            (
                i,
                report.final_accuracies[i],
                report.client_train_sizes[i],
                report.client_test_sizes[i],
                "|".join(str(lb) for lb in report.client_labels[i]),
            )
            for i in range(report.n_clients)
        ),
    )
    written.append(clients_path)

    if report.final_phi is not None:
        phi_path = os.path.join(out_dir, "phi.csv")
        n = report.final_phi.shape[0]
        write_table(
            phi_path,
            [str(j) for j in range(n)],
            ([report.final_phi[i, j] for j in range(n)] for i in range(n)),
        )
        written.append(phi_path)

    if report.config_echo is not None:
        config_path = os.path.join(out_dir, "config.json")
        write_text(
            config_path, json.dumps(report.config_echo, indent=2, sort_keys=True) + "\n"
        )
        written.append(config_path)
    return written


def read_phi_csv(path: str) -> np.ndarray:
    """Parse a phi.csv dump (client-id header, then n rows of n values)."""
    with open(path, encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path} has no matrix rows")
    values = [[float(cell) for cell in line.split(",")] for line in lines[1:]]
    matrix = np.array(values, dtype=np.float64)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{path} contains a non-square matrix {matrix.shape}")
    return matrix
