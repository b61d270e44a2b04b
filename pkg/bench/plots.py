from pathlib import Path
from typing import Dict, Sequence, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from bench.evaluate import BenchReport
from channel.errors import InvalidInputError
from channel.state import ChannelSnapshot
from estimator.base import EstimationResult, Method
from estimator.periodogram import PeriodogramConfig, periodogram

MARKERS = {
    'periodogram': 's',
    'cnn': 'o',
    'cnn+gn': '^',
    'gn-oracle-init': 'D',
}


def plot_mse(report: BenchReport, path: Union[str, Path]) -> Path:
    """MSE of delay and Doppler against SNR, one line per method, with the CRB."""
    path = Path(path)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, column, crb_column, label in (
        (axes[0], 'mse_tau', 'crb_tau', r'$\tau$'),
        (axes[1], 'mse_alpha', 'crb_alpha', r'$\alpha$'),
    ):
        for method in report.methods:
            rows = report.for_method(method)
            ax.semilogy(
                [row.snr_bin_db for row in rows],
                [getattr(row, column) for row in rows],
                marker = MARKERS.get(method, 'x'),
                label = method,
            )
        if report.crb_rows:
            ax.semilogy(
                [row.snr_bin_db for row in report.crb_rows],
                [getattr(row, crb_column) for row in report.crb_rows],
                'k--',
                label = 'CRB',
            )
        ax.set_xlabel('SNR bin [dB]')
        ax.set_title(f'MSE of {label}')
        ax.grid(True, which='both', alpha=0.3)
    axes[0].set_ylabel('MSE (normalized units)')
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_model_order(report: BenchReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    for method in report.methods:
        rows = report.for_method(method)
        ax.plot(
            [row.snr_bin_db for row in rows],
            [row.mean_mo_error for row in rows],
            marker = MARKERS.get(method, 'x'),
            label = method,
        )
    ax.axhline(0.0, color='k', linewidth=0.8)
    ax.set_xlabel('SNR bin [dB]')
    ax.set_ylabel(r'mean $\hat{P} - P$')
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_inference_example(
    snapshots: Sequence[ChannelSnapshot],
    estimates: Sequence[Dict[Method, EstimationResult]],
    path: Union[str, Path],
    oversample: int = 4,
    dynamic_range_db: float = 60.0,
) -> Path:
    '''
    One panel per snapshot: the zero-padded spectrum magnitude |Y| in dB
    over the (alpha, tau) square, the true paths as open circles and each
    method's estimates on top.
    '''
    if len(snapshots) != len(estimates):
        raise InvalidInputError(f"{len(snapshots)} snapshots but {len(estimates)} estimate sets")
    path = Path(path)
    config = PeriodogramConfig(oversample=oversample)
    fig, axes = plt.subplots(1, len(snapshots), figsize=(4 * len(snapshots), 4), squeeze=False)
    for ax, snapshot, results in zip(axes[0], snapshots, estimates):
        power = periodogram(snapshot, config)
        magnitude_db = 10 * np.log10(power / power.max() + 1e-300)
        ax.imshow(
            np.maximum(magnitude_db, -dynamic_range_db),
            origin = 'lower',
            extent = (0.0, 1.0, 0.0, 1.0),
            aspect = 'auto',
            cmap = 'viridis',
        )
        if snapshot.truth is not None:
            ax.scatter(
                snapshot.truth.alphas, snapshot.truth.taus,
                s = 80, facecolors = 'none', edgecolors = 'w', linewidths = 1.5, label = 'truth',
            )
        for method, result in results.items():
            ax.scatter(
                result.alphas, result.taus,
                s = 25, marker = MARKERS.get(method.value, 'x'), label = method.value,
            )
        snr = snapshot.snr_db
        ax.set_title(f'SNR {snr:.1f} dB' if snr is not None else 'SNR unknown')
        ax.set_xlabel(r'$\alpha$')
    axes[0][0].set_ylabel(r'$\tau$')
    axes[0][-1].legend(loc='upper right', fontsize='small')
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
