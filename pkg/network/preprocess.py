'''
Network input: multi-window 2D-DFT of a snapshot, mapped to real channels.

Channel layout of the output tensor is window-major, then
(real, imag, log10 magnitude, phase); rows are delay bins and columns are
Doppler bins.
'''
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from channel.errors import InvalidInputError
from channel.state import ChannelSnapshot
from network.windows import WindowBank

LOG_FLOOR = 1e-12
CHANNEL_MAPS = ('real', 'imag', 'log_magnitude', 'phase')


@dataclass(frozen=True, eq=False)
class PreprocessedInput:
    tensor: np.ndarray                      # (4 * N_W, n_freq, n_time)
    channel_order: Tuple[Tuple[str, str], ...]


def spectral_transform(data: np.ndarray, n_freq: Optional[int] = None, n_time: Optional[int] = None) -> np.ndarray:
    '''
    Unnormalized 2D DFT over the last two axes, zero-padded to
    (n_freq, n_time) when given.

    The delay phasor exp(-2j pi k tau) needs the inverse-sense kernel and
    the Doppler phasor exp(2j pi l alpha) the forward one, so that a path
    at (tau, alpha) peaks at bin (tau * n_freq, alpha * n_time).
    '''
    spectrum = np.fft.ifft(data, n=n_freq, axis=-2, norm='forward')
    return np.fft.fft(spectrum, n=n_time, axis=-1)


def multi_window_dft(snapshot: ChannelSnapshot, bank: WindowBank) -> np.ndarray:
    """(N_W, n_freq, n_time) complex spectra, one per window of the bank."""
    data = np.asarray(snapshot.data)
    if data.shape != snapshot.grid.shape:
        raise InvalidInputError(f"Snapshot has shape {data.shape}, grid expects {snapshot.grid.shape}")
    tapers = bank.tapers(*snapshot.grid.shape)
    return spectral_transform(tapers * data[None, :, :])


def to_real_channels(spectra: np.ndarray, bank: Optional[WindowBank] = None, floor: float = LOG_FLOOR) -> PreprocessedInput:
    spectra = np.asarray(spectra)
    phase = np.angle(spectra)
    # Signed zeros give np.angle results of pi or -pi; a zero entry has phase 0.
    phase[np.abs(spectra) == 0] = 0.0
    phase[phase <= -np.pi] = np.pi
    channels = np.stack(
        [spectra.real, spectra.imag, np.log10(np.abs(spectra) + floor), phase],
        axis=1,
    )
    n_windows = spectra.shape[0]
    tensor = channels.reshape(4 * n_windows, *spectra.shape[1:])

    labels = [entry.name.label for entry in bank.entries] if bank is not None else [str(w) for w in range(n_windows)]
    order = tuple((label, mapping) for label in labels for mapping in CHANNEL_MAPS)
    return PreprocessedInput(tensor=tensor, channel_order=order)


def preprocess(snapshot: ChannelSnapshot, bank: WindowBank) -> PreprocessedInput:
    return to_real_channels(multi_window_dft(snapshot, bank), bank)
