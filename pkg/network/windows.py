from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.signal import windows

from channel.errors import InvalidInputError


class WindowName(Enum):
    """
    Windows of the multi-window bank, in bank order.
    Each member carries the scipy factory that builds it.
    """
    TUKEY = ('tukey', windows.tukey)
    TAYLOR = ('taylor', windows.taylor)
    CHEBYSHEV = ('chebyshev', windows.chebwin)
    BLACKMAN = ('blackman', windows.blackman)
    FLAT_TOP = ('flattop', windows.flattop)
    COSINE = ('cosine', windows.cosine)
    HANN = ('hann', windows.hann)
    RECTANGULAR = ('rectangular', windows.boxcar)

    def __init__(self, label: str, factory: Callable):
        self.label = label
        self.factory = factory

    @classmethod
    def from_label(cls, label: str) -> Optional['WindowName']:
        for name in cls:
            if name.label == label:
                return name
        return None


DEFAULT_WINDOW_PARAMS = {
    WindowName.TUKEY: {'alpha': 0.5},
    WindowName.TAYLOR: {'nbar': 4, 'sll': 30},
    WindowName.CHEBYSHEV: {'at': 100},
}


def make_window(name: Union[str, WindowName], length: int, **params) -> np.ndarray:
    '''
    Symmetric 1D window of the given length.

    Shape parameters default to DEFAULT_WINDOW_PARAMS; keyword arguments
    override them.
    '''
    if isinstance(name, str):
        window_name = WindowName.from_label(name)
        if window_name is None:
            raise InvalidInputError(
                f"Unknown window '{name}', expected one of {[w.label for w in WindowName]}"
            )
        name = window_name
    if length < 2:
        raise InvalidInputError(f"Window length must be >= 2, got {length}")

    kwargs = {**DEFAULT_WINDOW_PARAMS.get(name, {}), **params}
    return np.asarray(name.factory(length, **kwargs), dtype=float)


@dataclass(frozen=True)
class WindowSpec:
    name: WindowName
    params: Tuple[Tuple[str, float], ...] = ()

    def make(self, length: int) -> np.ndarray:
        return make_window(self.name, length, **dict(self.params))

    def taper(self, n_freq: int, n_time: int) -> np.ndarray:
        """Separable 2D window: outer product of the same window on both axes."""
        return np.outer(self.make(n_freq), self.make(n_time))


def _default_entries() -> Tuple[WindowSpec, ...]:
    return tuple(
        WindowSpec(name, tuple(sorted(DEFAULT_WINDOW_PARAMS.get(name, {}).items())))
        for name in WindowName
    )


@dataclass(frozen=True)
class WindowBank:
    entries: Tuple[WindowSpec, ...] = field(default_factory = _default_entries)

    def __post_init__(self):
        names = tuple(entry.name for entry in self.entries)
        if names != tuple(WindowName):
            raise InvalidInputError(
                f"Window bank must list {[w.label for w in WindowName]} in order, "
                f"got {[n.label for n in names]}"
            )

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def with_params(cls, overrides: dict) -> 'WindowBank':
        '''
        Default bank with per-window parameter overrides,
        e.g. {'tukey': {'alpha': 0.25}}.
        '''
        entries = []
        for entry in _default_entries():
            params = {**dict(entry.params), **overrides.get(entry.name.label, {})}
            entries.append(WindowSpec(entry.name, tuple(sorted(params.items()))))
        unknown = set(overrides) - {name.label for name in WindowName}
        if unknown:
            raise InvalidInputError(f"Unknown windows in overrides: {sorted(unknown)}")
        return cls(tuple(entries))

    def tapers(self, n_freq: int, n_time: int) -> np.ndarray:
        """(N_W, n_freq, n_time) stack of 2D windows."""
        return np.stack([entry.taper(n_freq, n_time) for entry in self.entries])


def window_response(window: np.ndarray, oversample: int = 16) -> np.ndarray:
    """Magnitude of the zero-padded DFT, normalized to its peak, in dB."""
    spectrum = np.abs(np.fft.fft(window, n=oversample * len(window)))
    spectrum = np.maximum(spectrum / spectrum.max(), np.finfo(float).tiny)
    return 20 * np.log10(spectrum)


def _first_null(response: np.ndarray, floor_db: float = -20.0) -> int:
    # The flat-top passband ripples; only a turn below floor_db counts as a null.
    half = response[: len(response) // 2]
    rising = np.flatnonzero((np.diff(half) > 0) & (half[:-1] < floor_db))
    return int(rising[0]) if rising.size else len(half) - 1


def mainlobe_width(window: np.ndarray, oversample: int = 16) -> float:
    """Null-to-null mainlobe width, in DFT bins of the unpadded window."""
    return 2 * _first_null(window_response(window, oversample)) / oversample


def peak_sidelobe_db(window: np.ndarray, oversample: int = 16) -> float:
    """Attenuation of the highest sidelobe below the mainlobe peak, in dB."""
    response = window_response(window, oversample)
    null = _first_null(response)
    return float(-response[null: len(response) - null + 1].max())
