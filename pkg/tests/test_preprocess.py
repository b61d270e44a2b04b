import numpy as np
import pytest

from channel.errors import InvalidInputError
from channel.model import synthesize
from channel.state import ChannelSnapshot, PathSet, SamplingGrid
from network.preprocess import (
    CHANNEL_MAPS,
    LOG_FLOOR,
    multi_window_dft,
    preprocess,
    spectral_transform,
    to_real_channels,
)
from network.windows import (
    WindowBank,
    WindowName,
    WindowSpec,
    mainlobe_width,
    make_window,
    peak_sidelobe_db,
)

BANK = WindowBank()


def snapshot_of(paths, grid):
    return ChannelSnapshot(synthesize(paths, grid), grid)


def test_rectangular_window_is_all_ones():
    np.testing.assert_array_equal(make_window('rectangular', 8), np.ones(8))


def test_hann_window_shape():
    window = make_window(WindowName.HANN, 33)
    assert window[0] == pytest.approx(0.0, abs=1e-15)
    assert window[-1] == pytest.approx(0.0, abs=1e-15)
    assert window[16] == pytest.approx(1.0)


def test_unknown_window_and_short_length():
    with pytest.raises(InvalidInputError):
        make_window('kaiser', 8)
    with pytest.raises(InvalidInputError):
        make_window('hann', 1)


def test_chebyshev_sidelobes():
    assert peak_sidelobe_db(make_window('chebyshev', 64)) >= 99.0


def test_window_trade_off():
    widths = {name: mainlobe_width(make_window(name, 64)) for name in WindowName}
    assert widths[WindowName.RECTANGULAR] == min(widths.values())
    assert peak_sidelobe_db(make_window('hann', 64)) >= 25.0


def test_bank_order_and_overrides():
    assert [entry.name for entry in BANK.entries] == list(WindowName)
    assert len(BANK) == 8
    bank = WindowBank.with_params({'tukey': {'alpha': 0.25}})
    assert dict(bank.entries[0].params) == {'alpha': 0.25}
    with pytest.raises(InvalidInputError):
        WindowBank(BANK.entries[::-1])
    with pytest.raises(InvalidInputError):
        WindowBank.with_params({'kaiser': {'beta': 8}})


def test_taper_is_separable_outer_product():
    spec = WindowSpec(WindowName.HANN)
    np.testing.assert_allclose(spec.taper(6, 9), np.outer(make_window('hann', 6), make_window('hann', 9)))


def test_zero_input_gives_zero_spectra():
    grid = SamplingGrid(16, 16)
    spectra = multi_window_dft(ChannelSnapshot(np.zeros(grid.shape), grid), BANK)
    assert spectra.shape == (8, 16, 16)
    assert not np.any(spectra)


def test_on_bin_path_peaks_at_its_bin():
    grid = SamplingGrid(64, 64)
    spectra = multi_window_dft(snapshot_of(PathSet([1.0], [0.5], [0.5]), grid), BANK)
    rect = np.abs(spectra[-1])
    assert np.unravel_index(np.argmax(rect), rect.shape) == (32, 32)

    spectra = multi_window_dft(snapshot_of(PathSet([1.0], [0.125], [0.75]), grid), BANK)
    rect = np.abs(spectra[-1])
    assert np.unravel_index(np.argmax(rect), rect.shape) == (8, 48)


def test_parseval():
    rng = np.random.default_rng(0)
    data = rng.standard_normal((8, 12)) + 1j * rng.standard_normal((8, 12))
    spectrum = spectral_transform(data)
    assert np.linalg.norm(spectrum) ** 2 == pytest.approx(8 * 12 * np.linalg.norm(data) ** 2, rel=1e-12)


def test_real_channel_examples():
    mapped = to_real_channels(np.array([[[1 + 0j, 0j]]])).tensor
    np.testing.assert_allclose(mapped[:, 0, 0], [1.0, 0.0, np.log10(1 + LOG_FLOOR), 0.0])
    np.testing.assert_allclose(mapped[:, 0, 1], [0.0, 0.0, np.log10(LOG_FLOOR), 0.0])


def test_phase_range_is_half_open():
    mapped = to_real_channels(np.array([[[complex(-1.0, -0.0), -1j]]])).tensor
    assert mapped[3, 0, 0] == pytest.approx(np.pi)
    assert mapped[3, 0, 1] == pytest.approx(-np.pi / 2)


def test_pythagorean_identity_on_random_tensor():
    rng = np.random.default_rng(1)
    spectra = rng.standard_normal((8, 4, 4)) + 1j * rng.standard_normal((8, 4, 4))
    tensor = to_real_channels(spectra).tensor.reshape(8, 4, 4, 4)
    np.testing.assert_allclose(tensor[:, 0] ** 2 + tensor[:, 1] ** 2, np.abs(spectra) ** 2, rtol=1e-6)


def test_preprocess_layout_and_determinism():
    grid = SamplingGrid(16, 16)
    snapshot = snapshot_of(PathSet([0.3 + 0.4j, 1j], [0.1, 0.7], [0.2, 0.9]), grid)
    first = preprocess(snapshot, BANK)
    second = preprocess(snapshot, BANK)
    assert first.tensor.shape == (32, 16, 16)
    assert np.all(np.isfinite(first.tensor))
    assert np.array_equal(first.tensor, second.tensor)
    assert first.channel_order[:4] == tuple(('tukey', name) for name in CHANNEL_MAPS)
    assert first.channel_order[-1] == ('rectangular', 'phase')


def test_signed_zero_entries_have_zero_phase():
    spectra = np.array([[[complex(-0.0, -0.0), complex(-0.0, 0.0), complex(0.0, -0.0)]]])
    mapped = to_real_channels(spectra).tensor
    np.testing.assert_array_equal(mapped[3, 0], [0.0, 0.0, 0.0])
