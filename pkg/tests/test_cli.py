import csv
import json

import pytest
import torch

from bench.plots import plot_inference_example
from channel.dataset import DatasetReader, read_header
from channel.errors import InvalidInputError
from main import main
from network.model import HarmonicNet, NetworkConfig
from network.training import ModelWeights

SMALL = {
    'grid': {'n_freq': 16, 'n_time': 16},
    'dataset': {'path_count_range': [1, 2]},
    'bench': {'trials_per_bin': 2},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(SMALL))
    return str(path)


def read_rows(path):
    with open(path) as handle:
        return list(csv.reader(handle))


def test_gen_empty_dataset(tmp_path, config_path):
    out = tmp_path / 'data'
    assert main(['gen', '--config', config_path, '--out', str(out), '--split', 'test', '--count', '0']) == 0
    header = read_header(out / 'test')
    assert header['count'] == 0
    assert not (out / 'train.json').exists()


def test_gen_then_crb_and_refine(tmp_path, config_path):
    data = tmp_path / 'data'
    assert main(['gen', '--config', config_path, '--out', str(data), '--split', 'test', '--count', '3']) == 0

    out = tmp_path / 'crb'
    assert main(['crb', '--config', config_path, '--dataset', str(data / 'test'), '--out', str(out)]) == 0
    rows = read_rows(out / 'crb_bounds.csv')
    assert rows[0] == ['index', 'path', 'var_gamma_re', 'var_gamma_im', 'var_tau', 'var_alpha']
    assert len(rows) >= 4

    out = tmp_path / 'refine'
    assert main(['refine', '--config', config_path, '--dataset', str(data / 'test'), '--out', str(out)]) == 0
    assert read_rows(out / 'estimates.csv')[0][:3] == ['index', 'method', 'path']
    assert read_rows(out / 'refine_diagnostics.csv')[0] == ['index', 'iteration', 'nll', 'step_size', 'z_norm']


def test_bench_periodogram_without_weights(tmp_path, config_path):
    out = tmp_path / 'bench'
    code = main([
        'bench', '--config', config_path, '--out', str(out),
        '--methods', 'periodogram,cnn', '--snr-bins', '10,20',
    ])
    assert code == 0
    rows = read_rows(out / 'report.csv')
    assert rows[0][0] == 'method'
    assert {row[0] for row in rows[1:]} == {'periodogram'}
    assert (out / 'crb.csv').exists()
    assert (out / 'mse.png').exists()


def test_infer_needs_weights(tmp_path, config_path):
    data = tmp_path / 'data'
    main(['gen', '--config', config_path, '--out', str(data), '--split', 'test', '--count', '1'])
    code = main(['infer', '--config', config_path, '--dataset', str(data / 'test'), '--out', str(tmp_path)])
    assert code == 1


def test_config_errors_exit_with_2(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'training': {'foo': 1}}))
    assert main(['bench', '--config', str(bad), '--out', str(tmp_path)]) == 2
    assert main(['bench', '--methods', 'music', '--out', str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as error:
        main(['train'])
    assert error.value.code == 2


def test_broken_dataset_header_is_reported(tmp_path, config_path, capsys):
    data = tmp_path / 'data'
    assert main(['gen', '--config', config_path, '--out', str(data), '--split', 'test', '--count', '1']) == 0
    (data / 'test.json').write_text('not json')
    code = main(['crb', '--config', config_path, '--dataset', str(data / 'test'), '--out', str(tmp_path)])
    assert code == 1
    assert 'header' in capsys.readouterr().err


def test_infer_plots_estimates_over_the_spectrum(tmp_path, config_path):
    data = tmp_path / 'data'
    assert main(['gen', '--config', config_path, '--out', str(data), '--split', 'test', '--count', '3']) == 0
    torch.manual_seed(0)
    network = NetworkConfig(n_freq=16, n_time=16, stage1_blocks=2, base_channels=4, downsample_blocks=1, fc_hidden=16)
    ModelWeights(state_dict=HarmonicNet(network).state_dict(), config=network).save(tmp_path / 'weights')

    out = tmp_path / 'infer'
    code = main([
        'infer', '--config', config_path, '--dataset', str(data / 'test'), '--out', str(out),
        '--weights', str(tmp_path / 'weights'), '--methods', 'cnn,cnn+gn', '--plot',
    ])
    assert code == 0
    assert (out / 'inference_example.png').exists()
    assert {row[1] for row in read_rows(out / 'estimates.csv')[1:]} == {'cnn', 'cnn+gn'}


def test_inference_plot_needs_one_estimate_set_per_snapshot(tmp_path, config_path):
    data = tmp_path / 'data'
    main(['gen', '--config', config_path, '--out', str(data), '--split', 'test', '--count', '1'])
    snapshot = DatasetReader(data / 'test')[0].snapshot
    with pytest.raises(InvalidInputError):
        plot_inference_example([snapshot], [], tmp_path / 'example.png')
    assert plot_inference_example([snapshot], [{}], tmp_path / 'example.png').exists()
