'''
Run configuration: one JSON document whose sections map onto the
dataclasses of the toolkit. Missing sections and keys keep the defaults.

    {
        "grid": {"n_freq": 32, "n_time": 32},
        "dataset": {"path_count_range": [1, 5], "count": 20000},
        "training": {"epochs": 10},
        "bench": {"trials_per_bin": 100}
    }
'''
import dataclasses
import json
import typing
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

from channel.dataset import DEFAULT_SPLITS
from channel.errors import ConfigError, InvalidInputError
from channel.generator import DatasetSpec
from channel.state import SamplingGrid
from bench.evaluate import BenchConfig
from estimator.gauss_newton import RefineConfig
from estimator.periodogram import PeriodogramConfig
from network.labels import CellGrid
from network.model import NetworkConfig
from network.training import TrainingSpec
from network.windows import WindowBank

SECTIONS = (
    'grid', 'dataset', 'splits', 'cell_grid', 'windows',
    'network', 'training', 'refine', 'periodogram', 'bench',
)
DEFAULT_GRID = {'n_freq': 64, 'n_time': 64}


@dataclass(frozen=True)
class RunConfig:
    grid: SamplingGrid = field(default_factory = lambda: SamplingGrid(**DEFAULT_GRID))
    dataset: DatasetSpec = field(default_factory = DatasetSpec)
    splits: Dict[str, int] = field(default_factory = lambda: dict(DEFAULT_SPLITS))
    cell_grid: CellGrid = field(default_factory = CellGrid)
    windows: WindowBank = field(default_factory = WindowBank)
    network: NetworkConfig = field(default_factory = NetworkConfig)
    training: TrainingSpec = field(default_factory = TrainingSpec)
    refine: RefineConfig = field(default_factory = RefineConfig)
    periodogram: PeriodogramConfig = field(default_factory = PeriodogramConfig)
    bench: BenchConfig = field(default_factory = BenchConfig)


def _convert(hint, value: Any, name: str) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)

    if origin is Union:
        if value is None and type(None) in args:
            return None
        (inner,) = [arg for arg in args if arg is not type(None)]
        return _convert(inner, value, name)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}", name)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(args[0], item, f"{name}[{i}]") for i, item in enumerate(value))
        if len(args) != len(value):
            raise ConfigError(f"expected {len(args)} values, got {len(value)}", name)
        return tuple(_convert(arg, item, f"{name}[{i}]") for i, (arg, item) in enumerate(zip(args, value)))
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"expected an object, got {value!r}", name)
        key_type, value_type = args
        return {_convert(key_type, k, name): _convert(value_type, v, f"{name}.{k}") for k, v in value.items()}
    if isinstance(hint, type) and issubclass(hint, Enum):
        member = hint.from_label(value) if isinstance(value, str) else None
        if member is None:
            raise ConfigError(f"unknown value {value!r}", name)
        return member
    if dataclasses.is_dataclass(hint):
        return build_dataclass(hint, value, name)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", name)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", name)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", name)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", name)
        return value
    return value


def build_dataclass(cls, data: Optional[dict], name: str, **fixed):
    '''
    Instantiate dataclass `cls` from a JSON object, converting nested
    dataclasses, tuples and enums by the field annotations. `fixed`
    values are supplied by the caller and cannot be set from the document.
    '''
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object, got {data!r}", name)
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}

    kwargs = {}
    for key, value in data.items():
        dotted = f"{name}.{key}"
        if key not in names:
            raise ConfigError(f"unknown key, expected one of {sorted(names)}", dotted)
        if key in fixed:
            raise ConfigError("set by another section", dotted)
        kwargs[key] = _convert(hints[key], value, dotted)
    kwargs.update(fixed)
    try:
        return cls(**kwargs)
    except InvalidInputError as error:
        raise ConfigError(str(error), name) from error
    except TypeError as error:
        raise ConfigError(str(error), name) from error


def parse_config(document: Optional[dict] = None) -> RunConfig:
    document = document or {}
    if not isinstance(document, dict):
        raise ConfigError("config document must be a JSON object", "<root>")
    unknown = set(document) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}, expected {list(SECTIONS)}", sorted(unknown)[0])

    grid = build_dataclass(SamplingGrid, {**DEFAULT_GRID, **(document.get('grid') or {})}, 'grid')
    cell_grid = build_dataclass(CellGrid, document.get('cell_grid'), 'cell_grid')
    dataset = build_dataclass(DatasetSpec, document.get('dataset'), 'dataset', grid=grid, cell_grid=cell_grid)

    try:
        windows = WindowBank.with_params(document.get('windows') or {})
    except (InvalidInputError, TypeError) as error:
        raise ConfigError(str(error), 'windows') from error

    splits = _convert(Dict[str, int], document.get('splits', DEFAULT_SPLITS), 'splits')
    return RunConfig(
        grid = grid,
        dataset = dataset,
        splits = splits,
        cell_grid = cell_grid,
        windows = windows,
        network = build_dataclass(
            NetworkConfig, document.get('network'), 'network',
            n_freq=grid.n_freq, n_time=grid.n_time, cell_grid=cell_grid, p_max=dataset.p_max,
        ),
        training = build_dataclass(TrainingSpec, document.get('training'), 'training'),
        refine = build_dataclass(RefineConfig, document.get('refine'), 'refine'),
        periodogram = build_dataclass(PeriodogramConfig, document.get('periodogram'), 'periodogram'),
        bench = build_dataclass(BenchConfig, document.get('bench'), 'bench'),
    )


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        document = json.loads(Path(path).read_text())
    except FileNotFoundError as error:
        raise ConfigError(f"config file not found: {path}", "--config") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"invalid JSON ({error})", "--config") from error
    return parse_config(document)
