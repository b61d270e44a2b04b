import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset
from tqdm import tqdm

from channel.dataset import DatasetRecord
from channel.errors import InvalidInputError, MissingWeightsError, TrainingDivergedError
from channel.model import add_noise, synthesize
from network.losses import GateMode, OrderLoss, loss_detection, loss_total
from network.model import HarmonicNet, NetworkConfig, count_parameters
from network.preprocess import preprocess
from network.windows import WindowBank

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingSpec:
    '''
    Optimizer and schedule. The defaults train with Adam at lr 3e-4,
    betas (0.9, 0.999), batches of 32 for 20 epochs and beta = 4.
    '''
    optimizer: str = 'adam'
    learning_rate: float = 3e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    batch_size: int = 32
    epochs: int = 20
    beta: float = 4.0
    # Weight of the occupancy BCE added to loss_total; 0 trains on loss_total alone.
    detection_weight: float = 1.0
    order_loss: OrderLoss = OrderLoss.BCE
    gate: GateMode = GateMode.PREDICTED
    regenerate_noise: bool = False
    max_steps: Optional[int] = None
    seed: int = 0
    num_workers: int = 0
    device: str = 'cpu'

    def __post_init__(self):
        if self.optimizer != 'adam':
            raise InvalidInputError(f"Only the adam optimizer is supported, got '{self.optimizer}'")
        if self.batch_size < 1 or self.epochs < 1:
            raise InvalidInputError("batch_size and epochs must be positive")

    def to_dict(self) -> dict:
        data = asdict(self)
        data['order_loss'] = self.order_loss.value
        data['gate'] = self.gate.value
        data['betas'] = list(self.betas)
        return data


class SnapshotDataset(Dataset):
    '''
    Torch view of dataset records: (input tensor, eta, rho) per item.

    With regenerate_noise, epochs after the first redraw the noise from the
    stored truth and noise variance instead of reusing the stored snapshot.
    '''
    def __init__(self, records: Sequence[DatasetRecord], bank: WindowBank, regenerate_noise: bool = False):
        self.records = records
        self.bank = bank
        self.regenerate_noise = regenerate_noise
        self.epoch = 0

    def set_epoch(self, epoch: int):
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.records)

    def _snapshot(self, record: DatasetRecord):
        snapshot = record.snapshot
        if not self.regenerate_noise or self.epoch == 0:
            return snapshot
        seed = int(np.random.SeedSequence([record.noise_seed, self.epoch]).generate_state(1)[0])
        data = add_noise(synthesize(snapshot.truth, snapshot.grid), snapshot.sigma2, seed)
        return type(snapshot)(data=data, grid=snapshot.grid, sigma2=snapshot.sigma2, truth=snapshot.truth)

    def __getitem__(self, index: int):
        record = self.records[index]
        inputs = preprocess(self._snapshot(record), self.bank).tensor
        return (
            torch.as_tensor(inputs, dtype=torch.float32),
            torch.as_tensor(record.labels.eta, dtype=torch.float32),
            torch.as_tensor(record.labels.rho, dtype=torch.float32),
        )


@dataclass
class ModelWeights:
    '''
    Trained parameters plus everything needed to rebuild and audit them.
    Saved as `<stem>.pt` (state dict) and `<stem>.json` (metadata).
    '''
    state_dict: Dict[str, torch.Tensor]
    config: NetworkConfig
    training: dict = field(default_factory=dict)
    history: dict = field(default_factory=dict)
    dataset_hash: Optional[str] = None

    def build_model(self, device: str = 'cpu') -> HarmonicNet:
        model = HarmonicNet(self.config)
        model.load_state_dict(self.state_dict)
        model.to(device)
        model.eval()
        return model

    def save(self, stem: Union[str, Path]) -> Path:
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        torch.save(self.state_dict, stem.with_suffix('.pt'))
        metadata = {
            'config': self.config.to_dict(),
            'training': self.training,
            'history': self.history,
            'dataset_hash': self.dataset_hash,
        }
        stem.with_suffix('.json').write_text(json.dumps(metadata, indent=2))
        return stem

    @classmethod
    def load(cls, stem: Union[str, Path]) -> 'ModelWeights':
        stem = Path(stem)
        if not stem.with_suffix('.pt').exists() or not stem.with_suffix('.json').exists():
            raise MissingWeightsError(f"No weights found at {stem}.pt / {stem}.json")
        metadata = json.loads(stem.with_suffix('.json').read_text())
        state_dict = torch.load(stem.with_suffix('.pt'), map_location='cpu', weights_only=True)
        return cls(
            state_dict = state_dict,
            config = NetworkConfig.from_dict(metadata['config']),
            training = metadata.get('training', {}),
            history = metadata.get('history', {}),
            dataset_hash = metadata.get('dataset_hash'),
        )


def _objective(model, batch, spec: TrainingSpec, device: str) -> Tuple[torch.Tensor, torch.Tensor]:
    inputs, eta_true, rho_true = (t.to(device) for t in batch)
    eta_pred, rho_logits = model(inputs)
    total = loss_total(eta_pred, eta_true, rho_logits, rho_true, spec.beta, spec.order_loss, spec.gate)
    objective = total
    if spec.detection_weight:
        objective = total + spec.detection_weight * loss_detection(eta_pred, eta_true)
    return objective, total


@torch.no_grad()
def evaluate_loss(model: HarmonicNet, loader: DataLoader, spec: TrainingSpec) -> float:
    model.eval()
    losses, sizes = [], []
    for batch in loader:
        _, total = _objective(model, batch, spec, spec.device)
        losses.append(total.item())
        sizes.append(len(batch[0]))
    return float(np.average(losses, weights=sizes)) if losses else math.nan


def train(
    records: Sequence[DatasetRecord],
    config: NetworkConfig,
    spec: TrainingSpec,
    bank: Optional[WindowBank] = None,
    validation: Optional[Sequence[DatasetRecord]] = None,
    dataset_hash: Optional[str] = None,
) -> ModelWeights:
    '''
    Train the network and return the weights with the lowest validation
    loss (training loss when no validation set is given).

    Losses recorded in the history are loss_total values; the optimized
    objective adds the weighted occupancy term.
    '''
    bank = bank or WindowBank()
    if len(records) == 0:
        raise InvalidInputError("Cannot train on an empty dataset")
    grid = records[0].snapshot.grid
    if (grid.n_freq, grid.n_time) != (config.n_freq, config.n_time):
        raise InvalidInputError(
            f"Dataset grid {grid.shape} does not match network input {(config.n_freq, config.n_time)}"
        )

    torch.manual_seed(spec.seed)
    generator = torch.Generator().manual_seed(spec.seed)
    train_set = SnapshotDataset(records, bank, spec.regenerate_noise)
    loader = DataLoader(train_set, batch_size=spec.batch_size, shuffle=True, generator=generator, num_workers=spec.num_workers)
    val_loader = None
    if validation:
        val_loader = DataLoader(SnapshotDataset(validation, bank), batch_size=spec.batch_size, num_workers=spec.num_workers)

    model = HarmonicNet(config).to(spec.device)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate, betas=spec.betas)
    logger.info("Training %d parameters on %d samples", count_parameters(model), len(records))

    history: Dict[str, List[float]] = {'train_loss': [], 'validation_loss': [], 'step_loss': []}
    best_loss, best_state = math.inf, None
    step = 0
    for epoch in range(spec.epochs):
        train_set.set_epoch(epoch)
        model.train()
        epoch_losses = []
        for batch in tqdm(loader, desc=f"epoch {epoch + 1}/{spec.epochs}", leave=False):
            objective, total = _objective(model, batch, spec, spec.device)
            if not torch.isfinite(objective):
                raise TrainingDivergedError(
                    f"Non-finite loss at epoch {epoch + 1}, step {step}",
                    diagnostics = {
                        'epoch': epoch + 1,
                        'step': step,
                        'last_losses': history['step_loss'][-10:],
                    },
                )
            optimizer.zero_grad()
            objective.backward()
            optimizer.step()

            epoch_losses.append(total.item())
            history['step_loss'].append(total.item())
            step += 1
            if spec.max_steps is not None and step >= spec.max_steps:
                break

        train_loss = float(np.mean(epoch_losses))
        history['train_loss'].append(train_loss)
        val_loss = evaluate_loss(model, val_loader, spec) if val_loader is not None else train_loss
        history['validation_loss'].append(val_loss)
        logger.info("epoch %d: train loss %.5f, validation loss %.5f", epoch + 1, train_loss, val_loss)

        if val_loss < best_loss:
            best_loss = val_loss
            best_state = copy.deepcopy({k: v.detach().cpu() for k, v in model.state_dict().items()})
        if spec.max_steps is not None and step >= spec.max_steps:
            break

    if best_state is None:
        best_state = {k: v.detach().cpu() for k, v in model.state_dict().items()}
    return ModelWeights(
        state_dict = best_state,
        config = config,
        training = {**spec.to_dict(), 'best_loss': best_loss, 'steps': step},
        history = history,
        dataset_hash = dataset_hash,
    )
