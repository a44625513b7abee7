"""tilefit: fit images and audio with grids of small coordinate networks.

A signal is cut into an M x M grid (M parts for audio); each cell gets its
own small sine/ReLU/Fourier-feature MLP trained on the cell's samples
only, and the per-cell outputs reassemble the full signal.  An
alternating width/depth search picks the best sub-network architecture
under a forward-pass FLOP budget.
"""

__version__ = "0.1.0"

from .flops import FlopCount, flops_per_sample, format_flops, total_flops
from .kernels import available_backends, default_backend_name, get_backend
from .nets import (
    Activation,
    AdamState,
    SubNetwork,
    SubNetworkConfig,
    adam_step,
    backward,
    forward,
    init_subnetwork,
    seed_sequence,
)
from .partition import (
    CellId,
    CoordinateBatch,
    GridSpec,
    SignalTensor,
    SourceInfo,
    aggregate_outputs,
    axis_coords,
    cell_id_from_m,
    cell_of_index,
    global_coords,
    partition_coords,
    partition_signal,
    to_local_coords,
)
from .search import (
    BudgetInfeasibleError,
    CandidateRecord,
    SearchConfig,
    SearchSpace,
    SearchTrace,
    argmax_depth,
    argmax_width,
    objective_score,
    run_search,
)
from .signals import load_audio, load_image, save_reconstruction, signal_from_array
from .training import (
    EnsembleModel,
    StepRecord,
    TrainConfig,
    TrainReport,
    TrainingDivergedError,
    divergence_experiment,
    psnr,
    psnr_from_mse,
    reconstruct,
    residual_loss,
    train_ensemble,
)

__all__ = [name for name in dir() if not name.startswith("_")]
