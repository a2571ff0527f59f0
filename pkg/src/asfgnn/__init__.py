"""Separated-federated GNN training simulator with automated tuning."""

from .bayesopt import (
    Dimension,
    SearchSpace,
    Trial,
    build_space,
    expected_improvement,
    gp_fit,
    gp_predict,
    grid_search,
    initial_design,
    propose_next,
    run_bo,
)
from .experiment import (
    ExperimentConfig,
    ExperimentOutput,
    ExperimentReport,
    emit_report,
    generate_benchmark,
    make_clients,
    run_asfgnn,
    run_baseline,
    run_experiment,
    sweep,
)
from .fgnn import (
    ClientState,
    LabelCounts,
    LabelDistribution,
    RoundReport,
    blend_update,
    js_divergence,
    run_fedavg,
    run_fgnn,
    run_local,
)
from .graphs import (
    ClientDataset,
    Graph,
    SplitSpec,
    load_dataset,
    load_masks,
    neighbors,
    save_dataset,
    split_by_degree,
    split_by_label_ratio,
)
from .nn import (
    FgnnParams,
    TrainConfig,
    dropout_mask,
    finite_diff_grad,
    l2_penalty,
    linear,
    sgd_step,
    softmax_cross_entropy,
    tanh_act,
)
from .sgnn import SgnnParams, initial_embedding, mean_aggregate, sage_layer, sgnn_forward
from .sharing import (
    FixedPointRing,
    PayloadKind,
    SharedVector,
    Transport,
    WireRecord,
    aggregate_shared_sum,
    share_vector,
)

__version__ = "0.1.0"
