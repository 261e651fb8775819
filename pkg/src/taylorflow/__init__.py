"""Dense optical flow with first- and second-order Taylor constraints."""

__version__ = "0.1.0"

from .constraint import (
    ConstraintField,
    GradientTensor,
    compose,
    compose_first_order,
    compose_second_order,
    compute_gradient_tensor,
)
from .datasets import (
    DatasetPair,
    GroundTruth,
    enumerate_pairs,
    read_flo,
    read_kitti_flow,
    write_flo,
    write_kitti_flow,
)
from .image import GrayImage, Kernel1D, decode_gray, derivative, gaussian_blur, gaussian_kernel, mixed_derivative_xy
from .metrics import EvaluationReport, average_endpoint_error, evaluate_pair, percentage_erroneous_pixels
from .solver import FlowField, SolverConfig, compute_flow, solve_lucas_kanade
from .viz import flow_to_color, flow_to_quiver
