"""Balanced, anchor-shared subscene partitioning for long multi-view sequences."""
from .anchor_schedule import ExecutionPlan, build_plan, scatter_outputs, validate_plan
from .cost_model import CostReport, attention_cost, plan_cost
from .descriptor_io import DescriptorSet, TokenStack, pool_descriptors
from .scene_graph import SimilarityGraph, density, group_count, similarity_matrix
from .soft_partition import (
    AssignmentMatrix,
    GroupWeights,
    OptimizeConfig,
    Partition,
    group_loss,
    group_loss_grad,
    optimize,
    partition_frames,
)

__version__ = "0.1.0"
