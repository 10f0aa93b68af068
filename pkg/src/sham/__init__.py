"""Compressed storage and vector products for quantized weight matrices.

Pruned and quantized matrices are stored as a Huffman coded address map
(HAM), its sparse variant with explicit row indices (sHAM), compressed
sparse columns (CSC) or a plain index map, and multiplied by vectors
without expanding them.
"""

from .container import CorruptContainerError, load, loads, save, dumps
from .core import Rng, SparsityStats, occupancy_ratio, stats
from .estimator import MatrixCompressor, PipelineSpec, run_pipeline
from .formats import (
    CscMatrix,
    HamMatrix,
    IndexMapMatrix,
    ShamMatrix,
    SpaceReport,
    bound_bits,
    choose_format,
    compress,
    crossover_s,
    space_report,
)
from .huffman import CorruptStreamError, HuffmanCode, build_code, decode, encode
from .kernels import dot, dot_csc, dot_dense, dot_ham, dot_index_map, dot_sham, pardot
from .quantization import (
    Codebook,
    CWSQuantizer,
    ECSQQuantizer,
    MagnitudePruner,
    PWSQuantizer,
    UniformQuantizer,
    tune_to_k,
)

__version__ = "0.1.0"

__all__ = [
    "bound_bits",
    "build_code",
    "choose_format",
    "Codebook",
    "compress",
    "CorruptContainerError",
    "CorruptStreamError",
    "crossover_s",
    "CscMatrix",
    "CWSQuantizer",
    "decode",
    "dot",
    "dot_csc",
    "dot_dense",
    "dot_ham",
    "dot_index_map",
    "dot_sham",
    "dumps",
    "ECSQQuantizer",
    "encode",
    "HamMatrix",
    "HuffmanCode",
    "IndexMapMatrix",
    "load",
    "loads",
    "MagnitudePruner",
    "MatrixCompressor",
    "occupancy_ratio",
    "pardot",
    "PipelineSpec",
    "PWSQuantizer",
    "Rng",
    "run_pipeline",
    "save",
    "ShamMatrix",
    "space_report",
    "SpaceReport",
    "SparsityStats",
    "stats",
    "tune_to_k",
    "UniformQuantizer",
]
