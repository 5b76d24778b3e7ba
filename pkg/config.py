"""
tandemnet — Configuration Module

Reads settings from (highest priority first):
  1. Environment variables     (TANDEMNET_THREADS, TANDEMNET_LOG_DIR, ...)
  2. Built-in defaults

Run-specific settings (architecture, T, optimizer, ...) live in key=value run
config files parsed by data_ingestion.run_config; the values here are the
defaults those files fall back to.
"""
import os
from pathlib import Path


def _env(key: str, fallback: str = "") -> str:
    """Read a value from an env var, or fallback."""
    value = os.getenv(key)
    return value if value not in (None, "") else fallback


ROOT_DIR = Path(__file__).resolve().parent

# ─── Neuron Models ───────────────────────────────────────────────────
IF_THRESHOLD = 1.0
LIF_THRESHOLD = 0.1
LIF_TAU_M = 20.0          # time steps
SIM_DT = 1.0              # one simulation step

# ─── Encoding Window ─────────────────────────────────────────────────
DEFAULT_T = 8
MAX_T = 4096

# ─── Batch Normalization ─────────────────────────────────────────────
BN_MOMENTUM = 0.9         # weight of the old running statistic
BN_EPSILON = 1e-5

# ─── Training Defaults ───────────────────────────────────────────────
DEFAULT_EPOCHS = 20
DEFAULT_LR = 0.05
DEFAULT_MOMENTUM = 0.9
DEFAULT_WEIGHT_DECAY = 5e-4
DEFAULT_BATCH = 128
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# ─── Data ────────────────────────────────────────────────────────────
EVENT_BIN_MS = 10
MNIST_MEAN = 0.1307
MNIST_STD = 0.3081
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

# ─── Analysis ────────────────────────────────────────────────────────
ANALYSIS_BATCH = 256
EVAL_BATCH = 256           # train-time and eval-time scoring
ANGLE_BINS = 36           # 5-degree bins over [0, 180]
PCC_BINS = 40             # 0.05-wide bins over [-1, 1]

# ─── CLI Exit Codes ──────────────────────────────────────────────────
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

# ─── Runtime ─────────────────────────────────────────────────────────
RANDOM_SEED = 42
LOG_DIR = Path(_env("TANDEMNET_LOG_DIR", str(ROOT_DIR / "logs")))
