"""Configuration management for hyp-softmax."""
import logging
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Logging configuration
def setup_logging():
    """Set up logging configuration."""
    handlers = [logging.StreamHandler()]
    if Config.LOG_FILE:
        handlers.append(logging.FileHandler(Config.LOG_FILE))

    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers
    )

# Configuration settings
class Config:
    LOG_FILE = os.getenv('HYP_SOFTMAX_LOG_FILE', 'hyp-softmax.log')
    LOG_LEVEL = os.getenv('HYP_SOFTMAX_LOG_LEVEL', 'INFO')

    # Numerical stability (projection and arcosh clipping)
    EPS_BOUNDARY = 1e-5
    DELTA_NORM = 1e-15
    ARCOSH_FLOOR = 1e-15

    # Loss hyperparameters
    SCALE = 30.0
    MARGIN = 0.2
    CURVATURE_H_SOFTMAX = 5.0
    CURVATURE_HAM_SOFTMAX = 3.0
    EUCLIDEAN_WEIGHT = 0.3

    # Optimizer and schedule
    LEARNING_RATE = 0.001
    LR_DECAY = 0.97
    ADAM_BETA1 = 0.9
    ADAM_BETA2 = 0.999
    ADAM_EPS = 1e-8
    BATCH_SIZE = 256
    EPOCHS = 30
    CENTER_INIT_STD = 0.01

    # Embedder
    INPUT_DIM = 32
    HIDDEN_DIM = 64
    OUTPUT_DIM = 16

    # Synthetic hierarchy
    TREE_DEPTH = 2
    TREE_BRANCHING = 8
    TREE_DIM = 32
    TREE_LEVEL_SCALES = (1.0, 0.3)
    TREE_LEVEL_RATIO = 0.3
    TREE_NOISE_SIGMA = 0.1
    TREE_SAMPLES_PER_CLASS = 50
    MAX_CLASSES = 2 ** 31

    # Held-out split and trials
    TRAIN_FRAC = 0.8
    TRIALS_PER_CLASS = 10

    # Detection cost
    P_TARGET = 0.05
    C_MISS = 1.0
    C_FA = 1.0

    # Output files
    RESULTS_FILENAME = 'results.csv'
    MANIFEST_FILENAME = 'config.manifest'
