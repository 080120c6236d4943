# Configuration file for app wide variables
import os
from dotenv import load_dotenv

load_dotenv()

# Environment
ENV = os.getenv('MPNO_ENV', 'development')

# Directory for file logs in production
LOG_DIR = os.getenv('MPNO_LOG_DIR', 'logs')

# Worker cap for per-sample solves
DEFAULT_THREADS = int(os.getenv('MPNO_THREADS', '1'))

# Synthetic data defaults
DEFAULT_HORIZON = 0.25
DEFAULT_KERNEL_CONSTANT = 1.0
DEFAULT_FINE_SPACING = 2.0 ** -8
DEFAULT_MEASUREMENT_POINTS = 257
DEFAULT_MAX_FREQUENCY = 40
OOD_MAX_FREQUENCY = 5
DEFAULT_COEFFICIENT_AMPLITUDE = 1e-3
DEFAULT_SLOPE_RANGE = (0.2, 2.0)
DEFAULT_SPLIT_SIZES = (300, 50, 50)
MIN_GENERATED_STRETCH = 0.5

# Dataset file format
DATASET_FORMAT_VERSION = 1
FIELD_FILE_MAGIC = b'MPNOFLD1'
MANIFEST_FILE_NAME = 'manifest'

# Optimizer defaults
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
DECAY_FIRST_THIRD = 0.995
DECAY_REMAINDER = 0.998

# Levenberg-Marquardt defaults
SOLVER_TOLERANCE = 1e-8
SOLVER_MAX_ITERATIONS = 200
SOLVER_DAMPING_SCALE = 1e-3
SOLVER_DAMPING_UP = 2.0
SOLVER_DAMPING_DOWN = 1.0 / 3.0
SOLVER_FD_STEP = 1e-7

# Metrics
DEFAULT_STRETCH_BINS = 100

# Convergence study: data is generated on this mesh so the finest level is not exactly consistent
CONVERGENCE_FINE_SPACING = 2.0 ** -10
CONVERGENCE_SPACINGS = (2.0 ** -5, 2.0 ** -6, 2.0 ** -7, 2.0 ** -8)

# Hyperparameter sweep grid
SWEEP_WIDTHS = (64, 128, 256)
SWEEP_DEPTHS = (4, 5)
SWEEP_LEARNING_RATES = (1e-2, 5e-3, 1e-3, 5e-4, 1e-4)
