import os

BASE_DIR = os.path.dirname(os.path.abspath(__file__))

# Logging configuration
LOG_LEVEL = os.environ.get("HETMAP_LOG_LEVEL", "INFO")
LOG_FORMAT = '%(asctime)s %(levelname)s:%(name)s: %(message)s'

# Platform configuration
DEFAULT_PLATFORM_FILE = os.environ.get(
    "HETMAP_PLATFORM_FILE", os.path.join(BASE_DIR, "data", "platforms", "default_platform.json"))

# Evaluation configuration
DEFAULT_SEED = int(os.environ.get("HETMAP_SEED", 0))
RANDOM_SCHEDULES = int(os.environ.get("HETMAP_RANDOM_SCHEDULES", 100))
INTERNAL_SCHEDULES = int(os.environ.get("HETMAP_INTERNAL_SCHEDULES", 1))
DEFAULT_EDGE_BYTES = float(os.environ.get("HETMAP_EDGE_BYTES", 1e8))  # 100 MB per edge

# Decomposition configuration
CUT_RULE = os.environ.get("HETMAP_CUT_RULE", "random")

# Greedy mapper configuration
GAMMA = float(os.environ.get("HETMAP_GAMMA", 1.0))

# Genetic algorithm configuration
GA_POPULATION = int(os.environ.get("HETMAP_GA_POPULATION", 100))
GA_GENERATIONS = int(os.environ.get("HETMAP_GA_GENERATIONS", 500))
GA_CROSSOVER_RATE = float(os.environ.get("HETMAP_GA_CROSSOVER_RATE", 0.9))

# Generator configuration
AREA_PER_COMPLEXITY = float(os.environ.get("HETMAP_AREA_PER_COMPLEXITY", 4.0))
REFERENCE_RATE = float(os.environ.get("HETMAP_REFERENCE_RATE", 1e9))  # ops/s behind workflow runtimes

# Benchmark configuration
BENCH_REPETITIONS = int(os.environ.get("HETMAP_BENCH_REPETITIONS", 30))
TIMING_REPEATS = int(os.environ.get("HETMAP_TIMING_REPEATS", 3))
MAX_WORKERS = int(os.environ.get("HETMAP_MAX_WORKERS", 1))

# HTTP service configuration
HOST = os.environ.get("HETMAP_HOST", "0.0.0.0")
PORT = int(os.environ.get("PORT", 5000))
DEBUG = os.environ.get("HETMAP_DEBUG", "0") == "1"
MAX_CONTENT_LENGTH = 16 * 1024 * 1024  # 16MB max request size
