import os
from dotenv import load_dotenv

load_dotenv(override=True)

class Config:
    """Configuration class for the toolkit"""

    # Hypothesis space
    ENUMERATION_CAP = int(os.getenv("ENUMERATION_CAP", "1000000"))
    PERMUTATION_CAP_N = int(os.getenv("PERMUTATION_CAP_N", "8"))  # n! ensembles above this are refused

    # Scalar lambda search
    LAMBDA_TOLERANCE = float(os.getenv("LAMBDA_TOLERANCE", "1e-10"))
    GOLDEN_BRACKET_WIDTH = float(os.getenv("GOLDEN_BRACKET_WIDTH", "1e-3"))  # handed over to derivative bisection

    # Base vector search (pattern search on the unit sphere)
    BASE_SEARCH_RESTARTS = int(os.getenv("BASE_SEARCH_RESTARTS", "20"))
    BASE_SEARCH_MIN_STEP = float(os.getenv("BASE_SEARCH_MIN_STEP", "1e-6"))

    # Simulation settings
    DEFAULT_TRIALS = int(os.getenv("DEFAULT_TRIALS", "1000"))
    DEFAULT_WORKERS = int(os.getenv("DEFAULT_WORKERS", "1"))
    CONFIDENCE_LEVEL = float(os.getenv("CONFIDENCE_LEVEL", "0.95"))  # Wilson interval coverage

    # Output
    OUTPUT_DIR = os.getenv("OUTPUT_DIR", "results")
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    @classmethod
    def validate(cls):
        """Validate numeric settings, listing every problem at once"""
        problems = []

        if cls.ENUMERATION_CAP < 1:
            problems.append("ENUMERATION_CAP must be positive")
        if cls.PERMUTATION_CAP_N < 1:
            problems.append("PERMUTATION_CAP_N must be positive")
        if not 0 < cls.LAMBDA_TOLERANCE <= 1e-3:
            problems.append("LAMBDA_TOLERANCE must lie in (0, 1e-3]")
        if not cls.LAMBDA_TOLERANCE < cls.GOLDEN_BRACKET_WIDTH < 1:
            problems.append("GOLDEN_BRACKET_WIDTH must lie between LAMBDA_TOLERANCE and 1")
        if cls.BASE_SEARCH_RESTARTS < 1:
            problems.append("BASE_SEARCH_RESTARTS must be positive")
        if cls.BASE_SEARCH_MIN_STEP <= 0:
            problems.append("BASE_SEARCH_MIN_STEP must be positive")
        if cls.DEFAULT_TRIALS < 1:
            problems.append("DEFAULT_TRIALS must be positive")
        if cls.DEFAULT_WORKERS < 1:
            problems.append("DEFAULT_WORKERS must be positive")
        if not 0 < cls.CONFIDENCE_LEVEL < 1:
            problems.append("CONFIDENCE_LEVEL must lie in (0, 1)")

        if problems:
            raise ValueError(f"Invalid configuration: {'; '.join(problems)}")

        return True

    @classmethod
    def print_config(cls):
        """Print current configuration"""
        print("=== Configuration ===")
        print(f"Enumeration cap: {cls.ENUMERATION_CAP}")
        print(f"Permutation cap (n): {cls.PERMUTATION_CAP_N}")
        print(f"Lambda tolerance: {cls.LAMBDA_TOLERANCE}")
        print(f"Golden bracket width: {cls.GOLDEN_BRACKET_WIDTH}")
        print(f"Base search restarts: {cls.BASE_SEARCH_RESTARTS}")
        print(f"Base search min step: {cls.BASE_SEARCH_MIN_STEP}")
        print(f"Default trials: {cls.DEFAULT_TRIALS}")
        print(f"Default workers: {cls.DEFAULT_WORKERS}")
        print(f"Confidence level: {cls.CONFIDENCE_LEVEL}")
        print(f"Output directory: {cls.OUTPUT_DIR}")
        print(f"Log level: {cls.LOG_LEVEL}")
        print("====================")
