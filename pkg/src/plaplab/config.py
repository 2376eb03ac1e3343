import os
from pathlib import Path
from dotenv import load_dotenv

# Load .env from project root
ROOT_DIR = Path(__file__).resolve().parent.parent.parent
env_path = ROOT_DIR / ".env"
load_dotenv(dotenv_path=env_path)

# Directories
OUTPUT_DIR = Path(os.getenv("PLAPLAB_OUTPUT_DIR", str(ROOT_DIR / "runs")))

# Reproducibility
DEFAULT_SEED = 42

# Size caps for dense oracles and doubling center sampling
DENSE_CAP = int(os.getenv("PLAPLAB_DENSE_CAP", "2000"))
DOUBLING_SAMPLE_CAP = 2000

# Closed-ball membership slack on floating distances
BALL_SLACK = 1e-12

# Smoothing used only inside Hessians and line searches, never in certified residuals
MACHINE_SMOOTHING = 1e-14


def sweep_threads() -> int:
    """Worker cap for `sweep`, read from PLAPLAB_THREADS (defaults to the CPU count)."""
    raw = os.getenv("PLAPLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def ensure_output_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path
