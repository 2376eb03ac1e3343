import sys
from pathlib import Path

# Add the project root to sys.path so `src.plaplab` resolves when run as a script
root_dir = Path(__file__).resolve().parent.parent
sys.path.append(str(root_dir))

from src.plaplab.cli import start  # noqa: E402

if __name__ == "__main__":
    start()
