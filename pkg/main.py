#!/usr/bin/env python3
"""
Punto de entrada principal del motor visuo-propioceptivo predictivo
"""

import logging
import sys
from pathlib import Path

# Agregar el directorio src al path
sys.path.append(str(Path(__file__).parent / "src"))

from cli.commands import main  # noqa: E402
from config.settings import get_settings  # noqa: E402

logging.basicConfig(
    level=getattr(logging, get_settings().log_level.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

if __name__ == "__main__":
    sys.exit(main())
