"""
Application settings for ETLServo
"""
import os
from dataclasses import dataclass
from dotenv import load_dotenv

@dataclass
class LogSettings:
    """Logging settings"""
    log_file: str
    level: str

@dataclass
class RunSettings:
    """Execution settings shared by all subcommands"""
    jobs: int  # worker processes for compare/montecarlo
    output_dir: str

@dataclass
class Config:
    """Main configuration class"""
    logging: LogSettings
    run: RunSettings

def load_config() -> Config:
    """Load configuration from environment variables (and a .env file if present)"""
    load_dotenv()

    log_settings = LogSettings(
        log_file=os.getenv("ETL_LOG_FILE", "logs/etl.log"),
        level=os.getenv("ETL_LOG_LEVEL", "INFO")
    )

    jobs = int(os.getenv("ETL_JOBS", "1"))
    if jobs < 1:
        raise ValueError("ETL_JOBS must be a positive integer")

    run_settings = RunSettings(
        jobs=jobs,
        output_dir=os.getenv("ETL_OUTPUT_DIR", "results")
    )

    return Config(
        logging=log_settings,
        run=run_settings
    )
