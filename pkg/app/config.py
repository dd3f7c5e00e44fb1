"""Runtime settings for the uplift toolkit"""
import os
from dotenv import load_dotenv
from pydantic import BaseModel

load_dotenv()


class UpliftSettings(BaseModel):
    """Process-wide settings read from the environment"""
    # Worker count for joblib (trees, treatments, Monte Carlo shards)
    n_jobs: int = int(os.getenv("UPLIFT_N_JOBS", "1"))

    log_level: str = os.getenv("UPLIFT_LOG_LEVEL", "INFO")

    # Default confidence level for z-bar intervals
    conf_level: float = float(os.getenv("UPLIFT_CONF_LEVEL", "0.95"))

    # Rows per Monte Carlo shard; fixed so results never depend on n_jobs
    mc_shard_size: int = int(os.getenv("UPLIFT_MC_SHARD_SIZE", "65536"))

    model_config = {
        "extra": "ignore"
    }


# Create a singleton instance
settings = UpliftSettings()
