"""Maximum-likelihood activity detection for grant-free access under Rician fading."""

from .model import (CaseId, ChannelStatistics, OffsetGrid, ReceivedSignal, Scenario, SystemParams,
                    equivalent_pilot, gen_los, gen_pilots, gen_scenario, offset_grid,
                    synthesize_received, tau)
from .likelihood import (DetectorState, NumericalError, Problem, SingularUpdateError,
                         add_device_inverse, negloglik, remove_device, restore_device,
                         update_ytilde)
from .sync_detector import SyncDetector, SyncResult, optimal_increment, run_sync
from .async_detector import AsyncDetector, AsyncResult, Strategy, block_update, run_async
from .complexity import crossover_thresholds, recommend_strategy
from .config import RunConfig, parse_config

__version__ = "0.1.0"
