"""Monte Carlo simulator and counting-protocol toolkit for a heralded
single-photon source based on four-wave mixing in a silicon coupled-ring
waveguide."""

from .calibration import calibrate_cw, calibrate_pulsed
from .chain import ArrivalStream, ChainElement, chain_transmission, db_to_transmission, split_50_50, thin
from .config import ExperimentConfig, Sweep, default_cw_config, default_pulsed_config
from .crow import (CrowParams, DispersionPoint, WavelengthTriple, band_alignment, dispersion, gamma_eff,
                   idler_wavelength, insertion_loss_db)
from .errors import (CalibrationError, ClickFileError, ConfigError, DomainError, PairforgeError,
                     TruncationError)
from .experiments import run_cw_pair_experiment, run_experiment, run_pulsed_heralded_experiment, run_sweep
from .io import read_clicks, write_clicks
from .offline import analyze_offline
from .oracle import OracleInstance, calibrate, predict_car, predict_g2, window_click_probabilities
from .source import PairBatch, PumpConfig, SourceParams, effective_power, emit_batch, mean_pairs_per_window, sample_pairs
from .spad import ClickRecord, ClickStream, DetectorParams, dark_only_run, detect, generate_gates
from .tcspc import (CoincidenceResult, G2Result, Histogram, car_estimate, correlate, g2_estimate, output_refer,
                    per_gate_to_rate)

__version__ = "0.1.0"
