"""Coverage and ergodic-efficiency bounds for joint communication and sensing cellular networks."""
from .coverage import (AnalysisConfig, CCDFCurve, ergodic_comm, ergodic_sensing, jcas_coverage, pc_com_bound,
                       pc_rad_bound, sensing_coverage, sensing_snr_ccdf, serving_pdf_comm)
from .netmodel import NetworkParams, db2lin, default_params, default_params_sec7, lin2db
from .simulator import SimConfig, empirical_ccdf, simulate_comm, simulate_sensing

__all__ = [
    "AnalysisConfig", "CCDFCurve", "NetworkParams", "SimConfig", "db2lin", "default_params", "default_params_sec7",
    "empirical_ccdf", "ergodic_comm", "ergodic_sensing", "jcas_coverage", "lin2db", "pc_com_bound",
    "pc_rad_bound", "sensing_coverage", "sensing_snr_ccdf", "serving_pdf_comm", "simulate_comm", "simulate_sensing",
]
