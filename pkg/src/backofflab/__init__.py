"""Slotted multiple-access channel simulator for energy-efficient randomized backoff."""
from .channel import Action, Feedback, SlotOutcome, SlotState, feedback_for, resolve_slot
from .engine import AdversarySpec, EngineConfig, RunResult, SummaryStats, Trace, TraceLevel, run
from .metrics import (ContentionClass, PotentialParams, PotentialSnapshot, check_probability_bounds,
                      classify_contention, contention, exact_slot_probabilities, expected_H_delta,
                      implicit_throughput, interval_length, potential, throughput)
from .policy import ConfigError, PacketState, PolicyParams, lowsense_decide, lowsense_update
from .rng import rng_substream
from .scenario import ScenarioConfig, from_document, load_scenario
from .harness import EnsembleSummary, build_report, run_ensemble, run_sweep

__version__ = "0.1.0"
