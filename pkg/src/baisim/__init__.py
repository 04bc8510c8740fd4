"""Closed-loop simulator for a code-VEP brain-AI conversation interface.

The engine covers the whole loop without hardware or remote services:
flicker code generation (stimulus), synthetic evoked EEG (eegsim), per-frame
classification (classifier), online selection (decoder), conversation
orchestration (dialogue), fine-tuning corpus construction (datasetgen),
evaluation statistics (evalstats), the experiment harness (harness), and a
console-facing session endpoint (server).
"""

from .errors import EngineError

__version__ = "0.1.0"

__all__ = ["EngineError", "__version__"]
