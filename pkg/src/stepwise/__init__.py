"""Next-step hint engine: subgoal planning, static-analysis-minimized code
hints, textual hints, and a playground service for a Kotlin-like subset."""

__version__ = "0.1.0"
