"""GNA Workbench: generative network automata engine, rule discovery and network simulators."""

__version__ = "0.1.0"
