"""Figure recipes for the quantum-dot-molecule switching simulator.

Consumes only the simulator's CSV outputs; each recipe validates the
columns it needs, renders a deterministic PNG/SVG and can re-emit the
plotted arrays verbatim (--dump) for diffing against the inputs.
"""

__version__ = "0.1.0"
