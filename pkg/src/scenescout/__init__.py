"""scenescout: a desk-scale workbench for curiosity-driven tabletop exploration.

A seeded symbolic simulator, scene-graph agents with an imagine / verify /
execute loop, exploration metrics over visited scene graphs, and an HTTP
console for human-operated baseline sessions.
"""

__version__ = "0.1.0"
