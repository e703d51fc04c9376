"""Simulator and analysis toolkit for a one-dimensional infection front.

Moving particles perform continuous-time nearest-neighbor random walks with
total jump rate 2 and an optional right bias; dormant particles wake up when
their site is first visited.  The package provides an exact event-driven
simulator coupled across bias values, first-passage calculus with an
independent chain oracle, the regeneration-time construction with honest
censoring, decoupled hitting times, closed-form walk analytics, and a Monte
Carlo experiment harness with a command line front end.
"""

__version__ = "0.1.0"
