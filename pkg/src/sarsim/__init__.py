"""Multi-UAV search, pick and drop mission simulator.

Subpackages: ``geometry``, ``localization``, ``vision``, ``planner``,
``fsm``, ``gripper``, ``comms``, ``sim`` and the ``sarsim`` command line.
"""

__version__ = "0.1.0"
