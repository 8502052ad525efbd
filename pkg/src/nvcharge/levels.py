"""Electronic/charge level indexing for the seven-state NV model.

The model tracks the NV- triplet ground and excited states (m_s = 0 and the
combined m_s = +-1 manifold), one combined NV- singlet level, and a two-level
NV0 (ground + excited). The integer values below define the canonical ordering
used by every rate matrix and population vector in this package.
"""

from enum import IntEnum


class LevelIndex(IntEnum):
    NVM_GROUND_MS0 = 0
    NVM_GROUND_MS1 = 1   # combined m_s = +-1 manifold
    NVM_EXCITED_MS0 = 2
    NVM_EXCITED_MS1 = 3
    NVM_SINGLET = 4      # combined singlet levels
    NV0_GROUND = 5
    NV0_EXCITED = 6


N_LEVELS = 7

NVM_LEVELS = (
    LevelIndex.NVM_GROUND_MS0,
    LevelIndex.NVM_GROUND_MS1,
    LevelIndex.NVM_EXCITED_MS0,
    LevelIndex.NVM_EXCITED_MS1,
    LevelIndex.NVM_SINGLET,
)

NV0_LEVELS = (
    LevelIndex.NV0_GROUND,
    LevelIndex.NV0_EXCITED,
)
