from .cost import CostModel, total_cost
from .profile import Profile

__all__ = ["CostModel", "Profile", "total_cost"]
