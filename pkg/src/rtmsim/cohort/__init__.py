from .dataset import FEATURES, HEADER, Dataset, load_csv, save_csv
from .generate import CohortConfig, generate_cohort, generate_original_surrogate
from .splits import GROUPS, GroupSplit, make_split

__all__ = ["FEATURES", "HEADER", "Dataset", "load_csv", "save_csv", "CohortConfig",
           "generate_cohort", "generate_original_surrogate", "GROUPS", "GroupSplit", "make_split"]
