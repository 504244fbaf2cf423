from .criteria import compactness, compactness_gain, entropy, gain, pick_best
from .features import (
    Axis2D,
    AxisFeatures,
    DepthFeatures,
    DepthOffset,
    PixelSet,
    PointSet,
    SplitTest,
    sample_axis_thresholds,
)
from .io import ForestFormatError, forest_summary, load_forest, save_forest
from .train import (
    CLASSIFICATION,
    REGRESSION,
    Forest,
    TrainParams,
    accuracy,
    best_split,
    grow_tree,
    leaf_ids,
    make_leaf_classification,
    make_leaf_regression,
    majority_vote,
    predict_class,
    predict_proba,
    route,
    train_forest,
)
from .tree import ClassLeaf, RegLeaf, Tree, TreeBuilder
