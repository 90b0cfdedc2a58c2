#pragma once

#include "diagraph/annotation.hpp"
#include "diagraph/baselines.hpp"
#include "diagraph/corpus.hpp"
#include "diagraph/errors.hpp"
#include "diagraph/experiment.hpp"
#include "diagraph/featurize.hpp"
#include "diagraph/geometry.hpp"
#include "diagraph/gnn.hpp"
#include "diagraph/graph.hpp"
#include "diagraph/metrics.hpp"
#include "diagraph/pipeline.hpp"
#include "diagraph/report.hpp"
#include "diagraph/rng.hpp"
#include "diagraph/stats.hpp"
#include "diagraph/synthetic.hpp"
#include "diagraph/tensor.hpp"
#include "diagraph/training.hpp"
