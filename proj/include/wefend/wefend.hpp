#pragma once

// Umbrella header.

#include "wefend/errors.hpp"
#include "wefend/nn/adam.hpp"
#include "wefend/nn/checkpoint.hpp"
#include "wefend/nn/grad_check.hpp"
#include "wefend/nn/ops.hpp"
#include "wefend/nn/rng.hpp"
#include "wefend/nn/tensor.hpp"
#include "wefend/text/embedding.hpp"
#include "wefend/text/vocabulary.hpp"
#include "wefend/model/annotator.hpp"
#include "wefend/model/detector.hpp"
#include "wefend/model/extractor.hpp"
#include "wefend/model/model_io.hpp"
#include "wefend/model/train_detector.hpp"
#include "wefend/model/training.hpp"
#include "wefend/selector/policy.hpp"
#include "wefend/selector/selector.hpp"
#include "wefend/data/dataset.hpp"
#include "wefend/data/features.hpp"
#include "wefend/data/synthetic.hpp"
#include "wefend/eval/experiment.hpp"
#include "wefend/eval/grad_audit.hpp"
#include "wefend/eval/metrics.hpp"
#include "wefend/eval/shift_analysis.hpp"
