#pragma once

#include "hatebench/corpus.hpp"
#include "hatebench/ensemble.hpp"
#include "hatebench/error.hpp"
#include "hatebench/evaluation.hpp"
#include "hatebench/features.hpp"
#include "hatebench/label.hpp"
#include "hatebench/layers.hpp"
#include "hatebench/linear.hpp"
#include "hatebench/metrics.hpp"
#include "hatebench/model_file.hpp"
#include "hatebench/neural.hpp"
#include "hatebench/pipeline.hpp"
#include "hatebench/synthetic.hpp"
#include "hatebench/tensor.hpp"
