#pragma once

#include "redep/decode_eval.hpp"
#include "redep/dynamic_oracle.hpp"
#include "redep/error_analysis.hpp"
#include "redep/features.hpp"
#include "redep/model.hpp"
#include "redep/parallel.hpp"
#include "redep/run_config.hpp"
#include "redep/synthetic.hpp"
#include "redep/training.hpp"
#include "redep/transitions.hpp"
#include "redep/treebank.hpp"
