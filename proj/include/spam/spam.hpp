#pragma once

// Sparse additive models: penalized backfitting with pluggable univariate
// smoothers, sparse logistic backfitting, parametric lasso solvers,
// regularization paths with Cp/GCV tuning, and data utilities.

#include "spam/backfit.hpp"
#include "spam/dataset.hpp"
#include "spam/errors.hpp"
#include "spam/lasso.hpp"
#include "spam/logistic.hpp"
#include "spam/model_json.hpp"
#include "spam/model_selection.hpp"
#include "spam/rng.hpp"
#include "spam/smoothers.hpp"
#include "spam/synthetic.hpp"
