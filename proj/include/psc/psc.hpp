#pragma once

// Principal subspace classifier: umbrella header.

#include "psc/geometry.hpp"
#include "psc/rng.hpp"
#include "psc/model.hpp"
#include "psc/priors.hpp"
#include "psc/sampler.hpp"
#include "psc/estimator.hpp"
#include "psc/classify.hpp"
#include "psc/baselines.hpp"
#include "psc/data.hpp"
