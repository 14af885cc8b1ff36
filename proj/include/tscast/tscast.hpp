#pragma once

// Umbrella header.

#include "tscast/activations.hpp"
#include "tscast/cells.hpp"
#include "tscast/checkpoint.hpp"
#include "tscast/dataprep.hpp"
#include "tscast/errors.hpp"
#include "tscast/experiment.hpp"
#include "tscast/gradcheck.hpp"
#include "tscast/mannwhitney.hpp"
#include "tscast/matrix.hpp"
#include "tscast/metrics.hpp"
#include "tscast/rng.hpp"
#include "tscast/training.hpp"
