#pragma once

// Umbrella header for the library (the CLI layer lives in gmmdiff/cli/).

#include "gmmdiff/bounds.hpp"
#include "gmmdiff/error.hpp"
#include "gmmdiff/forward.hpp"
#include "gmmdiff/gmm.hpp"
#include "gmmdiff/io.hpp"
#include "gmmdiff/metrics.hpp"
#include "gmmdiff/random.hpp"
#include "gmmdiff/sample_batch.hpp"
#include "gmmdiff/schedule.hpp"
#include "gmmdiff/score_model.hpp"
#include "gmmdiff/solvers.hpp"
#include "gmmdiff/suite.hpp"
#include "gmmdiff/sweep.hpp"
#include "gmmdiff/verify.hpp"
