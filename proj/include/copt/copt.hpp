#pragma once

// Convenience include for the whole library.

#include "copt/config.hpp"
#include "copt/dataset.hpp"
#include "copt/harness.hpp"
#include "copt/losses.hpp"
#include "copt/network.hpp"
#include "copt/parallel.hpp"
#include "copt/rng.hpp"
#include "copt/spectral.hpp"
#include "copt/subproblem.hpp"
#include "copt/trainer.hpp"
