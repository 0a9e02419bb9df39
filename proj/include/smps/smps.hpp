#pragma once

// Umbrella header.

#include "smps/errors.hpp"
#include "smps/tensor.hpp"
#include "smps/operators.hpp"
#include "smps/mps.hpp"
#include "smps/mpo.hpp"
#include "smps/fit.hpp"
#include "smps/exact.hpp"
#include "smps/lanczos.hpp"
#include "smps/dmrg.hpp"
#include "smps/tebd.hpp"
#include "smps/rng.hpp"
#include "smps/observables.hpp"
#include "smps/trajectory.hpp"
#include "smps/measurement.hpp"
#include "smps/sse.hpp"
#include "smps/lindblad.hpp"
#include "smps/snapshot.hpp"
#include "smps/scenario.hpp"
