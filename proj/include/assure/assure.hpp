#pragma once

// Umbrella header: the whole runtime-assurance stack.

#include "assure/assurance.hpp"
#include "assure/cpt.hpp"
#include "assure/dbn.hpp"
#include "assure/eval.hpp"
#include "assure/forest.hpp"
#include "assure/model_io.hpp"
#include "assure/ood.hpp"
#include "assure/rng.hpp"
#include "assure/sim.hpp"
#include "assure/statespace.hpp"
#include "assure/trajectory.hpp"
#include "assure/version.hpp"
