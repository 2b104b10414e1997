#pragma once

// Umbrella header for the persistent-monitoring library.

#include "vpm/analysis.hpp"
#include "vpm/autodiff.hpp"
#include "vpm/checkpoint.hpp"
#include "vpm/compare.hpp"
#include "vpm/config.hpp"
#include "vpm/episode.hpp"
#include "vpm/grid.hpp"
#include "vpm/image.hpp"
#include "vpm/nn.hpp"
#include "vpm/observation.hpp"
#include "vpm/pathfind.hpp"
#include "vpm/planners.hpp"
#include "vpm/ppo.hpp"
#include "vpm/rng.hpp"
#include "vpm/trajectory.hpp"
#include "vpm/visibility.hpp"
#include "vpm/world.hpp"
