#pragma once

#include "lqmfg/error.hpp"
#include "lqmfg/grid.hpp"
#include "lqmfg/linalg.hpp"
#include "lqmfg/meanfield.hpp"
#include "lqmfg/model.hpp"
#include "lqmfg/noise.hpp"
#include "lqmfg/ode.hpp"
#include "lqmfg/parallel.hpp"
#include "lqmfg/population.hpp"
#include "lqmfg/presets.hpp"
#include "lqmfg/riccati.hpp"
#include "lqmfg/stats.hpp"
#include "lqmfg/version.hpp"
