#pragma once

#include "divswitch/error.hpp"
#include "divswitch/table.hpp"
#include "divswitch/quadrature.hpp"
#include "divswitch/model.hpp"
#include "divswitch/grid.hpp"
#include "divswitch/operators.hpp"
#include "divswitch/coeff_cache.hpp"
#include "divswitch/solver.hpp"
#include "divswitch/oned.hpp"
#include "divswitch/montecarlo.hpp"
#include "divswitch/config.hpp"
#include "divswitch/io.hpp"
