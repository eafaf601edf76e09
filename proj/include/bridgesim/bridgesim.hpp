#pragma once

#include "bridgesim/error.hpp"
#include "bridgesim/noise.hpp"
#include "bridgesim/model.hpp"
#include "bridgesim/observation.hpp"
#include "bridgesim/grid.hpp"
#include "bridgesim/path.hpp"
#include "bridgesim/simulate.hpp"
#include "bridgesim/bridge.hpp"
#include "bridgesim/weights.hpp"
#include "bridgesim/estimator.hpp"
#include "bridgesim/oracle.hpp"
#include "bridgesim/models.hpp"
