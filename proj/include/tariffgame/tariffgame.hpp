#pragma once

#include "tariffgame/config.hpp"
#include "tariffgame/demand.hpp"
#include "tariffgame/equilibrium.hpp"
#include "tariffgame/errors.hpp"
#include "tariffgame/gains.hpp"
#include "tariffgame/model_io.hpp"
#include "tariffgame/montecarlo.hpp"
#include "tariffgame/nash.hpp"
#include "tariffgame/version.hpp"
