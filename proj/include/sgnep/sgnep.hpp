#pragma once

#include "sgnep/algorithms.hpp"
#include "sgnep/experiment.hpp"
#include "sgnep/game.hpp"
#include "sgnep/games.hpp"
#include "sgnep/graph.hpp"
#include "sgnep/instance_io.hpp"
#include "sgnep/metrics.hpp"
#include "sgnep/operators.hpp"
#include "sgnep/sampling.hpp"
#include "sgnep/stochastic.hpp"
#include "sgnep/types.hpp"
