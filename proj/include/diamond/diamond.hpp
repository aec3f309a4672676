// Umbrella header.
#pragma once

#include "diamond/dist.hpp"
#include "diamond/equilibrium.hpp"
#include "diamond/json_io.hpp"
#include "diamond/market.hpp"
#include "diamond/parallel.hpp"
#include "diamond/persuade.hpp"
#include "diamond/random.hpp"
#include "diamond/repro.hpp"
#include "diamond/search.hpp"
#include "diamond/strategy.hpp"
