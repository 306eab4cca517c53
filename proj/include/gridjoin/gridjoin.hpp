#pragma once

#include "gridjoin/error.hpp"
#include "gridjoin/full_gn.hpp"
#include "gridjoin/grid.hpp"
#include "gridjoin/grid_io.hpp"
#include "gridjoin/join.hpp"
#include "gridjoin/metrics.hpp"
#include "gridjoin/rng.hpp"
#include "gridjoin/se2.hpp"
#include "gridjoin/simulate.hpp"
#include "gridjoin/submap.hpp"
#include "gridjoin/world.hpp"
