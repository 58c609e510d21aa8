#pragma once

#include "fdia/error.hpp"
#include "fdia/random.hpp"
#include "fdia/grid.hpp"
#include "fdia/estimation.hpp"
#include "fdia/constraints.hpp"
#include "fdia/mlp.hpp"
#include "fdia/padding.hpp"
#include "fdia/attack.hpp"
#include "fdia/defense.hpp"
#include "fdia/dataset.hpp"
#include "fdia/experiment.hpp"
#include "fdia/profile.hpp"
