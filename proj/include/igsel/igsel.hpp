#pragma once

#include "igsel/attribution.hpp"
#include "igsel/config.hpp"
#include "igsel/csv.hpp"
#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/experiments.hpp"
#include "igsel/gp.hpp"
#include "igsel/lasso.hpp"
#include "igsel/nn.hpp"
#include "igsel/parallel.hpp"
#include "igsel/quadrature.hpp"
#include "igsel/random.hpp"
#include "igsel/report.hpp"
#include "igsel/selection.hpp"
#include "igsel/svg.hpp"
#include "igsel/tuning.hpp"
