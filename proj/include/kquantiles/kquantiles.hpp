#pragma once

#include "kquantiles/ald.hpp"
#include "kquantiles/discrepancy.hpp"
#include "kquantiles/estimator.hpp"
#include "kquantiles/kmeans.hpp"
#include "kquantiles/metrics.hpp"
#include "kquantiles/objective.hpp"
#include "kquantiles/types.hpp"
