#pragma once

#include "demsm/bounds.hpp"
#include "demsm/errors.hpp"
#include "demsm/estimate.hpp"
#include "demsm/io.hpp"
#include "demsm/oracle.hpp"
#include "demsm/sensitivity.hpp"
#include "demsm/weighted_distribution.hpp"
