#pragma once

#include "hdpbsid/error.hpp"
#include "hdpbsid/hermite_basis.hpp"
#include "hdpbsid/operators.hpp"
#include "hdpbsid/lti_sim.hpp"
#include "hdpbsid/identification.hpp"
#include "hdpbsid/analysis.hpp"
#include "hdpbsid/experiment.hpp"
#include "hdpbsid/io.hpp"
