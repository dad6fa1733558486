#pragma once

#include "linopen/control_affine.hpp"
#include "linopen/dual.hpp"
#include "linopen/errors.hpp"
#include "linopen/expr.hpp"
#include "linopen/hautus.hpp"
#include "linopen/numlin.hpp"
#include "linopen/openness.hpp"
#include "linopen/report.hpp"
#include "linopen/sampling.hpp"
#include "linopen/sim.hpp"
#include "linopen/synthesis.hpp"
#include "linopen/system.hpp"
#include "linopen/verdict.hpp"
