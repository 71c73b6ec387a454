#pragma once

#include "fracvar/conditions.hpp"
#include "fracvar/convex.hpp"
#include "fracvar/errors.hpp"
#include "fracvar/expr.hpp"
#include "fracvar/frac_ops.hpp"
#include "fracvar/functional.hpp"
#include "fracvar/gamma.hpp"
#include "fracvar/grid.hpp"
#include "fracvar/io.hpp"
#include "fracvar/model.hpp"
#include "fracvar/solver.hpp"
