#pragma once

#include "qpbif/coeffs.hpp"
#include "qpbif/field.hpp"
#include "qpbif/integrate.hpp"
#include "qpbif/branches.hpp"
#include "qpbif/lyapunov.hpp"
#include "qpbif/bifurcate.hpp"
#include "qpbif/popmodel.hpp"
