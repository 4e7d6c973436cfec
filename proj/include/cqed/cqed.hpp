#pragma once

// Umbrella header for the whole toolkit.

#include "cqed/errors.hpp"
#include "cqed/units.hpp"
#include "cqed/search.hpp"
#include "cqed/core.hpp"
#include "cqed/trace.hpp"
#include "cqed/bloch.hpp"
#include "cqed/least_squares.hpp"
#include "cqed/fit_models.hpp"
#include "cqed/synth.hpp"
#include "cqed/contour.hpp"
#include "cqed/design.hpp"
#include "cqed/io.hpp"
#include "cqed/pipeline.hpp"
#include "cqed/plotdata.hpp"
