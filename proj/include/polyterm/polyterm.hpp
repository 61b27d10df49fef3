#pragma once

#include "polyterm/errors.hpp"
#include "polyterm/rational.hpp"
#include "polyterm/polynomial.hpp"
#include "polyterm/model.hpp"
#include "polyterm/model_io.hpp"
#include "polyterm/matrix_exp.hpp"
#include "polyterm/term_structure.hpp"
#include "polyterm/vol_engine.hpp"
#include "polyterm/rng.hpp"
#include "polyterm/parallel.hpp"
#include "polyterm/simulation.hpp"
#include "polyterm/stationary.hpp"
#include "polyterm/hjm.hpp"
