#pragma once

#include "otmatch/baselines.hpp"
#include "otmatch/diagnostics.hpp"
#include "otmatch/divergences.hpp"
#include "otmatch/error.hpp"
#include "otmatch/exact_ot.hpp"
#include "otmatch/inference.hpp"
#include "otmatch/io.hpp"
#include "otmatch/lalonde.hpp"
#include "otmatch/log.hpp"
#include "otmatch/matching.hpp"
#include "otmatch/measures.hpp"
#include "otmatch/parallel.hpp"
#include "otmatch/rng.hpp"
#include "otmatch/simulation.hpp"
#include "otmatch/solver.hpp"
#include "otmatch/special_functions.hpp"
